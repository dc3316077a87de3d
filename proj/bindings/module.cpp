// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0
//
// Python surface of the core operations: matrices and seeded streams,
// low-rank adapters, projection-noise measurements, clipped-noisy batch
// gradients, random-matrix statistics, and the attack-evaluation helpers.
// Experiment orchestration stays in the CLI.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <span>
#include <vector>

#include "loranoise/adapter.hpp"
#include "loranoise/dp.hpp"
#include "loranoise/matrix.hpp"
#include "loranoise/mia.hpp"
#include "loranoise/model.hpp"
#include "loranoise/noise.hpp"
#include "loranoise/randstats.hpp"
#include "loranoise/rng.hpp"
#include "loranoise/stats.hpp"

namespace py = pybind11;
using namespace loranoise;

namespace {

Matrix matrix_from_buffer(const py::buffer& buffer) {
  const py::buffer_info info = buffer.request();
  if (info.format != py::format_descriptor<double>::format()) {
    throw py::type_error("expected a float64 buffer");
  }
  if (info.ndim != 2) throw py::type_error("expected a 2-D buffer");
  const auto rows = static_cast<std::size_t>(info.shape[0]);
  const auto cols = static_cast<std::size_t>(info.shape[1]);
  std::vector<double> data(rows * cols);
  const auto row_stride = static_cast<std::size_t>(info.strides[0]);
  const auto col_stride = static_cast<std::size_t>(info.strides[1]);
  const char* base = static_cast<const char*>(info.ptr);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      double value;
      std::memcpy(&value, base + i * row_stride + j * col_stride, sizeof(double));
      data[i * cols + j] = value;
    }
  }
  return Matrix(rows, cols, std::move(data));
}

std::span<const Matrix> as_span(const std::vector<Matrix>& items) { return items; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Low-rank fine-tuning noise toolkit (C++ core)";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

  // ---- matrix -----------------------------------------------------------
  py::class_<Matrix>(m, "Matrix", py::buffer_protocol())
      .def(py::init<std::size_t, std::size_t>(), py::arg("rows"), py::arg("cols"))
      .def(py::init(&matrix_from_buffer), py::arg("array"))
      .def_buffer([](Matrix& mat) {
        return py::buffer_info(mat.data().data(), sizeof(double),
                               py::format_descriptor<double>::format(), 2,
                               {mat.rows(), mat.cols()},
                               {sizeof(double) * mat.cols(), sizeof(double)});
      })
      .def_static("identity", &Matrix::identity, py::arg("n"))
      .def_property_readonly("rows", &Matrix::rows)
      .def_property_readonly("cols", &Matrix::cols)
      .def("__getitem__",
           [](const Matrix& mat, std::pair<std::size_t, std::size_t> ij) {
             if (ij.first >= mat.rows() || ij.second >= mat.cols()) {
               throw py::index_error("matrix index out of range");
             }
             return mat(ij.first, ij.second);
           })
      .def("__eq__", [](const Matrix& a, const Matrix& b) { return a == b; },
           py::is_operator())
      .def("__add__", [](const Matrix& a, const Matrix& b) { return a + b; })
      .def("__sub__", [](const Matrix& a, const Matrix& b) { return a - b; })
      .def("__mul__", [](const Matrix& a, double s) { return s * a; })
      .def("__rmul__", [](const Matrix& a, double s) { return s * a; })
      .def("__repr__", [](const Matrix& mat) {
        return "Matrix(" + std::to_string(mat.rows()) + "x" + std::to_string(mat.cols()) + ")";
      });

  m.def("matmul", &matmul, py::arg("a"), py::arg("b"));
  m.def("transpose", &transpose, py::arg("m"));
  m.def("frobenius_norm", &frobenius_norm, py::arg("m"));
  m.def("frobenius_inner", &frobenius_inner, py::arg("a"), py::arg("b"));
  m.def("row_l2_norms", &row_l2_norms, py::arg("m"));
  m.def("max_abs", &max_abs, py::arg("m"));
  m.def("max_abs_diff", &max_abs_diff, py::arg("a"), py::arg("b"));
  m.def("pairwise_matrix_mean",
        [](const std::vector<Matrix>& items) { return pairwise_matrix_mean(as_span(items)); },
        py::arg("items"));

  // ---- rng ----------------------------------------------------------------
  py::class_<RngStream>(m, "RngStream")
      .def(py::init<std::uint64_t, std::uint64_t>(), py::arg("seed"), py::arg("stream_id") = 0)
      .def_property_readonly("seed", &RngStream::seed)
      .def_property_readonly("stream_id", &RngStream::stream_id)
      .def("substream", &RngStream::substream, py::arg("child"))
      .def("next_u64", &RngStream::next_u64)
      .def("next_uniform", &RngStream::next_uniform)
      .def("next_normal", &RngStream::next_normal);

  m.def("sample_gaussian_matrix", &sample_gaussian_matrix, py::arg("rng"), py::arg("rows"),
        py::arg("cols"), py::arg("std_dev"));

  // ---- adapter --------------------------------------------------------------
  py::class_<AdapterLayer>(m, "AdapterLayer")
      .def(py::init<Matrix, RngStream, std::size_t, bool, double>(), py::arg("w0"),
           py::arg("rng"), py::arg("rank"), py::arg("frozen_a") = false, py::arg("eta") = 1e-2)
      .def_property_readonly("rank", &AdapterLayer::rank)
      .def_property_readonly("frozen_a", &AdapterLayer::frozen_a)
      .def_property_readonly("eta", &AdapterLayer::eta)
      .def("pretrained", &AdapterLayer::pretrained, py::return_value_policy::copy)
      .def("a", &AdapterLayer::a, py::return_value_policy::copy)
      .def("b", &AdapterLayer::b, py::return_value_policy::copy)
      .def("forward", &AdapterLayer::forward, py::arg("x"))
      .def("sgd_step", &AdapterLayer::sgd_step, py::arg("grad_w"))
      .def("effective_weight", &AdapterLayer::effective_weight);

  m.def("init_adapter", &init_adapter, py::arg("rng"), py::arg("n"), py::arg("m"),
        py::arg("rank"), py::arg("frozen_a") = false, py::arg("eta") = 1e-2);
  m.def("projected_update_reference",
        [](const Matrix& w0, const std::vector<Matrix>& grads, const Matrix& a0, double eta) {
          return projected_update_reference(w0, as_span(grads), a0, eta);
        },
        py::arg("w0"), py::arg("grads"), py::arg("a0"), py::arg("eta"));

  // ---- noise ------------------------------------------------------------------
  py::class_<NoiseStats>(m, "NoiseStats")
      .def_readonly("element_count", &NoiseStats::element_count)
      .def_readonly("trials", &NoiseStats::trials)
      .def_readonly("empirical_mean", &NoiseStats::empirical_mean)
      .def_readonly("empirical_variance", &NoiseStats::empirical_variance)
      .def_readonly("exact_variance", &NoiseStats::exact_variance)
      .def_readonly("z_score_of_mean", &NoiseStats::z_score_of_mean);

  m.def("noise_term", &noise_term, py::arg("grad"), py::arg("a0"));
  m.def("row_noise_stats",
        [](const std::vector<double>& q, std::size_t r, std::size_t trials, RngStream rng,
           std::size_t threads) { return row_noise_stats(q, r, trials, rng, threads); },
        py::arg("q"), py::arg("r"), py::arg("trials"), py::arg("rng"), py::arg("threads") = 1);

  // ---- random-matrix statistics ----------------------------------------------
  py::class_<CrossProductStats>(m, "CrossProductStats")
      .def_readonly("trials", &CrossProductStats::trials)
      .def_readonly("mean", &CrossProductStats::mean)
      .def_readonly("variance", &CrossProductStats::variance);

  py::class_<GramElementStats>(m, "GramElementStats")
      .def_readonly("r", &GramElementStats::r)
      .def_readonly("trials", &GramElementStats::trials)
      .def_readonly("diag_mean", &GramElementStats::diag_mean)
      .def_readonly("diag_var", &GramElementStats::diag_var)
      .def_readonly("offdiag_mean", &GramElementStats::offdiag_mean)
      .def_readonly("offdiag_var", &GramElementStats::offdiag_var);

  py::class_<DistanceReport>(m, "DistanceReport")
      .def_readonly("m", &DistanceReport::m)
      .def_readonly("r", &DistanceReport::r)
      .def_readonly("sample_count", &DistanceReport::sample_count)
      .def_readonly("ks_statistic", &DistanceReport::ks_statistic)
      .def_readonly("tv_binned", &DistanceReport::tv_binned)
      .def_readonly("bin_count", &DistanceReport::bin_count)
      .def_readonly("target_sigma", &DistanceReport::target_sigma);

  m.def("chi_squared_raw_moment", &chi_squared_raw_moment, py::arg("k"), py::arg("order"));
  m.def("sample_chi_squared", &sample_chi_squared, py::arg("rng"), py::arg("k"), py::arg("n"));
  m.def("sample_variance_gamma_sym", &sample_variance_gamma_sym, py::arg("rng"), py::arg("k"),
        py::arg("n"));
  m.def("cross_product_stats", &cross_product_stats, py::arg("rng"), py::arg("trials"));
  m.def("gram_element_stats", &gram_element_stats, py::arg("rng"), py::arg("m"), py::arg("r"),
        py::arg("trials"), py::arg("threads") = 1);
  m.def("lyapounov_l3",
        [](const std::vector<double>& q, std::size_t r) { return lyapounov_l3(q, r); },
        py::arg("q"), py::arg("r"));
  m.def("sample_projection_noise",
        [](const std::vector<double>& q, std::size_t r, std::size_t trials, RngStream rng,
           std::size_t threads) { return sample_projection_noise(q, r, trials, rng, threads); },
        py::arg("q"), py::arg("r"), py::arg("trials"), py::arg("rng"), py::arg("threads") = 1);
  m.def("distance_to_gaussian",
        [](const std::vector<double>& q, std::size_t r, std::size_t trials, std::size_t bins,
           RngStream rng, std::size_t threads) {
          return distance_to_gaussian(q, r, trials, bins, rng, threads);
        },
        py::arg("q"), py::arg("r"), py::arg("trials"), py::arg("bins"), py::arg("rng"),
        py::arg("threads") = 1);

  // ---- scalar statistics -------------------------------------------------------
  py::class_<Moments>(m, "Moments")
      .def_readonly("count", &Moments::count)
      .def_readonly("mean", &Moments::mean)
      .def_readonly("variance", &Moments::variance);

  py::class_<LinearFit>(m, "LinearFit")
      .def_readonly("slope", &LinearFit::slope)
      .def_readonly("intercept", &LinearFit::intercept)
      .def_readonly("r_squared", &LinearFit::r_squared)
      .def_readonly("slope_stderr", &LinearFit::slope_stderr);

  m.def("pairwise_sum",
        [](const std::vector<double>& values) { return pairwise_sum(values); },
        py::arg("values"));
  m.def("mean", [](const std::vector<double>& values) { return mean(values); },
        py::arg("values"));
  m.def("compute_moments",
        [](const std::vector<double>& values) { return compute_moments(values); },
        py::arg("values"));
  m.def("normal_cdf", &normal_cdf, py::arg("x"));
  m.def("normal_pdf", &normal_pdf, py::arg("x"));
  m.def("normal_quantile", &normal_quantile, py::arg("p"));
  m.def("ks_vs_normal", &ks_vs_normal, py::arg("samples"), py::arg("sigma"));
  m.def("ks_two_sample", &ks_two_sample, py::arg("a"), py::arg("b"));
  m.def("binned_tv_vs_normal", &binned_tv_vs_normal, py::arg("samples"), py::arg("sigma"),
        py::arg("bins"));
  m.def("dkw_bound", &dkw_bound, py::arg("n"), py::arg("alpha"));
  m.def("linear_fit",
        [](const std::vector<double>& x, const std::vector<double>& y) {
          return linear_fit(x, y);
        },
        py::arg("x"), py::arg("y"));
  m.def("spearman",
        [](const std::vector<double>& x, const std::vector<double>& y) {
          return spearman(x, y);
        },
        py::arg("x"), py::arg("y"));
  m.def("median", &median, py::arg("values"));

  // ---- clipped-noisy gradients ---------------------------------------------------
  py::class_<DpConfig>(m, "DpConfig")
      .def(py::init([](double clip_threshold, double noise_scale, std::size_t batch_size) {
             return DpConfig{clip_threshold, noise_scale, batch_size};
           }),
           py::arg("clip_threshold") = 1.0, py::arg("noise_scale") = 1.0,
           py::arg("batch_size") = 1)
      .def_readwrite("clip_threshold", &DpConfig::clip_threshold)
      .def_readwrite("noise_scale", &DpConfig::noise_scale)
      .def_readwrite("batch_size", &DpConfig::batch_size)
      .def("noise_std", &DpConfig::noise_std);

  py::class_<NoiseProfile>(m, "NoiseProfile")
      .def_readonly("r", &NoiseProfile::r)
      .def_readonly("trials", &NoiseProfile::trials)
      .def_readonly("row_grad_norms", &NoiseProfile::row_grad_norms)
      .def_readonly("lora_std", &NoiseProfile::lora_std)
      .def_readonly("lora_theory", &NoiseProfile::lora_theory)
      .def_readonly("dpsgd_std", &NoiseProfile::dpsgd_std)
      .def_readonly("dpsgd_theory", &NoiseProfile::dpsgd_theory);

  m.def("clip_gradient", &clip_gradient, py::arg("g"), py::arg("c"));
  m.def("dpsgd_batch_gradient",
        [](const std::vector<Matrix>& grads, const DpConfig& cfg, RngStream rng) {
          return dpsgd_batch_gradient(as_span(grads), cfg, rng);
        },
        py::arg("per_sample_grads"), py::arg("cfg"), py::arg("rng"));
  m.def("lora_noisy_batch_gradient",
        [](const std::vector<Matrix>& grads, const Matrix& a0) {
          return lora_noisy_batch_gradient(as_span(grads), a0);
        },
        py::arg("per_sample_grads"), py::arg("a0"));
  m.def("compare_noise_profiles", &compare_noise_profiles, py::arg("grad"), py::arg("r"),
        py::arg("cfg"), py::arg("trials"), py::arg("rng"), py::arg("threads") = 1);

  // ---- toy model -------------------------------------------------------------------
  py::enum_<Split>(m, "Split")
      .value("train", Split::train)
      .value("validation", Split::validation)
      .value("auxiliary", Split::auxiliary);

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("features", &Dataset::features)
      .def_readonly("labels", &Dataset::labels)
      .def_readonly("sample_ids", &Dataset::sample_ids)
      .def_readonly("split", &Dataset::split)
      .def("size", &Dataset::size)
      .def("dim", &Dataset::dim);

  py::class_<SplitSet>(m, "SplitSet")
      .def_readonly("train", &SplitSet::train)
      .def_readonly("validation", &SplitSet::validation)
      .def_readonly("auxiliary", &SplitSet::auxiliary);

  m.def("synth_dataset", &synth_dataset, py::arg("rng"), py::arg("n_per_split"), py::arg("dim"),
        py::arg("classes"), py::arg("separation") = 3.0);

  py::class_<ToyModel>(m, "ToyModel")
      .def_static("create",
                  [](RngStream rng, const std::vector<std::size_t>& layer_dims,
                     const std::vector<bool>& adapter_mask) {
                    return ToyModel::create(rng, ToyModelConfig{layer_dims, adapter_mask});
                  },
                  py::arg("rng"), py::arg("layer_dims"),
                  py::arg("adapter_mask") = std::vector<bool>{})
      .def("layer_count", &ToyModel::layer_count)
      .def("layer_dims", &ToyModel::layer_dims)
      .def("weight", &ToyModel::weight, py::arg("layer"), py::return_value_policy::copy)
      .def("set_weight", &ToyModel::set_weight, py::arg("layer"), py::arg("w"))
      .def("adapter_layers", &ToyModel::adapter_layers)
      .def("set_adapter_mask", &ToyModel::set_adapter_mask, py::arg("mask"))
      .def("logits", &ToyModel::logits, py::arg("features"))
      .def("per_sample_losses", &ToyModel::per_sample_losses, py::arg("data"))
      .def("mean_loss", &ToyModel::mean_loss, py::arg("data"))
      .def("accuracy", &ToyModel::accuracy, py::arg("data"))
      .def("batch_gradients",
           [](const ToyModel& model, const Dataset& data) { return model.batch_gradients(data); },
           py::arg("data"));

  m.def("noise_measure", &noise_measure, py::arg("network"), py::arg("batch"), py::arg("eta"),
        py::arg("r"), py::arg("rng"));
  m.def("layer_gradient_norms",
        [](const ToyModel& network, const Dataset& batch) {
          return layer_gradient_norms(network, batch);
        },
        py::arg("network"), py::arg("batch"));

  py::class_<TrainMethod>(m, "TrainMethod")
      .def_static("full", &TrainMethod::full)
      .def_static("lora", &TrainMethod::lora, py::arg("rank"))
      .def_static("lora_frozen", &TrainMethod::lora_frozen, py::arg("rank"))
      .def_static("dpsgd", &TrainMethod::dpsgd, py::arg("clip"), py::arg("noise_scale"))
      .def_static("masked_sgd", &TrainMethod::masked_sgd)
      .def("name", &TrainMethod::name);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("model", &TrainResult::model)
      .def_readonly("epoch_losses", &TrainResult::epoch_losses);

  m.def("train", &train, py::arg("model"), py::arg("data"), py::arg("method"), py::arg("epochs"),
        py::arg("eta"), py::arg("rng"), py::arg("batch_size") = 50);

  // ---- attack evaluation ---------------------------------------------------------
  py::class_<MiaMetrics>(m, "MiaMetrics")
      .def_readonly("auc", &MiaMetrics::auc)
      .def_readonly("alphas", &MiaMetrics::alphas)
      .def_readonly("gamma", &MiaMetrics::gamma)
      .def_readonly("tpr", &MiaMetrics::tpr)
      .def_readonly("achieved_fpr", &MiaMetrics::achieved_fpr);

  m.def("membership_score", &membership_score, py::arg("model"), py::arg("ref_model"),
        py::arg("data"), py::arg("row"));
  m.def("membership_scores", &membership_scores, py::arg("model"), py::arg("ref_model"),
        py::arg("data"));
  m.def("calibrate_threshold",
        [](const std::vector<double>& nonmember_scores, double alpha) {
          return calibrate_threshold(nonmember_scores, alpha);
        },
        py::arg("nonmember_scores"), py::arg("alpha"));
  m.def("mia_evaluate",
        [](const std::vector<double>& member_scores, const std::vector<double>& nonmember_scores,
           const std::vector<double>& alphas) {
          return mia_evaluate(member_scores, nonmember_scores, alphas);
        },
        py::arg("member_scores"), py::arg("nonmember_scores"), py::arg("alphas"));
  m.def("per_sample_grad_norms", &per_sample_grad_norms, py::arg("model"), py::arg("data"));
}
