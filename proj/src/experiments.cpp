// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0

#include "loranoise/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include "loranoise/adapter.hpp"
#include "loranoise/dp.hpp"
#include "loranoise/matrix.hpp"
#include "loranoise/mia.hpp"
#include "loranoise/model.hpp"
#include "loranoise/noise.hpp"
#include "loranoise/parallel.hpp"
#include "loranoise/randstats.hpp"
#include "loranoise/rng.hpp"
#include "loranoise/stats.hpp"
#include "loranoise/text.hpp"

namespace loranoise {

namespace {

constexpr std::string_view kArtifactVersion = "0.1.0";

const std::map<Command, std::string_view>& command_table() {
  static const std::map<Command, std::string_view> table = {
      {Command::verify_identity, "verify-identity"},
      {Command::lemma1, "lemma1"},
      {Command::gram_stats, "gram-stats"},
      {Command::tv_scaling, "tv-scaling"},
      {Command::dp_compare, "dp-compare"},
      {Command::noise_profile, "noise-profile"},
      {Command::mia, "mia"},
      {Command::ablate_r, "ablate-r"},
      {Command::moments, "moments"},
  };
  return table;
}

using Kind = ParamSpec::Kind;

std::vector<ParamSpec> study_params() {
  return {
      {"n_per_split", Kind::u64, 200},
      // Light pretraining plus small fine-tuning rates keep epoch 40 in the
      // underfitting phase, where capacity buys both utility and leak:
      // validation loss falls and attack AUC rises with adapter rank, and
      // full fine-tuning sits at the high end of both.
      {"dim", Kind::u64, 32},
      {"classes", Kind::u64, 4},
      {"hidden", Kind::u64, 64},
      {"separation", Kind::f64, 1.0},
      {"pretrain_epochs", Kind::u64, 2},
      {"pretrain_eta", Kind::f64, 0.1},
      {"epochs", Kind::u64, 40},
      {"batch_size", Kind::u64, 50},
      {"eta_full", Kind::f64, 0.02},
      {"eta_lora", Kind::f64, 0.05},
      {"eta_dpsgd", Kind::f64, 0.05},
      {"seeds", Kind::u64, 10},
  };
}

std::vector<ParamSpec> build_schema(Command command) {
  switch (command) {
    case Command::verify_identity:
      return {
          {"n", Kind::u64, 128},         {"m", Kind::u64, 96},
          {"r", Kind::u64, 8},           {"steps", Kind::u64, 50},
          {"k", Kind::u64, 64},          {"data_scale", Kind::f64, 0.05},
          {"eta", Kind::f64, 0.001},     {"tolerance", Kind::f64, 1e-10},
      };
    case Command::lemma1:
      return {
          {"m", Kind::u64, 256},
          {"r", Kind::u64, nullptr},  // required
          {"trials", Kind::u64, 100000},
          {"q_spec", Kind::str, "ones"},
      };
    case Command::gram_stats:
      return {
          {"m", Kind::u64, 2},
          {"r", Kind::u64, 8},
          {"trials", Kind::u64, 1000000},
      };
    case Command::tv_scaling:
      return {
          {"m_grid", Kind::u64_list, Json::array({64, 128, 256, 512})},
          {"r_grid", Kind::u64_list, Json::array({4, 8, 16, 32})},
          {"trials", Kind::u64, 20000},
          {"seeds", Kind::u64, 5},
          {"bins", Kind::u64, 64},
      };
    case Command::dp_compare:
      return {
          {"n", Kind::u64, 64},         {"m", Kind::u64, 512},
          {"r", Kind::u64, 8},          {"clip", Kind::f64, 1.0},
          {"noise_scale", Kind::f64, 1.0}, {"batch_size", Kind::u64, 50},
          {"trials", Kind::u64, 10000}, {"row_span", Kind::f64, 10.0},
      };
    case Command::noise_profile:
      return {
          // Fan-ins increase with depth so the per-layer gradient norms are
          // well separated and the sqrt(m+1) noise factor reinforces their
          // ordering rather than fighting it.
          {"layer_dims", Kind::u64_list, Json::array({32, 64, 128, 32})},
          {"r_grid", Kind::u64_list, Json::array({2, 4, 8, 16, 32})},
          {"seeds", Kind::u64, 20},
          {"eta", Kind::f64, 0.1},
          {"batch_size", Kind::u64, 64},
          {"separation", Kind::f64, 3.0},
      };
    case Command::mia: {
      std::vector<ParamSpec> schema = study_params();
      schema.push_back({"lora_ranks", Kind::u64_list, Json::array({2, 8})});
      schema.push_back({"dpsgd_clip", Kind::f64, 0.0});  // 0 -> calibrate
      schema.push_back({"dpsgd_noise_scale", Kind::f64, 0.0});
      schema.push_back({"dpsgd_noise_ratio", Kind::f64, 0.75});
      return schema;
    }
    case Command::ablate_r: {
      std::vector<ParamSpec> schema = study_params();
      schema.push_back({"r_grid", Kind::u64_list, Json::array({2, 4, 8, 16})});
      return schema;
    }
    case Command::moments:
      return {
          {"k_grid", Kind::u64_list, Json::array({1, 2, 4, 8})},
          {"orders", Kind::u64_list, Json::array({1, 2, 3})},
          {"trials", Kind::u64, 1000000},
      };
  }
  return {};
}

bool kind_matches(const Json& value, Kind kind) {
  switch (kind) {
    case Kind::u64:
      return value.is_number_integer() && value.get<std::int64_t>() >= 0;
    case Kind::f64:
      return value.is_number();
    case Kind::str:
      return value.is_string();
    case Kind::boolean:
      return value.is_boolean();
    case Kind::u64_list: {
      if (!value.is_array() || value.empty()) return false;
      for (const Json& v : value) {
        if (!(v.is_number_integer() && v.get<std::int64_t>() >= 0)) return false;
      }
      return true;
    }
  }
  return false;
}

std::string_view kind_name(Kind kind) {
  switch (kind) {
    case Kind::u64:
      return "non-negative integer";
    case Kind::f64:
      return "number";
    case Kind::str:
      return "string";
    case Kind::boolean:
      return "boolean";
    case Kind::u64_list:
      return "non-empty list of non-negative integers";
  }
  return "?";
}

// ---- typed access into resolved params ----

std::uint64_t p_u64(const Json& params, const std::string& key) {
  return params.at(key).get<std::uint64_t>();
}

double p_f64(const Json& params, const std::string& key) {
  return params.at(key).get<double>();
}

std::string p_str(const Json& params, const std::string& key) {
  return params.at(key).get<std::string>();
}

std::vector<std::size_t> p_u64_list(const Json& params, const std::string& key) {
  std::vector<std::size_t> out;
  for (const Json& v : params.at(key)) out.push_back(v.get<std::size_t>());
  return out;
}

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(message, field);
}

// Value-range checks beyond shape/type, per command.
void validate_values(Command command, const Json& params) {
  auto positive_u64 = [&](const char* key) {
    require(p_u64(params, key) >= 1, std::string("params.") + key,
            std::string(key) + " must be >= 1");
  };
  auto positive_f64 = [&](const char* key) {
    require(p_f64(params, key) > 0.0, std::string("params.") + key,
            std::string(key) + " must be > 0");
  };
  auto nonneg_f64 = [&](const char* key) {
    require(p_f64(params, key) >= 0.0, std::string("params.") + key,
            std::string(key) + " must be >= 0");
  };
  auto study_checks = [&] {
    positive_u64("n_per_split");
    positive_u64("dim");
    require(p_u64(params, "classes") >= 2, "params.classes", "classes must be >= 2");
    positive_u64("hidden");
    positive_u64("pretrain_epochs");
    positive_u64("epochs");
    positive_u64("batch_size");
    positive_u64("seeds");
    nonneg_f64("separation");
    positive_f64("pretrain_eta");
    positive_f64("eta_full");
    positive_f64("eta_lora");
    positive_f64("eta_dpsgd");
  };
  switch (command) {
    case Command::verify_identity: {
      for (const char* key : {"n", "m", "r", "steps", "k"}) positive_u64(key);
      positive_f64("data_scale");
      positive_f64("eta");
      positive_f64("tolerance");
      const std::uint64_t rmax = std::min(p_u64(params, "n"), p_u64(params, "m"));
      require(p_u64(params, "r") <= rmax, "params.r", "r must be <= min(n, m)");
      break;
    }
    case Command::lemma1: {
      positive_u64("m");
      positive_u64("r");
      require(p_u64(params, "trials") >= 2, "params.trials", "trials must be >= 2");
      const std::string q = p_str(params, "q_spec");
      require(q == "ones" || q == "ramp", "params.q_spec", "q_spec must be 'ones' or 'ramp'");
      break;
    }
    case Command::gram_stats:
      require(p_u64(params, "m") >= 2, "params.m", "m must be >= 2");
      positive_u64("r");
      require(p_u64(params, "trials") >= 2, "params.trials", "trials must be >= 2");
      break;
    case Command::tv_scaling: {
      for (const char* key : {"m_grid", "r_grid"}) {
        require(p_u64_list(params, key).size() >= 3, std::string("params.") + key,
                std::string(key) + " needs at least 3 values");
        for (std::size_t v : p_u64_list(params, key)) {
          require(v >= 1, std::string("params.") + key, "grid values must be >= 1");
        }
      }
      require(p_u64(params, "trials") >= 1000, "params.trials", "trials must be >= 1000");
      positive_u64("seeds");
      require(p_u64(params, "bins") >= 16, "params.bins", "bins must be >= 16");
      break;
    }
    case Command::dp_compare:
      for (const char* key : {"n", "m", "r", "batch_size"}) positive_u64(key);
      positive_f64("clip");
      nonneg_f64("noise_scale");
      require(p_u64(params, "trials") >= 1000, "params.trials", "trials must be >= 1000");
      require(p_f64(params, "row_span") >= 1.0, "params.row_span", "row_span must be >= 1");
      break;
    case Command::noise_profile: {
      const std::vector<std::size_t> dims = p_u64_list(params, "layer_dims");
      require(dims.size() >= 2, "params.layer_dims", "layer_dims needs >= 2 entries");
      for (std::size_t d : dims) {
        require(d >= 1, "params.layer_dims", "layer widths must be >= 1");
      }
      require(dims.back() >= 2, "params.layer_dims", "output width (classes) must be >= 2");
      std::size_t rmax = dims[0];
      for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        rmax = std::min(rmax, std::min(dims[l], dims[l + 1]));
      }
      for (std::size_t r : p_u64_list(params, "r_grid")) {
        require(r >= 1 && r <= rmax, "params.r_grid",
                "ranks must lie in [1, min layer dimension]");
      }
      positive_u64("seeds");
      positive_u64("batch_size");
      positive_f64("eta");
      nonneg_f64("separation");
      break;
    }
    case Command::mia: {
      study_checks();
      const std::uint64_t rmax =
          std::min(p_u64(params, "hidden"), p_u64(params, "dim"));
      for (std::size_t r : p_u64_list(params, "lora_ranks")) {
        require(r >= 1 && r <= rmax, "params.lora_ranks",
                "ranks must lie in [1, min(hidden, dim)]");
      }
      nonneg_f64("dpsgd_clip");
      nonneg_f64("dpsgd_noise_scale");
      positive_f64("dpsgd_noise_ratio");
      break;
    }
    case Command::ablate_r: {
      study_checks();
      const std::vector<std::size_t> grid = p_u64_list(params, "r_grid");
      require(grid.size() >= 3, "params.r_grid", "r_grid needs at least 3 values");
      const std::uint64_t rmax =
          std::min(p_u64(params, "hidden"), p_u64(params, "dim"));
      for (std::size_t r : grid) {
        require(r >= 1 && r <= rmax, "params.r_grid",
                "ranks must lie in [1, min(hidden, dim)]");
      }
      break;
    }
    case Command::moments:
      for (std::size_t k : p_u64_list(params, "k_grid")) {
        require(k >= 1, "params.k_grid", "degrees of freedom must be >= 1");
      }
      for (std::size_t o : p_u64_list(params, "orders")) {
        require(o >= 1, "params.orders", "moment orders must be >= 1");
      }
      require(p_u64(params, "trials") >= 1000, "params.trials", "trials must be >= 1000");
      break;
  }
}

// ---- output helpers ----

class OutputWriter {
 public:
  explicit OutputWriter(std::string dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  void write(const std::string& name, const std::string& content) {
    const std::filesystem::path path = std::filesystem::path(dir_) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    if (!out) throw std::runtime_error("short write to " + path.string());
    names_.push_back(name);
  }

  void write_json(const std::string& name, const Json& value) {
    write(name, value.dump(2) + "\n");
  }

  const std::vector<std::string>& names() const { return names_; }

 private:
  std::string dir_;
  std::vector<std::string> names_;
};

class CsvBuilder {
 public:
  explicit CsvBuilder(std::initializer_list<std::string_view> header) {
    append_row(header.begin(), header.end());
  }

  CsvBuilder& cell(std::string value) {
    row_.push_back(std::move(value));
    return *this;
  }
  CsvBuilder& cell(double value) { return cell(double_to_string(value)); }
  CsvBuilder& cell(std::size_t value) { return cell(std::to_string(value)); }

  void end_row() {
    append_row(row_.begin(), row_.end());
    row_.clear();
  }

  const std::string& text() const { return text_; }

 private:
  template <typename It>
  void append_row(It first, It last) {
    bool sep = false;
    for (It it = first; it != last; ++it) {
      if (sep) text_ += ',';
      text_ += *it;
      sep = true;
    }
    text_ += '\n';
  }

  std::string text_;
  std::vector<std::string> row_;
};

std::vector<double> make_q(const std::string& q_spec, std::size_t m) {
  std::vector<double> q(m, 1.0);
  if (q_spec == "ramp") {
    for (std::size_t i = 0; i < m; ++i) {
      q[i] = 1.0 + (m > 1 ? static_cast<double>(i) / static_cast<double>(m - 1) : 0.0);
    }
  }
  return q;
}

StudyConfig make_study_config(const Json& params, std::size_t parallelism) {
  StudyConfig cfg;
  cfg.n_per_split = p_u64(params, "n_per_split");
  cfg.dim = p_u64(params, "dim");
  cfg.classes = p_u64(params, "classes");
  cfg.hidden = p_u64(params, "hidden");
  cfg.separation = p_f64(params, "separation");
  cfg.pretrain_epochs = p_u64(params, "pretrain_epochs");
  cfg.pretrain_eta = p_f64(params, "pretrain_eta");
  cfg.epochs = p_u64(params, "epochs");
  cfg.batch_size = p_u64(params, "batch_size");
  cfg.eta_full = p_f64(params, "eta_full");
  cfg.eta_lora = p_f64(params, "eta_lora");
  cfg.eta_dpsgd = p_f64(params, "eta_dpsgd");
  cfg.threads = parallelism;
  return cfg;
}

Json report_to_json(const MiaReport& report) {
  Json per_seed = Json::array();
  for (const MiaSeedRecord& rec : report.per_seed) {
    per_seed.push_back(Json{{"seed", rec.seed},
                            {"auc", rec.auc},
                            {"tpr10", rec.tpr10},
                            {"tpr1", rec.tpr1},
                            {"val_loss", rec.val_loss},
                            {"gamma10", rec.gamma10},
                            {"gamma1", rec.gamma1}});
  }
  return Json{{"method", report.method},
              {"mean_auc", report.mean_auc},
              {"std_auc", report.std_auc},
              {"mean_tpr10", report.mean_tpr10},
              {"mean_tpr1", report.mean_tpr1},
              {"mean_val_loss", report.mean_val_loss},
              {"std_val_loss", report.std_val_loss},
              {"per_seed", per_seed}};
}

// ---- command runners ----

RunResult run_verify_identity(const ExperimentConfig& config, OutputWriter& out) {
  const Json& p = config.params;
  const std::size_t n = p_u64(p, "n"), m = p_u64(p, "m"), r = p_u64(p, "r");
  const std::size_t steps = p_u64(p, "steps"), k = p_u64(p, "k");
  const double eta = p_f64(p, "eta");
  const double tolerance = p_f64(p, "tolerance");

  RngStream rng(config.seed, 0);
  const LeastSquaresProblem problem =
      LeastSquaresProblem::random(rng.substream(0), n, m, k, p_f64(p, "data_scale"));
  AdapterLayer frozen = init_adapter(rng.substream(1), n, m, r, /*frozen_a=*/true, eta);
  const Matrix w0 = frozen.pretrained();
  const Matrix a0 = frozen.a();

  std::vector<Matrix> grads;
  double max_rel_error = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    grads.push_back(problem.gradient(frozen.effective_weight()));
    frozen.sgd_step(grads.back());
    const Matrix reference = projected_update_reference(w0, grads, a0, eta);
    const double rel =
        frobenius_norm(frozen.effective_weight() - reference) / frobenius_norm(reference);
    max_rel_error = std::max(max_rel_error, rel);
  }
  const bool pass = max_rel_error <= tolerance;

  RunResult result;
  result.summary = Json{{"n", n},
                        {"m", m},
                        {"r", r},
                        {"steps", steps},
                        {"max_rel_error", max_rel_error},
                        {"tolerance", tolerance},
                        {"pass", pass}};
  out.write_json("identity.json", result.summary);
  if (!pass) {
    result.exit_code = 3;
    result.error = "identity check failed: max_rel_error " +
                   double_to_string(max_rel_error) + " > tolerance " +
                   double_to_string(tolerance);
  }
  return result;
}

RunResult run_lemma1(const ExperimentConfig& config, OutputWriter& out) {
  const Json& p = config.params;
  const std::size_t m = p_u64(p, "m"), r = p_u64(p, "r"), trials = p_u64(p, "trials");
  const std::string q_spec = p_str(p, "q_spec");
  const std::vector<double> q = make_q(q_spec, m);

  RngStream rng(config.seed, 0);
  const NoiseStats stats = row_noise_stats(q, r, trials, rng.substream(0), config.parallelism);

  CsvBuilder csv({"m", "r", "trials", "q_spec", "empirical_mean", "empirical_var", "exact_var",
                  "z_mean"});
  csv.cell(m).cell(r).cell(trials).cell(q_spec);
  csv.cell(stats.empirical_mean).cell(stats.empirical_variance).cell(stats.exact_variance);
  csv.cell(stats.z_score_of_mean);
  csv.end_row();
  out.write("lemma1.csv", csv.text());

  RunResult result;
  result.summary = Json{{"m", m},
                        {"r", r},
                        {"trials", trials},
                        {"q_spec", q_spec},
                        {"empirical_mean", stats.empirical_mean},
                        {"empirical_var", stats.empirical_variance},
                        {"exact_var", stats.exact_variance},
                        {"z_mean", stats.z_score_of_mean}};
  return result;
}

RunResult run_gram_stats(const ExperimentConfig& config, OutputWriter& out) {
  const Json& p = config.params;
  const std::size_t m = p_u64(p, "m"), r = p_u64(p, "r"), trials = p_u64(p, "trials");

  RngStream rng(config.seed, 0);
  const GramElementStats stats =
      gram_element_stats(rng.substream(0), m, r, trials, config.parallelism);
  const double diag_theory = 2.0 / static_cast<double>(r);
  const double offdiag_theory = 1.0 / static_cast<double>(r);

  CsvBuilder csv({"r", "trials", "diag_mean", "diag_var", "diag_theory", "offdiag_mean",
                  "offdiag_var", "offdiag_theory"});
  csv.cell(r).cell(trials);
  csv.cell(stats.diag_mean).cell(stats.diag_var).cell(diag_theory);
  csv.cell(stats.offdiag_mean).cell(stats.offdiag_var).cell(offdiag_theory);
  csv.end_row();
  out.write("gram_stats.csv", csv.text());

  RunResult result;
  result.summary = Json{{"r", r},
                        {"trials", trials},
                        {"diag_mean", stats.diag_mean},
                        {"diag_var", stats.diag_var},
                        {"diag_theory", diag_theory},
                        {"offdiag_mean", stats.offdiag_mean},
                        {"offdiag_var", stats.offdiag_var},
                        {"offdiag_theory", offdiag_theory}};
  return result;
}

RunResult run_tv_scaling(const ExperimentConfig& config, OutputWriter& out) {
  const Json& p = config.params;
  const std::vector<std::size_t> m_grid = p_u64_list(p, "m_grid");
  const std::vector<std::size_t> r_grid = p_u64_list(p, "r_grid");
  const std::size_t trials = p_u64(p, "trials"), seeds = p_u64(p, "seeds"),
                    bins = p_u64(p, "bins");

  RngStream rng(config.seed, 0);
  const ScalingFit fit = tv_scaling_experiment(m_grid, r_grid, trials, seeds,
                                               rng.substream(0), bins, config.parallelism);

  CsvBuilder csv({"m", "r", "trials", "seed", "ks", "tv", "l3_closed_form"});
  for (const ScalingCell& cell : fit.cells) {
    csv.cell(cell.m).cell(cell.r).cell(trials).cell(cell.seed);
    csv.cell(cell.report.ks_statistic).cell(cell.report.tv_binned).cell(cell.l3);
    csv.end_row();
  }
  out.write("tv_scaling.csv", csv.text());

  Json grid = Json::array();
  for (const ScalingPoint& point : fit.grid) {
    grid.push_back(Json{{"m", point.m}, {"r", point.r}, {"mean_ks", point.distance}});
  }
  const double reference_scale = 1.0 / std::sqrt(768.0 * 16.0);
  RunResult result;
  result.summary = Json{{"slope", fit.slope},
                        {"slope_stderr", fit.slope_stderr},
                        {"slope_ci95_low", fit.slope - 1.96 * fit.slope_stderr},
                        {"slope_ci95_high", fit.slope + 1.96 * fit.slope_stderr},
                        {"intercept", fit.intercept},
                        {"r_squared", fit.r_squared},
                        {"reference_m", 768},
                        {"reference_r", 16},
                        {"reference_scale", reference_scale},
                        {"grid", grid}};
  out.write_json("tv_scaling.json", result.summary);
  return result;
}

RunResult run_dp_compare(const ExperimentConfig& config, OutputWriter& out) {
  const Json& p = config.params;
  const std::size_t n = p_u64(p, "n"), m = p_u64(p, "m"), r = p_u64(p, "r");
  const std::size_t trials = p_u64(p, "trials");
  const double row_span = p_f64(p, "row_span");
  const DpConfig dp{p_f64(p, "clip"), p_f64(p, "noise_scale"), p_u64(p, "batch_size")};

  RngStream rng(config.seed, 0);
  // Synthetic gradient with geometrically spaced row norms covering
  // [1, row_span]: random unit directions scaled per row.
  Matrix grad = sample_gaussian_matrix(rng.substream(0), n, m, 1.0);
  const std::vector<double> raw_norms = row_l2_norms(grad);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = grad.row_ptr(i);
    const double exponent =
        n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
    const double scale = std::pow(row_span, exponent) / raw_norms[i];
    for (std::size_t j = 0; j < m; ++j) row[j] *= scale;
  }

  const NoiseProfile profile =
      compare_noise_profiles(grad, r, dp, trials, rng.substream(1), config.parallelism);

  CsvBuilder csv({"row_index", "grad_row_norm", "lora_std_emp", "lora_std_theory",
                  "dpsgd_std_emp", "dpsgd_std_theory"});
  double lora_max_rel_dev = 0.0;
  double dpsgd_min = profile.dpsgd_std.empty() ? 0.0 : profile.dpsgd_std.front();
  double dpsgd_max = dpsgd_min;
  for (std::size_t i = 0; i < n; ++i) {
    csv.cell(i).cell(profile.row_grad_norms[i]);
    csv.cell(profile.lora_std[i]).cell(profile.lora_theory[i]);
    csv.cell(profile.dpsgd_std[i]).cell(profile.dpsgd_theory);
    csv.end_row();
    if (profile.lora_theory[i] > 0.0) {
      lora_max_rel_dev = std::max(
          lora_max_rel_dev, std::abs(profile.lora_std[i] / profile.lora_theory[i] - 1.0));
    }
    dpsgd_min = std::min(dpsgd_min, profile.dpsgd_std[i]);
    dpsgd_max = std::max(dpsgd_max, profile.dpsgd_std[i]);
  }
  out.write("dp_compare.csv", csv.text());

  RunResult result;
  result.summary = Json{{"n", n},
                        {"m", m},
                        {"r", r},
                        {"trials", trials},
                        {"noise_std_theory", profile.dpsgd_theory},
                        {"lora_max_rel_deviation", lora_max_rel_dev},
                        {"dpsgd_max_over_min", dpsgd_min > 0.0 ? dpsgd_max / dpsgd_min : 0.0}};
  out.write_json("dp_compare.json", result.summary);
  return result;
}

RunResult run_noise_profile(const ExperimentConfig& config, OutputWriter& out) {
  const Json& p = config.params;
  const std::vector<std::size_t> dims = p_u64_list(p, "layer_dims");
  const std::vector<std::size_t> r_grid = p_u64_list(p, "r_grid");
  const std::size_t seeds = p_u64(p, "seeds"), batch_size = p_u64(p, "batch_size");
  const double eta = p_f64(p, "eta"), separation = p_f64(p, "separation");
  const std::size_t layers = dims.size() - 1;

  RngStream rng(config.seed, 0);
  // noise[seed][ri][layer], norms[seed][layer]; slot-addressed so any
  // thread partition yields identical bytes.
  std::vector<std::vector<std::vector<double>>> noise(
      seeds, std::vector<std::vector<double>>(r_grid.size()));
  std::vector<std::vector<double>> norms(seeds);
  std::mutex error_mutex;
  std::exception_ptr first_error;

  parallel_chunks(seeds, config.parallelism, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t s = lo; s < hi; ++s) {
      try {
        const RngStream stream = rng.substream(s);
        const SplitSet data =
            synth_dataset(stream.substream(0), batch_size, dims[0], dims.back(), separation);
        const ToyModel network =
            ToyModel::create(stream.substream(1), ToyModelConfig{dims, {}});
        norms[s] = layer_gradient_norms(network, data.train);
        for (std::size_t ri = 0; ri < r_grid.size(); ++ri) {
          noise[s][ri] =
              noise_measure(network, data.train, eta, r_grid[ri], stream.substream(2 + ri));
        }
      } catch (...) {
        const std::lock_guard<std::mutex> guard(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  });
  if (first_error) std::rethrow_exception(first_error);

  CsvBuilder csv({"seed", "layer", "r", "noise", "grad_norm"});
  for (std::size_t s = 0; s < seeds; ++s) {
    for (std::size_t ri = 0; ri < r_grid.size(); ++ri) {
      for (std::size_t l = 0; l < layers; ++l) {
        csv.cell(s).cell(l).cell(r_grid[ri]).cell(noise[s][ri][l]).cell(norms[s][l]);
        csv.end_row();
      }
    }
  }
  out.write("noise_profile.csv", csv.text());

  // Seed-mean noise per (layer, r); monotonicity in r per layer.
  Json layers_json = Json::array();
  bool all_monotone = true;
  for (std::size_t l = 0; l < layers; ++l) {
    std::vector<double> means;
    for (std::size_t ri = 0; ri < r_grid.size(); ++ri) {
      std::vector<double> vals(seeds);
      for (std::size_t s = 0; s < seeds; ++s) vals[s] = noise[s][ri][l];
      means.push_back(mean(vals));
    }
    bool monotone = true;
    for (std::size_t ri = 1; ri < means.size(); ++ri) {
      if (means[ri] > means[ri - 1]) monotone = false;
    }
    all_monotone = all_monotone && monotone;
    Json by_rank = Json::array();
    for (std::size_t ri = 0; ri < r_grid.size(); ++ri) {
      by_rank.push_back(Json{{"r", r_grid[ri]}, {"mean_noise", means[ri]}});
    }
    layers_json.push_back(
        Json{{"layer", l}, {"mean_noise_by_rank", by_rank}, {"non_increasing", monotone}});
  }

  // Rank correlation between layer gradient norms and injected noise:
  // per-seed (averaged) and on the seed means, both reported per rank.
  std::vector<double> mean_norms(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    std::vector<double> vals(seeds);
    for (std::size_t s = 0; s < seeds; ++s) vals[s] = norms[s][l];
    mean_norms[l] = mean(vals);
  }
  Json spearman_json = Json::array();
  double min_mean_spearman = 1.0;
  double min_spearman_of_means = 1.0;
  for (std::size_t ri = 0; ri < r_grid.size(); ++ri) {
    std::vector<double> per_seed(seeds);
    std::vector<double> mean_noise(layers);
    for (std::size_t s = 0; s < seeds; ++s) per_seed[s] = spearman(norms[s], noise[s][ri]);
    for (std::size_t l = 0; l < layers; ++l) {
      std::vector<double> vals(seeds);
      for (std::size_t s = 0; s < seeds; ++s) vals[s] = noise[s][ri][l];
      mean_noise[l] = mean(vals);
    }
    const double avg = mean(per_seed);
    const double of_means = spearman(mean_norms, mean_noise);
    spearman_json.push_back(
        Json{{"r", r_grid[ri]}, {"mean_spearman", avg}, {"spearman_of_means", of_means}});
    min_mean_spearman = std::min(min_mean_spearman, avg);
    min_spearman_of_means = std::min(min_spearman_of_means, of_means);
  }

  RunResult result;
  result.summary = Json{{"layer_dims", dims},
                        {"r_grid", r_grid},
                        {"seeds", seeds},
                        {"eta", eta},
                        {"layers", layers_json},
                        {"all_layers_non_increasing", all_monotone},
                        {"spearman_by_rank", spearman_json},
                        {"min_mean_spearman", min_mean_spearman},
                        {"min_spearman_of_means", min_spearman_of_means}};
  out.write_json("noise_profile.json", result.summary);
  return result;
}

RunResult run_mia(const ExperimentConfig& config, OutputWriter& out) {
  const Json& p = config.params;
  const StudyConfig study = make_study_config(p, config.parallelism);
  const std::size_t seeds = p_u64(p, "seeds");

  RngStream rng(config.seed, 0);
  const RngStream study_rng = rng.substream(0);

  Json calibration_json;
  TrainMethod dpsgd_method = TrainMethod::dpsgd(1.0, 0.0);
  if (p_f64(p, "dpsgd_clip") > 0.0) {
    dpsgd_method = TrainMethod::dpsgd(p_f64(p, "dpsgd_clip"), p_f64(p, "dpsgd_noise_scale"));
    calibration_json = Json{{"mode", "explicit"},
                            {"clip", p_f64(p, "dpsgd_clip")},
                            {"noise_scale", p_f64(p, "dpsgd_noise_scale")}};
  } else {
    // Same stream as the study, so the replayed reference models match.
    const DpCalibration cal =
        calibrate_dpsgd(study, seeds, study_rng, p_f64(p, "dpsgd_noise_ratio"));
    dpsgd_method = TrainMethod::dpsgd(cal.clip, cal.noise_scale);
    calibration_json = Json{{"mode", "auto"},
                            {"clip", cal.clip},
                            {"noise_scale", cal.noise_scale},
                            {"pooled_median_grad_norm", cal.pooled_median},
                            {"noise_std", cal.noise_std(study.batch_size)},
                            {"per_seed_median", cal.per_seed_median}};
  }

  std::vector<TrainMethod> methods = {TrainMethod::full()};
  for (std::size_t r : p_u64_list(p, "lora_ranks")) methods.push_back(TrainMethod::lora(r));
  methods.push_back(dpsgd_method);

  const std::vector<MiaReport> reports = run_mia_study(study, methods, seeds, study_rng);

  Json methods_json = Json::array();
  for (const MiaReport& report : reports) methods_json.push_back(report_to_json(report));

  RunResult result;
  result.summary =
      Json{{"seeds", seeds}, {"dpsgd_calibration", calibration_json}, {"methods", methods_json}};
  out.write_json("mia_report.json", result.summary);
  return result;
}

RunResult run_ablate_r(const ExperimentConfig& config, OutputWriter& out) {
  const Json& p = config.params;
  const StudyConfig study = make_study_config(p, config.parallelism);
  const std::size_t seeds = p_u64(p, "seeds");
  const std::vector<std::size_t> r_grid = p_u64_list(p, "r_grid");

  RngStream rng(config.seed, 0);
  const AblationTable table = ablation_rank(study, r_grid, seeds, rng.substream(0));

  CsvBuilder csv({"r", "mean_auc", "mean_tpr10", "mean_val_loss"});
  for (const AblationRow& row : table.rows) {
    csv.cell(row.rank).cell(row.mean_auc).cell(row.mean_tpr10).cell(row.mean_val_loss);
    csv.end_row();
  }
  out.write("ablation.csv", csv.text());

  Json reports_json = Json::array();
  for (const MiaReport& report : table.reports) reports_json.push_back(report_to_json(report));

  RunResult result;
  result.summary = Json{{"seeds", seeds},
                        {"r_grid", r_grid},
                        {"spearman_rank_auc", table.spearman_rank_auc},
                        {"spearman_rank_val_loss", table.spearman_rank_val_loss},
                        {"reports", reports_json}};
  out.write_json("ablation.json", result.summary);
  return result;
}

RunResult run_moments(const ExperimentConfig& config, OutputWriter& out) {
  const Json& p = config.params;
  const std::vector<std::size_t> k_grid = p_u64_list(p, "k_grid");
  const std::vector<std::size_t> orders = p_u64_list(p, "orders");
  const std::size_t trials = p_u64(p, "trials");

  RngStream rng(config.seed, 0);
  CsvBuilder csv({"family", "k", "order", "trials", "empirical", "exact"});
  double max_chi_rel_err = 0.0;

  for (std::size_t ki = 0; ki < k_grid.size(); ++ki) {
    const std::size_t k = k_grid[ki];
    const std::vector<double> sample = sample_chi_squared(rng.substream(ki), k, trials);
    for (std::size_t order : orders) {
      std::vector<double> powered(sample.size());
      for (std::size_t i = 0; i < sample.size(); ++i) {
        double v = 1.0;
        for (std::size_t o = 0; o < order; ++o) v *= sample[i];
        powered[i] = v;
      }
      const double empirical = mean(powered);
      const double exact = chi_squared_raw_moment(k, order);
      max_chi_rel_err = std::max(max_chi_rel_err, std::abs(empirical / exact - 1.0));
      csv.cell(std::string("chi_squared")).cell(k).cell(order).cell(trials);
      csv.cell(empirical).cell(exact);
      csv.end_row();
    }
  }

  const CrossProductStats cross = cross_product_stats(rng.substream(100), trials);
  csv.cell(std::string("normal_cross_product")).cell(std::size_t{0}).cell(std::size_t{1});
  csv.cell(trials).cell(cross.mean).cell(0.0);
  csv.end_row();
  csv.cell(std::string("normal_cross_product")).cell(std::size_t{0}).cell(std::size_t{2});
  csv.cell(trials).cell(cross.variance).cell(1.0);
  csv.end_row();

  const std::vector<double> vg = sample_variance_gamma_sym(rng.substream(101), 1, trials);
  const Moments vg_moments = compute_moments(vg);
  const double vg_abs3 = abs_moment(vg, 3);
  const double vg_abs3_exact = 64.0 / 3.14159265358979323846;
  csv.cell(std::string("variance_gamma")).cell(std::size_t{1}).cell(std::size_t{2});
  csv.cell(trials).cell(vg_moments.variance).cell(4.0);
  csv.end_row();
  csv.cell(std::string("variance_gamma_abs")).cell(std::size_t{1}).cell(std::size_t{3});
  csv.cell(trials).cell(vg_abs3).cell(vg_abs3_exact);
  csv.end_row();

  out.write("moments.csv", csv.text());

  RunResult result;
  result.summary = Json{{"trials", trials},
                        {"max_chi_squared_rel_error", max_chi_rel_err},
                        {"cross_product_mean", cross.mean},
                        {"cross_product_variance", cross.variance},
                        {"vg_variance", vg_moments.variance},
                        {"vg_abs_third_moment", vg_abs3},
                        {"vg_abs_third_exact", vg_abs3_exact}};
  return result;
}

}  // namespace

std::string_view command_name(Command command) { return command_table().at(command); }

std::optional<Command> parse_command(std::string_view name) {
  for (const auto& [command, text] : command_table()) {
    if (text == name) return command;
  }
  return std::nullopt;
}

const std::vector<Command>& all_commands() {
  static const std::vector<Command> commands = [] {
    std::vector<Command> out;
    for (const auto& [command, text] : command_table()) out.push_back(command);
    return out;
  }();
  return commands;
}

const std::vector<ParamSpec>& command_schema(Command command) {
  static const std::map<Command, std::vector<ParamSpec>> schemas = [] {
    std::map<Command, std::vector<ParamSpec>> out;
    for (const auto& [cmd, text] : command_table()) out.emplace(cmd, build_schema(cmd));
    return out;
  }();
  return schemas.at(command);
}

ExperimentConfig resolve_config(Command command, const Json& file_values,
                                const Json& flag_values) {
  for (const Json* source : {&file_values, &flag_values}) {
    if (!source->is_object() && !source->is_null()) {
      throw ConfigError("config must be a JSON object", "");
    }
  }

  ExperimentConfig config;
  config.command = command;

  // Layer the sources; later sources win.
  Json merged = Json::object();
  for (const Json* source : {&file_values, &flag_values}) {
    if (source->is_null()) continue;
    for (const auto& [key, value] : source->items()) {
      if (key == "params") {
        if (!value.is_object()) throw ConfigError("params must be an object", "params");
        if (!merged.contains("params")) merged["params"] = Json::object();
        for (const auto& [pkey, pvalue] : value.items()) merged["params"][pkey] = pvalue;
      } else {
        merged[key] = value;
      }
    }
  }

  const std::vector<ParamSpec>& schema = command_schema(command);
  for (const auto& [key, value] : merged.items()) {
    if (key == "command") {
      if (!value.is_string() || parse_command(value.get<std::string>()) != command) {
        throw ConfigError("config command does not match '" +
                              std::string(command_name(command)) + "'",
                          "command");
      }
    } else if (key == "seed") {
      if (!(value.is_number_integer() && value.get<std::int64_t>() >= 0) &&
          !value.is_number_unsigned()) {
        throw ConfigError("seed must be a non-negative integer", "seed");
      }
      config.seed = value.get<std::uint64_t>();
    } else if (key == "parallelism") {
      if (!value.is_number_integer() || value.get<std::int64_t>() < 1) {
        throw ConfigError("parallelism must be an integer >= 1", "parallelism");
      }
      config.parallelism = value.get<std::size_t>();
    } else if (key == "output_dir") {
      if (!value.is_string() || value.get<std::string>().empty()) {
        throw ConfigError("output_dir must be a non-empty string", "output_dir");
      }
      config.output_dir = value.get<std::string>();
    } else if (key == "params") {
      for (const auto& [pkey, pvalue] : value.items()) {
        const auto spec = std::find_if(schema.begin(), schema.end(),
                                       [&](const ParamSpec& s) { return s.key == pkey; });
        if (spec == schema.end()) {
          throw ConfigError("unknown parameter '" + pkey + "' for command '" +
                                std::string(command_name(command)) + "'",
                            "params." + pkey);
        }
        if (!kind_matches(pvalue, spec->kind)) {
          throw ConfigError("parameter '" + pkey + "' must be a " +
                                std::string(kind_name(spec->kind)),
                            "params." + pkey);
        }
      }
    } else {
      throw ConfigError("unknown key '" + key + "'", key);
    }
  }

  // Defaults for whatever is still missing; required fields have no default.
  config.params = Json::object();
  const Json& given =
      merged.contains("params") ? merged.at("params") : Json(Json::object());
  for (const ParamSpec& spec : schema) {
    if (given.contains(spec.key)) {
      config.params[spec.key] = given.at(spec.key);
    } else if (!spec.default_value.is_null()) {
      config.params[spec.key] = spec.default_value;
    } else {
      throw ConfigError("missing required parameter '" + spec.key + "'",
                        "params." + spec.key);
    }
  }
  if (config.output_dir.empty()) config.output_dir = default_output_dir(command);

  validate_values(command, config.params);
  return config;
}

Json emit_config(const ExperimentConfig& config) {
  Json params = Json::object();
  for (const ParamSpec& spec : command_schema(config.command)) {
    params[spec.key] = config.params.at(spec.key);
  }
  return Json{{"command", std::string(command_name(config.command))},
              {"seed", config.seed},
              {"parallelism", config.parallelism},
              {"output_dir", config.output_dir},
              {"params", params}};
}

Json load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file: " + path, "");
  Json parsed;
  try {
    parsed = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config file is not valid JSON: " + std::string(e.what()), "");
  }
  if (parsed.is_object() && parsed.contains("config") && parsed.contains("artifact_version")) {
    return parsed.at("config");  // manifest replay
  }
  return parsed;
}

std::string default_output_dir(Command command) {
  const char* env = std::getenv("LORANOISE_OUTPUT_DIR");
  const std::string base = (env != nullptr && env[0] != '\0') ? env : "loranoise-out";
  return base + "/" + std::string(command_name(command));
}

RunResult run_experiment(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  OutputWriter out(config.output_dir);

  RunResult result;
  switch (config.command) {
    case Command::verify_identity:
      result = run_verify_identity(config, out);
      break;
    case Command::lemma1:
      result = run_lemma1(config, out);
      break;
    case Command::gram_stats:
      result = run_gram_stats(config, out);
      break;
    case Command::tv_scaling:
      result = run_tv_scaling(config, out);
      break;
    case Command::dp_compare:
      result = run_dp_compare(config, out);
      break;
    case Command::noise_profile:
      result = run_noise_profile(config, out);
      break;
    case Command::mia:
      result = run_mia(config, out);
      break;
    case Command::ablate_r:
      result = run_ablate_r(config, out);
      break;
    case Command::moments:
      result = run_moments(config, out);
      break;
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Json manifest = Json{{"artifact_version", std::string(kArtifactVersion)},
                       {"config", emit_config(config)},
                       {"wall_time_s", wall},
                       {"outputs", out.names()}};
  out.write_json("manifest.json", manifest);
  result.outputs = out.names();
  return result;
}

}  // namespace loranoise
