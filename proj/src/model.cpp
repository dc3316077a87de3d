// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0

#include "loranoise/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <utility>

#include "loranoise/adapter.hpp"
#include "loranoise/dp.hpp"
#include "loranoise/stats.hpp"
#include "loranoise/text.hpp"

namespace loranoise {

namespace {

std::vector<double> unit_direction(RngStream rng, std::size_t dim) {
  std::vector<double> v(dim);
  rng.fill_normal(v, 1.0);
  std::vector<double> sq(dim);
  for (std::size_t i = 0; i < dim; ++i) sq[i] = v[i] * v[i];
  const double norm = std::sqrt(pairwise_sum(sq));
  if (norm < 1e-12) {
    std::fill(v.begin(), v.end(), 0.0);
    v[0] = 1.0;
    return v;
  }
  for (double& x : v) x /= norm;
  return v;
}

Dataset make_split(RngStream rng, Split split, std::size_t id_offset, std::size_t n,
                   std::size_t dim, const std::vector<std::vector<double>>& means,
                   std::size_t classes) {
  Dataset d;
  d.split = split;
  d.features = Matrix(n, dim);
  d.labels.resize(n);
  d.sample_ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % classes);
    d.labels[i] = label;
    d.sample_ids[i] = id_offset + i;
    double* row = d.features.row_ptr(i);
    rng.fill_normal({row, dim}, 1.0);
    const std::vector<double>& mu = means[static_cast<std::size_t>(label)];
    for (std::size_t j = 0; j < dim; ++j) row[j] += mu[j];
  }
  return d;
}

// Numerically stable log-sum-exp over a logit row.
double log_sum_exp(const double* z, std::size_t n) {
  double zmax = z[0];
  for (std::size_t j = 1; j < n; ++j) zmax = std::max(zmax, z[j]);
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) s += std::exp(z[j] - zmax);
  return zmax + std::log(s);
}

// y = W x for row-major W (out x in).
void matvec(const Matrix& w, const double* x, double* y) {
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const double* wi = w.row_ptr(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < w.cols(); ++j) acc += wi[j] * x[j];
    y[i] = acc;
  }
}

// y = W^T d.
void matvec_t(const Matrix& w, const double* d, double* y) {
  std::fill(y, y + w.cols(), 0.0);
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const double* wi = w.row_ptr(i);
    const double di = d[i];
    for (std::size_t j = 0; j < w.cols(); ++j) y[j] += di * wi[j];
  }
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

std::vector<std::size_t> shuffled_rows(std::size_t n, RngStream rng) {
  std::vector<std::size_t> rows = all_rows(n);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
    std::swap(rows[i - 1], rows[j]);
  }
  return rows;
}

}  // namespace

SplitSet synth_dataset(RngStream rng, std::size_t n_per_split, std::size_t dim,
                       std::size_t classes, double separation) {
  if (classes < 2) throw std::invalid_argument("synth_dataset: need at least 2 classes");
  if (n_per_split == 0 || dim == 0) {
    throw std::invalid_argument("synth_dataset: empty split or zero dimension");
  }
  std::vector<std::vector<double>> means(classes);
  RngStream mean_rng = rng.substream(0);
  for (std::size_t c = 0; c < classes; ++c) {
    means[c] = unit_direction(mean_rng.substream(c), dim);
    for (double& x : means[c]) x *= separation;
  }
  SplitSet s;
  s.train = make_split(rng.substream(1), Split::train, 0, n_per_split, dim, means, classes);
  s.validation = make_split(rng.substream(2), Split::validation, n_per_split, n_per_split,
                            dim, means, classes);
  s.auxiliary = make_split(rng.substream(3), Split::auxiliary, 2 * n_per_split, n_per_split,
                           dim, means, classes);
  return s;
}

ToyModel ToyModel::create(RngStream rng, ToyModelConfig config) {
  if (config.layer_dims.size() < 2) {
    throw std::invalid_argument("ToyModel: need at least input and output widths");
  }
  for (std::size_t d : config.layer_dims) {
    if (d == 0) throw std::invalid_argument("ToyModel: zero layer width");
  }
  ToyModel model;
  model.dims_ = std::move(config.layer_dims);
  const std::size_t layers = model.dims_.size() - 1;
  model.weights_.reserve(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const double std_dev = std::sqrt(2.0 / static_cast<double>(model.dims_[l]));
    model.weights_.push_back(
        sample_gaussian_matrix(rng.substream(l), model.dims_[l + 1], model.dims_[l], std_dev));
  }
  if (config.adapter_mask.empty()) {
    model.mask_.assign(layers, true);
  } else {
    model.set_adapter_mask(std::move(config.adapter_mask));
  }
  return model;
}

void ToyModel::set_weight(std::size_t layer, Matrix w) {
  if (w.rows() != weights_[layer].rows() || w.cols() != weights_[layer].cols()) {
    throw ShapeError("ToyModel::set_weight: shape mismatch at layer " + std::to_string(layer));
  }
  weights_[layer] = std::move(w);
}

void ToyModel::set_adapter_mask(std::vector<bool> mask) {
  if (mask.size() != weights_.size() && !weights_.empty()) {
    throw std::invalid_argument("ToyModel: adapter mask length must equal layer count");
  }
  mask_ = std::move(mask);
}

std::vector<std::size_t> ToyModel::adapter_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l < mask_.size(); ++l) {
    if (mask_[l]) out.push_back(l);
  }
  return out;
}

Matrix ToyModel::logits(const Matrix& features) const {
  if (features.cols() != dims_.front()) {
    throw ShapeError("ToyModel::logits: feature width " + std::to_string(features.cols()) +
                     " != input width " + std::to_string(dims_.front()));
  }
  Matrix h = features;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = matmul(h, transpose(weights_[l]));
    if (l + 1 < weights_.size()) {
      for (double& v : h.data()) v = v > 0.0 ? v : 0.0;
    }
  }
  return h;
}

std::vector<double> ToyModel::per_sample_losses(const Dataset& data) const {
  const Matrix z = logits(data.features);
  const std::size_t classes = dims_.back();
  std::vector<double> losses(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int y = data.labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw std::invalid_argument("label out of range: " + std::to_string(y));
    }
    const double* zi = z.row_ptr(i);
    losses[i] = log_sum_exp(zi, classes) - zi[y];
  }
  return losses;
}

double ToyModel::mean_loss(const Dataset& data) const {
  if (data.size() == 0) throw std::invalid_argument("mean_loss: empty dataset");
  return mean(per_sample_losses(data));
}

double ToyModel::accuracy(const Dataset& data) const {
  if (data.size() == 0) throw std::invalid_argument("accuracy: empty dataset");
  const Matrix z = logits(data.features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double* zi = z.row_ptr(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < dims_.back(); ++j) {
      if (zi[j] > zi[best]) best = j;
    }
    if (static_cast<int>(best) == data.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

std::vector<Matrix> ToyModel::per_sample_gradient(const double* x, int label) const {
  const std::size_t layers = weights_.size();
  // Forward with cached activations; acts[l] feeds weight l.
  std::vector<std::vector<double>> acts(layers + 1);
  acts[0].assign(x, x + dims_[0]);
  for (std::size_t l = 0; l < layers; ++l) {
    acts[l + 1].resize(dims_[l + 1]);
    matvec(weights_[l], acts[l].data(), acts[l + 1].data());
    if (l + 1 < layers) {
      for (double& v : acts[l + 1]) v = v > 0.0 ? v : 0.0;
    }
  }
  // Softmax delta at the output.
  std::vector<double>& z = acts[layers];
  const double lse = log_sum_exp(z.data(), z.size());
  std::vector<double> delta(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) delta[j] = std::exp(z[j] - lse);
  delta[static_cast<std::size_t>(label)] -= 1.0;

  std::vector<Matrix> grads(layers);
  for (std::size_t l = layers; l-- > 0;) {
    Matrix g(dims_[l + 1], dims_[l]);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      double* gi = g.row_ptr(i);
      const double di = delta[i];
      for (std::size_t j = 0; j < g.cols(); ++j) gi[j] = di * acts[l][j];
    }
    grads[l] = std::move(g);
    if (l > 0) {
      std::vector<double> back(dims_[l]);
      matvec_t(weights_[l], delta.data(), back.data());
      for (std::size_t j = 0; j < back.size(); ++j) {
        back[j] = acts[l][j] > 0.0 ? back[j] : 0.0;  // ReLU mask
      }
      delta = std::move(back);
    }
  }
  return grads;
}

std::vector<Matrix> ToyModel::per_sample_gradient_ls(const double* x,
                                                     const double* target) const {
  const std::size_t layers = weights_.size();
  std::vector<std::vector<double>> acts(layers + 1);
  acts[0].assign(x, x + dims_[0]);
  for (std::size_t l = 0; l < layers; ++l) {
    acts[l + 1].resize(dims_[l + 1]);
    matvec(weights_[l], acts[l].data(), acts[l + 1].data());
    if (l + 1 < layers) {
      for (double& v : acts[l + 1]) v = v > 0.0 ? v : 0.0;
    }
  }
  std::vector<double> delta(dims_.back());
  for (std::size_t j = 0; j < delta.size(); ++j) delta[j] = acts[layers][j] - target[j];

  std::vector<Matrix> grads(layers);
  for (std::size_t l = layers; l-- > 0;) {
    Matrix g(dims_[l + 1], dims_[l]);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      double* gi = g.row_ptr(i);
      const double di = delta[i];
      for (std::size_t j = 0; j < g.cols(); ++j) gi[j] = di * acts[l][j];
    }
    grads[l] = std::move(g);
    if (l > 0) {
      std::vector<double> back(dims_[l]);
      matvec_t(weights_[l], delta.data(), back.data());
      for (std::size_t j = 0; j < back.size(); ++j) {
        back[j] = acts[l][j] > 0.0 ? back[j] : 0.0;
      }
      delta = std::move(back);
    }
  }
  return grads;
}

std::vector<std::vector<Matrix>> ToyModel::per_sample_gradients(
    const Dataset& data, std::span<const std::size_t> rows) const {
  std::vector<std::size_t> everything;
  if (rows.empty()) {
    everything = all_rows(data.size());
    rows = everything;
  }
  std::vector<std::vector<Matrix>> out;
  out.reserve(rows.size());
  for (std::size_t row : rows) {
    out.push_back(per_sample_gradient(data.features.row_ptr(row), data.labels[row]));
  }
  return out;
}

std::vector<Matrix> ToyModel::batch_gradients(const Dataset& data,
                                              std::span<const std::size_t> rows) const {
  std::vector<std::vector<Matrix>> per_sample = per_sample_gradients(data, rows);
  if (per_sample.empty()) throw std::invalid_argument("batch_gradients: empty batch");
  std::vector<Matrix> out(weights_.size());
  std::vector<Matrix> layer(per_sample.size());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    for (std::size_t i = 0; i < per_sample.size(); ++i) layer[i] = std::move(per_sample[i][l]);
    out[l] = pairwise_matrix_mean(layer);
  }
  return out;
}

std::vector<Matrix> ToyModel::batch_gradients_ls(const Matrix& features,
                                                 const Matrix& targets) const {
  if (targets.rows() != features.rows() || targets.cols() != dims_.back()) {
    throw ShapeError("batch_gradients_ls: targets must be batch x output");
  }
  std::vector<std::vector<Matrix>> per_sample;
  per_sample.reserve(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    per_sample.push_back(per_sample_gradient_ls(features.row_ptr(i), targets.row_ptr(i)));
  }
  std::vector<Matrix> out(weights_.size());
  std::vector<Matrix> layer(per_sample.size());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    for (std::size_t i = 0; i < per_sample.size(); ++i) layer[i] = std::move(per_sample[i][l]);
    out[l] = pairwise_matrix_mean(layer);
  }
  return out;
}

TrainMethod TrainMethod::full() { return TrainMethod{Kind::full, 0, 0.0, 0.0}; }

TrainMethod TrainMethod::lora(std::size_t rank) { return TrainMethod{Kind::lora, rank, 0.0, 0.0}; }

TrainMethod TrainMethod::lora_frozen(std::size_t rank) {
  return TrainMethod{Kind::lora_frozen, rank, 0.0, 0.0};
}

TrainMethod TrainMethod::dpsgd(double clip, double noise_scale) {
  return TrainMethod{Kind::dpsgd, 0, clip, noise_scale};
}

TrainMethod TrainMethod::masked_sgd() { return TrainMethod{Kind::masked_sgd, 0, 0.0, 0.0}; }

std::string TrainMethod::name() const {
  switch (kind) {
    case Kind::full:
      return "full";
    case Kind::lora:
      return "lora(r=" + std::to_string(rank) + ")";
    case Kind::lora_frozen:
      return "lora_frozen(r=" + std::to_string(rank) + ")";
    case Kind::dpsgd:
      return "dpsgd(c=" + double_to_string(clip) + ",z=" + double_to_string(noise_scale) + ")";
    case Kind::masked_sgd:
      return "masked_sgd";
  }
  return "unknown";
}

TrainResult train(const ToyModel& model, const Dataset& data, const TrainMethod& method,
                  std::size_t epochs, double eta, RngStream rng, std::size_t batch_size) {
  if (epochs == 0) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size == 0) throw std::invalid_argument("train: batch_size must be >= 1");
  if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
  if (eta < 0.0) throw std::invalid_argument("train: negative learning rate");
  if (eta == 0.0) return TrainResult{model, {}};

  TrainResult result{model, {}};
  ToyModel& work = result.model;
  const std::size_t layers = work.layer_count();

  const bool is_lora =
      method.kind == TrainMethod::Kind::lora || method.kind == TrainMethod::Kind::lora_frozen;
  std::vector<std::optional<AdapterLayer>> adapters(layers);
  if (is_lora) {
    const bool frozen = method.kind == TrainMethod::Kind::lora_frozen;
    RngStream adapter_rng = rng.substream(1);
    for (std::size_t l : work.adapter_layers()) {
      adapters[l].emplace(work.weight(l), adapter_rng.substream(l), method.rank, frozen, eta);
    }
  }

  const RngStream shuffle_rng = rng.substream(0);
  const RngStream noise_rng = rng.substream(2);

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const std::vector<std::size_t> order =
        shuffled_rows(data.size(), shuffle_rng.substream(epoch));
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size, ++batch_index) {
      const std::size_t len = std::min(batch_size, order.size() - start);
      const std::span<const std::size_t> rows(order.data() + start, len);

      switch (method.kind) {
        case TrainMethod::Kind::full: {
          std::vector<Matrix> grads = work.batch_gradients(data, rows);
          for (std::size_t l = 0; l < layers; ++l) {
            grads[l] *= eta;
            work.set_weight(l, work.weight(l) - grads[l]);
          }
          break;
        }
        case TrainMethod::Kind::masked_sgd: {
          std::vector<Matrix> grads = work.batch_gradients(data, rows);
          for (std::size_t l : work.adapter_layers()) {
            grads[l] *= eta;
            work.set_weight(l, work.weight(l) - grads[l]);
          }
          break;
        }
        case TrainMethod::Kind::lora:
        case TrainMethod::Kind::lora_frozen: {
          std::vector<Matrix> grads = work.batch_gradients(data, rows);
          for (std::size_t l : work.adapter_layers()) {
            adapters[l]->sgd_step(grads[l]);
            work.set_weight(l, adapters[l]->effective_weight());
          }
          break;
        }
        case TrainMethod::Kind::dpsgd: {
          std::vector<std::vector<Matrix>> per_sample = work.per_sample_gradients(data, rows);
          const RngStream step_rng = noise_rng.substream(epoch).substream(batch_index);
          std::vector<Matrix> layer(per_sample.size());
          for (std::size_t l : work.adapter_layers()) {
            for (std::size_t i = 0; i < per_sample.size(); ++i) {
              layer[i] = std::move(per_sample[i][l]);
            }
            const DpConfig cfg{method.clip, method.noise_scale, len};
            Matrix g = dpsgd_batch_gradient(layer, cfg, step_rng.substream(l));
            g *= eta;
            work.set_weight(l, work.weight(l) - g);
          }
          break;
        }
      }
    }
    const double loss = work.mean_loss(data);
    if (!std::isfinite(loss)) {
      throw DivergenceError("train: non-finite loss, method=" + method.name() +
                            " epoch=" + std::to_string(epoch));
    }
    result.epoch_losses.push_back(loss);
  }
  return result;
}

}  // namespace loranoise
