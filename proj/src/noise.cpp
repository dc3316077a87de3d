// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0

#include "loranoise/noise.hpp"

#include <cmath>
#include <stdexcept>

#include "loranoise/adapter.hpp"
#include "loranoise/randstats.hpp"
#include "loranoise/stats.hpp"

namespace loranoise {

Matrix noise_term(const Matrix& grad, const Matrix& a0) {
  if (a0.cols() != grad.cols()) {
    throw ShapeError("noise_term: a0 columns must match gradient columns");
  }
  Matrix projected = matmul(matmul(grad, transpose(a0)), a0);
  projected -= grad;
  return projected;
}

NoiseStats row_noise_stats(std::span<const double> q, std::size_t r, std::size_t trials,
                           RngStream rng, std::size_t threads) {
  if (trials < 2) throw std::invalid_argument("row_noise_stats: need trials >= 2");
  const std::vector<double> samples = sample_projection_noise(q, r, trials, rng, threads);

  std::vector<double> sq(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) sq[i] = q[i] * q[i];
  const double norm_sq = pairwise_sum(sq);

  NoiseStats stats;
  stats.element_count = q.size();
  stats.trials = trials;
  stats.exact_variance = (q[0] * q[0] + norm_sq) / static_cast<double>(r);
  const Moments m = compute_moments(samples);
  stats.empirical_mean = m.mean;
  stats.empirical_variance = m.variance;
  stats.z_score_of_mean =
      m.mean / std::sqrt(stats.exact_variance / static_cast<double>(trials));
  return stats;
}

std::vector<double> noise_measure(const ToyModel& network, const Dataset& batch, double eta,
                                  std::size_t r, RngStream rng) {
  if (batch.size() == 0) throw std::invalid_argument("noise_measure: empty batch");
  if (eta < 0.0) throw std::invalid_argument("noise_measure: negative learning rate");
  const std::vector<std::size_t> adapters = network.adapter_layers();
  if (eta == 0.0) return std::vector<double>(adapters.size(), 0.0);

  const std::vector<Matrix> grads = network.batch_gradients(batch);
  std::vector<double> out;
  out.reserve(adapters.size());
  for (std::size_t ordinal = 0; ordinal < adapters.size(); ++ordinal) {
    const std::size_t l = adapters[ordinal];
    const Matrix& g = grads[l];

    Matrix full_step = g;
    full_step *= eta;
    full_step = network.weight(l) - full_step;

    AdapterLayer adapter(network.weight(l), rng.substream(ordinal), r, /*frozen_a=*/false, eta);
    adapter.sgd_step(g);

    out.push_back(frobenius_norm(full_step - adapter.effective_weight()));
  }
  return out;
}

std::vector<double> layer_gradient_norms(const ToyModel& network, const Dataset& batch) {
  if (batch.size() == 0) throw std::invalid_argument("layer_gradient_norms: empty batch");
  const std::vector<Matrix> grads = network.batch_gradients(batch);
  std::vector<double> out;
  for (std::size_t l : network.adapter_layers()) out.push_back(frobenius_norm(grads[l]));
  return out;
}

std::vector<double> layer_gradient_norms(const ToyModel& network, const Matrix& features,
                                         const Matrix& targets) {
  if (features.rows() == 0) throw std::invalid_argument("layer_gradient_norms: empty batch");
  const std::vector<Matrix> grads = network.batch_gradients_ls(features, targets);
  std::vector<double> out;
  for (std::size_t l : network.adapter_layers()) out.push_back(frobenius_norm(grads[l]));
  return out;
}

}  // namespace loranoise
