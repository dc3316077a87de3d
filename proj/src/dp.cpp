// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0

#include "loranoise/dp.hpp"

#include <cmath>
#include <stdexcept>

#include "loranoise/parallel.hpp"
#include "loranoise/stats.hpp"

namespace loranoise {

Matrix clip_gradient(const Matrix& g, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("clip_gradient: threshold must be positive");
  const double norm = frobenius_norm(g);
  if (norm <= c) return g;
  Matrix out = g;
  out *= c / norm;
  return out;
}

Matrix dpsgd_batch_gradient(std::span<const Matrix> per_sample_grads, const DpConfig& cfg,
                            RngStream rng) {
  if (per_sample_grads.empty()) {
    throw std::invalid_argument("dpsgd_batch_gradient: empty batch");
  }
  if (per_sample_grads.size() != cfg.batch_size) {
    throw std::invalid_argument("dpsgd_batch_gradient: batch has " +
                                std::to_string(per_sample_grads.size()) +
                                " gradients, config says " + std::to_string(cfg.batch_size));
  }
  if (!(cfg.clip_threshold > 0.0) || cfg.noise_scale < 0.0) {
    throw std::invalid_argument("dpsgd_batch_gradient: need c > 0 and z >= 0");
  }
  std::vector<Matrix> clipped;
  clipped.reserve(per_sample_grads.size());
  for (const Matrix& g : per_sample_grads) clipped.push_back(clip_gradient(g, cfg.clip_threshold));
  Matrix out = pairwise_matrix_mean(clipped);
  const double sigma = cfg.noise_std();
  if (sigma > 0.0) out += sample_gaussian_matrix(rng, out.rows(), out.cols(), sigma);
  return out;
}

Matrix lora_noisy_batch_gradient(std::span<const Matrix> per_sample_grads, const Matrix& a0) {
  if (per_sample_grads.empty()) {
    throw std::invalid_argument("lora_noisy_batch_gradient: empty batch");
  }
  const Matrix mean_grad = pairwise_matrix_mean(per_sample_grads);
  if (a0.cols() != mean_grad.cols()) {
    throw ShapeError("lora_noisy_batch_gradient: a0 columns must match gradient columns");
  }
  return matmul(matmul(mean_grad, transpose(a0)), a0);
}

NoiseProfile compare_noise_profiles(const Matrix& grad, std::size_t r, const DpConfig& cfg,
                                    std::size_t trials, RngStream rng, std::size_t threads) {
  if (trials < 1000) {
    throw std::invalid_argument("compare_noise_profiles: need at least 1e3 trials");
  }
  if (r == 0) throw std::invalid_argument("compare_noise_profiles: rank must be positive");
  const std::size_t n = grad.rows(), m = grad.cols();

  NoiseProfile profile;
  profile.r = r;
  profile.trials = trials;
  profile.row_grad_norms = row_l2_norms(grad);
  profile.lora_theory.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    profile.lora_theory[i] = profile.row_grad_norms[i] / std::sqrt(static_cast<double>(r));
  }
  profile.dpsgd_theory = cfg.noise_std();

  // Per-trial, per-row first and second moments of the noise entries;
  // reduced pairwise over trials so the result is thread-count invariant.
  const auto reduce_rows = [&](const std::vector<std::vector<double>>& sums,
                               const std::vector<std::vector<double>>& sqs,
                               std::vector<double>& out) {
    out.resize(n);
    const double count = static_cast<double>(trials) * static_cast<double>(m);
    for (std::size_t i = 0; i < n; ++i) {
      const double mean_val = pairwise_sum(sums[i]) / count;
      const double second = pairwise_sum(sqs[i]) / count;
      out[i] = std::sqrt(std::max(0.0, second - mean_val * mean_val));
    }
  };

  const double inv_sqrt_r = 1.0 / std::sqrt(static_cast<double>(r));
  std::vector<std::vector<double>> sums(n, std::vector<double>(trials, 0.0));
  std::vector<std::vector<double>> sqs(n, std::vector<double>(trials, 0.0));

  const RngStream lora_rng = rng.substream(0);
  parallel_chunks(trials, threads, [&](std::size_t lo, std::size_t hi) {
    Matrix noise;
    for (std::size_t t = lo; t < hi; ++t) {
      const Matrix a = sample_gaussian_matrix(lora_rng.substream(t), r, m, inv_sqrt_r);
      noise = matmul(matmul(grad, transpose(a)), a);
      noise -= grad;
      for (std::size_t i = 0; i < n; ++i) {
        const double* row = noise.row_ptr(i);
        double s = 0.0, s2 = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          s += row[j];
          s2 += row[j] * row[j];
        }
        sums[i][t] = s;
        sqs[i][t] = s2;
      }
    }
  });
  reduce_rows(sums, sqs, profile.lora_std);

  const double sigma = cfg.noise_std();
  const RngStream dp_rng = rng.substream(1);
  parallel_chunks(trials, threads, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> row(m);
    for (std::size_t t = lo; t < hi; ++t) {
      RngStream trial_rng = dp_rng.substream(t);
      for (std::size_t i = 0; i < n; ++i) {
        trial_rng.fill_normal(row, sigma);
        double s = 0.0, s2 = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          s += row[j];
          s2 += row[j] * row[j];
        }
        sums[i][t] = s;
        sqs[i][t] = s2;
      }
    }
  });
  reduce_rows(sums, sqs, profile.dpsgd_std);

  return profile;
}

}  // namespace loranoise
