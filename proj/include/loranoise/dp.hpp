// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "loranoise/matrix.hpp"
#include "loranoise/rng.hpp"

namespace loranoise {

// Knobs of the clipped-noisy batch gradient. Privacy accounting is out of
// scope: z is a direct input, and the per-entry noise std is c*z/b.
struct DpConfig {
  double clip_threshold = 1.0;  // c > 0
  double noise_scale = 1.0;     // z >= 0
  std::size_t batch_size = 1;   // b >= 1

  double noise_std() const {
    return clip_threshold * noise_scale / static_cast<double>(batch_size);
  }
};

// min{||g||_F, c} * g / ||g||_F. Returns g unchanged (bitwise) when its
// norm is already within the threshold, so clipping is exactly a
// contraction and never perturbs in-budget gradients.
Matrix clip_gradient(const Matrix& g, double c);

// (1/b) * sum_i clip(g_i, c) + iid N(0, (c*z/b)^2) per entry. The clipped
// sum is a pairwise reduction; the batch must have exactly cfg.batch_size
// gradients of equal shape. z = 0 adds nothing (bitwise plain clipped mean).
Matrix dpsgd_batch_gradient(std::span<const Matrix> per_sample_grads, const DpConfig& cfg,
                            RngStream rng);

// Batch mean G followed by the low-rank projection G * a0^T a0, computed
// as ((G a0^T) a0). Algebraically equal to G + G(a0^T a0 - I): the
// projection injects noise instead of an explicit Gaussian mechanism.
Matrix lora_noisy_batch_gradient(std::span<const Matrix> per_sample_grads, const Matrix& a0);

// Side-by-side Monte-Carlo noise profile over the rows of a fixed batch
// gradient: low-rank projection noise G(A^T A - I) over fresh A draws vs
// the DPSGD Gaussian mechanism at matched config.
struct NoiseProfile {
  std::size_t r = 0;
  std::size_t trials = 0;
  std::vector<double> row_grad_norms;   // ||G_i,:||
  std::vector<double> lora_std;         // empirical per-row noise std
  std::vector<double> lora_theory;      // ||G_i,:|| / sqrt(r)
  std::vector<double> dpsgd_std;        // empirical per-row noise std
  double dpsgd_theory = 0.0;            // c*z/b, row-independent
};

NoiseProfile compare_noise_profiles(const Matrix& grad, std::size_t r, const DpConfig& cfg,
                                    std::size_t trials, RngStream rng,
                                    std::size_t threads = 1);

}  // namespace loranoise
