// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "loranoise/matrix.hpp"
#include "loranoise/model.hpp"
#include "loranoise/rng.hpp"

namespace loranoise {

// Deviation of the low-rank projected gradient from the true gradient:
// grad * (a0^T a0 - I), computed as ((grad a0^T) a0) - grad.
Matrix noise_term(const Matrix& grad, const Matrix& a0);

// Monte-Carlo record for one coordinate of the projection noise of a row
// q: element 0 of q(A^T A - I) over fresh A ~ N(0, 1/r) draws.
struct NoiseStats {
  std::size_t element_count = 0;  // length of q
  std::size_t trials = 0;
  double empirical_mean = 0.0;
  double empirical_variance = 0.0;
  double exact_variance = 0.0;    // (q_0^2 + ||q||^2) / r
  double z_score_of_mean = 0.0;   // mean / sqrt(exact_variance / trials)
};

NoiseStats row_noise_stats(std::span<const double> q, std::size_t r, std::size_t trials,
                           RngStream rng, std::size_t threads = 1);

// Per-adapter-layer noise injected by one low-rank step relative to one
// plain SGD step from the same weights and batch gradient:
//   N(W0, r) = || (W0 - eta G) - (W0 + B1 A1) ||_F,
// with fresh factors per layer (B0 = 0, A0 ~ N(0, 1/r)). Both sides are
// stepped independently; no closed form is substituted.
std::vector<double> noise_measure(const ToyModel& network, const Dataset& batch, double eta,
                                  std::size_t r, RngStream rng);

// Frobenius norm of the batch cross-entropy gradient per adapter layer.
std::vector<double> layer_gradient_norms(const ToyModel& network, const Dataset& batch);

// Same, under a least-squares head with explicit targets (batch x output).
std::vector<double> layer_gradient_norms(const ToyModel& network, const Matrix& features,
                                         const Matrix& targets);

}  // namespace loranoise
