// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "loranoise/rng.hpp"
#include "loranoise/stats.hpp"

namespace loranoise {

// Distance between the sampled law of one projection-noise coordinate and
// its Gaussian limit N(0, ||q||^2 / r).
struct DistanceReport {
  std::size_t m = 0;
  std::size_t r = 0;
  std::size_t sample_count = 0;
  double ks_statistic = 0.0;  // in [0, 1]
  double tv_binned = 0.0;     // in [0, 1], equiprobable-bin estimate
  std::size_t bin_count = 0;
  double target_sigma = 0.0;  // ||q|| / sqrt(r)
};

struct ScalingPoint {
  std::size_t m = 0;
  std::size_t r = 0;
  double distance = 0.0;  // seed-averaged KS statistic
};

// One (m, r, seed) cell of the scaling experiment; CSV payload.
struct ScalingCell {
  std::size_t m = 0;
  std::size_t r = 0;
  std::uint64_t seed = 0;
  DistanceReport report;
  double l3 = 0.0;  // Lyapounov ratio for the all-ones q at this (m, r)
};

// Least-squares fit of log(distance) against log(m*r).
struct ScalingFit {
  std::vector<ScalingPoint> grid;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double slope_stderr = 0.0;
  std::vector<ScalingCell> cells;
};

// E[X^order] for X ~ chi-squared(k): product_{i<order} (k + 2i).
double chi_squared_raw_moment(std::size_t k, std::size_t order);

// n draws of chi-squared(k), each the sum of k squared standard normals.
std::vector<double> sample_chi_squared(RngStream rng, std::size_t k, std::size_t n);

// n draws of the symmetric variance-gamma law nu1 - nu2 with independent
// nu_i ~ chi-squared(k); mean 0, variance 4k.
std::vector<double> sample_variance_gamma_sym(RngStream rng, std::size_t k, std::size_t n);

struct CrossProductStats {
  std::size_t trials = 0;
  double mean = 0.0;
  double variance = 0.0;
};

// Moments of the product of two independent standard normals (mean 0,
// variance 1); same law as half a symmetric variance-gamma with k = 1.
CrossProductStats cross_product_stats(RngStream rng, std::size_t trials);

struct GramElementStats {
  std::size_t r = 0;
  std::size_t trials = 0;
  double diag_mean = 0.0;
  double diag_var = 0.0;     // theory: 2/r
  double offdiag_mean = 0.0;
  double offdiag_var = 0.0;  // theory: 1/r
};

// Empirical moments of one diagonal and one off-diagonal element of
// (A^T A - I) with A ~ N(0, 1/r)^(r x m). The tracked elements involve
// only two columns of A, so m (>= 2) does not change the law.
GramElementStats gram_element_stats(RngStream rng, std::size_t m, std::size_t r,
                                    std::size_t trials, std::size_t threads = 1);

// Third Lyapounov ratio (8 / (pi sqrt(r))) * (||q||_3 / ||q||_2)^3
// controlling the Berry-Esseen distance of the projection noise.
double lyapounov_l3(std::span<const double> q, std::size_t r);

// Samples coordinate 0 of q(A^T A - I) over `trials` independent
// A ~ N(0, 1/r)^(r x m) draws; one coordinate per draw keeps the samples
// iid. Trial t uses substream t, so any thread partition gives
// byte-identical output.
std::vector<double> sample_projection_noise(std::span<const double> q, std::size_t r,
                                            std::size_t trials, RngStream rng,
                                            std::size_t threads = 1);

// KS and binned-TV distance of the sampled coordinate law to its Gaussian
// limit. Requires trials >= 1e3 and bins >= 16.
DistanceReport distance_to_gaussian(std::span<const double> q, std::size_t r,
                                    std::size_t trials, std::size_t bins, RngStream rng,
                                    std::size_t threads = 1);

// Runs distance_to_gaussian with q = all-ones over the (m, r) grid and
// `seeds` replicates per point, then fits the log-log decay of the
// seed-averaged KS distance against m*r. Requires >= 3 values per grid
// axis (a flat axis cannot identify a slope).
ScalingFit tv_scaling_experiment(std::span<const std::size_t> m_grid,
                                 std::span<const std::size_t> r_grid, std::size_t trials,
                                 std::size_t seeds, RngStream rng, std::size_t bins = 64,
                                 std::size_t threads = 1);

}  // namespace loranoise
