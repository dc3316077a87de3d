// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace loranoise {

// Pairwise (cascade) summation. Accumulation order depends only on the
// length of the input, so reductions are bitwise reproducible and the
// rounding error grows like O(log n) instead of O(n).
double pairwise_sum(std::span<const double> values);

double mean(std::span<const double> values);

struct Moments {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased (n-1 denominator), 0 when count < 2
};

// Two-pass mean/variance built on pairwise sums.
Moments compute_moments(std::span<const double> values);

// Mean of |v|^p.
double abs_moment(std::span<const double> values, double p);

// Standard normal CDF / density.
double normal_cdf(double x);
double normal_pdf(double x);

// Inverse standard normal CDF for p in (0, 1). Rational approximation
// polished with one Halley step; absolute error well below 1e-12.
double normal_quantile(double p);

// Kolmogorov-Smirnov statistic of `samples` against N(0, sigma^2).
// `samples` is copied and sorted internally.
double ks_vs_normal(std::vector<double> samples, double sigma);

// Two-sample Kolmogorov-Smirnov statistic (sup distance between the two
// empirical CDFs). Inputs are copied and sorted internally.
double ks_two_sample(std::vector<double> a, std::vector<double> b);

// Total variation distance between the histogram of `samples` and
// N(0, sigma^2) over `bins` equiprobable bins (bin edges at normal
// quantiles so each bin has mass 1/bins under the reference).
double binned_tv_vs_normal(std::vector<double> samples, double sigma, std::size_t bins);

// Dvoretzky-Kiefer-Wolfowitz bound: with probability >= 1-alpha the
// empirical CDF of n iid draws is uniformly within this of the truth.
double dkw_bound(std::size_t n, double alpha);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double slope_stderr = 0.0;
};

// Ordinary least squares y ~ slope * x + intercept.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

// Spearman rank correlation; ties get their average rank.
double spearman(std::span<const double> x, std::span<const double> y);

// Median (copies and sorts; average of the middle two for even sizes).
double median(std::vector<double> values);

}  // namespace loranoise
