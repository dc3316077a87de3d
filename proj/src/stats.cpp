// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0

#include "loranoise/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace loranoise {

namespace {

double pairwise_sum_impl(const double* data, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += data[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_impl(data, half) + pairwise_sum_impl(data + half, n - half);
}

// Ranks with ties broken by averaging, as used by Spearman.
std::vector<double> average_ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  const double mx = mean(x), my = mean(y);
  std::vector<double> xy(n), xx(n), yy(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    xy[i] = dx * dy;
    xx[i] = dx * dx;
    yy[i] = dy * dy;
  }
  const double sxx = pairwise_sum(xx), syy = pairwise_sum(yy);
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return pairwise_sum(xy) / std::sqrt(sxx * syy);
}

}  // namespace

double pairwise_sum(std::span<const double> values) {
  return pairwise_sum_impl(values.data(), values.size());
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return pairwise_sum(values) / static_cast<double>(values.size());
}

Moments compute_moments(std::span<const double> values) {
  Moments m;
  m.count = values.size();
  if (m.count == 0) return m;
  m.mean = mean(values);
  if (m.count < 2) return m;
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - m.mean;
    sq[i] = d * d;
  }
  m.variance = pairwise_sum(sq) / static_cast<double>(m.count - 1);
  return m;
}

double abs_moment(std::span<const double> values, double p) {
  if (values.empty()) return 0.0;
  std::vector<double> powed(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) powed[i] = std::pow(std::fabs(values[i]), p);
  return mean(powed);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014327;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("normal_quantile requires p in (0, 1)");
  }
  // Acklam's rational approximation, then one Halley refinement.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1.0 - plow;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= phigh) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double ks_vs_normal(std::vector<double> samples, double sigma) {
  if (samples.empty()) throw std::invalid_argument("ks_vs_normal: empty sample");
  if (!(sigma > 0.0)) throw std::invalid_argument("ks_vs_normal: sigma must be positive");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = normal_cdf(samples[i] / sigma);
    d = std::max(d, std::max((static_cast<double>(i) + 1.0) / n - f,
                             f - static_cast<double>(i) / n));
  }
  return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  double d = 0.0;
  std::size_t ia = 0, ib = 0;
  while (ia < a.size() && ib < b.size()) {
    const double x = std::min(a[ia], b[ib]);
    while (ia < a.size() && a[ia] <= x) ++ia;
    while (ib < b.size() && b[ib] <= x) ++ib;
    d = std::max(d, std::fabs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb));
  }
  return d;
}

double binned_tv_vs_normal(std::vector<double> samples, double sigma, std::size_t bins) {
  if (samples.empty()) throw std::invalid_argument("binned_tv_vs_normal: empty sample");
  if (!(sigma > 0.0)) throw std::invalid_argument("binned_tv_vs_normal: sigma must be positive");
  if (bins < 2) throw std::invalid_argument("binned_tv_vs_normal: need at least 2 bins");
  std::vector<double> edges(bins - 1);
  for (std::size_t k = 1; k < bins; ++k) {
    edges[k - 1] = sigma * normal_quantile(static_cast<double>(k) / static_cast<double>(bins));
  }
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  const double ref = 1.0 / static_cast<double>(bins);
  double tv = 0.0;
  std::size_t lo = 0;
  for (std::size_t k = 0; k < bins; ++k) {
    std::size_t hi = samples.size();
    if (k < bins - 1) {
      hi = static_cast<std::size_t>(
          std::upper_bound(samples.begin() + static_cast<std::ptrdiff_t>(lo), samples.end(),
                           edges[k]) -
          samples.begin());
    }
    tv += std::fabs(static_cast<double>(hi - lo) / n - ref);
    lo = hi;
  }
  return 0.5 * tv;
}

double dkw_bound(std::size_t n, double alpha) {
  if (n == 0 || !(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("dkw_bound: need n > 0 and alpha in (0, 1)");
  }
  return std::sqrt(std::log(2.0 / alpha) / (2.0 * static_cast<double>(n)));
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("linear_fit: need two equally sized samples, length >= 2");
  }
  const std::size_t n = x.size();
  const double mx = mean(x), my = mean(y);
  std::vector<double> sxy(n), sxx(n);
  for (std::size_t i = 0; i < n; ++i) {
    sxy[i] = (x[i] - mx) * (y[i] - my);
    sxx[i] = (x[i] - mx) * (x[i] - mx);
  }
  const double xx = pairwise_sum(sxx);
  if (xx == 0.0) throw std::invalid_argument("linear_fit: x values are all identical");
  LinearFit fit;
  fit.slope = pairwise_sum(sxy) / xx;
  fit.intercept = my - fit.slope * mx;
  std::vector<double> res(n), tot(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - (fit.slope * x[i] + fit.intercept);
    res[i] = e * e;
    tot[i] = (y[i] - my) * (y[i] - my);
  }
  const double ss_res = pairwise_sum(res), ss_tot = pairwise_sum(tot);
  fit.r_squared = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
  if (n > 2) fit.slope_stderr = std::sqrt(ss_res / (static_cast<double>(n - 2) * xx));
  return fit;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("spearman: need two equally sized samples, length >= 2");
  }
  const std::vector<double> rx = average_ranks(x), ry = average_ranks(y);
  return pearson(rx, ry);
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median: empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace loranoise
