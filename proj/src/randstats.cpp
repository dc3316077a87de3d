// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0

#include "loranoise/randstats.hpp"

#include <cmath>
#include <stdexcept>

#include "loranoise/parallel.hpp"

namespace loranoise {

namespace {

double squared_norm(std::span<const double> q) {
  std::vector<double> sq(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) sq[i] = q[i] * q[i];
  return pairwise_sum(sq);
}

}  // namespace

double chi_squared_raw_moment(std::size_t k, std::size_t order) {
  if (k == 0 || order == 0) {
    throw std::invalid_argument("chi_squared_raw_moment: k and order must be positive");
  }
  double prod = 1.0;
  for (std::size_t i = 0; i < order; ++i) {
    prod *= static_cast<double>(k) + 2.0 * static_cast<double>(i);
  }
  return prod;
}

std::vector<double> sample_chi_squared(RngStream rng, std::size_t k, std::size_t n) {
  if (k == 0 || n == 0) {
    throw std::invalid_argument("sample_chi_squared: k and n must be positive");
  }
  std::vector<double> out(n);
  std::vector<double> draws(k);
  for (std::size_t i = 0; i < n; ++i) {
    rng.fill_normal(draws, 1.0);
    double s = 0.0;
    for (double z : draws) s += z * z;
    out[i] = s;
  }
  return out;
}

std::vector<double> sample_variance_gamma_sym(RngStream rng, std::size_t k, std::size_t n) {
  if (k == 0 || n == 0) {
    throw std::invalid_argument("sample_variance_gamma_sym: k and n must be positive");
  }
  std::vector<double> out(n);
  std::vector<double> draws(k);
  for (std::size_t i = 0; i < n; ++i) {
    rng.fill_normal(draws, 1.0);
    double nu1 = 0.0;
    for (double z : draws) nu1 += z * z;
    rng.fill_normal(draws, 1.0);
    double nu2 = 0.0;
    for (double z : draws) nu2 += z * z;
    out[i] = nu1 - nu2;
  }
  return out;
}

CrossProductStats cross_product_stats(RngStream rng, std::size_t trials) {
  if (trials < 1000) throw std::invalid_argument("cross_product_stats: need >= 1e3 trials");
  std::vector<double> products(trials);
  double pair[2];
  for (std::size_t i = 0; i < trials; ++i) {
    rng.fill_normal(pair, 1.0);
    products[i] = pair[0] * pair[1];
  }
  const Moments m = compute_moments(products);
  return CrossProductStats{trials, m.mean, m.variance};
}

GramElementStats gram_element_stats(RngStream rng, std::size_t m, std::size_t r,
                                    std::size_t trials, std::size_t threads) {
  if (m < 2) throw std::invalid_argument("gram_element_stats: need m >= 2");
  if (r == 0 || trials < 2) {
    throw std::invalid_argument("gram_element_stats: need r >= 1 and trials >= 2");
  }
  const double inv_sqrt_r = 1.0 / std::sqrt(static_cast<double>(r));
  std::vector<double> diag(trials), offdiag(trials);
  parallel_chunks(trials, threads, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> cols(2 * r);  // first two columns of A, interleaved
    for (std::size_t t = lo; t < hi; ++t) {
      RngStream trial_rng = rng.substream(t);
      trial_rng.fill_normal(cols, inv_sqrt_r);
      double d = 0.0, o = 0.0;
      for (std::size_t l = 0; l < r; ++l) {
        const double a0 = cols[2 * l], a1 = cols[2 * l + 1];
        d += a0 * a0;
        o += a0 * a1;
      }
      diag[t] = d - 1.0;
      offdiag[t] = o;
    }
  });
  const Moments md = compute_moments(diag);
  const Moments mo = compute_moments(offdiag);
  return GramElementStats{r, trials, md.mean, md.variance, mo.mean, mo.variance};
}

double lyapounov_l3(std::span<const double> q, std::size_t r) {
  if (r == 0) throw std::invalid_argument("lyapounov_l3: r must be positive");
  const double n2 = std::sqrt(squared_norm(q));
  if (n2 == 0.0) throw std::invalid_argument("lyapounov_l3: q must be non-zero");
  std::vector<double> cubes(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double a = std::fabs(q[i]);
    cubes[i] = a * a * a;
  }
  const double n3 = std::cbrt(pairwise_sum(cubes));
  const double ratio = n3 / n2;
  return 8.0 / (M_PI * std::sqrt(static_cast<double>(r))) * ratio * ratio * ratio;
}

std::vector<double> sample_projection_noise(std::span<const double> q, std::size_t r,
                                            std::size_t trials, RngStream rng,
                                            std::size_t threads) {
  if (q.empty() || squared_norm(q) == 0.0) {
    throw std::invalid_argument("sample_projection_noise: q must be non-zero");
  }
  if (r == 0 || trials == 0) {
    throw std::invalid_argument("sample_projection_noise: r and trials must be positive");
  }
  const std::size_t m = q.size();
  const double inv_sqrt_r = 1.0 / std::sqrt(static_cast<double>(r));
  const double q0 = q[0];
  std::vector<double> out(trials);
  parallel_chunks(trials, threads, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> row(m);
    for (std::size_t t = lo; t < hi; ++t) {
      RngStream trial_rng = rng.substream(t);
      // u_0 = sum_l (A_l . q) A_l0 - q_0, accumulated row by row so A is
      // never materialised.
      double acc = 0.0;
      for (std::size_t l = 0; l < r; ++l) {
        trial_rng.fill_normal(row, inv_sqrt_r);
        double w = 0.0;
        for (std::size_t j = 0; j < m; ++j) w += row[j] * q[j];
        acc += w * row[0];
      }
      out[t] = acc - q0;
    }
  });
  return out;
}

DistanceReport distance_to_gaussian(std::span<const double> q, std::size_t r,
                                    std::size_t trials, std::size_t bins, RngStream rng,
                                    std::size_t threads) {
  if (trials < 1000) throw std::invalid_argument("distance_to_gaussian: need >= 1e3 trials");
  if (bins < 16) throw std::invalid_argument("distance_to_gaussian: need >= 16 bins");
  std::vector<double> samples = sample_projection_noise(q, r, trials, rng, threads);
  DistanceReport rep;
  rep.m = q.size();
  rep.r = r;
  rep.sample_count = trials;
  rep.bin_count = bins;
  rep.target_sigma = std::sqrt(squared_norm(q) / static_cast<double>(r));
  rep.ks_statistic = ks_vs_normal(samples, rep.target_sigma);
  rep.tv_binned = binned_tv_vs_normal(std::move(samples), rep.target_sigma, bins);
  return rep;
}

ScalingFit tv_scaling_experiment(std::span<const std::size_t> m_grid,
                                 std::span<const std::size_t> r_grid, std::size_t trials,
                                 std::size_t seeds, RngStream rng, std::size_t bins,
                                 std::size_t threads) {
  if (m_grid.size() < 3 || r_grid.size() < 3) {
    throw std::invalid_argument("tv_scaling_experiment: need >= 3 values per grid axis");
  }
  if (seeds == 0) throw std::invalid_argument("tv_scaling_experiment: need >= 1 seed");

  ScalingFit fit;
  const std::size_t points = m_grid.size() * r_grid.size();
  fit.cells.resize(points * seeds);

  struct Task {
    std::size_t m, r, point, seed;
  };
  std::vector<Task> tasks;
  tasks.reserve(points * seeds);
  std::size_t point = 0;
  for (std::size_t m : m_grid) {
    for (std::size_t r : r_grid) {
      for (std::size_t s = 0; s < seeds; ++s) tasks.push_back(Task{m, r, point, s});
      ++point;
    }
  }

  parallel_chunks(tasks.size(), threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t idx = lo; idx < hi; ++idx) {
      const Task& task = tasks[idx];
      const std::vector<double> q(task.m, 1.0);
      ScalingCell& cell = fit.cells[task.point * seeds + task.seed];
      cell.m = task.m;
      cell.r = task.r;
      cell.seed = task.seed;
      cell.report = distance_to_gaussian(q, task.r, trials, bins,
                                         rng.substream(task.point).substream(task.seed),
                                         /*threads=*/1);
      cell.l3 = lyapounov_l3(q, task.r);
    }
  });

  fit.grid.resize(points);
  std::vector<double> log_mr(points), log_dist(points);
  std::vector<double> seed_ks(seeds);
  for (std::size_t p = 0; p < points; ++p) {
    for (std::size_t s = 0; s < seeds; ++s) seed_ks[s] = fit.cells[p * seeds + s].report.ks_statistic;
    ScalingPoint& pt = fit.grid[p];
    pt.m = fit.cells[p * seeds].m;
    pt.r = fit.cells[p * seeds].r;
    pt.distance = mean(seed_ks);
    log_mr[p] = std::log(static_cast<double>(pt.m) * static_cast<double>(pt.r));
    log_dist[p] = std::log(pt.distance);
  }
  const LinearFit lf = linear_fit(log_mr, log_dist);
  fit.slope = lf.slope;
  fit.intercept = lf.intercept;
  fit.r_squared = lf.r_squared;
  fit.slope_stderr = lf.slope_stderr;
  return fit;
}

}  // namespace loranoise
