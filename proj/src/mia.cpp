// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0

#include "loranoise/mia.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>

#include "loranoise/parallel.hpp"
#include "loranoise/stats.hpp"

namespace loranoise {

namespace {

double eta_for(const StudyConfig& config, const TrainMethod& method) {
  switch (method.kind) {
    case TrainMethod::Kind::lora:
    case TrainMethod::Kind::lora_frozen:
      return config.eta_lora;
    case TrainMethod::Kind::dpsgd:
      return config.eta_dpsgd;
    default:
      return config.eta_full;
  }
}

double rate_below(std::span<const double> scores, double gamma) {
  std::size_t hits = 0;
  for (double s : scores) {
    if (s < gamma) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(scores.size());
}

}  // namespace

double membership_score(const ToyModel& model, const ToyModel& ref_model, const Dataset& data,
                        std::size_t row) {
  if (row >= data.size()) throw std::invalid_argument("membership_score: row out of range");
  return model.per_sample_losses(data)[row] - ref_model.per_sample_losses(data)[row];
}

std::vector<double> membership_scores(const ToyModel& model, const ToyModel& ref_model,
                                      const Dataset& data) {
  const std::vector<double> lhs = model.per_sample_losses(data);
  const std::vector<double> rhs = ref_model.per_sample_losses(data);
  std::vector<double> scores(lhs.size());
  for (std::size_t i = 0; i < lhs.size(); ++i) scores[i] = lhs[i] - rhs[i];
  return scores;
}

double calibrate_threshold(std::span<const double> nonmember_scores, double alpha) {
  if (nonmember_scores.empty()) {
    throw std::invalid_argument("calibrate_threshold: empty score set");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("calibrate_threshold: alpha must be in (0, 1)");
  }
  std::vector<double> sorted(nonmember_scores.begin(), nonmember_scores.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  // Largest observed value whose <=-count stays within alpha. Scanning
  // last occurrences descending visits each distinct value once.
  for (std::size_t i = sorted.size(); i-- > 0;) {
    if (i + 1 < sorted.size() && sorted[i] == sorted[i + 1]) continue;
    if (static_cast<double>(i + 1) / n <= alpha) return sorted[i];
  }
  return sorted.front() - 1.0;  // sentinel below every score: FPR = TPR = 0
}

MiaMetrics mia_evaluate(std::span<const double> member_scores,
                        std::span<const double> nonmember_scores,
                        std::span<const double> alphas) {
  if (member_scores.empty() || nonmember_scores.empty()) {
    throw std::invalid_argument("mia_evaluate: both score sets must be non-empty");
  }
  std::vector<double> mem(member_scores.begin(), member_scores.end());
  std::vector<double> non(nonmember_scores.begin(), nonmember_scores.end());
  std::sort(mem.begin(), mem.end());
  std::sort(non.begin(), non.end());

  // AUC = P(member < non-member) + P(tie)/2, counted by a sorted merge.
  std::size_t wins = 0, ties = 0;
  std::size_t lo = 0, hi = 0;  // mem[0, lo) < v <= mem[lo, hi) == v < mem[hi, ...)
  for (double v : non) {
    while (lo < mem.size() && mem[lo] < v) ++lo;
    if (hi < lo) hi = lo;
    while (hi < mem.size() && mem[hi] <= v) ++hi;
    wins += lo;
    ties += hi - lo;
  }

  MiaMetrics metrics;
  metrics.auc = (static_cast<double>(wins) + 0.5 * static_cast<double>(ties)) /
                (static_cast<double>(mem.size()) * static_cast<double>(non.size()));
  metrics.alphas.assign(alphas.begin(), alphas.end());
  for (double alpha : alphas) {
    const double gamma = calibrate_threshold(nonmember_scores, alpha);
    metrics.gamma.push_back(gamma);
    metrics.tpr.push_back(rate_below(member_scores, gamma));
    metrics.achieved_fpr.push_back(rate_below(nonmember_scores, gamma));
  }
  return metrics;
}

std::vector<MiaReport> run_mia_study(const StudyConfig& config,
                                     std::span<const TrainMethod> methods, std::size_t seeds,
                                     RngStream rng) {
  if (seeds == 0) throw std::invalid_argument("run_mia_study: need at least one seed");
  if (methods.empty()) throw std::invalid_argument("run_mia_study: no methods given");

  const ToyModelConfig arch{{config.dim, config.hidden, config.hidden, config.classes},
                            {true, true, false}};
  const std::vector<double> alphas = {0.10, 0.01};

  std::vector<std::vector<MiaSeedRecord>> records(methods.size(),
                                                  std::vector<MiaSeedRecord>(seeds));
  std::mutex error_mutex;
  std::exception_ptr first_error;

  parallel_chunks(seeds, config.threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t s = lo; s < hi; ++s) {
      try {
        const RngStream stream = rng.substream(s);
        const SplitSet data = synth_dataset(stream.substream(0), config.n_per_split,
                                            config.dim, config.classes, config.separation);
        const ToyModel base = ToyModel::create(stream.substream(1), arch);
        const TrainResult pretrained =
            train(base, data.auxiliary, TrainMethod::full(), config.pretrain_epochs,
                  config.pretrain_eta, stream.substream(2), config.batch_size);
        const ToyModel& ref = pretrained.model;

        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
          TrainResult tuned;
          try {
            tuned = train(ref, data.train, methods[mi], config.epochs,
                          eta_for(config, methods[mi]), stream.substream(3 + mi),
                          config.batch_size);
          } catch (const DivergenceError& e) {
            throw DivergenceError(std::string(e.what()) + " [study method=" +
                                  methods[mi].name() + " seed=" + std::to_string(s) + "]");
          }
          const std::vector<double> member = membership_scores(tuned.model, ref, data.train);
          const std::vector<double> nonmember =
              membership_scores(tuned.model, ref, data.validation);
          const MiaMetrics metrics = mia_evaluate(member, nonmember, alphas);

          MiaSeedRecord& rec = records[mi][s];
          rec.seed = s;
          rec.auc = metrics.auc;
          rec.tpr10 = metrics.tpr[0];
          rec.tpr1 = metrics.tpr[1];
          rec.gamma10 = metrics.gamma[0];
          rec.gamma1 = metrics.gamma[1];
          rec.val_loss = tuned.model.mean_loss(data.validation);
        }
      } catch (...) {
        const std::lock_guard<std::mutex> guard(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  });
  if (first_error) std::rethrow_exception(first_error);

  std::vector<MiaReport> reports;
  reports.reserve(methods.size());
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    MiaReport report;
    report.method = methods[mi].name();
    report.per_seed = std::move(records[mi]);
    std::vector<double> auc, tpr10, tpr1, val;
    for (const MiaSeedRecord& rec : report.per_seed) {
      auc.push_back(rec.auc);
      tpr10.push_back(rec.tpr10);
      tpr1.push_back(rec.tpr1);
      val.push_back(rec.val_loss);
    }
    const Moments ma = compute_moments(auc);
    const Moments mv = compute_moments(val);
    report.mean_auc = ma.mean;
    report.std_auc = std::sqrt(ma.variance);
    report.mean_tpr10 = mean(tpr10);
    report.mean_tpr1 = mean(tpr1);
    report.mean_val_loss = mv.mean;
    report.std_val_loss = std::sqrt(mv.variance);
    reports.push_back(std::move(report));
  }
  return reports;
}

std::vector<double> per_sample_grad_norms(const ToyModel& model, const Dataset& data) {
  const std::vector<std::vector<Matrix>> grads = model.per_sample_gradients(data);
  const std::vector<std::size_t> adapters = model.adapter_layers();
  std::vector<double> norms(grads.size());
  for (std::size_t i = 0; i < grads.size(); ++i) {
    std::vector<double> sq;
    sq.reserve(adapters.size());
    for (std::size_t l : adapters) {
      const double f = frobenius_norm(grads[i][l]);
      sq.push_back(f * f);
    }
    norms[i] = std::sqrt(pairwise_sum(sq));
  }
  return norms;
}

DpCalibration calibrate_dpsgd(const StudyConfig& config, std::size_t seeds, RngStream rng,
                              double noise_to_median) {
  if (seeds == 0) throw std::invalid_argument("calibrate_dpsgd: need at least one seed");
  if (!(noise_to_median > 0.0)) {
    throw std::invalid_argument("calibrate_dpsgd: noise_to_median must be positive");
  }
  const ToyModelConfig arch{{config.dim, config.hidden, config.hidden, config.classes},
                            {true, true, false}};
  DpCalibration cal;
  std::vector<double> pooled;
  for (std::size_t s = 0; s < seeds; ++s) {
    const RngStream stream = rng.substream(s);
    const SplitSet data = synth_dataset(stream.substream(0), config.n_per_split, config.dim,
                                        config.classes, config.separation);
    const ToyModel base = ToyModel::create(stream.substream(1), arch);
    const TrainResult pretrained =
        train(base, data.auxiliary, TrainMethod::full(), config.pretrain_epochs,
              config.pretrain_eta, stream.substream(2), config.batch_size);
    std::vector<double> norms = per_sample_grad_norms(pretrained.model, data.train);
    cal.per_seed_median.push_back(median(norms));
    pooled.insert(pooled.end(), norms.begin(), norms.end());
  }
  cal.pooled_median = median(pooled);
  cal.clip = cal.pooled_median;
  // c == median makes c*z/b == noise_to_median * median exactly when
  // z == noise_to_median * b.
  cal.noise_scale = noise_to_median * static_cast<double>(config.batch_size);
  return cal;
}

AblationTable ablation_rank(const StudyConfig& config, std::span<const std::size_t> r_grid,
                            std::size_t seeds, RngStream rng) {
  if (r_grid.size() < 3) throw std::invalid_argument("ablation_rank: need >= 3 rank values");
  AblationTable table;
  std::vector<double> ranks, aucs, losses;
  for (std::size_t r : r_grid) {
    const TrainMethod method = TrainMethod::lora(r);
    // Same root stream per rank: seed s sees identical data and reference
    // across ranks, so the rank effect is paired.
    std::vector<MiaReport> reports = run_mia_study(config, {&method, 1}, seeds, rng);
    MiaReport& rep = reports.front();
    table.rows.push_back(AblationRow{r, rep.mean_auc, rep.mean_tpr10, rep.mean_val_loss});
    ranks.push_back(static_cast<double>(r));
    aucs.push_back(rep.mean_auc);
    losses.push_back(rep.mean_val_loss);
    table.reports.push_back(std::move(rep));
  }
  table.spearman_rank_auc = spearman(ranks, aucs);
  table.spearman_rank_val_loss = spearman(ranks, losses);
  return table;
}

}  // namespace loranoise
