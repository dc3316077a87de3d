// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "loranoise/model.hpp"
#include "loranoise/rng.hpp"

namespace loranoise {

// Calibrated membership score of one sample: per-sample loss under the
// candidate model minus the loss under the reference model. Lower means
// more member-like; a sample is classified as a member when score < gamma.
double membership_score(const ToyModel& model, const ToyModel& ref_model, const Dataset& data,
                        std::size_t row);
std::vector<double> membership_scores(const ToyModel& model, const ToyModel& ref_model,
                                      const Dataset& data);

// Largest observed score gamma such that the fraction of non-member
// scores <= gamma stays within alpha; when even the smallest score
// overshoots (e.g. all scores tie), returns a sentinel below min(scores)
// so that FPR = TPR = 0. Classification itself is strict (score < gamma),
// so the achieved FPR never exceeds alpha.
double calibrate_threshold(std::span<const double> nonmember_scores, double alpha);

struct MiaMetrics {
  double auc = 0.5;  // P(member score < non-member score), ties count half
  std::vector<double> alphas;
  std::vector<double> gamma;         // calibrated threshold per alpha
  std::vector<double> tpr;           // member rate below gamma
  std::vector<double> achieved_fpr;  // non-member rate below gamma (<= alpha)
};

MiaMetrics mia_evaluate(std::span<const double> member_scores,
                        std::span<const double> nonmember_scores,
                        std::span<const double> alphas);

struct MiaSeedRecord {
  std::uint64_t seed = 0;
  double auc = 0.0;
  double tpr10 = 0.0;  // TPR at FPR <= 0.10
  double tpr1 = 0.0;   // TPR at FPR <= 0.01
  double val_loss = 0.0;
  double gamma10 = 0.0;
  double gamma1 = 0.0;
};

struct MiaReport {
  std::string method;
  std::vector<MiaSeedRecord> per_seed;
  double mean_auc = 0.0;
  double std_auc = 0.0;
  double mean_tpr10 = 0.0;
  double mean_tpr1 = 0.0;
  double mean_val_loss = 0.0;
  double std_val_loss = 0.0;
};

// Study-wide knobs: data geometry, architecture, pretraining of the
// reference model on the auxiliary split, and per-method learning rates
// (toy-scale rates found by a small sweep; recorded, not asserted).
struct StudyConfig {
  std::size_t n_per_split = 200;
  std::size_t dim = 32;
  std::size_t classes = 4;
  std::size_t hidden = 64;
  double separation = 1.0;

  std::size_t pretrain_epochs = 2;
  double pretrain_eta = 0.10;

  std::size_t epochs = 40;
  std::size_t batch_size = 50;
  double eta_full = 0.02;
  double eta_lora = 0.05;
  double eta_dpsgd = 0.05;

  std::size_t threads = 1;
};

// Per seed: synthesise data, pretrain the reference on the auxiliary
// split (full SGD), fine-tune each method from the reference on the train
// split, then score train rows (members) against validation rows
// (non-members) at alpha in {0.10, 0.01}. Reports aggregate mean/std over
// seeds per method. Training failures carry method/seed context.
std::vector<MiaReport> run_mia_study(const StudyConfig& config,
                                     std::span<const TrainMethod> methods, std::size_t seeds,
                                     RngStream rng);

// Per-sample gradient norm over the adapter layers (L2 across the
// flattened layer gradients), evaluated at the given model. This is the
// quantity DPSGD clipping acts on, so it drives clip calibration.
std::vector<double> per_sample_grad_norms(const ToyModel& model, const Dataset& data);

// DPSGD knobs derived from the data instead of hand-picked: clip at the
// pooled median per-sample gradient norm of the reference models, then
// set z so the per-entry noise std c*z/b is noise_to_median times that
// median. Replays the same per-seed reference models run_mia_study uses.
struct DpCalibration {
  double clip = 0.0;
  double noise_scale = 0.0;
  double pooled_median = 0.0;
  std::vector<double> per_seed_median;
  double noise_std(std::size_t batch_size) const {
    return clip * noise_scale / static_cast<double>(batch_size);
  }
};
DpCalibration calibrate_dpsgd(const StudyConfig& config, std::size_t seeds, RngStream rng,
                              double noise_to_median = 0.75);

struct AblationRow {
  std::size_t rank = 0;
  double mean_auc = 0.0;
  double mean_tpr10 = 0.0;
  double mean_val_loss = 0.0;
};

struct AblationTable {
  std::vector<AblationRow> rows;
  double spearman_rank_auc = 0.0;       // expected > 0 (privacy worsens with r)
  double spearman_rank_val_loss = 0.0;  // expected < 0 (utility improves with r)
  std::vector<MiaReport> reports;
};

// run_mia_study with method lora(r) for each r in the grid, sharing the
// per-seed data and reference across ranks so the rank effect is paired.
AblationTable ablation_rank(const StudyConfig& config, std::span<const std::size_t> r_grid,
                            std::size_t seeds, RngStream rng);

}  // namespace loranoise
