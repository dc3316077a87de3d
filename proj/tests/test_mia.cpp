// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "loranoise/matrix.hpp"
#include "loranoise/mia.hpp"
#include "loranoise/model.hpp"
#include "loranoise/rng.hpp"
#include "loranoise/stats.hpp"

using namespace loranoise;

namespace {

StudyConfig smoke_config() {
  StudyConfig c;
  c.n_per_split = 40;
  c.dim = 8;
  c.classes = 4;
  c.hidden = 16;
  c.separation = 1.0;
  c.pretrain_epochs = 1;
  c.pretrain_eta = 0.1;
  c.epochs = 6;
  c.batch_size = 20;
  c.eta_full = 0.05;
  c.eta_lora = 0.05;
  c.eta_dpsgd = 0.05;
  return c;
}

double brute_force_auc(std::span<const double> members, std::span<const double> nonmembers) {
  double wins = 0.0, ties = 0.0;
  for (double ms : members) {
    for (double ns : nonmembers) {
      if (ms < ns) wins += 1.0;
      if (ms == ns) ties += 1.0;
    }
  }
  return (wins + 0.5 * ties) /
         (static_cast<double>(members.size()) * static_cast<double>(nonmembers.size()));
}

}  // namespace

TEST_SUITE("mia") {

TEST_CASE("membership scores vanish when model and reference coincide") {
  const ToyModel net = ToyModel::create(RngStream(1), ToyModelConfig{{6, 10, 3}, {}});
  const SplitSet data = synth_dataset(RngStream(2), 15, 6, 3, 1.0);
  const std::vector<double> scores = membership_scores(net, net, data.train);
  REQUIRE(scores.size() == 15);
  for (double s : scores) CHECK(s == 0.0);
}

TEST_CASE("membership scores are antisymmetric in the model pair") {
  const ToyModel a = ToyModel::create(RngStream(3), ToyModelConfig{{5, 8, 3}, {}});
  const ToyModel b = ToyModel::create(RngStream(4), ToyModelConfig{{5, 8, 3}, {}});
  const SplitSet data = synth_dataset(RngStream(5), 10, 5, 3, 1.0);
  const std::vector<double> ab = membership_scores(a, b, data.train);
  const std::vector<double> ba = membership_scores(b, a, data.train);
  for (std::size_t i = 0; i < ab.size(); ++i) CHECK(ab[i] == -ba[i]);
  CHECK(membership_score(a, b, data.train, 2) == ab[2]);
}

TEST_CASE("a memorizing model scores members below non-members") {
  RngStream rng(6);
  const SplitSet data = synth_dataset(rng.substream(0), 30, 6, 3, 0.5);
  const ToyModel ref = ToyModel::create(rng.substream(1), ToyModelConfig{{6, 24, 3}, {}});
  const TrainResult fit =
      train(ref, data.train, TrainMethod::full(), 60, 0.1, rng.substream(2), 30);

  const std::vector<double> member = membership_scores(fit.model, ref, data.train);
  const std::vector<double> nonmember = membership_scores(fit.model, ref, data.validation);
  CHECK(mean(member) < mean(nonmember));
}

TEST_CASE("threshold calibration on a five-score oracle") {
  const std::vector<double> scores{5.0, 1.0, 3.0, 2.0, 4.0};
  // alpha at 1/N admits exactly the smallest score.
  CHECK(calibrate_threshold(scores, 0.2) == 1.0);
  CHECK(calibrate_threshold(scores, 0.5) == 2.0);
  CHECK(calibrate_threshold(scores, 0.999) == 4.0);
  // Just below 1/N nothing is admissible: sentinel under the minimum.
  CHECK(calibrate_threshold(scores, 0.19) == 0.0);

  // All-tied scores cannot meet any alpha < 1.
  const std::vector<double> tied{2.0, 2.0, 2.0};
  CHECK(calibrate_threshold(tied, 0.5) == 1.0);

  CHECK_THROWS_AS(calibrate_threshold(scores, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_threshold(scores, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_threshold(std::vector<double>{}, 0.1), std::invalid_argument);
}

TEST_CASE("achieved fpr never exceeds alpha and tpr grows with alpha") {
  RngStream rng(7);
  std::vector<double> members(200), nonmembers(200);
  rng.substream(0).fill_normal(members, 1.0);
  rng.substream(1).fill_normal(nonmembers, 1.0);
  for (double& v : members) v -= 0.4;

  const std::vector<double> alphas{0.01, 0.05, 0.1, 0.25, 0.5};
  const MiaMetrics metrics = mia_evaluate(members, nonmembers, alphas);
  REQUIRE(metrics.gamma.size() == alphas.size());
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    CHECK(metrics.achieved_fpr[i] <= alphas[i]);
    CHECK(metrics.tpr[i] >= 0.0);
    CHECK(metrics.tpr[i] <= 1.0);
    if (i > 0) CHECK(metrics.tpr[i] >= metrics.tpr[i - 1]);
  }
}

TEST_CASE("auc equals the quadratic-time pair count, ties at half weight") {
  RngStream rng(8);
  std::vector<double> members(20), nonmembers(20);
  rng.substream(0).fill_normal(members, 1.0);
  rng.substream(1).fill_normal(nonmembers, 1.0);
  // Insert exact ties across the two sets.
  members[3] = nonmembers[7] = 0.125;
  members[11] = nonmembers[2] = -0.5;

  const std::vector<double> alphas{0.1};
  const MiaMetrics metrics = mia_evaluate(members, nonmembers, alphas);
  CHECK(metrics.auc == brute_force_auc(members, nonmembers));
}

TEST_CASE("auc endpoints: tied singletons, perfect separation, null data") {
  const std::vector<double> alphas{0.10, 0.01};

  const std::vector<double> same{0.0};
  CHECK(mia_evaluate(same, same, alphas).auc == 0.5);

  std::vector<double> low(50), high(50);
  for (std::size_t i = 0; i < 50; ++i) {
    low[i] = -10.0 - static_cast<double>(i);
    high[i] = 10.0 + static_cast<double>(i);
  }
  const MiaMetrics perfect = mia_evaluate(low, high, alphas);
  CHECK(perfect.auc == 1.0);
  for (double t : perfect.tpr) CHECK(t == 1.0);

  RngStream rng(9);
  std::vector<double> null_m(2000), null_n(2000);
  rng.substream(0).fill_normal(null_m, 1.0);
  rng.substream(1).fill_normal(null_n, 1.0);
  const double null_auc = mia_evaluate(null_m, null_n, alphas).auc;
  CHECK(std::abs(null_auc - 0.5) <= 0.03);
}

TEST_CASE("study smoke: report structure, bounds, and determinism") {
  const StudyConfig config = smoke_config();
  const std::vector<TrainMethod> methods{TrainMethod::full(), TrainMethod::lora(4),
                                         TrainMethod::masked_sgd(),
                                         TrainMethod::dpsgd(0.5, 1.0)};
  const std::vector<MiaReport> reports = run_mia_study(config, methods, 2, RngStream(10));
  REQUIRE(reports.size() == methods.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const MiaReport& rep = reports[i];
    CHECK(rep.method == methods[i].name());
    REQUIRE(rep.per_seed.size() == 2);
    double auc_sum = 0.0;
    for (const MiaSeedRecord& rec : rep.per_seed) {
      CHECK(rec.auc >= 0.0);
      CHECK(rec.auc <= 1.0);
      CHECK(rec.tpr10 >= 0.0);
      CHECK(rec.tpr10 <= 1.0);
      CHECK(rec.tpr1 <= rec.tpr10 + 1e-12);
      CHECK(std::isfinite(rec.val_loss));
      CHECK(rec.val_loss > 0.0);
      auc_sum += rec.auc;
    }
    CHECK(rep.mean_auc == doctest::Approx(auc_sum / 2.0).epsilon(1e-12));
  }

  const std::vector<MiaReport> replay = run_mia_study(config, methods, 2, RngStream(10));
  for (std::size_t i = 0; i < reports.size(); ++i) {
    CHECK(replay[i].mean_auc == reports[i].mean_auc);
    CHECK(replay[i].mean_val_loss == reports[i].mean_val_loss);
    for (std::size_t s = 0; s < reports[i].per_seed.size(); ++s) {
      CHECK(replay[i].per_seed[s].auc == reports[i].per_seed[s].auc);
      CHECK(replay[i].per_seed[s].val_loss == reports[i].per_seed[s].val_loss);
    }
  }
}

TEST_CASE("rank ablation: paired seeds, table shape, correlation bounds") {
  const StudyConfig config = smoke_config();
  const std::vector<std::size_t> grid{2, 4, 8};
  const AblationTable table = ablation_rank(config, grid, 2, RngStream(11));
  REQUIRE(table.rows.size() == 3);
  REQUIRE(table.reports.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(table.rows[i].rank == grid[i]);
    CHECK(table.rows[i].mean_auc == doctest::Approx(table.reports[i].mean_auc).epsilon(1e-15));
    REQUIRE(table.reports[i].per_seed.size() == 2);
    // Paired design: the same seed sequence underlies every rank.
    CHECK(table.reports[i].per_seed[0].seed == table.reports[0].per_seed[0].seed);
    CHECK(table.reports[i].per_seed[1].seed == table.reports[0].per_seed[1].seed);
  }
  CHECK(std::abs(table.spearman_rank_auc) <= 1.0);
  CHECK(std::abs(table.spearman_rank_val_loss) <= 1.0);
}

TEST_CASE("full-rank adapters track the unconstrained update") {
  StudyConfig config = smoke_config();
  config.dim = 16;
  config.hidden = 16;
  config.n_per_split = 60;
  config.epochs = 20;
  config.batch_size = 30;
  const std::vector<TrainMethod> methods{TrainMethod::masked_sgd(), TrainMethod::lora(16)};
  const std::vector<MiaReport> reports = run_mia_study(config, methods, 6, RngStream(12));
  REQUIRE(reports.size() == 2);
  CHECK(std::abs(reports[1].mean_auc - reports[0].mean_auc) <= 0.08);
}

TEST_CASE("per-sample gradient norms stack the adapter layers") {
  RngStream rng(13);
  ToyModel net = ToyModel::create(rng.substream(0), ToyModelConfig{{6, 12, 4}, {}});
  net.set_adapter_mask({true, false});
  const SplitSet data = synth_dataset(rng.substream(1), 10, 6, 4, 1.0);

  const std::vector<double> norms = per_sample_grad_norms(net, data.train);
  const std::vector<std::vector<Matrix>> per_sample = net.per_sample_gradients(data.train);
  REQUIRE(norms.size() == 10);
  for (std::size_t i = 0; i < norms.size(); ++i) {
    double sum_sq = 0.0;
    for (std::size_t l : net.adapter_layers()) {
      const double f = frobenius_norm(per_sample[i][l]);
      sum_sq += f * f;
    }
    CHECK(norms[i] == doctest::Approx(std::sqrt(sum_sq)).epsilon(1e-12));
    CHECK(norms[i] >= 0.0);
  }
}

TEST_CASE("dpsgd calibration pins the noise floor to the pooled median") {
  const StudyConfig config = smoke_config();
  const DpCalibration cal = calibrate_dpsgd(config, 3, RngStream(14), 0.75);
  CHECK(cal.clip > 0.0);
  CHECK(cal.noise_scale > 0.0);
  REQUIRE(cal.per_seed_median.size() == 3);
  double lo = cal.per_seed_median[0], hi = cal.per_seed_median[0];
  for (double v : cal.per_seed_median) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(cal.pooled_median >= lo);
  CHECK(cal.pooled_median <= hi);
  CHECK(cal.clip == cal.pooled_median);
  CHECK(cal.noise_std(config.batch_size) ==
        doctest::Approx(0.75 * cal.pooled_median).epsilon(1e-12));

  const DpCalibration replay = calibrate_dpsgd(config, 3, RngStream(14), 0.75);
  CHECK(replay.clip == cal.clip);
  CHECK(replay.noise_scale == cal.noise_scale);
}

}  // TEST_SUITE("mia")
