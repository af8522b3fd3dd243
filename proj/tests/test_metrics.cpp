// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "gacoop/metrics.hpp"
#include "gacoop/synthetic.hpp"
#include "gacoop/trainer.hpp"
#include "oracles.hpp"

using namespace gacoop;

TEST(Auroc, Examples) {
  EXPECT_EQ(auroc(Vec64{0.9, 0.8}, Vec64{0.1, 0.2}), 1.0);
  EXPECT_EQ(auroc(Vec64{0.5, 0.5}, Vec64{0.5, 0.5}), 0.5);
  EXPECT_EQ(auroc(Vec64{0.9, 0.3}, Vec64{0.5, 0.1}), 0.75);
  EXPECT_EQ(auroc(Vec64{0.1}, Vec64{0.9}), 0.0);
}

TEST(Auroc, ExactCounts) {
  const auto c = auroc_counts(Vec64{1, 2, 2}, Vec64{2, 0});
  // pairs: (1,2) lose, (1,0) win, (2,2) tie ×2, (2,0) win ×2
  EXPECT_EQ(c.twice_pairs, 12u);
  EXPECT_EQ(c.twice_wins_plus_ties, 2u * 3u + 2u);
}

TEST(Auroc, EmptyInputRejected) { EXPECT_THROW(auroc(Vec64{}, Vec64{1}), Error); }

TEST(FprAtTpr, Example) {
  const Vec64 id{0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.0};
  // 95% of 10 needs all ten ID scores: θ = 0.0, every OOD score passes
  EXPECT_EQ(fpr_at_tpr(id, Vec64{0.95, 0.05, -1.0, -2.0}), 0.5);
  // at TPR 0.5, θ = 0.5
  EXPECT_EQ(fpr_at_tpr(id, Vec64{0.95, 0.5, 0.45, 0.0}, 0.5), 0.5);
}

TEST(FprAtTpr, TiesAtThresholdCountAsPositive) {
  EXPECT_EQ(fpr_at_tpr(Vec64{0.5, 0.5}, Vec64{0.5, 0.4}), 0.5);
}

TEST(Metrics, MatchBruteForceOnTiedScores) {
  SeededRng rng(21);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n_id = 1 + rng.below(60);
    const std::size_t n_ood = 1 + rng.below(60);
    // few distinct levels so a large share of pairs tie
    const std::uint64_t levels = 2 + rng.below(8);
    Vec64 id(n_id);
    Vec64 ood(n_ood);
    for (double& x : id) x = static_cast<double>(rng.below(levels)) / static_cast<double>(levels);
    for (double& x : ood) x = static_cast<double>(rng.below(levels)) / static_cast<double>(levels);
    const auto fast = auroc_counts(id, ood);
    const auto slow = oracle::brute_auroc(id, ood);
    EXPECT_EQ(fast.twice_wins_plus_ties, slow.twice_wins_plus_ties);
    EXPECT_EQ(fast.twice_pairs, slow.twice_pairs);
    EXPECT_EQ(fpr_at_tpr(id, ood), oracle::brute_fpr(id, ood, 0.95));
  }
}

TEST(Metrics, InvariantUnderIncreasingMaps) {
  SeededRng rng(22);
  for (int t = 0; t < 200; ++t) {
    Vec64 id = rng.normal_vector(1 + rng.below(40));
    Vec64 ood = rng.normal_vector(1 + rng.below(40));
    id.push_back(ood[0]);  // force at least one tie
    auto map = [](Vec64 v, auto f) {
      for (double& x : v) x = f(x);
      return v;
    };
    const auto affine = [](double x) { return 2.0 * x + 1.0; };
    const auto cube = [](double x) { return x * x * x; };
    EXPECT_EQ(auroc(map(id, affine), map(ood, affine)), auroc(id, ood));
    EXPECT_EQ(auroc(map(id, cube), map(ood, cube)), auroc(id, ood));
    EXPECT_EQ(fpr_at_tpr(map(id, affine), map(ood, affine)), fpr_at_tpr(id, ood));
    EXPECT_EQ(fpr_at_tpr(map(id, cube), map(ood, cube)), fpr_at_tpr(id, ood));
  }
}

TEST(Metrics, Bounds) {
  SeededRng rng(23);
  for (int t = 0; t < 200; ++t) {
    const Vec64 id = rng.normal_vector(1 + rng.below(30));
    const Vec64 ood = rng.normal_vector(1 + rng.below(30));
    const double a = auroc(id, ood);
    const double f = fpr_at_tpr(id, ood);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0);
    // swapping the roles mirrors the statistic
    EXPECT_NEAR(auroc(ood, id), 1.0 - a, 1e-15);
  }
}

TEST(Argmax, TiesGoLow) {
  EXPECT_EQ(argmax(Vec64{1, 3, 3}), 1u);
  EXPECT_EQ(argmax(Vec64{2}), 0u);
}

TEST(McmScore, BetweenUniformAndOne) {
  const auto enc = FrozenTextEncoder::random(5, 8, 2, 3, 0.1, 3);
  const TextFeatures g = encode_text(PromptParams(2, 3), enc);
  SeededRng rng(24);
  for (int t = 0; t < 100; ++t) {
    const double s = mcm_score(rng.unit_vector(8), g, 0.1);
    EXPECT_GE(s, 0.2 - 1e-15);
    EXPECT_LE(s, 1.0);
  }
}

namespace {

struct SmallData {
  SynthConfig synth;
  FrozenTextEncoder enc;
  SyntheticBenchmark data;
};

SmallData small_data() {
  Config cfg;
  cfg.synth.n_classes = 4;
  cfg.synth.embed_dim = 16;
  cfg.synth.n_regions = 3;
  cfg.synth.test_per_class = 10;
  cfg.synth.n_ood_classes = 3;
  cfg.synth.n_ood_samples = 30;
  cfg.train.context_length = 2;
  cfg.train.token_dim = 4;
  auto enc = make_encoder(cfg.train, cfg.synth.n_classes, cfg.synth.embed_dim);
  auto data = generate_synthetic(cfg.synth, enc);
  return {cfg.synth, std::move(enc), std::move(data)};
}

}  // namespace

TEST(Evaluate, AveragesOverDatasets) {
  const auto d = small_data();
  const PromptParams p(2, 4);
  const EvalReport one = evaluate(p, d.enc, d.data.id_test, {{"a", d.data.ood}});
  const EvalReport two = evaluate(p, d.enc, d.data.id_test, {{"a", d.data.ood}, {"b", d.data.ood}});
  EXPECT_EQ(two.per_dataset.size(), 2u);
  EXPECT_EQ(two.avg_auroc, one.avg_auroc);
  EXPECT_EQ(two.avg_fpr95, one.avg_fpr95);
  EXPECT_EQ(one.per_dataset[0].auroc, one.avg_auroc);
  EXPECT_GE(one.id_accuracy, 0.0);
  EXPECT_LE(one.id_accuracy, 1.0);
}

TEST(Evaluate, Deterministic) {
  const auto d = small_data();
  const PromptParams p(2, 4, Vec64(8, 0.1));
  const EvalReport a = evaluate(p, d.enc, d.data.id_test, {{"ood", d.data.ood}});
  const EvalReport b = evaluate(p, d.enc, d.data.id_test, {{"ood", d.data.ood}});
  EXPECT_EQ(report_csv_rows(a, "coop", 0), report_csv_rows(b, "coop", 0));
}

TEST(Evaluate, RejectsMismatchedBanks) {
  const auto d = small_data();
  FeatureBank wrong = d.data.ood;
  wrong.embed_dim = 8;
  EXPECT_THROW(evaluate(PromptParams(2, 4), d.enc, d.data.id_test, {{"ood", wrong}}), Error);
  EXPECT_THROW(evaluate(PromptParams(2, 4), d.enc, d.data.id_test, {}), Error);
}

TEST(ReportCsv, RowsAndFormatting) {
  EvalReport r;
  r.per_dataset = {{"x", 0.25, 0.875}};
  r.avg_fpr95 = 0.25;
  r.avg_auroc = 0.875;
  r.id_accuracy = 1.0;
  EXPECT_EQ(report_csv_rows(r, "gacoop", 7),
            "gacoop,x,0.250000,0.875000,1.000000,0.000000,7\n"
            "gacoop,average,0.250000,0.875000,1.000000,0.000000,7\n");
}
