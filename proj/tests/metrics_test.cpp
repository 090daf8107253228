/* Copyright 2026 The maxsep Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "maxsep/metrics.hpp"
#include "maxsep/diffcore.hpp"
#include "oracles.hpp"

namespace maxsep {
namespace {

ScoredTrials make_trials(const std::vector<double>& pos, const std::vector<double>& neg) {
  ScoredTrials t;
  for (double s : pos) t.add(s, true);
  for (double s : neg) t.add(s, false);
  return t;
}

const std::vector<double> kPos = {0.9, 0.4, 0.6};
const std::vector<double> kNeg = {0.5, 0.3, 0.1};

TEST(RocCurve, HandTripleAtThreshold) {
  // Under score >= t, threshold 0.45 accepts exactly what the ROC point at
  // the next score up (0.5) accepts.
  const auto curve = roc_curve(make_trials(kPos, kNeg));
  const auto it = std::find_if(curve.begin(), curve.end(), [](const RocPoint& p) { return p.threshold >= 0.45; });
  ASSERT_NE(it, curve.end());
  EXPECT_EQ(it->threshold, 0.5);
  EXPECT_NEAR(it->fpr, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(it->fnr, 1.0 / 3.0, 1e-15);
}

TEST(RocCurve, PerfectSeparationHasZeroPoint) {
  const auto curve = roc_curve(make_trials({0.9, 0.8}, {0.1, 0.2}));
  bool zero = false;
  for (const auto& p : curve) zero |= p.fpr == 0.0 && p.fnr == 0.0;
  EXPECT_TRUE(zero);
}

TEST(RocCurve, AllScoresEqual) {
  const auto curve = roc_curve(make_trials({0.5, 0.5}, {0.5, 0.5, 0.5}));
  bool found = false;
  for (const auto& p : curve) found |= p.fpr == 1.0 && p.fnr == 0.0 && p.threshold <= 0.5;
  EXPECT_TRUE(found);
}

TEST(RocCurve, SortedWithSentinels) {
  const auto curve = roc_curve(make_trials(kPos, kNeg));
  EXPECT_TRUE(std::isinf(curve.front().threshold) && curve.front().threshold < 0);
  EXPECT_TRUE(std::isinf(curve.back().threshold) && curve.back().threshold > 0);
  EXPECT_EQ(curve.size(), 8u);
  for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_LT(curve[i - 1].threshold, curve[i].threshold);
}

TEST(SingleClass, Rejected) {
  const auto t = make_trials({0.1, 0.2}, {});
  EXPECT_THROW(roc_curve(t), std::invalid_argument);
  EXPECT_THROW(eer(t), std::invalid_argument);
  EXPECT_THROW(auc(t), std::invalid_argument);
  EXPECT_THROW(auc(make_trials({}, {0.3})), std::invalid_argument);
}

TEST(Eer, HandTriple) { EXPECT_NEAR(eer(make_trials(kPos, kNeg)).rate, 1.0 / 3.0, 1e-12); }

TEST(Eer, SeparatedAndInverted) {
  EXPECT_EQ(eer(make_trials({0.9, 0.8}, {0.1, 0.2})).rate, 0.0);
  EXPECT_EQ(eer(make_trials({0.1, 0.2}, {0.9, 0.8})).rate, 1.0);
}

TEST(Auc, HandTripleAndExtremes) {
  EXPECT_NEAR(auc(make_trials(kPos, kNeg)), 8.0 / 9.0, 1e-15);
  EXPECT_EQ(auc(make_trials({0.9, 0.8}, {0.1, 0.2})), 1.0);
  EXPECT_EQ(auc(make_trials({0.5}, {0.5})), 0.5);
}

TEST(Auc, ChanceLevelForIndependentLabels) {
  Rng rng(1);
  std::uniform_real_distribution<double> u;
  std::bernoulli_distribution coin(0.5);
  ScoredTrials t;
  for (int i = 0; i < 20000; ++i) t.add(u(rng), coin(rng));
  EXPECT_NEAR(auc(t), 0.5, 0.02);
}

TEST(Oracles, RandomSetsAgreeWithBruteForce) {
  Rng rng(2);
  for (int k = 0; k < 50; ++k) {
    const int n = std::uniform_int_distribution<int>(2, 200)(rng);
    const int n_pos = std::uniform_int_distribution<int>(1, n - 1)(rng);
    // coarse scores make ties common
    std::uniform_int_distribution<int> level(0, k % 2 ? 20 : 1000000);
    std::vector<double> pos, neg;
    for (int i = 0; i < n; ++i) (i < n_pos ? pos : neg).push_back(level(rng) / 20.0 + (i < n_pos ? 0.1 : 0.0));
    const auto trials = make_trials(pos, neg);
    EXPECT_NEAR(auc(trials), testing::brute_force_auc(pos, neg), 1e-12);
    const auto sweep = testing::exhaustive_eer_sweep(pos, neg);
    EXPECT_LE(std::abs(eer(trials).rate - sweep.best), sweep.step) << "set " << k;
  }
}

TEST(Properties, MonotoneTransformAndSymmetry) {
  Rng rng(3);
  std::normal_distribution<double> g;
  std::vector<double> pos, neg;
  for (int i = 0; i < 60; ++i) pos.push_back(g(rng) + 0.7);
  for (int i = 0; i < 80; ++i) neg.push_back(g(rng));
  const auto base = make_trials(pos, neg);
  auto transformed = base;
  for (auto& s : transformed.scores) s = std::exp(2.0 * s) + 5.0;
  EXPECT_NEAR(auc(transformed), auc(base), 1e-15);
  EXPECT_NEAR(eer(transformed).rate, eer(base).rate, 1e-12);

  ScoredTrials flipped;
  for (std::size_t i = 0; i < base.size(); ++i) flipped.add(-base.scores[i], !base.labels[i]);
  EXPECT_NEAR(eer(flipped).rate, eer(base).rate, 1e-12);
}

TEST(MatchingAccuracy, Examples) {
  std::vector<MatchOutcome> all{{1, 1}, {0, 0}}, none{{1, 0}, {0, 1}};
  EXPECT_EQ(matching_accuracy(all, 2), 1.0);
  EXPECT_EQ(matching_accuracy(none, 2), 0.0);
  EXPECT_THROW(matching_accuracy(std::vector<MatchOutcome>{}, 2), std::invalid_argument);

  Rng rng(4);
  std::uniform_int_distribution<std::size_t> pick(0, 1);
  std::vector<MatchOutcome> random;
  for (int i = 0; i < 10000; ++i) random.push_back({pick(rng), pick(rng)});
  EXPECT_NEAR(matching_accuracy(random, 2), 0.5, 0.02);
}

MetricsReport sample_report() {
  MetricsReport r;
  r.eer = 0.125;
  r.auc = 0.9375;
  r.eer_threshold = 0.3;
  r.n_verification_trials = 16;
  r.matching_accuracy = {{4, 0.5}, {2, 0.75}};
  r.n_matching_trials = {{4, 10}, {2, 10}};
  r.seed = 9;
  r.config_digest = "abc";
  r.dataset_digest = "def";
  r.trial_digests = {{"verification", "123"}};
  r.run_config = {{"epochs", 3}};
  return r;
}

TEST(MetricsReport, JsonRoundTrip) {
  const auto r = sample_report();
  const auto back = metrics_report_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(to_json(back), to_json(r));
  EXPECT_EQ(back.eer, r.eer);
  EXPECT_EQ(back.matching_accuracy, r.matching_accuracy);
}

TEST(MetricsReport, RejectsRateOutsideUnitInterval) {
  auto j = to_json(sample_report());
  j["auc"] = 1.5;
  EXPECT_THROW(metrics_report_from_json(j), std::invalid_argument);
}

TEST(MetricsReport, CsvOutputs) {
  const auto r = sample_report();
  EXPECT_EQ(metrics_csv_header(r), "seed,config_digest,dataset_digest,eer,auc,eer_threshold,n_verification_trials,acc_nc2,acc_nc4");
  EXPECT_EQ(metrics_csv_row(r), "9,abc,def,0.125,0.9375,0.3,16,0.75,0.5");
  EXPECT_EQ(matching_curve_csv(r), "n_c,accuracy\n2,0.75\n4,0.5\n");
}

}  // namespace
}  // namespace maxsep
