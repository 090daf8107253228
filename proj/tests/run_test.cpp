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

#include <cstdlib>
#include <utility>
#include <filesystem>

#include <gtest/gtest.h>

#include "maxsep/run.hpp"

namespace maxsep {
namespace {

namespace fs = std::filesystem;

class RunTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() / (std::string("maxsep_run_") + info->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  std::string dataset(const SyntheticSpec& spec = {}) {
    const auto dir = root_ / ("data_" + std::to_string(spec.seed) + "_" + format_double(spec.modality_noise_sigma));
    if (!fs::exists(dir)) gen_command(spec, dir);
    return dir.string();
  }

  RunConfig quick_config() {
    RunConfig c;
    c.dataset = dataset();
    c.embed_dim = 32;
    c.epochs = 3;
    c.n_test_trials = 400;
    c.n_matching_trials = 200;
    c.out = (root_ / "train").string();
    return c;
  }

  fs::path root_;
};

TEST(RunConfigJson, OverlayAndUnknownKeys) {
  RunConfig base;
  base.epochs = 7;
  const auto c = run_config_from_json(nlohmann::json{{"alpha", 2.5}, {"variant", "FOP"}, {"gallery_sizes", {3, 5}}}, base);
  EXPECT_EQ(c.alpha, 2.5);
  EXPECT_EQ(c.variant, Variant::kFOP);
  EXPECT_EQ(c.epochs, 7u);
  EXPECT_EQ(c.gallery_sizes, (std::vector<std::size_t>{3, 5}));
  EXPECT_EQ(to_json(run_config_from_json(to_json(c))), to_json(c));
  EXPECT_THROW(run_config_from_json(nlohmann::json{{"learning_rat", 0.1}}), FormatError);
  EXPECT_THROW(run_config_from_json(nlohmann::json{{"split_ratios", {0.5, 0.5}}}), FormatError);
}

TEST(RunConfigJson, DigestIgnoresOutputLocation) {
  RunConfig a, b;
  a.out = "x";
  b.out = "y";
  EXPECT_EQ(config_digest(a), config_digest(b));
  b.seed = 1;
  EXPECT_NE(config_digest(a), config_digest(b));
}

TEST(RunConfigJson, DerivedSeedsDiffer) {
  EXPECT_NE(derive_seed(0, "split"), derive_seed(0, "test"));
  EXPECT_NE(derive_seed(0, "split"), derive_seed(1, "split"));
  EXPECT_EQ(derive_seed(5, "valid"), derive_seed(5, "valid"));
}

TEST(DefaultOutDir, FollowsEnvironment) {
  ::setenv(kOutRootEnv, "/tmp/somewhere", 1);
  EXPECT_EQ(default_out_dir("train"), fs::path("/tmp/somewhere/train"));
  ::setenv(kOutRootEnv, "", 1);
  EXPECT_EQ(default_out_dir("train"), fs::path("runs/train"));
  ::unsetenv(kOutRootEnv);
  EXPECT_EQ(default_out_dir("ablate"), fs::path("runs/ablate"));
}

TEST_F(RunTest, ZeroEpochsCheckpointIsInitialization) {
  auto c = quick_config();
  c.epochs = 0;
  const auto a = train_command(c);
  const auto loaded = load_checkpoint(a.checkpoint);
  const Experiment e = prepare_experiment(c, load_dataset(c.dataset));
  const Model init = Model::initialized(experiment_model_config(c, e, c.variant), c.seed);
  const auto got = std::as_const(loaded.model.params).tensors();
  const auto want = init.params.tensors();
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i]->value, want[i]->value) << got[i]->name;
  EXPECT_EQ(loaded.metadata["selected_epoch"], 0);
  EXPECT_EQ(io::read_file(a.history), "epoch,train_loss,valid_eer,lr\n");
}

TEST_F(RunTest, UntrainedModelIsAtChance) {
  auto c = quick_config();
  c.epochs = 0;
  c.n_test_trials = 2000;
  c.n_matching_trials = 1000;
  const auto a = train_command(c);
  const auto verify = eval_verify_command({a.checkpoint, a.verification_trials, "", root_ / "eval"});
  EXPECT_GE(*verify.eer, 0.40);
  EXPECT_LE(*verify.eer, 0.60);
  const auto match = eval_match_command({a.checkpoint, a.matching_trials, "", root_ / "eval"});
  EXPECT_NEAR(match.matching_accuracy.at(2), 0.5, 0.05);
  EXPECT_NEAR(match.matching_accuracy.at(10), 0.1, 0.03);
  EXPECT_EQ(match.n_matching_trials.at(4), 1000u);
}

TEST_F(RunTest, TrainEvalArtifactsAndRerunDeterminism) {
  auto c = quick_config();
  const auto a = train_command(c);
  for (const char* f : {"config.json", "split.json", "trials_verify.csv", "trials_match.jsonl", "history.csv",
                        "checkpoint.bin"}) {
    EXPECT_TRUE(fs::exists(fs::path(c.out) / f)) << f;
  }
  const std::string history = io::read_file(a.history);
  EXPECT_EQ(std::count(history.begin(), history.end(), '\n'), 4);

  const auto r1 = eval_verify_command({a.checkpoint, a.verification_trials, "", root_ / "eval1"});
  const auto m1 = eval_match_command({a.checkpoint, a.matching_trials, c.dataset, root_ / "eval1"});
  EXPECT_EQ(r1.n_verification_trials, 400u);
  EXPECT_EQ(r1.dataset_digest, dataset_digest(load_dataset(c.dataset)));
  for (const char* f : {"metrics_verify.json", "metrics_verify.csv", "metrics_match.json", "metrics_match.csv",
                        "matching_curve.csv"}) {
    EXPECT_TRUE(fs::exists(root_ / "eval1" / f)) << f;
  }
  const auto back = metrics_report_from_json(nlohmann::json::parse(io::read_file(root_ / "eval1" / "metrics_verify.json")));
  EXPECT_EQ(to_json(back), to_json(r1));

  c.out = (root_ / "train2").string();
  const auto b = train_command(c);
  EXPECT_EQ(io::read_file(b.history), history);
  EXPECT_EQ(io::read_file(b.verification_trials), io::read_file(a.verification_trials));
  EXPECT_EQ(io::read_file(b.matching_trials), io::read_file(a.matching_trials));
  const auto r2 = eval_verify_command({b.checkpoint, b.verification_trials, "", root_ / "eval2"});
  const auto m2 = eval_match_command({b.checkpoint, b.matching_trials, "", root_ / "eval2"});
  EXPECT_EQ(r2.eer, r1.eer);
  EXPECT_EQ(m2.matching_accuracy, m1.matching_accuracy);
}

TEST_F(RunTest, SingleClassTrialsRejected) {
  auto c = quick_config();
  c.epochs = 0;
  const auto a = train_command(c);
  const auto trials = parse_verification_trials_csv(io::read_file(a.verification_trials));
  std::vector<VerificationTrial> positives;
  for (const auto& t : trials) {
    if (t.same) positives.push_back(t);
  }
  io::write_file_atomic(root_ / "pos.csv", verification_trials_csv(positives));
  EXPECT_THROW(eval_verify_command({a.checkpoint, root_ / "pos.csv", "", root_ / "eval"}), std::invalid_argument);
}

TEST_F(RunTest, AblationSharesTrialsAcrossCells) {
  auto c = quick_config();
  c.epochs = 2;
  c.variants = {Variant::kCE, Variant::kOurs};
  c.seeds = {0, 1};
  c.gallery_sizes = {2, 4};
  const Experiment e = prepare_experiment(c, load_dataset(c.dataset));
  const auto cells = run_ablation(c, e, 2);
  ASSERT_EQ(cells.size(), 4u);
  EXPECT_EQ(cells[1].variant, Variant::kCE);
  EXPECT_EQ(cells[1].seed, 1u);
  for (const auto& cell : cells) EXPECT_EQ(cell.report.trial_digests, cells[0].report.trial_digests);

  const auto serial = run_ablation(c, e, 1);
  EXPECT_EQ(ablation_runs_csv(serial, "d"), ablation_runs_csv(cells, "d"));

  c.variants = {Variant::kCE};
  c.seeds = {3};
  c.out = (root_ / "ablate").string();
  const auto summary = ablate_command(c);
  ASSERT_EQ(summary.size(), 1u);
  EXPECT_EQ(summary[0].eer_std, 0.0);
  const std::string runs = io::read_file(fs::path(c.out) / "ablation_runs.csv");
  EXPECT_EQ(std::count(runs.begin(), runs.end(), '\n'), 2);
  EXPECT_EQ(runs.rfind("variant,selected_epoch,seed,", 0), 0u);
}

TEST(SummarizeAblation, MeanAndSampleStd) {
  std::vector<AblationCell> cells(2);
  cells[0].variant = cells[1].variant = Variant::kFOP;
  cells[0].report.eer = 0.1;
  cells[1].report.eer = 0.3;
  cells[0].report.auc = cells[1].report.auc = 0.9;
  cells[0].report.matching_accuracy = {{2, 0.8}};
  cells[1].report.matching_accuracy = {{2, 0.6}};
  const auto s = summarize_ablation(cells);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_NEAR(s[0].eer_mean, 0.2, 1e-15);
  EXPECT_NEAR(s[0].eer_std, std::sqrt(0.02), 1e-15);
  EXPECT_EQ(s[0].auc_std, 0.0);
  EXPECT_NEAR(s[0].accuracy_mean.at(2), 0.7, 1e-15);
  EXPECT_EQ(ablation_summary_csv(s).substr(0, ablation_summary_csv(s).find('\n')),
            "variant,n_seeds,eer_mean,eer_std,auc_mean,auc_std,acc_nc2_mean");
}

TEST_F(RunTest, MoreNoiseNoEasier) {
  // same seed: identical speakers and lifting maps, only the noise scale moves
  SyntheticSpec spec;
  auto c = quick_config();
  c.epochs = 10;
  c.embed_dim = std::nullopt;
  c.n_test_trials = 2000;
  std::map<double, double> eer_at;
  std::optional<Model> model;
  std::vector<VerificationTrial> trials;
  for (double sigma : {0.3, 0.1, 0.6}) {
    spec.modality_noise_sigma = sigma;
    const Dataset ds = load_dataset(dataset(spec));
    if (!model) {
      const Experiment e = prepare_experiment(c, ds);
      const ModelConfig mc = experiment_model_config(c, e, c.variant);
      model.emplace(mc, train(mc, e.train_set, resolve_pairs(e.dataset, e.valid_trials), c.train_options(0)).params);
      trials = e.test_trials;
    }
    MetricsReport r;
    evaluate_verification(*model, ds, trials, r);
    eer_at[sigma] = *r.eer;
  }
  EXPECT_LE(eer_at[0.1], eer_at[0.3] + 0.02);
  EXPECT_LE(eer_at[0.3], eer_at[0.6] + 0.02);
}

}  // namespace
}  // namespace maxsep
