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

// maxsep: synthetic data generation, training, evaluation and ablation runs.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "maxsep/io.hpp"
#include "maxsep/run.hpp"

namespace {

using maxsep::RunConfig;

// Flags that override config-file values. Unset flags leave the file (or
// default) value alone.
struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, batch_size, embed_dim;
  std::optional<double> lr, decay, alpha, dropout;
  std::optional<std::string> variant, split_mode, dataset, out;
  std::vector<std::size_t> gallery_sizes;

  void add_to(CLI::App* app, bool with_variant) {
    app->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app->add_option("--dataset", dataset, "dataset directory");
    app->add_option("--seed", seed, "run seed");
    app->add_option("--epochs", epochs);
    app->add_option("--batch-size", batch_size);
    app->add_option("--lr", lr, "initial learning rate");
    app->add_option("--decay", decay, "per-epoch learning-rate decay factor");
    app->add_option("--alpha", alpha, "weight of the orthogonality loss");
    if (with_variant) app->add_option("--variant", variant, "CE, MSM, FOP or OURS");
    app->add_option("--embed-dim", embed_dim);
    app->add_option("--dropout", dropout);
    app->add_option("--split-mode", split_mode, "SEEN_HEARD or UNSEEN_UNHEARD");
    app->add_option("--gallery-sizes", gallery_sizes, "matching gallery sizes, e.g. 2,4,6")->delimiter(',');
    app->add_option("--out", out, "output directory");
  }

  RunConfig resolve(const std::string& subcommand) const {
    RunConfig c;
    if (!config_path.empty()) {
      try {
        c = maxsep::run_config_from_json(nlohmann::json::parse(maxsep::io::read_file(config_path)));
      } catch (const nlohmann::json::parse_error& e) {
        throw maxsep::FormatError(config_path + ": " + e.what());
      }
    }
    if (seed) c.seed = *seed;
    if (epochs) c.epochs = *epochs;
    if (batch_size) c.batch_size = *batch_size;
    if (embed_dim) c.embed_dim = *embed_dim;
    if (lr) c.base_lr = *lr;
    if (decay) c.decay_rate = *decay;
    if (alpha) c.alpha = *alpha;
    if (dropout) c.dropout = *dropout;
    if (variant) c.variant = maxsep::parse_variant(*variant);
    if (split_mode) c.split_mode = maxsep::parse_split_mode(*split_mode);
    if (dataset) c.dataset = *dataset;
    if (!gallery_sizes.empty()) c.gallery_sizes = gallery_sizes;
    if (out) c.out = *out;
    if (c.out.empty()) c.out = maxsep::default_out_dir(subcommand).string();
    c.validate();
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Face-voice association with maximally separated class prototypes"};
  app.require_subcommand(1);

  maxsep::SyntheticSpec spec;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "Write a synthetic dataset");
  gen->add_option("--speakers", spec.n_speakers);
  gen->add_option("--instances", spec.instances_per_speaker, "instances per speaker");
  gen->add_option("--latent-dim", spec.latent_dim);
  gen->add_option("--face-dim", spec.face_dim);
  gen->add_option("--voice-dim", spec.voice_dim);
  gen->add_option("--sigma", spec.modality_noise_sigma, "per-modality noise standard deviation");
  gen->add_option("--seed", spec.seed);
  gen->add_option("--out", gen_out, "dataset directory");

  Overrides train_flags;
  auto* train = app.add_subcommand("train", "Train one model and write its test trial lists");
  train_flags.add_to(train, true);

  maxsep::EvalInputs verify_in, match_in;
  std::string verify_run, match_run;
  auto add_eval = [](CLI::App* sub, maxsep::EvalInputs& in, std::string& run) {
    sub->add_option("--run", run, "train output directory (supplies checkpoint and trials)");
    sub->add_option("--checkpoint", in.checkpoint);
    sub->add_option("--trials", in.trials);
    sub->add_option("--dataset", in.dataset, "defaults to the dataset recorded in the checkpoint");
    sub->add_option("--out", in.out);
  };
  auto* verify = app.add_subcommand("eval-verify", "Verification EER and AUC");
  add_eval(verify, verify_in, verify_run);
  auto* match = app.add_subcommand("eval-match", "Matching accuracy per gallery size");
  add_eval(match, match_in, match_run);

  Overrides ablate_flags;
  std::vector<std::string> variants;
  std::vector<std::uint64_t> seeds;
  std::size_t jobs = 1;
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate every variant for every seed");
  ablate_flags.add_to(ablate, false);
  ablate->add_option("--variants", variants, "e.g. CE,MSM,FOP,OURS")->delimiter(',');
  ablate->add_option("--seeds", seeds, "model seeds, e.g. 0,1,2")->delimiter(',');
  ablate->add_option("--jobs", jobs, "cells trained concurrently")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const std::filesystem::path out = gen_out.empty() ? maxsep::default_out_dir("gen") : std::filesystem::path(gen_out);
      std::cout << maxsep::gen_command(spec, out) << "  " << out.string() << "\n";
    } else if (train->parsed()) {
      const RunConfig c = train_flags.resolve("train");
      const auto a = maxsep::train_command(c);
      std::cout << "checkpoint " << a.checkpoint.string() << "\nhistory " << a.history.string() << "\n";
    } else if (verify->parsed() || match->parsed()) {
      const bool is_verify = verify->parsed();
      maxsep::EvalInputs in = is_verify ? verify_in : match_in;
      const std::string& run = is_verify ? verify_run : match_run;
      if (!run.empty()) {
        if (in.checkpoint.empty()) in.checkpoint = std::filesystem::path(run) / "checkpoint.bin";
        if (in.trials.empty()) {
          in.trials = std::filesystem::path(run) / (is_verify ? "trials_verify.csv" : "trials_match.jsonl");
        }
        if (in.out.empty()) in.out = run;
      }
      if (in.checkpoint.empty() || in.trials.empty()) throw std::invalid_argument("need --checkpoint and --trials, or --run");
      if (in.out.empty()) in.out = maxsep::default_out_dir(is_verify ? "eval-verify" : "eval-match");
      if (is_verify) {
        const auto r = maxsep::eval_verify_command(in);
        std::cout << "eer " << maxsep::format_double(*r.eer) << "\nauc " << maxsep::format_double(*r.auc) << "\n";
      } else {
        std::cout << maxsep::matching_curve_csv(maxsep::eval_match_command(in));
      }
    } else if (ablate->parsed()) {
      RunConfig c = ablate_flags.resolve("ablate");
      if (!variants.empty()) {
        c.variants.clear();
        for (const auto& v : variants) c.variants.push_back(maxsep::parse_variant(v));
      }
      if (!seeds.empty()) c.seeds = seeds;
      std::cout << maxsep::ablation_summary_csv(maxsep::ablate_command(c, jobs));
    }
  } catch (const std::exception& e) {
    std::cerr << "maxsep: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
