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

#pragma once

/**
 * @file run.hpp
 *
 * Experiment plumbing shared by the command-line tool and the acceptance
 * suite: the run configuration, split and trial preparation, evaluation,
 * and the subcommand bodies. Every emitted report embeds the effective
 * configuration plus digests of the dataset and trial lists.
 */

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "maxsep/checkpoint.hpp"
#include "maxsep/data.hpp"
#include "maxsep/format.hpp"
#include "maxsep/io.hpp"
#include "maxsep/metrics.hpp"
#include "maxsep/model.hpp"
#include "maxsep/train.hpp"

namespace maxsep {

inline constexpr const char* kOutRootEnv = "MAXSEP_OUT_ROOT";

/// Default output directory for a subcommand: $MAXSEP_OUT_ROOT/<name>, or
/// runs/<name> when the variable is unset or empty.
inline std::filesystem::path default_out_dir(const std::string& subcommand) {
  const char* root = std::getenv(kOutRootEnv);
  return std::filesystem::path(root && *root ? root : "runs") / subcommand;
}

struct RunConfig {
  // model
  Variant variant = Variant::kOurs;
  double alpha = 1.0;                    // ignored (forced 0) for CE and MSM
  // Head width. Null falls back to the model rule: 128, or n_speakers - 1
  // for MSM/OURS without the projection.
  std::optional<std::size_t> embed_dim = 256;
  double dropout = 0.0;
  OcNormalization oc_normalization = OcNormalization::kMean;
  OcPairScope oc_pair_scope = OcPairScope::kFusedOnly;
  bool renormalize_fused = false;
  bool prototype_projection = true;  // MSM/OURS only

  // optimisation
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  double base_lr = 2e-2;
  double decay_rate = 0.95;
  std::uint64_t seed = 0;

  // data and trials
  std::string dataset;
  SplitMode split_mode = SplitMode::kSeenHeard;
  SplitRatios split_ratios{};
  std::optional<std::string> tag;
  std::size_t n_valid_trials = 200;
  std::size_t n_test_trials = 2000;
  std::size_t n_matching_trials = 1000;
  std::vector<std::size_t> gallery_sizes{2, 4, 6, 8, 10};
  Modality probe_modality = Modality::kVoice;

  // ablation grid
  std::vector<Variant> variants{Variant::kCE, Variant::kMSM, Variant::kFOP, Variant::kOurs};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};

  std::string out;

  void validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("config: alpha must be >= 0");
    if (embed_dim && *embed_dim == 0) throw std::invalid_argument("config: embed_dim must be > 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("config: dropout must be in [0, 1)");
    if (batch_size == 0) throw std::invalid_argument("config: batch_size must be > 0");
    AdamConfig{base_lr, decay_rate}.validate();
    split_ratios.validate();
    if (n_test_trials < 2) throw std::invalid_argument("config: n_test_trials must be >= 2");
    if (n_valid_trials == 1) throw std::invalid_argument("config: n_valid_trials must be 0 or >= 2");
    if (n_matching_trials == 0) throw std::invalid_argument("config: n_matching_trials must be > 0");
    for (auto n_c : gallery_sizes) {
      if (n_c < 2) throw std::invalid_argument("config: gallery sizes must be >= 2");
    }
    if (variants.empty()) throw std::invalid_argument("config: variants list is empty");
    if (seeds.empty()) throw std::invalid_argument("config: seeds list is empty");
  }

  ModelConfig model_config(Variant v, std::size_t n_speakers, std::size_t face_dim, std::size_t voice_dim) const {
    const bool projection = prototype_projection && uses_separation_matrix(v);
    ModelConfig c = ModelConfig::for_variant(v, n_speakers, face_dim, voice_dim, alpha,
                                             embed_dim.value_or(kDefaultFreeEmbedDim), projection);
    if (embed_dim) c.embed_dim = *embed_dim;
    c.dropout_rate = dropout;
    c.oc_normalization = oc_normalization;
    c.oc_pair_scope = oc_pair_scope;
    c.renormalize_fused = renormalize_fused;
    c.validate();
    return c;
  }

  TrainOptions train_options(std::uint64_t model_seed) const {
    TrainOptions o;
    o.epochs = epochs;
    o.batch_size = batch_size;
    o.adam.base_lr = base_lr;
    o.adam.decay_rate = decay_rate;
    o.seed = model_seed;
    return o;
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  std::vector<std::string> variants;
  for (auto v : c.variants) variants.emplace_back(to_string(v));
  return {
      {"variant", to_string(c.variant)},
      {"alpha", c.alpha},
      {"embed_dim", c.embed_dim ? nlohmann::json(*c.embed_dim) : nlohmann::json(nullptr)},
      {"dropout", c.dropout},
      {"oc_normalization", to_string(c.oc_normalization)},
      {"oc_pair_scope", to_string(c.oc_pair_scope)},
      {"renormalize_fused", c.renormalize_fused},
      {"prototype_projection", c.prototype_projection},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"base_lr", c.base_lr},
      {"decay_rate", c.decay_rate},
      {"seed", c.seed},
      {"dataset", c.dataset},
      {"split_mode", to_string(c.split_mode)},
      {"split_ratios", {c.split_ratios.train, c.split_ratios.valid, c.split_ratios.test}},
      {"tag", c.tag ? nlohmann::json(*c.tag) : nlohmann::json(nullptr)},
      {"n_valid_trials", c.n_valid_trials},
      {"n_test_trials", c.n_test_trials},
      {"n_matching_trials", c.n_matching_trials},
      {"gallery_sizes", c.gallery_sizes},
      {"probe_modality", to_string(c.probe_modality)},
      {"variants", variants},
      {"seeds", c.seeds},
      {"out", c.out},
  };
}

/// Overlays the keys present in `j` onto `base`. Unknown keys are rejected.
inline RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {}) {
  if (!j.is_object()) throw FormatError("config: expected a JSON object");
  static const std::set<std::string> known = {
      "variant",        "alpha",        "embed_dim", "dropout",        "oc_normalization", "oc_pair_scope",
      "renormalize_fused", "prototype_projection", "epochs", "batch_size", "base_lr", "decay_rate",
      "seed",           "dataset",      "split_mode", "split_ratios",  "tag",              "n_valid_trials",
      "n_test_trials",  "n_matching_trials", "gallery_sizes", "probe_modality", "variants", "seeds", "out"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw FormatError("config: unknown key '" + key + "'");
  }
  RunConfig c = std::move(base);
  try {
    auto str = [&](const char* k) { return j.at(k).get<std::string>(); };
    if (j.contains("variant")) c.variant = parse_variant(str("variant"));
    if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
    if (j.contains("embed_dim")) {
      c.embed_dim = j.at("embed_dim").is_null() ? std::nullopt : std::optional(j.at("embed_dim").get<std::size_t>());
    }
    if (j.contains("dropout")) c.dropout = j.at("dropout").get<double>();
    if (j.contains("oc_normalization")) c.oc_normalization = parse_oc_normalization(str("oc_normalization"));
    if (j.contains("oc_pair_scope")) c.oc_pair_scope = parse_oc_pair_scope(str("oc_pair_scope"));
    if (j.contains("renormalize_fused")) c.renormalize_fused = j.at("renormalize_fused").get<bool>();
    if (j.contains("prototype_projection")) c.prototype_projection = j.at("prototype_projection").get<bool>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<std::size_t>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("base_lr")) c.base_lr = j.at("base_lr").get<double>();
    if (j.contains("decay_rate")) c.decay_rate = j.at("decay_rate").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("dataset")) c.dataset = str("dataset");
    if (j.contains("split_mode")) c.split_mode = parse_split_mode(str("split_mode"));
    if (j.contains("split_ratios")) {
      const auto r = j.at("split_ratios").get<std::vector<double>>();
      if (r.size() != 3) throw FormatError("config: split_ratios needs [train, valid, test]");
      c.split_ratios = {r[0], r[1], r[2]};
    }
    if (j.contains("tag")) c.tag = j.at("tag").is_null() ? std::nullopt : std::optional(str("tag"));
    if (j.contains("n_valid_trials")) c.n_valid_trials = j.at("n_valid_trials").get<std::size_t>();
    if (j.contains("n_test_trials")) c.n_test_trials = j.at("n_test_trials").get<std::size_t>();
    if (j.contains("n_matching_trials")) c.n_matching_trials = j.at("n_matching_trials").get<std::size_t>();
    if (j.contains("gallery_sizes")) c.gallery_sizes = j.at("gallery_sizes").get<std::vector<std::size_t>>();
    if (j.contains("probe_modality")) c.probe_modality = parse_modality(str("probe_modality"));
    if (j.contains("variants")) {
      c.variants.clear();
      for (const auto& v : j.at("variants")) c.variants.push_back(parse_variant(v.get<std::string>()));
    }
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("out")) c.out = str("out");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  return c;
}

/// Digest of the effective configuration, excluding the output directory.
inline std::string config_digest(const RunConfig& c) {
  auto j = to_json(c);
  j.erase("out");
  return digest_hex(j.dump());
}

/// Independent, reproducible sub-seed for one named purpose.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose) {
  Fnv1a64 h;
  h.update(purpose);
  std::uint64_t z = seed ^ h.value();
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// ------------------------------------------------------------ preparation

/// Everything derived from (dataset, config) that is shared by all models
/// of one run: split, training records and trial lists.
struct Experiment {
  Dataset dataset;
  std::string dataset_digest;
  SplitPlan split;
  std::map<std::string, std::size_t> speakers;  // training speaker -> class index
  std::vector<TrainingRecord> train_set;
  std::vector<VerificationTrial> valid_trials;
  std::vector<VerificationTrial> test_trials;
  std::vector<MatchingTrial> matching_trials;  // all gallery sizes, ascending
};

inline std::vector<VerificationPair> resolve_pairs(const Dataset& ds, std::span<const VerificationTrial> trials) {
  const auto idx = ds.index();
  auto lookup = [&](const std::string& id) -> const EmbeddingRecord& {
    const auto it = idx.find(id);
    if (it == idx.end()) throw std::invalid_argument("trial references unknown instance id '" + id + "'");
    return ds.records[it->second];
  };
  std::vector<VerificationPair> out;
  out.reserve(trials.size());
  for (const auto& t : trials) out.push_back({to_vector(lookup(t.face_id).face), to_vector(lookup(t.voice_id).voice), t.same});
  return out;
}

inline Experiment prepare_experiment(const RunConfig& config, Dataset dataset) {
  config.validate();
  dataset.validate();
  Experiment e;
  e.dataset_digest = dataset_digest(dataset);
  e.dataset = std::move(dataset);
  const Dataset& ds = e.dataset;
  e.split = make_splits(ds, config.split_mode, config.split_ratios, derive_seed(config.seed, "split"), config.tag);
  e.speakers = speaker_index(ds, e.split.train);
  e.train_set = training_records(ds, e.split.train);
  if (config.n_valid_trials > 0 && !e.split.valid.empty()) {
    e.valid_trials = make_verification_trials(ds, e.split.valid, config.n_valid_trials, derive_seed(config.seed, "valid"));
  }
  e.test_trials = make_verification_trials(ds, e.split.test, config.n_test_trials, derive_seed(config.seed, "test"));
  auto sizes = config.gallery_sizes;
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  for (auto n_c : sizes) {
    auto trials = make_matching_trials(ds, e.split.test, n_c, config.n_matching_trials, config.probe_modality,
                                       derive_seed(config.seed, "match" + std::to_string(n_c)));
    e.matching_trials.insert(e.matching_trials.end(), std::make_move_iterator(trials.begin()),
                             std::make_move_iterator(trials.end()));
  }
  return e;
}

inline ModelConfig experiment_model_config(const RunConfig& config, const Experiment& e, Variant v) {
  return config.model_config(v, e.speakers.size(), e.dataset.face_dim, e.dataset.voice_dim);
}

// ------------------------------------------------------------- evaluation

inline void evaluate_verification(const Model& model, const Dataset& ds, std::span<const VerificationTrial> trials,
                                  MetricsReport& report) {
  ScoredTrials scored;
  for (const auto& p : resolve_pairs(ds, trials)) scored.add(score_pair(model, p.face, p.voice), p.same);
  const EerResult e = eer(scored);
  report.eer = e.rate;
  report.eer_threshold = e.threshold;
  report.auc = auc(scored);
  report.n_verification_trials = scored.size();
}

inline void evaluate_matching(const Model& model, const Dataset& ds, std::span<const MatchingTrial> trials,
                              MetricsReport& report) {
  const auto idx = ds.index();
  auto raw = [&](const std::string& id, Modality m) {
    const auto it = idx.find(id);
    if (it == idx.end()) throw std::invalid_argument("matching trial references unknown instance id '" + id + "'");
    const auto& r = ds.records[it->second];
    return to_vector(m == Modality::kFace ? r.face : r.voice);
  };
  std::map<std::size_t, std::vector<MatchOutcome>> by_size;
  std::vector<Vector> gallery;
  for (const auto& t : trials) {
    if (t.answer >= t.gallery.size()) throw FormatError("matching trial answer index out of range");
    const Modality other = t.modality == Modality::kFace ? Modality::kVoice : Modality::kFace;
    gallery.clear();
    for (const auto& id : t.gallery) gallery.push_back(raw(id, other));
    by_size[t.gallery.size()].push_back({match_probe(model, raw(t.probe, t.modality), t.modality, gallery), t.answer});
  }
  for (const auto& [n_c, outcomes] : by_size) {
    report.matching_accuracy[n_c] = matching_accuracy(outcomes, n_c);
    report.n_matching_trials[n_c] = outcomes.size();
  }
}

// ---------------------------------------------------------------- commands

struct TrainArtifacts {
  std::filesystem::path checkpoint;
  std::filesystem::path history;
  std::filesystem::path verification_trials;
  std::filesystem::path matching_trials;
};

inline std::string gen_command(const SyntheticSpec& spec, const std::filesystem::path& out) {
  spec.validate();
  const Dataset ds = gen_synthetic(spec);
  write_dataset(ds, out);
  return dataset_digest(ds);
}

/// Trains one model and writes checkpoint.bin, history.csv, split.json,
/// trials_verify.csv, trials_match.jsonl and config.json under config.out.
inline TrainArtifacts train_command(const RunConfig& config) {
  config.validate();
  if (config.dataset.empty()) throw std::invalid_argument("train: no dataset given");
  const Experiment e = prepare_experiment(config, load_dataset(config.dataset));
  const ModelConfig mc = experiment_model_config(config, e, config.variant);
  const auto valid = resolve_pairs(e.dataset, e.valid_trials);
  const TrainResult result = train(mc, e.train_set, valid, config.train_options(config.seed));

  const std::filesystem::path dir = config.out;
  std::filesystem::create_directories(dir);
  TrainArtifacts a{dir / "checkpoint.bin", dir / "history.csv", dir / "trials_verify.csv", dir / "trials_match.jsonl"};
  io::write_file_atomic(dir / "config.json", to_json(config).dump(2) + "\n");
  io::write_file_atomic(dir / "split.json", to_json(e.split).dump() + "\n");
  io::write_file_atomic(a.verification_trials, verification_trials_csv(e.test_trials));
  io::write_file_atomic(a.matching_trials, matching_trials_jsonl(e.matching_trials));
  io::write_file_atomic(a.history, history_csv(result.history));
  nlohmann::json recorded = to_json(config);
  recorded.erase("out");
  const nlohmann::json metadata = {{"run_config", std::move(recorded)},
                                   {"config_digest", config_digest(config)},
                                   {"dataset_digest", e.dataset_digest},
                                   {"selected_epoch", result.selected_epoch},
                                   {"speakers", e.speakers}};
  save_checkpoint(Model(mc, result.params), a.checkpoint, metadata);
  return a;
}

struct EvalInputs {
  std::filesystem::path checkpoint;
  std::filesystem::path trials;
  std::string dataset;  // empty: the dataset recorded in the checkpoint
  std::filesystem::path out;
};

namespace detail {

struct LoadedEval {
  LoadedCheckpoint checkpoint;
  Dataset dataset;
  std::string trials_text;
  MetricsReport report;
};

inline LoadedEval load_eval(const EvalInputs& in, const char* kind) {
  LoadedEval l{load_checkpoint(in.checkpoint), {}, io::read_file(in.trials), {}};
  const auto& meta = l.checkpoint.metadata;
  std::string dataset = in.dataset;
  if (dataset.empty()) {
    if (!meta.contains("run_config") || !meta["run_config"].contains("dataset")) {
      throw std::invalid_argument("no dataset given and none recorded in the checkpoint");
    }
    dataset = meta["run_config"]["dataset"].get<std::string>();
  }
  l.dataset = load_dataset(dataset);
  MetricsReport& r = l.report;
  r.dataset_digest = dataset_digest(l.dataset);
  r.trial_digests[kind] = digest_hex(l.trials_text);
  nlohmann::json run = meta.value("run_config", nlohmann::json::object());
  r.seed = run.value("seed", std::uint64_t{0});
  r.run_config = {{"train", run},
                  {"model", to_json(l.checkpoint.model.config)},
                  {"eval", {{"checkpoint", in.checkpoint.string()}, {"trials", in.trials.string()}, {"dataset", dataset}}}};
  r.config_digest = digest_hex(nlohmann::json{{"train", meta.value("config_digest", "")},
                                              {"model", r.run_config["model"]},
                                              {"checkpoint", digest_hex(io::read_file(in.checkpoint))}}
                                   .dump());
  return l;
}

inline void write_report(const MetricsReport& r, const std::filesystem::path& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);
  io::write_file_atomic(dir / (stem + ".json"), to_json(r).dump(2) + "\n");
  io::write_file_atomic(dir / (stem + ".csv"), metrics_csv_header(r) + "\n" + metrics_csv_row(r) + "\n");
}

}  // namespace detail

/// Writes metrics_verify.json and metrics_verify.csv.
inline MetricsReport eval_verify_command(const EvalInputs& in) {
  auto l = detail::load_eval(in, "verification");
  const auto trials = parse_verification_trials_csv(l.trials_text, in.trials.string());
  evaluate_verification(l.checkpoint.model, l.dataset, trials, l.report);
  detail::write_report(l.report, in.out, "metrics_verify");
  return l.report;
}

/// Writes metrics_match.json, metrics_match.csv and matching_curve.csv.
inline MetricsReport eval_match_command(const EvalInputs& in) {
  auto l = detail::load_eval(in, "matching");
  const auto trials = parse_matching_trials_jsonl(l.trials_text, in.trials.string());
  if (trials.empty()) throw std::invalid_argument("eval-match: no trials in " + in.trials.string());
  evaluate_matching(l.checkpoint.model, l.dataset, trials, l.report);
  detail::write_report(l.report, in.out, "metrics_match");
  io::write_file_atomic(in.out / "matching_curve.csv", matching_curve_csv(l.report));
  return l.report;
}

// ---------------------------------------------------------------- ablation

struct AblationCell {
  Variant variant;
  std::uint64_t seed;
  MetricsReport report;
  std::size_t selected_epoch = 0;
  std::string history;
};

/// Trains and evaluates one (variant, model seed) cell on the shared
/// experiment. The run seed fixes split and trials; `seed` fixes init,
/// shuffling and dropout.
inline AblationCell run_cell(const RunConfig& config, const Experiment& e, Variant v, std::uint64_t seed) {
  const ModelConfig mc = experiment_model_config(config, e, v);
  const auto valid = resolve_pairs(e.dataset, e.valid_trials);
  const TrainResult result = train(mc, e.train_set, valid, config.train_options(seed));
  const Model model(mc, result.params);
  AblationCell cell{v, seed, {}, result.selected_epoch, history_csv(result.history)};
  cell.report.seed = seed;
  cell.report.dataset_digest = e.dataset_digest;
  cell.report.trial_digests["verification"] = digest_hex(verification_trials_csv(e.test_trials));
  cell.report.trial_digests["matching"] = digest_hex(matching_trials_jsonl(e.matching_trials));
  evaluate_verification(model, e.dataset, e.test_trials, cell.report);
  evaluate_matching(model, e.dataset, e.matching_trials, cell.report);
  return cell;
}

/// Runs every (variant, seed) cell, `jobs` at a time. Results come back in
/// grid order regardless of scheduling.
inline std::vector<AblationCell> run_ablation(const RunConfig& config, const Experiment& e, std::size_t jobs = 1) {
  std::vector<std::pair<Variant, std::uint64_t>> grid;
  for (auto v : config.variants) {
    for (auto s : config.seeds) grid.emplace_back(v, s);
  }
  std::vector<std::optional<AblationCell>> cells(grid.size());
  std::vector<std::exception_ptr> errors(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < grid.size();) {
      try {
        cells[k] = run_cell(config, e, grid[k].first, grid[k].second);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < std::max<std::size_t>(1, jobs); ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  std::vector<AblationCell> out;
  for (auto& c : cells) out.push_back(std::move(*c));
  return out;
}

inline std::string ablation_runs_csv(std::span<const AblationCell> cells, const std::string& config_digest) {
  std::string out;
  for (const auto& c : cells) {
    MetricsReport r = c.report;
    r.config_digest = config_digest;
    if (out.empty()) out = "variant,selected_epoch," + metrics_csv_header(r) + "\n";
    out += std::string(to_string(c.variant)) + "," + std::to_string(c.selected_epoch) + "," + metrics_csv_row(r) + "\n";
  }
  return out;
}

struct VariantSummary {
  Variant variant;
  std::size_t n_seeds = 0;
  double eer_mean = 0.0, eer_std = 0.0;
  double auc_mean = 0.0, auc_std = 0.0;
  std::map<std::size_t, double> accuracy_mean;
};

/// Mean and sample standard deviation (0 for a single seed) per variant, in
/// the order variants first appear.
inline std::vector<VariantSummary> summarize_ablation(std::span<const AblationCell> cells) {
  std::vector<VariantSummary> out;
  auto stats = [](const std::vector<double>& xs, double& mean, double& sd) {
    mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    sd = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
  };
  std::vector<Variant> order;
  for (const auto& c : cells) {
    if (std::find(order.begin(), order.end(), c.variant) == order.end()) order.push_back(c.variant);
  }
  for (auto v : order) {
    std::vector<double> eers, aucs;
    std::map<std::size_t, double> acc;
    for (const auto& c : cells) {
      if (c.variant != v) continue;
      eers.push_back(c.report.eer.value());
      aucs.push_back(c.report.auc.value());
      for (const auto& [n_c, a] : c.report.matching_accuracy) acc[n_c] += a;
    }
    VariantSummary s;
    s.variant = v;
    s.n_seeds = eers.size();
    stats(eers, s.eer_mean, s.eer_std);
    stats(aucs, s.auc_mean, s.auc_std);
    for (auto& [n_c, total] : acc) s.accuracy_mean[n_c] = total / static_cast<double>(eers.size());
    out.push_back(std::move(s));
  }
  return out;
}

inline std::string ablation_summary_csv(std::span<const VariantSummary> rows) {
  std::string out = "variant,n_seeds,eer_mean,eer_std,auc_mean,auc_std";
  if (!rows.empty()) {
    for (const auto& [n_c, a] : rows.front().accuracy_mean) out += ",acc_nc" + std::to_string(n_c) + "_mean";
  }
  out += "\n";
  for (const auto& s : rows) {
    out += std::string(to_string(s.variant)) + "," + std::to_string(s.n_seeds) + "," + format_double(s.eer_mean) + "," +
           format_double(s.eer_std) + "," + format_double(s.auc_mean) + "," + format_double(s.auc_std);
    for (const auto& [n_c, a] : s.accuracy_mean) out += "," + format_double(a);
    out += "\n";
  }
  return out;
}

/// Writes ablation_runs.csv, ablation_summary.csv and config.json under
/// config.out.
inline std::vector<VariantSummary> ablate_command(const RunConfig& config, std::size_t jobs = 1) {
  config.validate();
  if (config.dataset.empty()) throw std::invalid_argument("ablate: no dataset given");
  const Experiment e = prepare_experiment(config, load_dataset(config.dataset));
  const auto cells = run_ablation(config, e, jobs);
  const auto summary = summarize_ablation(cells);
  const std::filesystem::path dir = config.out;
  std::filesystem::create_directories(dir);
  io::write_file_atomic(dir / "config.json", to_json(config).dump(2) + "\n");
  io::write_file_atomic(dir / "ablation_runs.csv", ablation_runs_csv(cells, config_digest(config)));
  io::write_file_atomic(dir / "ablation_summary.csv", ablation_summary_csv(summary));
  return summary;
}

}  // namespace maxsep
