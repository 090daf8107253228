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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <string>

#include "maxsep/run.hpp"
#include "model_oracles.hpp"
#include "oracles.hpp"

namespace {

using namespace maxsep;
namespace fs = std::filesystem;

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, double limit_s, const std::function<Outcome()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("error: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (limit_s > 0 && secs > limit_s) {
    o.pass = false;
    o.detail += "; over time limit " + format_double(limit_s) + " s";
  }
  failures += !o.pass;
  std::printf("[%s] %d %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), secs, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

Vector uniform_vector(Eigen::Index n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// ------------------------------------------------------------------------

Outcome simplex_geometry() {
  double worst = 0.0;
  for (std::size_t n = 2; n <= 128; ++n) {
    const Eigen::MatrixXd p = build_separation_matrix(n).entries();
    if (static_cast<std::size_t>(p.rows()) != n - 1 || static_cast<std::size_t>(p.cols()) != n) {
      return {false, "wrong shape at n=" + std::to_string(n)};
    }
    const double off = -1.0 / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0.0;
        for (Eigen::Index r = 0; r < p.rows(); ++r) dot += p(r, i) * p(r, j);
        worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : off)));
      }
    }
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      double row = 0.0;
      for (Eigen::Index c = 0; c < p.cols(); ++c) row += p(r, c);
      worst = std::max(worst, std::abs(row));
    }
  }
  return {worst <= 1e-9, "max deviation " + fmt(worst)};
}

Outcome gradients() {
  using testing::max_relative_error;
  using testing::numeric_gradient;
  Rng rng(2024);
  std::map<std::string, double> worst;
  auto note = [&](const char* name, double err) { worst[name] = std::max(worst[name], err); };
  for (int k = 0; k < 100; ++k) {
    {
      const Vector x = uniform_vector(4, rng), b = uniform_vector(3, rng), g = uniform_vector(3, rng);
      const Matrix w = Eigen::Map<const Matrix>(uniform_vector(12, rng).data(), 3, 4);
      const auto grad = linear_backward(g, x, w);
      note("linear", max_relative_error(grad.input, numeric_gradient([&](const Vector& p) { return g.dot(apply_linear(p, w, b)); }, x)));
      const Vector wf = Eigen::Map<const Vector>(w.data(), w.size());
      note("linear", max_relative_error(Eigen::Map<const Vector>(grad.weight.data(), 12),
                                        numeric_gradient([&](const Vector& p) {
                                          return g.dot(apply_linear(x, Eigen::Map<const Matrix>(p.data(), 3, 4), b));
                                        }, wf)));
      note("linear", max_relative_error(grad.bias, numeric_gradient([&](const Vector& p) { return g.dot(apply_linear(x, w, p)); }, b)));
    }
    {
      Vector x = uniform_vector(6, rng, 0.1, 1.0);
      for (Eigen::Index i = 0; i < x.size(); i += 2) x[i] = -x[i];
      const Vector g = uniform_vector(6, rng);
      note("relu", max_relative_error(relu_backward(g, x), numeric_gradient([&](const Vector& p) { return g.dot(apply_relu(p)); }, x)));
    }
    {
      const Vector x = uniform_vector(8, rng), g = uniform_vector(8, rng);
      const Vector mask = apply_dropout(Vector::Ones(8), 0.5, rng, true).mask;
      note("dropout", max_relative_error(dropout_backward(g, mask),
                                         numeric_gradient([&](const Vector& p) { return g.dot(p.cwiseProduct(mask)); }, x)));
    }
    {
      Vector x = uniform_vector(5, rng);
      x *= (0.5 + x.norm()) / x.norm();
      const Vector g = uniform_vector(5, rng);
      note("l2_normalize", max_relative_error(l2_normalize_backward(g, x),
                                              numeric_gradient([&](const Vector& p) { return g.dot(l2_normalize(p)); }, x)));
    }
    {
      const Vector a = uniform_vector(6, rng, 0.2, 1.0), b = uniform_vector(6, rng);
      const auto grad = cosine_backward(1.0, a, b);
      note("cosine", max_relative_error(grad.a, numeric_gradient([&](const Vector& p) { return cosine_similarity(p, b); }, a)));
      note("cosine", max_relative_error(grad.b, numeric_gradient([&](const Vector& p) { return cosine_similarity(a, p); }, b)));
    }
    {
      const Vector logits = uniform_vector(5, rng, -3.0, 3.0);
      const std::size_t cls = static_cast<std::size_t>(k % 5);
      note("softmax_ce", max_relative_error(softmax_cross_entropy(logits, cls).gradient,
                                            numeric_gradient([&](const Vector& p) { return softmax_cross_entropy(p, cls).loss; }, logits)));
    }
    {
      std::vector<Vector> e;
      for (int i = 0; i < 5; ++i) e.push_back(uniform_vector(4, rng, 0.1, 1.0));
      const std::vector<std::size_t> labels{0, 1, 0, 2, 1};
      const auto oc = oc_loss_with_gradient(e, labels, OcNormalization::kMean);
      for (std::size_t i = 0; i < e.size(); ++i) {
        note("orthogonality", max_relative_error(oc.gradients[i], numeric_gradient([&](const Vector& p) {
                                                   auto moved = e;
                                                   moved[i] = p;
                                                   return oc_loss(moved, labels, OcNormalization::kMean);
                                                 }, e[i])));
      }
    }
  }
  bool ok = true;
  std::string detail;
  for (const auto& [name, err] : worst) {
    ok &= err <= 1e-4;
    detail += name + " " + fmt(err) + ", ";
  }

  // full batch loss: 4 speakers, embedding 3, batch 8, alpha 1
  const ModelConfig mc = ModelConfig::for_variant(Variant::kOurs, 4, 10, 8, 1.0);
  if (mc.embed_dim != 3) return {false, "unexpected embedding size " + std::to_string(mc.embed_dim)};
  Rng data(7);
  double end_to_end = 0.0;
  for (std::uint64_t attempt = 0;; ++attempt) {
    const Model m = Model::initialized(mc, 100 + attempt);
    const auto batch = testing::random_batch(8, mc.face_in_dim, mc.voice_in_dim, 4, data);
    if (testing::min_preactivation(m, batch) <= 1e-3) continue;
    try {
      end_to_end = testing::batch_loss_gradient_error(m, batch, attempt);
      break;
    } catch (const DegenerateInputError&) {
      // a head silenced by ReLU or dropout; draw again
    }
  }
  ok &= end_to_end <= 1e-3;
  detail += "batch_loss " + fmt(end_to_end);
  return {ok, detail};
}

Outcome metric_oracles() {
  Rng rng(99);
  double auc_err = 0.0, eer_slack = 0.0;
  for (int k = 0; k < 50; ++k) {
    const int n = std::uniform_int_distribution<int>(2, 200)(rng);
    const int n_pos = std::uniform_int_distribution<int>(1, n - 1)(rng);
    std::uniform_int_distribution<int> level(0, k % 2 ? 25 : 1000000);
    std::vector<double> pos, neg;
    ScoredTrials t;
    for (int i = 0; i < n; ++i) {
      const bool p = i < n_pos;
      const double s = level(rng) / 25.0 + (p ? 0.15 : 0.0);
      (p ? pos : neg).push_back(s);
      t.add(s, p);
    }
    auc_err = std::max(auc_err, std::abs(auc(t) - testing::brute_force_auc(pos, neg)));
    const auto sweep = testing::exhaustive_eer_sweep(pos, neg);
    eer_slack = std::max(eer_slack, std::abs(eer(t).rate - sweep.best) - sweep.step);
  }
  ScoredTrials hand;
  for (double s : {0.9, 0.4, 0.6}) hand.add(s, true);
  for (double s : {0.5, 0.3, 0.1}) hand.add(s, false);
  const double hand_eer = eer(hand).rate, hand_auc = auc(hand);
  const bool ok = auc_err <= 1e-12 && eer_slack <= 0.0 && std::abs(hand_eer - 1.0 / 3.0) <= 1e-12 &&
                  std::abs(hand_auc - 8.0 / 9.0) <= 1e-12;
  return {ok, "auc error " + fmt(auc_err) + ", eer excess over one step " + fmt(std::max(0.0, eer_slack)) +
                  ", hand eer " + fmt(hand_eer) + " auc " + fmt(hand_auc)};
}

struct Trained {
  Experiment experiment;
  ModelConfig config;
  Model model;
  MetricsReport report;
};

Outcome synthetic_end_to_end(const RunConfig& rc, std::optional<Trained>& out) {
  Experiment e = prepare_experiment(rc, gen_synthetic(SyntheticSpec{}));
  const ModelConfig mc = experiment_model_config(rc, e, Variant::kOurs);
  const Model untrained = Model::initialized(mc, rc.seed);
  MetricsReport before;
  evaluate_verification(untrained, e.dataset, e.test_trials, before);
  const TrainResult result = train(mc, e.train_set, resolve_pairs(e.dataset, e.valid_trials), rc.train_options(rc.seed));
  Model model(mc, result.params);
  MetricsReport r;
  evaluate_verification(model, e.dataset, e.test_trials, r);
  evaluate_matching(model, e.dataset, e.matching_trials, r);
  const bool ok = *r.eer <= 0.10 && *r.auc >= 0.95 && *before.eer >= 0.40 && *before.eer <= 0.60 &&
                  r.n_verification_trials == 2000;
  const std::string detail = "eer " + fmt(*r.eer) + " (<= 0.10), auc " + fmt(*r.auc) + " (>= 0.95), untrained eer " +
                             fmt(*before.eer) + ", selected epoch " + std::to_string(result.selected_epoch);
  out = Trained{std::move(e), mc, std::move(model), std::move(r)};
  return {ok, detail};
}

Outcome matching_curve(const Trained& t) {
  const auto& acc = t.report.matching_accuracy;
  std::string detail;
  bool ok = acc.size() == 5 && acc.count(2) && acc.at(2) >= 0.90;
  double prev = 1.0;
  for (const auto& [n_c, a] : acc) {
    ok &= a <= prev + 0.03 && t.report.n_matching_trials.at(n_c) == 1000;
    prev = a;
    detail += "n_c=" + std::to_string(n_c) + " " + fmt(a) + ", ";
  }
  return {ok, detail + "need n_c=2 >= 0.90 and rises <= 0.03"};
}

Outcome ablation_ordering(const RunConfig& rc, const Experiment& e) {
  const auto summary = summarize_ablation(run_ablation(rc, e));
  std::map<Variant, double> mean;
  std::string detail;
  for (const auto& s : summary) {
    mean[s.variant] = s.eer_mean;
    detail += std::string(to_string(s.variant)) + " " + fmt(s.eer_mean) + "+-" + fmt(s.eer_std) + ", ";
  }
  const bool ok = mean.at(Variant::kOurs) <= mean.at(Variant::kFOP) + 0.02 &&
                  mean.at(Variant::kFOP) <= mean.at(Variant::kCE) + 0.02 &&
                  mean.at(Variant::kMSM) >= mean.at(Variant::kOurs);
  return {ok, detail + "mean EER over " + std::to_string(rc.seeds.size()) + " seeds"};
}

Outcome reproducibility(const RunConfig& base, const Trained& t) {
  const fs::path root = fs::temp_directory_path() / "maxsep_acceptance";
  fs::remove_all(root);
  RunConfig rc = base;
  rc.dataset = (root / "data").string();
  gen_command(SyntheticSpec{}, rc.dataset);
  std::vector<std::string> files[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path dir = root / ("run" + std::to_string(run));
    rc.out = (dir / "train").string();
    const auto a = train_command(rc);
    eval_verify_command({a.checkpoint, a.verification_trials, "", dir / "eval"});
    eval_match_command({a.checkpoint, a.matching_trials, "", dir / "eval"});
    for (const fs::path& f : {a.history, a.checkpoint, dir / "eval" / "metrics_verify.csv",
                             dir / "eval" / "metrics_match.csv", dir / "eval" / "matching_curve.csv"}) {
      files[run].push_back(io::read_file(f));
    }
  }
  fs::remove_all(root);
  std::size_t same = 0;
  for (std::size_t i = 0; i < files[0].size(); ++i) same += files[0][i] == files[1][i];

  const std::string bytes = encode_checkpoint(t.model, {{"note", "round trip"}});
  const LoadedCheckpoint back = decode_checkpoint(bytes);
  const auto a = t.model.params.tensors();
  const auto b = std::as_const(back.model.params).tensors();
  bool exact = a.size() == b.size() && encode_checkpoint(back.model, back.metadata) == bytes;
  for (std::size_t i = 0; exact && i < a.size(); ++i) {
    exact = a[i]->name == b[i]->name && a[i]->value.size() == b[i]->value.size() &&
            std::memcmp(a[i]->value.data(), b[i]->value.data(), sizeof(double) * a[i]->value.size()) == 0;
  }
  return {same == files[0].size() && exact, std::to_string(same) + "/" + std::to_string(files[0].size()) +
                                                " rerun artifacts identical, checkpoint round trip " +
                                                (exact ? "bit-exact" : "differs")};
}

}  // namespace

int main() {
  RunConfig rc;
  rc.seed = 0;
  std::optional<Trained> trained;

  report(1, "simplex geometry, n = 2..128", 5, simplex_geometry);
  report(2, "gradient checks", 30, gradients);
  report(3, "metric oracles", 10, metric_oracles);
  report(4, "synthetic seen-heard verification", 300, [&] { return synthetic_end_to_end(rc, trained); });
  if (trained) {
    report(5, "matching curve", 0, [&] { return matching_curve(*trained); });
    report(6, "ablation ordering", 0, [&] { return ablation_ordering(rc, trained->experiment); });
    report(7, "reproducibility", 0, [&] { return reproducibility(rc, *trained); });
  } else {
    for (int id : {5, 6, 7}) {
      std::printf("[FAIL] %d skipped: no trained model\n", id);
      ++failures;
    }
  }
  std::printf("%d of 7 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
