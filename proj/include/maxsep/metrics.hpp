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
 * @file metrics.hpp
 *
 * Verification metrics (ROC, EER, AUC) over scored face/voice trials and
 * matching accuracy over gallery trials, plus the report document they are
 * serialized into.
 *
 * Decision rule: a trial is accepted as same-speaker when score >= threshold.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "maxsep/format.hpp"

namespace maxsep {

struct ScoredTrials {
  std::vector<double> scores;
  std::vector<bool> labels;  // true = same speaker

  void add(double score, bool same) {
    scores.push_back(score);
    labels.push_back(same);
  }
  std::size_t size() const { return scores.size(); }
  std::size_t positives() const { return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true)); }
};

namespace detail {

inline void require_both_classes(const ScoredTrials& trials, const char* op) {
  if (trials.scores.size() != trials.labels.size()) {
    throw std::invalid_argument(std::string(op) + ": scores and labels differ in length");
  }
  if (trials.scores.empty()) throw std::invalid_argument(std::string(op) + ": no trials");
  const std::size_t pos = trials.positives();
  if (pos == 0 || pos == trials.size()) {
    throw std::invalid_argument(std::string(op) + ": both positive and negative trials are required");
  }
  for (double s : trials.scores) {
    if (std::isnan(s)) throw std::invalid_argument(std::string(op) + ": NaN score");
  }
}

inline std::vector<std::size_t> order_by_score(const ScoredTrials& trials) {
  std::vector<std::size_t> order(trials.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return trials.scores[a] < trials.scores[b]; });
  return order;
}

}  // namespace detail

struct RocPoint {
  double threshold;
  double fpr;  // negatives with score >= threshold
  double fnr;  // positives with score < threshold
};

/// One point per distinct score plus sentinels at -inf and +inf, ascending
/// in threshold (so FPR falls and FNR rises along the list).
inline std::vector<RocPoint> roc_curve(const ScoredTrials& trials) {
  detail::require_both_classes(trials, "roc_curve");
  const auto order = detail::order_by_score(trials);
  const double n_pos = static_cast<double>(trials.positives());
  const double n_neg = static_cast<double>(trials.size()) - n_pos;

  std::vector<RocPoint> curve;
  curve.push_back({-std::numeric_limits<double>::infinity(), 1.0, 0.0});
  std::size_t pos_below = 0, neg_below = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double threshold = trials.scores[order[k]];
    curve.push_back({threshold, (n_neg - static_cast<double>(neg_below)) / n_neg,
                     static_cast<double>(pos_below) / n_pos});
    for (; k < order.size() && trials.scores[order[k]] == threshold; ++k) {
      (trials.labels[order[k]] ? pos_below : neg_below) += 1;
    }
  }
  curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0});
  return curve;
}

struct EerResult {
  double rate;
  double threshold;
};

/// Equal error rate by linear interpolation between the two adjacent ROC
/// points where FNR - FPR changes sign.
inline EerResult eer(const ScoredTrials& trials) {
  const auto curve = roc_curve(trials);
  for (std::size_t k = 1; k < curve.size(); ++k) {
    const RocPoint& lo = curve[k - 1];
    const RocPoint& hi = curve[k];
    const double d_lo = lo.fnr - lo.fpr;
    const double d_hi = hi.fnr - hi.fpr;
    if (d_hi < 0.0) continue;
    // d_lo < 0 here: the -inf sentinel starts at -1 and earlier points were skipped
    const double t = d_lo / (d_lo - d_hi);
    const double rate = lo.fpr + t * (hi.fpr - lo.fpr);
    double threshold;
    if (!std::isfinite(lo.threshold)) {
      threshold = hi.threshold;
    } else if (!std::isfinite(hi.threshold)) {
      threshold = lo.threshold;
    } else {
      threshold = lo.threshold + t * (hi.threshold - lo.threshold);
    }
    return {rate, threshold};
  }
  // The +inf sentinel has FNR - FPR = 1, so the loop always returns.
  throw std::logic_error("eer: ROC curve never crossed");
}

/// Mann-Whitney statistic via mid-rank sums; ties count 1/2.
inline double auc(const ScoredTrials& trials) {
  detail::require_both_classes(trials, "auc");
  const auto order = detail::order_by_score(trials);
  const double n_pos = static_cast<double>(trials.positives());
  const double n_neg = static_cast<double>(trials.size()) - n_pos;
  double rank_sum = 0.0;
  for (std::size_t k = 0; k < order.size();) {
    std::size_t end = k;
    while (end < order.size() && trials.scores[order[end]] == trials.scores[order[k]]) ++end;
    // ranks k+1 .. end share their mean
    const double mid_rank = 0.5 * static_cast<double>(k + 1 + end);
    for (std::size_t j = k; j < end; ++j) {
      if (trials.labels[order[j]]) rank_sum += mid_rank;
    }
    k = end;
  }
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

struct MatchOutcome {
  std::size_t predicted;
  std::size_t answer;
};

inline double matching_accuracy(std::span<const MatchOutcome> outcomes, std::size_t /*gallery_size*/) {
  if (outcomes.empty()) throw std::invalid_argument("matching_accuracy: no outcomes");
  const auto hits = std::count_if(outcomes.begin(), outcomes.end(),
                                  [](const MatchOutcome& o) { return o.predicted == o.answer; });
  return static_cast<double>(hits) / static_cast<double>(outcomes.size());
}

// ---------------------------------------------------------------- report

struct MetricsReport {
  std::optional<double> eer;
  std::optional<double> auc;
  std::optional<double> eer_threshold;
  std::size_t n_verification_trials = 0;
  std::map<std::size_t, double> matching_accuracy;  // gallery size -> accuracy
  std::map<std::size_t, std::size_t> n_matching_trials;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::string dataset_digest;
  std::map<std::string, std::string> trial_digests;
  nlohmann::json run_config = nlohmann::json::object();
};

namespace detail {

inline nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline std::optional<double> read_optional_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

inline void require_rate(const std::optional<double>& v, const char* what) {
  if (v && !(*v >= 0.0 && *v <= 1.0)) {
    throw std::invalid_argument(std::string("metrics report: ") + what + " outside [0, 1]");
  }
}

}  // namespace detail

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json matching = nlohmann::json::object();
  for (const auto& [n_c, acc] : r.matching_accuracy) {
    matching[std::to_string(n_c)] = {{"accuracy", acc}, {"n_trials", r.n_matching_trials.count(n_c) ? r.n_matching_trials.at(n_c) : 0}};
  }
  return {
      {"eer", detail::optional_number(r.eer)},
      {"auc", detail::optional_number(r.auc)},
      {"eer_threshold", detail::optional_number(r.eer_threshold)},
      {"n_verification_trials", r.n_verification_trials},
      {"matching", matching},
      {"seed", r.seed},
      {"config_digest", r.config_digest},
      {"dataset_digest", r.dataset_digest},
      {"trial_digests", r.trial_digests},
      {"run_config", r.run_config},
  };
}

inline MetricsReport metrics_report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.eer = detail::read_optional_number(j, "eer");
  r.auc = detail::read_optional_number(j, "auc");
  r.eer_threshold = detail::read_optional_number(j, "eer_threshold");
  r.n_verification_trials = j.at("n_verification_trials").get<std::size_t>();
  for (const auto& [key, entry] : j.at("matching").items()) {
    const std::size_t n_c = std::stoul(key);
    r.matching_accuracy[n_c] = entry.at("accuracy").get<double>();
    r.n_matching_trials[n_c] = entry.at("n_trials").get<std::size_t>();
  }
  r.seed = j.at("seed").get<std::uint64_t>();
  r.config_digest = j.at("config_digest").get<std::string>();
  r.dataset_digest = j.at("dataset_digest").get<std::string>();
  r.trial_digests = j.at("trial_digests").get<std::map<std::string, std::string>>();
  r.run_config = j.at("run_config");
  detail::require_rate(r.eer, "eer");
  detail::require_rate(r.auc, "auc");
  for (const auto& [n_c, acc] : r.matching_accuracy) detail::require_rate(acc, "matching accuracy");
  return r;
}

/// Flat header + row for aggregating many runs into one table. Matching
/// columns follow the gallery sizes present in the report.
inline std::string metrics_csv_header(const MetricsReport& r) {
  std::string h = "seed,config_digest,dataset_digest,eer,auc,eer_threshold,n_verification_trials";
  for (const auto& [n_c, acc] : r.matching_accuracy) h += ",acc_nc" + std::to_string(n_c);
  return h;
}

inline std::string metrics_csv_row(const MetricsReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  std::string row = std::to_string(r.seed) + "," + r.config_digest + "," + r.dataset_digest + "," + opt(r.eer) + "," +
                    opt(r.auc) + "," + opt(r.eer_threshold) + "," + std::to_string(r.n_verification_trials);
  for (const auto& [n_c, acc] : r.matching_accuracy) row += "," + format_double(acc);
  return row;
}

// Two columns, ascending gallery size.
inline std::string matching_curve_csv(const MetricsReport& r) {
  std::string out = "n_c,accuracy\n";
  for (const auto& [n_c, acc] : r.matching_accuracy) out += std::to_string(n_c) + "," + format_double(acc) + "\n";
  return out;
}

}  // namespace maxsep
