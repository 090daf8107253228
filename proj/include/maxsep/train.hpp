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
 * @file train.hpp
 *
 * Mini-batch training with Adam and per-epoch exponential learning-rate
 * decay. After every epoch the model is scored on a validation pair set;
 * the parameters of the epoch with the lowest validation EER are returned.
 */

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "maxsep/diffcore.hpp"
#include "maxsep/errors.hpp"
#include "maxsep/format.hpp"
#include "maxsep/metrics.hpp"
#include "maxsep/model.hpp"

namespace maxsep {

struct TrainOptions {
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  AdamConfig adam{};
  std::uint64_t seed = 0;
};

struct VerificationPair {
  Vector face;
  Vector voice;
  bool same;
};

struct EpochRecord {
  std::size_t epoch;  // 1-based
  double train_loss;  // instance-weighted mean of batch totals
  std::optional<double> valid_eer;
  double learning_rate;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> history;
  std::size_t selected_epoch = 0;  // 0 = initial parameters
};

/// Validation EER of `model` over labelled pairs.
inline double verification_eer(const Model& model, std::span<const VerificationPair> pairs) {
  ScoredTrials trials;
  for (const auto& p : pairs) trials.add(score_pair(model, p.face, p.voice), p.same);
  return eer(trials).rate;
}

namespace detail {

// Separate streams for init and for shuffling/dropout, both from one seed.
inline Rng training_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x7472u};
  return Rng(seq);
}

}  // namespace detail

/// Trains from init_params(config, seed). With an empty validation set the
/// last epoch is selected; ties in validation EER keep the earlier epoch.
inline TrainResult train(const ModelConfig& config, std::span<const TrainingRecord> train_set,
                         std::span<const VerificationPair> valid_set, const TrainOptions& options) {
  config.validate();
  options.adam.validate();
  if (options.batch_size == 0) throw std::invalid_argument("train: batch_size must be > 0");
  if (options.epochs > 0 && train_set.empty()) throw std::invalid_argument("train: empty training set");
  for (const auto& r : train_set) {
    if (r.speaker >= config.n_speakers) throw std::invalid_argument("train: speaker index out of range");
  }

  Model model = Model::initialized(config, options.seed);
  TrainResult result{model.params, {}, 0};
  std::optional<double> best_eer;
  Rng rng = detail::training_rng(options.seed);
  AdamState adam(options.adam);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<TrainingRecord> batch;

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += options.batch_size, ++b) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(train_set[order[k]]);
      try {
        const LossBreakdown loss = batch_loss(model, batch, rng, true);
        if (!std::isfinite(loss.total)) throw NumericError("non-finite loss");
        loss_sum += loss.total * static_cast<double>(batch.size());
        auto tensors = model.params.tensors();
        adam_step(tensors, adam, epoch);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(b + 1) + ": " + e.what());
      } catch (const DegenerateInputError& e) {
        throw DegenerateInputError("epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(b + 1) + ": " +
                                   e.what());
      }
    }
    EpochRecord record{epoch + 1, loss_sum / static_cast<double>(train_set.size()), std::nullopt,
                       options.adam.learning_rate(epoch)};
    if (!valid_set.empty()) record.valid_eer = verification_eer(model, valid_set);
    result.history.push_back(record);
    const bool better = !record.valid_eer || !best_eer || *record.valid_eer < *best_eer;
    if (better) {
      if (record.valid_eer) best_eer = record.valid_eer;
      result.params = model.params;
      result.selected_epoch = epoch + 1;
    }
  }
  return result;
}

// Header `epoch,train_loss,valid_eer,lr`; valid_eer is empty when no
// validation set was given.
inline std::string history_csv(std::span<const EpochRecord> history) {
  std::string out = "epoch,train_loss,valid_eer,lr\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + "," + format_double(r.train_loss) + "," +
           (r.valid_eer ? format_double(*r.valid_eer) : std::string()) + "," + format_double(r.learning_rate) + "\n";
  }
  return out;
}

}  // namespace maxsep
