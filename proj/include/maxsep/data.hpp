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
 * @file data.hpp
 *
 * Datasets of precomputed (or synthetic) face/voice feature pairs, their
 * on-disk directory format, seen-heard / unseen-unheard splits, and the
 * verification and matching trial lists built from a split.
 *
 * Directory format:
 *   manifest.json  dims, record count, ordered instance/speaker ids, tags
 *   faces.f32le    row-major little-endian float32, one row per record
 *   voices.f32le   likewise
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "maxsep/diffcore.hpp"
#include "maxsep/errors.hpp"
#include "maxsep/format.hpp"
#include "maxsep/io.hpp"
#include "maxsep/model.hpp"

namespace maxsep {

struct EmbeddingRecord {
  std::string instance_id;
  std::string speaker_id;
  std::optional<std::string> tag;
  std::vector<float> face;
  std::vector<float> voice;
};

struct Dataset {
  std::size_t face_dim = 0;
  std::size_t voice_dim = 0;
  std::vector<EmbeddingRecord> records;

  /// Throws FormatError on the first broken invariant, naming the record.
  void validate() const {
    if (face_dim == 0 || voice_dim == 0) throw FormatError("dataset: dimensions must be positive");
    if (records.empty()) throw FormatError("dataset: no records");
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      const std::string where = "record " + std::to_string(i) + " ('" + r.instance_id + "')";
      if (r.instance_id.empty() || r.speaker_id.empty()) throw FormatError(where + ": empty instance or speaker id");
      if (!seen.insert(r.instance_id).second) throw FormatError(where + ": duplicate instance id");
      if (r.face.size() != face_dim) {
        throw FormatError(where + ": face vector has " + std::to_string(r.face.size()) + " values, expected " +
                          std::to_string(face_dim));
      }
      if (r.voice.size() != voice_dim) {
        throw FormatError(where + ": voice vector has " + std::to_string(r.voice.size()) + " values, expected " +
                          std::to_string(voice_dim));
      }
    }
  }

  std::unordered_map<std::string, std::size_t> index() const {
    std::unordered_map<std::string, std::size_t> out;
    for (std::size_t i = 0; i < records.size(); ++i) out.emplace(records[i].instance_id, i);
    return out;
  }

  // Speaker ids in order of first appearance.
  std::vector<std::string> speakers() const {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& r : records) {
      if (seen.insert(r.speaker_id).second) out.push_back(r.speaker_id);
    }
    return out;
  }
};

inline Vector to_vector(std::span<const float> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[i];
  return v;
}

// ------------------------------------------------------------- synthetic

struct SyntheticSpec {
  std::size_t n_speakers = 32;
  std::size_t instances_per_speaker = 20;
  std::size_t latent_dim = 16;
  std::size_t face_dim = 64;
  std::size_t voice_dim = 48;
  double modality_noise_sigma = 0.3;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_speakers == 0 || instances_per_speaker == 0 || latent_dim == 0 || face_dim == 0 || voice_dim == 0) {
      throw std::invalid_argument("synthetic spec: all counts and dimensions must be positive");
    }
    if (!(modality_noise_sigma >= 0.0) || !std::isfinite(modality_noise_sigma)) {
      throw std::invalid_argument("synthetic spec: noise sigma must be >= 0");
    }
  }
};

namespace detail {

inline Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = normal(rng);
  }
  return m;
}

// out_dim x latent_dim map with orthonormal columns (or rows, when the
// output is narrower than the latent space).
inline Matrix lifting_map(std::size_t out_dim, std::size_t latent_dim, Rng& rng) {
  const bool tall = out_dim >= latent_dim;
  const Matrix g = tall ? gaussian_matrix(out_dim, latent_dim, rng) : gaussian_matrix(latent_dim, out_dim, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  const Matrix q = qr.householderQ() * Matrix::Identity(g.rows(), g.cols());
  return tall ? q : Matrix(q.transpose());
}

inline std::string zero_padded(std::size_t value, int width) {
  std::string s = std::to_string(value);
  if (static_cast<int>(s.size()) < width) s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
  return s;
}

}  // namespace detail

/// Each speaker gets a unit latent identity z; each instance contributes
/// face = A_f (z + e_f) and voice = A_v (z + e_v), e ~ N(0, sigma^2 I), for
/// fixed random lifting maps A_f, A_v. Values are stored as float32.
inline Dataset gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const Matrix lift_face = detail::lifting_map(spec.face_dim, spec.latent_dim, rng);
  const Matrix lift_voice = detail::lifting_map(spec.voice_dim, spec.latent_dim, rng);
  std::normal_distribution<double> normal(0.0, 1.0);

  Dataset ds;
  ds.face_dim = spec.face_dim;
  ds.voice_dim = spec.voice_dim;
  const auto latent = static_cast<Eigen::Index>(spec.latent_dim);
  auto noisy = [&](const Vector& z) {
    Vector out = z;
    for (Eigen::Index k = 0; k < latent; ++k) out[k] += spec.modality_noise_sigma * normal(rng);
    return out;
  };
  auto to_floats = [](const Vector& v) {
    std::vector<float> out(static_cast<std::size_t>(v.size()));
    for (Eigen::Index k = 0; k < v.size(); ++k) out[static_cast<std::size_t>(k)] = static_cast<float>(v[k]);
    return out;
  };
  for (std::size_t s = 0; s < spec.n_speakers; ++s) {
    Vector z(latent);
    do {
      for (Eigen::Index k = 0; k < latent; ++k) z[k] = normal(rng);
    } while (z.norm() == 0.0);
    z.normalize();
    const std::string speaker = "spk" + detail::zero_padded(s, 4);
    for (std::size_t i = 0; i < spec.instances_per_speaker; ++i) {
      EmbeddingRecord r;
      r.instance_id = speaker + "_" + detail::zero_padded(i, 3);
      r.speaker_id = speaker;
      r.face = to_floats(lift_face * noisy(z));
      r.voice = to_floats(lift_voice * noisy(z));
      ds.records.push_back(std::move(r));
    }
  }
  return ds;
}

// ------------------------------------------------------------------- I/O

namespace detail {

inline nlohmann::json manifest_json(const Dataset& ds) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : ds.records) {
    nlohmann::json entry = {{"instance", r.instance_id}, {"speaker", r.speaker_id}};
    if (r.tag) entry["tag"] = *r.tag;
    records.push_back(std::move(entry));
  }
  return {{"format", "maxsep-dataset"},
          {"version", 1},
          {"face_dim", ds.face_dim},
          {"voice_dim", ds.voice_dim},
          {"n_records", ds.records.size()},
          {"records", std::move(records)}};
}

inline std::string pack_rows(const Dataset& ds, bool faces) {
  std::string out;
  out.reserve(ds.records.size() * (faces ? ds.face_dim : ds.voice_dim) * sizeof(float));
  for (const auto& r : ds.records) {
    for (float v : faces ? r.face : r.voice) io::append_le(out, v);
  }
  return out;
}

inline void unpack_rows(const std::string& bytes, std::size_t dim, std::vector<EmbeddingRecord>& records, bool faces,
                        const std::string& file) {
  const std::size_t row_bytes = dim * sizeof(float);
  const std::size_t expected = row_bytes * records.size();
  if (bytes.size() != expected) {
    if (bytes.size() < expected) {
      const std::size_t broken = bytes.size() / row_bytes;
      const std::size_t have = (bytes.size() - broken * row_bytes) / sizeof(float);
      throw FormatError(file + ": record " + std::to_string(broken) + " ('" + records[broken].instance_id +
                        "') has " + std::to_string(have) + " of " + std::to_string(dim) +
                        " float values (file holds " + std::to_string(bytes.size()) + " bytes, expected " +
                        std::to_string(expected) + ")");
    }
    throw FormatError(file + ": " + std::to_string(bytes.size() - expected) + " trailing bytes after record " +
                      std::to_string(records.size() - 1) + " ('" + records.back().instance_id + "')");
  }
  io::ByteReader reader(bytes, file);
  for (auto& r : records) {
    auto& row = faces ? r.face : r.voice;
    row.resize(dim);
    for (auto& v : row) v = reader.read_le<float>();
  }
}

}  // namespace detail

inline void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  ds.validate();
  std::filesystem::create_directories(dir);
  io::write_file_atomic(dir / "faces.f32le", detail::pack_rows(ds, true));
  io::write_file_atomic(dir / "voices.f32le", detail::pack_rows(ds, false));
  io::write_file_atomic(dir / "manifest.json", detail::manifest_json(ds).dump(2) + "\n");
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  const std::string manifest_path = (dir / "manifest.json").string();
  Dataset ds;
  try {
    const auto manifest = nlohmann::json::parse(io::read_file(dir / "manifest.json"));
    ds.face_dim = manifest.at("face_dim").get<std::size_t>();
    ds.voice_dim = manifest.at("voice_dim").get<std::size_t>();
    const auto& records = manifest.at("records");
    if (!records.is_array()) throw FormatError(manifest_path + ": 'records' is not an array");
    if (manifest.contains("n_records") && manifest.at("n_records").get<std::size_t>() != records.size()) {
      throw FormatError(manifest_path + ": n_records disagrees with the records table");
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& entry = records[i];
      EmbeddingRecord r;
      try {
        r.instance_id = entry.at("instance").get<std::string>();
        r.speaker_id = entry.at("speaker").get<std::string>();
        if (entry.contains("tag") && !entry.at("tag").is_null()) r.tag = entry.at("tag").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(manifest_path + ": record " + std::to_string(i) + ": " + e.what());
      }
      ds.records.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest_path + ": " + e.what());
  }
  if (ds.records.empty()) throw FormatError(manifest_path + ": no records");
  detail::unpack_rows(io::read_file(dir / "faces.f32le"), ds.face_dim, ds.records, true, (dir / "faces.f32le").string());
  detail::unpack_rows(io::read_file(dir / "voices.f32le"), ds.voice_dim, ds.records, false,
                      (dir / "voices.f32le").string());
  try {
    ds.validate();
  } catch (const FormatError& e) {
    throw FormatError(manifest_path + ": " + e.what());
  }
  return ds;
}

/// Content digest over the manifest and both matrices.
inline std::string dataset_digest(const Dataset& ds) {
  Fnv1a64 h;
  h.update(detail::manifest_json(ds).dump());
  h.update(detail::pack_rows(ds, true));
  h.update(detail::pack_rows(ds, false));
  return h.hex();
}

// ---------------------------------------------------------------- splits

enum class SplitMode { kSeenHeard, kUnseenUnheard };

inline std::string_view to_string(SplitMode m) {
  return m == SplitMode::kSeenHeard ? "SEEN_HEARD" : "UNSEEN_UNHEARD";
}

inline SplitMode parse_split_mode(std::string_view s) {
  if (s == "SEEN_HEARD" || s == "seen-heard") return SplitMode::kSeenHeard;
  if (s == "UNSEEN_UNHEARD" || s == "unseen-unheard") return SplitMode::kUnseenUnheard;
  throw std::invalid_argument("unknown split mode '" + std::string(s) + "'");
}

struct SplitRatios {
  double train = 0.6;
  double valid = 0.1;
  double test = 0.3;

  void validate() const {
    if (!(train > 0.0) || !(valid >= 0.0) || !(test > 0.0)) {
      throw std::invalid_argument("split ratios: train and test must be > 0, valid >= 0");
    }
    if (std::abs(train + valid + test - 1.0) > 1e-9) throw std::invalid_argument("split ratios must sum to 1");
  }
};

struct SplitPlan {
  SplitMode mode = SplitMode::kSeenHeard;
  std::vector<std::string> train;
  std::vector<std::string> valid;
  std::vector<std::string> test;
};

namespace detail {

inline std::size_t rounded_share(double ratio, std::size_t n) {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 0.5));
}

}  // namespace detail

/// SEEN_HEARD splits each speaker's instances (every speaker keeps at least
/// one training instance); UNSEEN_UNHEARD assigns whole speakers. When
/// `tag_filter` is set only records carrying that tag take part.
inline SplitPlan make_splits(const Dataset& ds, SplitMode mode, const SplitRatios& ratios, std::uint64_t seed,
                             const std::optional<std::string>& tag_filter = std::nullopt) {
  ratios.validate();
  std::vector<std::string> speaker_order;
  std::map<std::string, std::vector<std::string>> by_speaker;
  for (const auto& r : ds.records) {
    if (tag_filter && r.tag != tag_filter) continue;
    auto [it, inserted] = by_speaker.try_emplace(r.speaker_id);
    if (inserted) speaker_order.push_back(r.speaker_id);
    it->second.push_back(r.instance_id);
  }
  Rng rng(seed);
  SplitPlan plan;
  plan.mode = mode;
  if (mode == SplitMode::kSeenHeard) {
    for (const auto& speaker : speaker_order) {
      auto ids = by_speaker[speaker];
      std::shuffle(ids.begin(), ids.end(), rng);
      const std::size_t k = ids.size();
      std::size_t n_test = detail::rounded_share(ratios.test, k);
      std::size_t n_valid = detail::rounded_share(ratios.valid, k);
      while (n_test + n_valid >= k && (n_test + n_valid) > 0) {
        (n_valid > 0 ? n_valid : n_test) -= 1;
      }
      plan.test.insert(plan.test.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
      plan.valid.insert(plan.valid.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_test),
                        ids.begin() + static_cast<std::ptrdiff_t>(n_test + n_valid));
      plan.train.insert(plan.train.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_test + n_valid), ids.end());
    }
  } else {
    const std::size_t n = speaker_order.size();
    if (n < 3) throw std::invalid_argument("make_splits: UNSEEN_UNHEARD needs at least 3 speakers, have " + std::to_string(n));
    auto speakers = speaker_order;
    std::shuffle(speakers.begin(), speakers.end(), rng);
    const std::size_t n_test = std::max<std::size_t>(1, detail::rounded_share(ratios.test, n));
    const std::size_t n_valid = ratios.valid > 0.0 ? std::max<std::size_t>(1, detail::rounded_share(ratios.valid, n)) : 0;
    if (n_test + n_valid >= n) {
      throw std::invalid_argument("make_splits: ratios leave no training speakers among " + std::to_string(n));
    }
    for (std::size_t s = 0; s < n; ++s) {
      auto& target = s < n_test ? plan.test : s < n_test + n_valid ? plan.valid : plan.train;
      const auto& ids = by_speaker[speakers[s]];
      target.insert(target.end(), ids.begin(), ids.end());
    }
  }
  if (plan.train.empty() || plan.test.empty()) {
    throw std::invalid_argument("make_splits: ratios are infeasible for this dataset (empty train or test split)");
  }
  return plan;
}

inline nlohmann::json to_json(const SplitPlan& plan) {
  return {{"mode", to_string(plan.mode)}, {"train", plan.train}, {"valid", plan.valid}, {"test", plan.test}};
}

inline SplitPlan split_plan_from_json(const nlohmann::json& j) {
  SplitPlan plan;
  plan.mode = parse_split_mode(j.at("mode").get<std::string>());
  plan.train = j.at("train").get<std::vector<std::string>>();
  plan.valid = j.at("valid").get<std::vector<std::string>>();
  plan.test = j.at("test").get<std::vector<std::string>>();
  return plan;
}

/// Speaker id -> class index over the records in `ids`, in first-appearance
/// order of dataset records.
inline std::map<std::string, std::size_t> speaker_index(const Dataset& ds, std::span<const std::string> ids) {
  const std::unordered_set<std::string> wanted(ids.begin(), ids.end());
  std::map<std::string, std::size_t> out;
  for (const auto& r : ds.records) {
    if (wanted.count(r.instance_id)) out.try_emplace(r.speaker_id, out.size());
  }
  return out;
}

inline std::vector<TrainingRecord> training_records(const Dataset& ds, std::span<const std::string> ids) {
  const auto speakers = speaker_index(ds, ids);
  const auto idx = ds.index();
  std::vector<TrainingRecord> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = idx.find(id);
    if (it == idx.end()) throw std::invalid_argument("unknown instance id '" + id + "'");
    const auto& r = ds.records[it->second];
    out.push_back({to_vector(r.face), to_vector(r.voice), speakers.at(r.speaker_id)});
  }
  return out;
}

// ---------------------------------------------------------------- trials

struct VerificationTrial {
  std::string face_id;
  std::string voice_id;
  bool same;
};

struct MatchingTrial {
  std::string probe;
  Modality modality;  // of the probe; the gallery holds the other modality
  std::vector<std::string> gallery;
  std::size_t answer;
};

/// Builds ⌊n/2⌋ distinct positive and n - ⌊n/2⌋ distinct negative pairs.
/// Positives take face and voice from instances of one speaker (the same
/// instance only when `same_instance_positives`); negatives from two
/// different speakers.
inline std::vector<VerificationTrial> make_verification_trials(const Dataset& ds, std::span<const std::string> ids,
                                                               std::size_t n_trials, std::uint64_t seed,
                                                               bool same_instance_positives = false) {
  const auto idx = ds.index();
  std::map<std::string, std::vector<std::string>> by_speaker;
  std::vector<std::string> members;
  for (const auto& id : ids) {
    const auto it = idx.find(id);
    if (it == idx.end()) throw std::invalid_argument("make_verification_trials: unknown instance id '" + id + "'");
    by_speaker[ds.records[it->second].speaker_id].push_back(id);
    members.push_back(id);
  }
  if (by_speaker.size() < 2) throw std::invalid_argument("make_verification_trials: split needs at least 2 speakers");
  const std::size_t n_pos = n_trials / 2;
  const std::size_t n_neg = n_trials - n_pos;

  double pos_available = 0.0, same_speaker_cells = 0.0;
  for (const auto& [speaker, list] : by_speaker) {
    const double k = static_cast<double>(list.size());
    same_speaker_cells += k * k;
    pos_available += same_instance_positives ? k : k * k;
  }
  const double total = static_cast<double>(members.size());
  const double neg_available = total * total - same_speaker_cells;
  if (static_cast<double>(n_pos) > pos_available || static_cast<double>(n_neg) > neg_available) {
    throw std::invalid_argument("make_verification_trials: split has " + format_double(pos_available) +
                                " distinct positive and " + format_double(neg_available) +
                                " distinct negative pairs, cannot form " + std::to_string(n_pos) + " + " +
                                std::to_string(n_neg));
  }

  auto speaker_of = [&](const std::string& id) -> const std::string& { return ds.records[idx.at(id)].speaker_id; };
  Rng rng(seed);
  auto pick = [&rng](const std::vector<std::string>& v) -> const std::string& {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  std::set<std::pair<std::string, std::string>> used;
  std::vector<VerificationTrial> trials;
  trials.reserve(n_trials);
  while (trials.size() < n_pos) {
    const std::string& face = pick(members);
    const std::string& voice = same_instance_positives ? face : pick(by_speaker.at(speaker_of(face)));
    if (used.emplace(face, voice).second) trials.push_back({face, voice, true});
  }
  while (trials.size() < n_trials) {
    const std::string& face = pick(members);
    const std::string& voice = pick(members);
    if (speaker_of(face) == speaker_of(voice)) continue;
    if (used.emplace(face, voice).second) trials.push_back({face, voice, false});
  }
  std::shuffle(trials.begin(), trials.end(), rng);
  return trials;
}

/// Each trial: a random probe, one same-speaker gallery item (a different
/// instance when the speaker has one) and n_c - 1 items of distinct other
/// speakers; the answer position is uniform.
inline std::vector<MatchingTrial> make_matching_trials(const Dataset& ds, std::span<const std::string> ids,
                                                       std::size_t gallery_size, std::size_t n_trials,
                                                       Modality probe_modality, std::uint64_t seed) {
  if (gallery_size < 2) throw std::invalid_argument("make_matching_trials: gallery size must be >= 2");
  const auto idx = ds.index();
  std::vector<std::string> speakers;
  std::map<std::string, std::vector<std::string>> by_speaker;
  for (const auto& id : ids) {
    const auto it = idx.find(id);
    if (it == idx.end()) throw std::invalid_argument("make_matching_trials: unknown instance id '" + id + "'");
    const auto& speaker = ds.records[it->second].speaker_id;
    if (!by_speaker.count(speaker)) speakers.push_back(speaker);
    by_speaker[speaker].push_back(id);
  }
  if (speakers.size() < gallery_size) {
    throw std::invalid_argument("make_matching_trials: gallery size " + std::to_string(gallery_size) + " exceeds the " +
                                std::to_string(speakers.size()) + " speakers in the split");
  }
  Rng rng(seed);
  auto uniform = [&rng](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  std::vector<MatchingTrial> trials;
  trials.reserve(n_trials);
  std::vector<std::size_t> others(speakers.size());
  for (std::size_t t = 0; t < n_trials; ++t) {
    const std::size_t s = uniform(speakers.size());
    const auto& own = by_speaker.at(speakers[s]);
    const std::size_t probe_pos = uniform(own.size());
    std::string match = own[probe_pos];
    if (own.size() > 1) {
      std::size_t j = uniform(own.size() - 1);
      if (j >= probe_pos) ++j;
      match = own[j];
    }
    // partial Fisher-Yates over the other speakers
    std::iota(others.begin(), others.end(), std::size_t{0});
    std::swap(others[s], others.back());
    const std::size_t pool = others.size() - 1;
    MatchingTrial trial{own[probe_pos], probe_modality, {}, uniform(gallery_size)};
    for (std::size_t k = 0; k + 1 < gallery_size; ++k) {
      const std::size_t pick = k + uniform(pool - k);
      std::swap(others[k], others[pick]);
      const auto& list = by_speaker.at(speakers[others[k]]);
      trial.gallery.push_back(list[uniform(list.size())]);
    }
    trial.gallery.insert(trial.gallery.begin() + static_cast<std::ptrdiff_t>(trial.answer), match);
    trials.push_back(std::move(trial));
  }
  return trials;
}

// CSV with header `face_id,voice_id,label`.
inline std::string verification_trials_csv(std::span<const VerificationTrial> trials) {
  std::string out = "face_id,voice_id,label\n";
  for (const auto& t : trials) out += t.face_id + "," + t.voice_id + "," + (t.same ? "1" : "0") + "\n";
  return out;
}

inline std::vector<VerificationTrial> parse_verification_trials_csv(const std::string& text,
                                                                    const std::string& source = "trials") {
  std::vector<VerificationTrial> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("face_id,", 0) == 0) continue;
    const auto a = line.find(',');
    const auto b = a == std::string::npos ? a : line.find(',', a + 1);
    if (b == std::string::npos || line.find(',', b + 1) != std::string::npos) {
      throw FormatError(source + ":" + std::to_string(line_no) + ": expected face_id,voice_id,label");
    }
    const std::string label = line.substr(b + 1);
    if (label != "0" && label != "1") throw FormatError(source + ":" + std::to_string(line_no) + ": label must be 0 or 1");
    out.push_back({line.substr(0, a), line.substr(a + 1, b - a - 1), label == "1"});
  }
  return out;
}

// One JSON object per line: {"probe", "modality", "gallery", "answer"}.
inline std::string matching_trials_jsonl(std::span<const MatchingTrial> trials) {
  std::string out;
  for (const auto& t : trials) {
    out += nlohmann::json{{"probe", t.probe}, {"modality", to_string(t.modality)}, {"gallery", t.gallery},
                          {"answer", t.answer}}
               .dump();
    out += "\n";
  }
  return out;
}

inline std::vector<MatchingTrial> parse_matching_trials_jsonl(const std::string& text,
                                                              const std::string& source = "trials") {
  std::vector<MatchingTrial> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      MatchingTrial t{j.at("probe").get<std::string>(), parse_modality(j.at("modality").get<std::string>()),
                      j.at("gallery").get<std::vector<std::string>>(), j.at("answer").get<std::size_t>()};
      if (t.gallery.size() < 2 || t.answer >= t.gallery.size()) {
        throw FormatError("gallery must hold >= 2 items and answer must index into it");
      }
      out.push_back(std::move(t));
    } catch (const std::exception& e) {
      throw FormatError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace maxsep
