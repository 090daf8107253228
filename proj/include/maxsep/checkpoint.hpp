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
 * @file checkpoint.hpp
 *
 * Single-file model archive, all integers little-endian:
 *
 *   "MXSPCKPT"                       8-byte magic
 *   u32 version (1)
 *   u64 n, n bytes                   config JSON text
 *   u32 tensor count
 *   per tensor:
 *     u32 n, n bytes                 name
 *     u64 rows, u64 cols             shape
 *     rows*cols f64                  row-major values
 *
 * The JSON holds {"model": <ModelConfig>, "metadata": <free-form>}.
 * Loading reproduces every value bit-exactly.
 */

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "maxsep/errors.hpp"
#include "maxsep/io.hpp"
#include "maxsep/model.hpp"

namespace maxsep {

inline constexpr char kCheckpointMagic[8] = {'M', 'X', 'S', 'P', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"n_speakers", c.n_speakers},
          {"face_in_dim", c.face_in_dim},
          {"voice_in_dim", c.voice_in_dim},
          {"embed_dim", c.embed_dim},
          {"dropout_rate", c.dropout_rate},
          {"alpha", c.alpha},
          {"variant", to_string(c.variant)},
          {"oc_normalization", to_string(c.oc_normalization)},
          {"oc_pair_scope", to_string(c.oc_pair_scope)},
          {"renormalize_fused", c.renormalize_fused},
          {"prototype_projection", c.prototype_projection}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.n_speakers = j.at("n_speakers").get<std::size_t>();
  c.face_in_dim = j.at("face_in_dim").get<std::size_t>();
  c.voice_in_dim = j.at("voice_in_dim").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.alpha = j.at("alpha").get<double>();
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.oc_normalization = parse_oc_normalization(j.at("oc_normalization").get<std::string>());
  c.oc_pair_scope = parse_oc_pair_scope(j.at("oc_pair_scope").get<std::string>());
  c.renormalize_fused = j.at("renormalize_fused").get<bool>();
  c.prototype_projection = j.value("prototype_projection", false);
  return c;
}

inline std::string encode_checkpoint(const Model& model, const nlohmann::json& metadata = nlohmann::json::object()) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  io::append_le(out, kCheckpointVersion);
  const std::string config = nlohmann::json{{"model", to_json(model.config)}, {"metadata", metadata}}.dump();
  io::append_le(out, static_cast<std::uint64_t>(config.size()));
  out += config;
  const auto tensors = model.params.tensors();
  io::append_le(out, static_cast<std::uint32_t>(tensors.size()));
  for (const ParamTensor* t : tensors) {
    io::append_le(out, static_cast<std::uint32_t>(t->name.size()));
    out += t->name;
    io::append_le(out, static_cast<std::uint64_t>(t->value.rows()));
    io::append_le(out, static_cast<std::uint64_t>(t->value.cols()));
    for (Eigen::Index r = 0; r < t->value.rows(); ++r) {
      for (Eigen::Index c = 0; c < t->value.cols(); ++c) io::append_le(out, t->value(r, c));
    }
  }
  return out;
}

struct LoadedCheckpoint {
  Model model;
  nlohmann::json metadata;
};

inline LoadedCheckpoint decode_checkpoint(const std::string& bytes, const std::string& source = "checkpoint") {
  io::ByteReader in(bytes, source);
  if (in.read_bytes(sizeof(kCheckpointMagic)) != std::string(kCheckpointMagic, sizeof(kCheckpointMagic))) {
    throw FormatError(source + ": not a model checkpoint (bad magic)");
  }
  const auto version = in.read_le<std::uint32_t>();
  if (version != kCheckpointVersion) throw FormatError(source + ": unsupported version " + std::to_string(version));
  nlohmann::json header;
  ModelConfig config;
  try {
    header = nlohmann::json::parse(in.read_bytes(in.read_le<std::uint64_t>()));
    config = model_config_from_json(header.at("model"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(source + ": bad config header: " + e.what());
  }
  std::map<std::string, Matrix> tensors;
  const auto count = in.read_le<std::uint32_t>();
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name = in.read_bytes(in.read_le<std::uint32_t>());
    const auto rows = in.read_le<std::uint64_t>();
    const auto cols = in.read_le<std::uint64_t>();
    if (cols != 0 && rows > in.remaining() / 8 / cols) throw FormatError(source + ": tensor '" + name + "' is truncated");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = in.read_le<double>();
    }
    if (!tensors.emplace(std::move(name), std::move(m)).second) throw FormatError(source + ": duplicate tensor");
  }
  if (in.remaining() != 0) throw FormatError(source + ": trailing bytes");

  auto take = [&](const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError(source + ": missing tensor '" + name + "'");
    ParamTensor t(name, std::move(it->second));
    tensors.erase(it);
    return t;
  };
  ModelParams p;
  p.face_weight = take("face_weight");
  p.face_bias = take("face_bias");
  p.voice_weight = take("voice_weight");
  p.voice_bias = take("voice_bias");
  p.fusion_logit = take("fusion_logit");
  p.classifier = tensors.count("classifier") ? take("classifier") : ParamTensor("classifier", Matrix(0, 0));
  p.projection = tensors.count("projection") ? take("projection") : ParamTensor("projection", Matrix(0, 0));
  if (!tensors.empty()) throw FormatError(source + ": unexpected tensor '" + tensors.begin()->first + "'");
  if (!p.finite()) throw FormatError(source + ": non-finite parameter values");
  try {
    return {Model(config, std::move(p)), header.value("metadata", nlohmann::json::object())};
  } catch (const std::invalid_argument& e) {
    throw FormatError(source + ": " + e.what());
  }
}

inline void save_checkpoint(const Model& model, const std::filesystem::path& path,
                            const nlohmann::json& metadata = nlohmann::json::object()) {
  io::write_file_atomic(path, encode_checkpoint(model, metadata));
}

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path), path.string());
}

}  // namespace maxsep
