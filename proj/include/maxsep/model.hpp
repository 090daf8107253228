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
 * @file model.hpp
 *
 * Two projection heads (face, voice), each Linear -> ReLU -> Dropout -> L2
 * normalize, fused by a trainable convex weight into m = w f + (1 - w) v.
 * Speaker logits are P^T m for the fixed prototype matrix P (variants MSM and
 * OURS) or C m for a trainable bias-free classifier C (variants CE and FOP).
 * The objective is mean cross-entropy plus alpha times the orthogonality
 * constraint loss over the batch.
 *
 * At inference the face and voice embeddings are compared by cosine; the
 * fused embedding is only a training device.
 */

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "maxsep/diffcore.hpp"
#include "maxsep/errors.hpp"
#include "maxsep/simplex.hpp"

namespace maxsep {

enum class Variant { kCE, kMSM, kFOP, kOurs };
enum class OcNormalization { kMean, kSum };
enum class OcPairScope { kFusedOnly, kModalityPooled };
enum class Modality { kFace, kVoice };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kCE: return "CE";
    case Variant::kMSM: return "MSM";
    case Variant::kFOP: return "FOP";
    case Variant::kOurs: return "OURS";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "CE") return Variant::kCE;
  if (s == "MSM") return Variant::kMSM;
  if (s == "FOP") return Variant::kFOP;
  if (s == "OURS") return Variant::kOurs;
  throw std::invalid_argument("unknown variant '" + std::string(s) + "' (expected CE, MSM, FOP or OURS)");
}

inline std::string_view to_string(OcNormalization n) { return n == OcNormalization::kMean ? "MEAN" : "SUM"; }

inline OcNormalization parse_oc_normalization(std::string_view s) {
  if (s == "MEAN") return OcNormalization::kMean;
  if (s == "SUM") return OcNormalization::kSum;
  throw std::invalid_argument("unknown oc normalization '" + std::string(s) + "'");
}

inline std::string_view to_string(OcPairScope s) {
  return s == OcPairScope::kFusedOnly ? "FUSED_ONLY" : "MODALITY_POOLED";
}

inline OcPairScope parse_oc_pair_scope(std::string_view s) {
  if (s == "FUSED_ONLY") return OcPairScope::kFusedOnly;
  if (s == "MODALITY_POOLED") return OcPairScope::kModalityPooled;
  throw std::invalid_argument("unknown oc pair scope '" + std::string(s) + "'");
}

inline std::string_view to_string(Modality m) { return m == Modality::kFace ? "face" : "voice"; }

inline Modality parse_modality(std::string_view s) {
  if (s == "face") return Modality::kFace;
  if (s == "voice") return Modality::kVoice;
  throw std::invalid_argument("unknown modality '" + std::string(s) + "'");
}

inline bool uses_separation_matrix(Variant v) { return v == Variant::kMSM || v == Variant::kOurs; }
inline bool uses_oc_loss(Variant v) { return v == Variant::kFOP || v == Variant::kOurs; }

inline constexpr std::size_t kDefaultFreeEmbedDim = 128;

struct ModelConfig {
  std::size_t n_speakers = 0;
  std::size_t face_in_dim = 0;
  std::size_t voice_in_dim = 0;
  std::size_t embed_dim = 0;
  double dropout_rate = 0.5;
  double alpha = 1.0;
  Variant variant = Variant::kOurs;
  OcNormalization oc_normalization = OcNormalization::kMean;
  OcPairScope oc_pair_scope = OcPairScope::kFusedOnly;
  bool renormalize_fused = false;
  // MSM/OURS only: the fused embedding is Q (w f + (1 - w) v) for a
  // trainable bias-free Q of shape (n_speakers-1) x embed_dim, so the heads
  // may have any width. Without it embed_dim must equal n_speakers - 1.
  bool prototype_projection = false;

  /// A consistent config for `variant`: embed_dim is forced to n_speakers - 1
  /// when the prototype matrix is used (otherwise `free_embed_dim`), and
  /// alpha is forced to 0 for the cross-entropy-only variants.
  static ModelConfig for_variant(Variant variant, std::size_t n_speakers, std::size_t face_in_dim,
                                 std::size_t voice_in_dim, double alpha = 1.0,
                                 std::size_t free_embed_dim = kDefaultFreeEmbedDim,
                                 bool prototype_projection = false) {
    ModelConfig c;
    c.variant = variant;
    c.prototype_projection = prototype_projection && uses_separation_matrix(variant);
    c.n_speakers = n_speakers;
    c.face_in_dim = face_in_dim;
    c.voice_in_dim = voice_in_dim;
    c.embed_dim = uses_separation_matrix(variant) && !c.prototype_projection ? n_speakers - 1 : free_embed_dim;
    c.alpha = uses_oc_loss(variant) ? alpha : 0.0;
    return c;
  }

  void validate() const {
    if (n_speakers < 2) throw std::invalid_argument("model config: n_speakers must be >= 2");
    if (face_in_dim == 0 || voice_in_dim == 0 || embed_dim == 0) {
      throw std::invalid_argument("model config: dimensions must be positive");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
      throw std::invalid_argument("model config: dropout_rate must be in [0, 1)");
    }
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("model config: alpha must be >= 0");
    if (prototype_projection && !uses_separation_matrix(variant)) {
      throw std::invalid_argument("model config: prototype_projection requires variant MSM or OURS");
    }
    if (uses_separation_matrix(variant) && !prototype_projection && embed_dim != n_speakers - 1) {
      throw std::invalid_argument("model config: variant " + std::string(to_string(variant)) +
                                  " requires embed_dim = n_speakers - 1 = " + std::to_string(n_speakers - 1) +
                                  ", got " + std::to_string(embed_dim));
    }
    if (!uses_oc_loss(variant) && alpha != 0.0) {
      throw std::invalid_argument("model config: variant " + std::string(to_string(variant)) + " requires alpha = 0");
    }
  }
};

struct ModelParams {
  ParamTensor face_weight;   // embed_dim x face_in_dim
  ParamTensor face_bias;     // embed_dim x 1
  ParamTensor voice_weight;  // embed_dim x voice_in_dim
  ParamTensor voice_bias;    // embed_dim x 1
  ParamTensor fusion_logit;  // 1 x 1, fusion weight = sigmoid(fusion_logit)
  ParamTensor classifier;    // n_speakers x embed_dim for CE/FOP, empty otherwise
  ParamTensor projection;    // (n_speakers-1) x embed_dim with prototype_projection, empty otherwise

  double fusion_weight() const { return 1.0 / (1.0 + std::exp(-fusion_logit.value(0, 0))); }

  std::vector<ParamTensor*> tensors() {
    std::vector<ParamTensor*> out{&face_weight, &face_bias, &voice_weight, &voice_bias, &fusion_logit};
    if (classifier.value.size() > 0) out.push_back(&classifier);
    if (projection.value.size() > 0) out.push_back(&projection);
    return out;
  }

  std::vector<const ParamTensor*> tensors() const {
    std::vector<const ParamTensor*> out{&face_weight, &face_bias, &voice_weight, &voice_bias, &fusion_logit};
    if (classifier.value.size() > 0) out.push_back(&classifier);
    if (projection.value.size() > 0) out.push_back(&projection);
    return out;
  }

  void zero_grad() {
    for (ParamTensor* p : tensors()) p->zero_grad();
  }

  bool finite() const {
    for (const ParamTensor* p : tensors()) {
      if (!p->finite()) return false;
    }
    return true;
  }
};

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0, fusion weight 0.5.
inline ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  auto uniform_matrix = [&rng](std::size_t rows, std::size_t cols) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
    }
    return m;
  };
  const auto d = static_cast<Eigen::Index>(config.embed_dim);
  ModelParams p;
  p.face_weight = ParamTensor("face_weight", uniform_matrix(config.embed_dim, config.face_in_dim));
  p.face_bias = ParamTensor("face_bias", Matrix::Zero(d, 1));
  p.voice_weight = ParamTensor("voice_weight", uniform_matrix(config.embed_dim, config.voice_in_dim));
  p.voice_bias = ParamTensor("voice_bias", Matrix::Zero(d, 1));
  p.fusion_logit = ParamTensor("fusion_logit", Matrix::Zero(1, 1));
  p.classifier = uses_separation_matrix(config.variant)
                     ? ParamTensor("classifier", Matrix(0, 0))
                     : ParamTensor("classifier", uniform_matrix(config.n_speakers, config.embed_dim));
  p.projection = config.prototype_projection
                     ? ParamTensor("projection", uniform_matrix(config.n_speakers - 1, config.embed_dim))
                     : ParamTensor("projection", Matrix(0, 0));
  return p;
}

/// Config, parameters and (for MSM/OURS) the frozen prototype matrix.
struct Model {
  ModelConfig config;
  ModelParams params;
  std::optional<SeparationMatrix> matrix;

  Model(ModelConfig c, ModelParams p) : config(c), params(std::move(p)) {
    config.validate();
    if (uses_separation_matrix(config.variant)) matrix = build_separation_matrix(config.n_speakers);
    check_shapes();
  }

  static Model initialized(const ModelConfig& c, std::uint64_t seed) { return Model(c, init_params(c, seed)); }

  const SeparationMatrix* separation_matrix() const { return matrix ? &*matrix : nullptr; }

 private:
  void check_shapes() const {
    const auto d = static_cast<Eigen::Index>(config.embed_dim);
    auto expect = [](const ParamTensor& t, Eigen::Index r, Eigen::Index c) {
      if (t.value.rows() != r || t.value.cols() != c) {
        throw ShapeError("model: parameter '" + t.name + "' is " + std::to_string(t.value.rows()) + "x" +
                         std::to_string(t.value.cols()) + ", expected " + std::to_string(r) + "x" + std::to_string(c));
      }
    };
    expect(params.face_weight, d, static_cast<Eigen::Index>(config.face_in_dim));
    expect(params.face_bias, d, 1);
    expect(params.voice_weight, d, static_cast<Eigen::Index>(config.voice_in_dim));
    expect(params.voice_bias, d, 1);
    expect(params.fusion_logit, 1, 1);
    if (uses_separation_matrix(config.variant)) {
      expect(params.classifier, 0, 0);
    } else {
      expect(params.classifier, static_cast<Eigen::Index>(config.n_speakers), d);
    }
    if (config.prototype_projection) {
      expect(params.projection, static_cast<Eigen::Index>(config.n_speakers) - 1, d);
    } else {
      expect(params.projection, 0, 0);
    }
  }
};

struct InstanceEmbeddings {
  Vector face;
  Vector voice;
  Vector fused;
};

namespace detail {

// Intermediate values of one head, kept for the backward pass.
struct HeadTrace {
  Vector pre;      // W x + b
  Vector mask;     // dropout mask
  Vector dropped;  // dropout(relu(pre))
  Vector unit;     // l2 normalized output
};

inline HeadTrace run_head(const ParamTensor& weight, const ParamTensor& bias, const Vector& input, double dropout_rate,
                          Rng& rng, bool training, Modality modality, std::size_t instance) {
  HeadTrace t;
  t.pre = apply_linear(input, weight.value, bias.value.col(0));
  auto dropped = apply_dropout(apply_relu(t.pre), dropout_rate, rng, training);
  t.mask = std::move(dropped.mask);
  t.dropped = std::move(dropped.output);
  if (!(t.dropped.norm() > kNormFloor)) {
    throw DegenerateInputError("instance " + std::to_string(instance) + ": " + std::string(to_string(modality)) +
                               " head output is all zeros after ReLU/dropout");
  }
  t.unit = l2_normalize(t.dropped);
  return t;
}

inline void check_input(const Vector& v, std::size_t expected, Modality modality) {
  if (static_cast<std::size_t>(v.size()) != expected) {
    throw ShapeError(std::string(to_string(modality)) + " input has length " + std::to_string(v.size()) +
                     ", expected " + std::to_string(expected));
  }
}

}  // namespace detail

/// Face and voice embeddings plus their fusion for one instance. Eval mode
/// skips dropout and consumes no randomness.
inline InstanceEmbeddings forward_instance(const Model& model, const Vector& face_raw, const Vector& voice_raw,
                                           bool training, Rng& rng, std::size_t instance = 0) {
  detail::check_input(face_raw, model.config.face_in_dim, Modality::kFace);
  detail::check_input(voice_raw, model.config.voice_in_dim, Modality::kVoice);
  const auto& p = model.params;
  const double rate = model.config.dropout_rate;
  auto f = detail::run_head(p.face_weight, p.face_bias, face_raw, rate, rng, training, Modality::kFace, instance);
  auto v = detail::run_head(p.voice_weight, p.voice_bias, voice_raw, rate, rng, training, Modality::kVoice, instance);
  const double w = p.fusion_weight();
  Vector fused = w * f.unit + (1.0 - w) * v.unit;
  if (model.config.prototype_projection) fused = p.projection.value * fused;
  if (model.config.renormalize_fused) fused = l2_normalize(fused);
  return {std::move(f.unit), std::move(v.unit), std::move(fused)};
}

/// Eval-mode embedding of one raw vector through the head of its modality.
inline Vector embed(const Model& model, const Vector& raw, Modality modality) {
  Rng unused(0);
  const auto& p = model.params;
  if (modality == Modality::kFace) {
    detail::check_input(raw, model.config.face_in_dim, modality);
    return detail::run_head(p.face_weight, p.face_bias, raw, 0.0, unused, false, modality, 0).unit;
  }
  detail::check_input(raw, model.config.voice_in_dim, modality);
  return detail::run_head(p.voice_weight, p.voice_bias, raw, 0.0, unused, false, modality, 0).unit;
}

// --------------------------------------------------------------- OC loss

struct OcLossResult {
  double value = 0.0;
  std::vector<Vector> gradients;  // one per embedding
};

/// 1 - S_pos + |S_neg| where S_pos sums cos over unordered same-label pairs
/// and S_neg over different-label pairs. kMean divides each sum by its pair
/// count; an empty pair set contributes 0 under either normalization.
inline OcLossResult oc_loss_with_gradient(std::span<const Vector> embeddings, std::span<const std::size_t> labels,
                                          OcNormalization normalization) {
  if (embeddings.size() != labels.size()) throw ShapeError("oc_loss: embeddings and labels differ in length");
  if (embeddings.size() < 2) throw std::invalid_argument("oc_loss: at least 2 embeddings are required");
  const std::size_t n = embeddings.size();
  std::vector<Vector> units(n);
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (embeddings[i].size() != embeddings[0].size()) throw ShapeError("oc_loss: embeddings differ in length");
    norms[i] = checked_norm(embeddings[i], "oc_loss");
    units[i] = embeddings[i] / norms[i];
  }
  double s_pos = 0.0, s_neg = 0.0;
  std::size_t n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double c = units[i].dot(units[j]);
      if (labels[i] == labels[j]) {
        s_pos += c;
        ++n_pos;
      } else {
        s_neg += c;
        ++n_neg;
      }
    }
  }
  const bool mean = normalization == OcNormalization::kMean;
  const double pos_scale = mean && n_pos ? 1.0 / static_cast<double>(n_pos) : 1.0;
  const double neg_scale = mean && n_neg ? 1.0 / static_cast<double>(n_neg) : 1.0;
  const double agg_neg = s_neg * neg_scale;

  OcLossResult out;
  out.value = 1.0 - s_pos * pos_scale + std::abs(agg_neg);

  // dL/dcos for a positive pair is -pos_scale; for a negative pair
  // sign(S_neg) * neg_scale, with sign(0) = 0.
  const double neg_coeff = (agg_neg > 0.0 ? 1.0 : agg_neg < 0.0 ? -1.0 : 0.0) * neg_scale;
  const double pos_coeff = -pos_scale;
  out.gradients.assign(n, Vector::Zero(embeddings[0].size()));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double coeff = labels[i] == labels[j] ? pos_coeff : neg_coeff;
      if (coeff == 0.0) continue;
      const double c = units[i].dot(units[j]);
      out.gradients[i] += coeff * (units[j] - c * units[i]) / norms[i];
      out.gradients[j] += coeff * (units[i] - c * units[j]) / norms[j];
    }
  }
  return out;
}

inline double oc_loss(std::span<const Vector> embeddings, std::span<const std::size_t> labels,
                      OcNormalization normalization) {
  return oc_loss_with_gradient(embeddings, labels, normalization).value;
}

// ------------------------------------------------------------ batch loss

struct TrainingRecord {
  Vector face;
  Vector voice;
  std::size_t speaker;
};

using Batch = std::span<const TrainingRecord>;

struct LossBreakdown {
  double total = 0.0;
  double cross_entropy = 0.0;  // mean over the batch
  double orthogonality = 0.0;  // 0 when alpha = 0 (not evaluated)
};

/// Mean cross-entropy + alpha * OC over `batch`. Overwrites the gradient of
/// every trainable tensor in model.params; the prototype matrix takes no
/// gradient. Dropout masks are drawn from `rng` in batch order, face head
/// before voice head.
inline LossBreakdown batch_loss(Model& model, Batch batch, Rng& rng, bool training = true) {
  const ModelConfig& cfg = model.config;
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  if (uses_separation_matrix(cfg.variant) != model.matrix.has_value()) {
    throw std::invalid_argument("batch_loss: prototype matrix must be present exactly for MSM/OURS");
  }
  ModelParams& p = model.params;
  p.zero_grad();
  const std::size_t n = batch.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double w = p.fusion_weight();

  struct Trace {
    detail::HeadTrace face, voice;
    Vector mix;        // w f + (1 - w) v
    Vector projected;  // Q mix with prototype_projection, else mix
    Vector fused;      // what the losses see
    Vector d_fused;    // dL/d fused
    Vector d_face, d_voice;
  };
  std::vector<Trace> traces(n);
  for (std::size_t i = 0; i < n; ++i) {
    const TrainingRecord& r = batch[i];
    if (r.speaker >= cfg.n_speakers) {
      throw std::invalid_argument("batch_loss: instance " + std::to_string(i) + " has speaker index " +
                                  std::to_string(r.speaker) + " >= n_speakers");
    }
    detail::check_input(r.face, cfg.face_in_dim, Modality::kFace);
    detail::check_input(r.voice, cfg.voice_in_dim, Modality::kVoice);
    Trace& t = traces[i];
    t.face = detail::run_head(p.face_weight, p.face_bias, r.face, cfg.dropout_rate, rng, training, Modality::kFace, i);
    t.voice =
        detail::run_head(p.voice_weight, p.voice_bias, r.voice, cfg.dropout_rate, rng, training, Modality::kVoice, i);
    t.mix = w * t.face.unit + (1.0 - w) * t.voice.unit;
    t.projected = cfg.prototype_projection ? Vector(p.projection.value * t.mix) : t.mix;
    t.fused = cfg.renormalize_fused ? l2_normalize(t.projected) : t.projected;
    t.d_face = Vector::Zero(t.mix.size());
    t.d_voice = Vector::Zero(t.mix.size());
  }

  LossBreakdown loss;
  for (std::size_t i = 0; i < n; ++i) {
    Trace& t = traces[i];
    const Vector logits = model.matrix ? class_logits(*model.matrix, t.fused) : Vector(p.classifier.value * t.fused);
    const CrossEntropy ce = softmax_cross_entropy(logits, batch[i].speaker);
    loss.cross_entropy += ce.loss * inv_n;
    const Vector d_logits = ce.gradient * inv_n;
    if (model.matrix) {
      t.d_fused = model.matrix->entries() * d_logits;
    } else {
      p.classifier.grad += d_logits * t.fused.transpose();
      t.d_fused = p.classifier.value.transpose() * d_logits;
    }
  }

  if (cfg.alpha != 0.0) {
    std::vector<Vector> items;
    std::vector<std::size_t> labels;
    if (cfg.oc_pair_scope == OcPairScope::kFusedOnly) {
      for (std::size_t i = 0; i < n; ++i) {
        items.push_back(traces[i].fused);
        labels.push_back(batch[i].speaker);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        items.push_back(traces[i].face.unit);
        labels.push_back(batch[i].speaker);
        items.push_back(traces[i].voice.unit);
        labels.push_back(batch[i].speaker);
      }
    }
    if (items.size() >= 2) {
      const OcLossResult oc = oc_loss_with_gradient(items, labels, cfg.oc_normalization);
      loss.orthogonality = oc.value;
      for (std::size_t i = 0; i < n; ++i) {
        if (cfg.oc_pair_scope == OcPairScope::kFusedOnly) {
          traces[i].d_fused += cfg.alpha * oc.gradients[i];
        } else {
          traces[i].d_face += cfg.alpha * oc.gradients[2 * i];
          traces[i].d_voice += cfg.alpha * oc.gradients[2 * i + 1];
        }
      }
    }
  }
  loss.total = loss.cross_entropy + cfg.alpha * loss.orthogonality;

  double d_weight = 0.0;
  auto head_backward = [](const detail::HeadTrace& t, const Vector& input, const Vector& d_unit, ParamTensor& weight,
                          ParamTensor& bias) {
    Vector g = l2_normalize_backward(d_unit, t.dropped);
    g = dropout_backward(g, t.mask);
    g = relu_backward(g, t.pre);
    weight.grad += g * input.transpose();
    bias.grad.col(0) += g;
  };
  for (std::size_t i = 0; i < n; ++i) {
    Trace& t = traces[i];
    const Vector d_projected = cfg.renormalize_fused ? l2_normalize_backward(t.d_fused, t.projected) : t.d_fused;
    Vector d_mix;
    if (cfg.prototype_projection) {
      p.projection.grad += d_projected * t.mix.transpose();
      d_mix = p.projection.value.transpose() * d_projected;
    } else {
      d_mix = d_projected;
    }
    t.d_face += w * d_mix;
    t.d_voice += (1.0 - w) * d_mix;
    d_weight += d_mix.dot(t.face.unit - t.voice.unit);
    head_backward(t.face, batch[i].face, t.d_face, p.face_weight, p.face_bias);
    head_backward(t.voice, batch[i].voice, t.d_voice, p.voice_weight, p.voice_bias);
  }
  p.fusion_logit.grad(0, 0) = d_weight * w * (1.0 - w);
  return loss;
}

// ------------------------------------------------------------- inference

/// cos(f, v) between the eval-mode face and voice embeddings.
inline double score_pair(const Model& model, const Vector& face_raw, const Vector& voice_raw) {
  return cosine_similarity(embed(model, face_raw, Modality::kFace), embed(model, voice_raw, Modality::kVoice));
}

/// Index of the gallery item (other modality than the probe) with the
/// highest cosine to the probe; ties go to the lowest index.
inline std::size_t match_probe(const Model& model, const Vector& probe_raw, Modality probe_modality,
                               std::span<const Vector> gallery_raw) {
  if (gallery_raw.empty()) throw std::invalid_argument("match_probe: empty gallery");
  const Vector probe = embed(model, probe_raw, probe_modality);
  const Modality target = probe_modality == Modality::kFace ? Modality::kVoice : Modality::kFace;
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < gallery_raw.size(); ++j) {
    const double s = cosine_similarity(probe, embed(model, gallery_raw[j], target));
    if (s > best_score) {
      best_score = s;
      best = j;
    }
  }
  return best;
}

}  // namespace maxsep
