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
 * @file diffcore.hpp
 *
 * The handful of differentiable primitives the model is made of, each as a
 * forward function plus an explicit backward that maps an upstream gradient
 * to gradients of its inputs. There is no tape: the model calls the
 * backwards in reverse order itself. Also holds the finite-difference
 * checker and Adam with per-epoch exponential learning-rate decay.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "maxsep/errors.hpp"

namespace maxsep {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

// Normalization and cosine refuse inputs with norm at or below this.
inline constexpr double kNormFloor = 1e-12;

/// A trainable tensor and its accumulated gradient. Vectors are n x 1.
struct ParamTensor {
  std::string name;
  Matrix value;
  Matrix grad;

  ParamTensor() = default;
  ParamTensor(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {
    grad = Matrix::Zero(value.rows(), value.cols());
  }

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  bool finite() const { return value.allFinite(); }
};

// ---------------------------------------------------------------- linear

inline Vector apply_linear(const Vector& input, const Matrix& weight, const Vector& bias) {
  if (weight.cols() != input.size() || weight.rows() != bias.size()) {
    throw ShapeError("apply_linear: weight is " + std::to_string(weight.rows()) + "x" +
                     std::to_string(weight.cols()) + ", input " + std::to_string(input.size()) +
                     ", bias " + std::to_string(bias.size()));
  }
  return weight * input + bias;
}

struct LinearGradient {
  Matrix weight;  // g x^T
  Vector bias;    // g
  Vector input;   // W^T g
};

inline LinearGradient linear_backward(const Vector& upstream, const Vector& input, const Matrix& weight) {
  if (upstream.size() != weight.rows() || input.size() != weight.cols()) {
    throw ShapeError("linear_backward: shape mismatch");
  }
  return {upstream * input.transpose(), upstream, weight.transpose() * upstream};
}

// ------------------------------------------------------------------ relu

inline Vector apply_relu(const Vector& input) { return input.cwiseMax(0.0); }

// Subgradient 0 at the kink.
inline Vector relu_backward(const Vector& upstream, const Vector& input) {
  return (input.array() > 0.0).select(upstream, 0.0);
}

// --------------------------------------------------------------- dropout

struct DropoutResult {
  Vector output;
  Vector mask;  // 0 for dropped elements, 1/(1-rate) for survivors; all 1 in eval
};

/// Inverted dropout: survivors are scaled at train time so evaluation is the
/// identity.
inline DropoutResult apply_dropout(const Vector& input, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw std::invalid_argument("apply_dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  Vector mask = Vector::Ones(input.size());
  if (training && rate > 0.0) {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const double keep_scale = 1.0 / (1.0 - rate);
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask[i] = uniform(rng) < rate ? 0.0 : keep_scale;
  }
  return {input.cwiseProduct(mask), std::move(mask)};
}

inline Vector dropout_backward(const Vector& upstream, const Vector& mask) {
  return upstream.cwiseProduct(mask);
}

// ---------------------------------------------------------- l2 normalize

inline double checked_norm(const Vector& x, const char* what) {
  const double norm = x.norm();
  if (!(norm > kNormFloor)) {
    throw DegenerateInputError(std::string(what) + ": vector norm " + std::to_string(norm) +
                               " is at or below the normalization floor");
  }
  return norm;
}

inline Vector l2_normalize(const Vector& input) {
  return input / checked_norm(input, "l2_normalize");
}

// J = (I - x_hat x_hat^T) / |x|, applied as J^T g (J is symmetric).
inline Vector l2_normalize_backward(const Vector& upstream, const Vector& input) {
  const double norm = checked_norm(input, "l2_normalize");
  const Vector unit = input / norm;
  return (upstream - unit * unit.dot(upstream)) / norm;
}

// ------------------------------------------------------------- cosine

inline double cosine_similarity(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeError("cosine_similarity: length mismatch");
  const double na = checked_norm(a, "cosine_similarity");
  const double nb = checked_norm(b, "cosine_similarity");
  return a.dot(b) / (na * nb);
}

struct CosineGradient {
  Vector a;
  Vector b;
};

// d cos / da = (b_hat - cos * a_hat) / |a|, symmetrically for b.
inline CosineGradient cosine_backward(double upstream, const Vector& a, const Vector& b) {
  const double na = checked_norm(a, "cosine_similarity");
  const double nb = checked_norm(b, "cosine_similarity");
  const Vector ua = a / na;
  const Vector ub = b / nb;
  const double cos = ua.dot(ub);
  return {upstream * (ub - cos * ua) / na, upstream * (ua - cos * ub) / nb};
}

// ---------------------------------------------------- softmax cross-entropy

struct CrossEntropy {
  double loss;
  Vector gradient;  // softmax(logits) - one_hot(true_class)
};

inline CrossEntropy softmax_cross_entropy(const Vector& logits, std::size_t true_class) {
  if (true_class >= static_cast<std::size_t>(logits.size())) {
    throw std::invalid_argument("softmax_cross_entropy: class " + std::to_string(true_class) +
                                " out of range for " + std::to_string(logits.size()) + " logits");
  }
  const double shift = logits.maxCoeff();
  const Vector exps = (logits.array() - shift).exp().matrix();
  const double sum = exps.sum();
  const auto c = static_cast<Eigen::Index>(true_class);
  CrossEntropy out;
  out.loss = std::log(sum) - (logits[c] - shift);
  out.gradient = exps / sum;
  out.gradient[c] -= 1.0;
  return out;
}

// ------------------------------------------------------------ grad check

struct ValueAndGradient {
  double value;
  Vector gradient;
};

using Objective = std::function<ValueAndGradient(const Vector&)>;

/// Largest coordinate-wise relative error between the analytic gradient at
/// `point` and central differences with the given step. The denominator is
/// max(|analytic|, |numeric|, 1e-8).
inline double grad_check(const Objective& objective, const Vector& point, double step = 1e-6) {
  const Vector analytic = objective(point).gradient;
  if (analytic.size() != point.size()) throw ShapeError("grad_check: gradient length mismatch");
  double worst = 0.0;
  Vector probe = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + step;
    const double up = objective(probe).value;
    probe[i] = point[i] - step;
    const double down = objective(probe).value;
    probe[i] = point[i];
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

// ------------------------------------------------------------------ adam

struct AdamConfig {
  double base_lr = 1e-4;
  double decay_rate = 0.95;  // per epoch
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  double learning_rate(std::size_t epoch) const {
    return base_lr * std::pow(decay_rate, static_cast<double>(epoch));
  }

  void validate() const {
    if (!(base_lr > 0.0) || !std::isfinite(base_lr)) throw std::invalid_argument("adam: base_lr must be > 0");
    if (!(decay_rate > 0.0 && decay_rate <= 1.0)) throw std::invalid_argument("adam: decay_rate must be in (0, 1]");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw std::invalid_argument("adam: betas must be in [0, 1)");
    }
    if (!(epsilon > 0.0)) throw std::invalid_argument("adam: epsilon must be > 0");
  }
};

struct AdamState {
  AdamConfig config;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::size_t step_count = 0;

  explicit AdamState(AdamConfig c = {}) : config(c) { config.validate(); }
};

/// One bias-corrected Adam update at the learning rate of `epoch`; zeroes
/// the gradients afterwards. Throws NumericError naming the first parameter
/// with a non-finite gradient, before anything is modified.
inline void adam_step(std::span<ParamTensor* const> params, AdamState& state, std::size_t epoch) {
  for (const ParamTensor* p : params) {
    if (p->grad.rows() != p->value.rows() || p->grad.cols() != p->value.cols()) {
      throw ShapeError("adam_step: gradient shape of '" + p->name + "' does not match its value");
    }
    if (!p->grad.allFinite()) throw NumericError("adam_step: non-finite gradient in parameter '" + p->name + "'");
  }
  if (state.first_moment.empty()) {
    for (const ParamTensor* p : params) {
      state.first_moment.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      state.second_moment.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (state.first_moment.size() != params.size()) throw ShapeError("adam_step: state tracks a different parameter set");

  const AdamConfig& c = state.config;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  const double lr = c.learning_rate(epoch);
  for (std::size_t k = 0; k < params.size(); ++k) {
    ParamTensor& p = *params[k];
    Matrix& m = state.first_moment[k];
    Matrix& v = state.second_moment[k];
    if (m.rows() != p.value.rows() || m.cols() != p.value.cols()) {
      throw ShapeError("adam_step: moment shape mismatch for '" + p.name + "'");
    }
    m = c.beta1 * m + (1.0 - c.beta1) * p.grad;
    v = c.beta2 * v + (1.0 - c.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + c.epsilon);
    if (!p.value.allFinite()) throw NumericError("adam_step: parameter '" + p.name + "' became non-finite");
    p.zero_grad();
  }
}

}  // namespace maxsep
