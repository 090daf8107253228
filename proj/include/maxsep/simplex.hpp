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
 * @file simplex.hpp
 *
 * The fixed prototype matrix whose N columns are the vertices of a regular
 * simplex centred at the origin of R^(N-1): unit norm, pairwise dot product
 * -1/(N-1), zero sum. Multiplying a fused embedding by it yields one logit
 * per class with the class prototypes maximally separated by construction.
 */

#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "maxsep/errors.hpp"
#include "maxsep/format.hpp"

namespace maxsep {

/// Immutable (n_classes - 1) x n_classes prototype matrix.
class SeparationMatrix {
 public:
  // Wraps arbitrary entries without checking them; use
  // build_separation_matrix() for a valid matrix and verify_simplex() to
  // audit one obtained elsewhere.
  explicit SeparationMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {}

  std::size_t n_classes() const { return static_cast<std::size_t>(entries_.cols()); }
  std::size_t dim() const { return static_cast<std::size_t>(entries_.rows()); }
  const Eigen::MatrixXd& entries() const { return entries_; }

 private:
  Eigen::MatrixXd entries_;
};

/// Builds P_{n-1} bottom-up from P_1 = (1, -1). Each step prepends the row
/// (1, -1/k, ..., -1/k) and places sqrt(1 - 1/k^2) * P_{k-1} below its
/// trailing k columns, with zeros under the leading 1.
inline SeparationMatrix build_separation_matrix(std::size_t n_classes) {
  if (n_classes < 2) {
    throw std::invalid_argument("build_separation_matrix: n_classes must be >= 2, got " +
                                std::to_string(n_classes));
  }
  Eigen::MatrixXd p(1, 2);
  p << 1.0, -1.0;
  for (std::size_t k = 2; k < n_classes; ++k) {
    const double kd = static_cast<double>(k);
    const Eigen::Index rows = static_cast<Eigen::Index>(k);
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(rows, rows + 1);
    next(0, 0) = 1.0;
    next.block(0, 1, 1, rows).setConstant(-1.0 / kd);
    next.block(1, 1, rows - 1, rows) = std::sqrt(1.0 - 1.0 / (kd * kd)) * p;
    p = std::move(next);
  }
  return SeparationMatrix(std::move(p));
}

/// One logit per class: the dot product of `fused` with each column
/// (prototype), i.e. P^T m.
inline Eigen::VectorXd class_logits(const SeparationMatrix& matrix, const Eigen::VectorXd& fused) {
  if (static_cast<std::size_t>(fused.size()) != matrix.dim()) {
    throw ShapeError("class_logits: fused embedding has length " + std::to_string(fused.size()) +
                     ", expected " + std::to_string(matrix.dim()));
  }
  return matrix.entries().transpose() * fused;
}

struct SimplexViolation {
  enum class Kind { kShape, kColumnNorm, kPairwiseDot, kColumnSum };
  Kind kind;
  std::optional<std::size_t> column_a;
  std::optional<std::size_t> column_b;
  double deviation;  // |measured - expected|
};

inline const char* to_string(SimplexViolation::Kind kind) {
  switch (kind) {
    case SimplexViolation::Kind::kShape: return "shape";
    case SimplexViolation::Kind::kColumnNorm: return "column_norm";
    case SimplexViolation::Kind::kPairwiseDot: return "pairwise_dot";
    case SimplexViolation::Kind::kColumnSum: return "column_sum";
  }
  return "unknown";
}

/// Lists every violated invariant. An empty result means the matrix is a
/// valid regular-simplex prototype matrix at the given tolerance.
inline std::vector<SimplexViolation> verify_simplex(const SeparationMatrix& matrix, double tolerance) {
  if (!(tolerance > 0.0)) throw std::invalid_argument("verify_simplex: tolerance must be > 0");
  std::vector<SimplexViolation> report;
  const auto& p = matrix.entries();
  const std::size_t n = matrix.n_classes();
  if (n < 2 || matrix.dim() + 1 != n) {
    report.push_back({SimplexViolation::Kind::kShape, std::nullopt, std::nullopt,
                      std::abs(static_cast<double>(matrix.dim() + 1) - static_cast<double>(n))});
    return report;
  }
  const Eigen::MatrixXd gram = p.transpose() * p;
  const double off_diagonal = -1.0 / static_cast<double>(n - 1);
  for (std::size_t a = 0; a < n; ++a) {
    const auto ia = static_cast<Eigen::Index>(a);
    const double norm_dev = std::abs(std::sqrt(gram(ia, ia)) - 1.0);
    if (!(norm_dev <= tolerance)) {
      report.push_back({SimplexViolation::Kind::kColumnNorm, a, std::nullopt, norm_dev});
    }
    for (std::size_t b = a + 1; b < n; ++b) {
      const double dev = std::abs(gram(ia, static_cast<Eigen::Index>(b)) - off_diagonal);
      if (!(dev <= tolerance)) report.push_back({SimplexViolation::Kind::kPairwiseDot, a, b, dev});
    }
  }
  const double sum_dev = p.rowwise().sum().cwiseAbs().maxCoeff();
  if (!(sum_dev <= tolerance)) {
    report.push_back({SimplexViolation::Kind::kColumnSum, std::nullopt, std::nullopt, sum_dev});
  }
  return report;
}

// Row-major CSV, one matrix row per line, round-trip precision.
inline void write_matrix_csv(const SeparationMatrix& matrix, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  const auto& p = matrix.entries();
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      if (c) out << ',';
      out << format_double(p(r, c));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace maxsep
