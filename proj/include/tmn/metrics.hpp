// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "tmn/tensor.hpp"

namespace tmn::metrics {

/// 3x3 contingency counts indexed [true][predicted], classes ordered
/// contradiction, neutral, entailment.
struct Confusion {
  std::array<std::array<std::size_t, 3>, 3> counts{};

  static std::size_t index_of(int label);
  void add(int true_label, int predicted_label);
  std::size_t total() const;
  std::size_t row_sum(std::size_t k) const;
  std::size_t col_sum(std::size_t k) const;
};

Confusion confusion(const std::vector<int>& truth,
                    const std::vector<int>& predicted);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Set when a denominator was zero and the value was pinned to 0.
  bool degenerate = false;
};

struct MetricsReport {
  double accuracy = 0.0;
  std::array<ClassMetrics, 3> per_class{};  // contradiction, neutral, entailment

  const ClassMetrics& contradiction() const { return per_class[0]; }
  const ClassMetrics& neutral() const { return per_class[1]; }
  const ClassMetrics& entailment() const { return per_class[2]; }
};

/// Accuracy plus per-class precision, recall and F1 from a confusion table.
/// All values are fractions in [0, 1]. An empty table has no metrics.
MetricsReport per_class_metrics(const Confusion& c);

/// Population standard deviation of the row L2 norms of an embedding
/// matrix. Needs at least two rows to say anything.
double embedding_norm_std(const ad::Tensor& embeddings);

}  // namespace tmn::metrics
