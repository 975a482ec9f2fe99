// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#include "tmn/metrics.hpp"

#include <cmath>
#include <string>

#include "tmn/error.hpp"
#include "tmn/tree.hpp"

namespace tmn::metrics {

std::size_t Confusion::index_of(int label) {
  switch (label) {
    case data::kContradiction:
      return 0;
    case data::kNeutral:
      return 1;
    case data::kEntailment:
      return 2;
  }
  throw ContractError("unknown label " + std::to_string(label));
}

void Confusion::add(int true_label, int predicted_label) {
  counts[index_of(true_label)][index_of(predicted_label)] += 1;
}

std::size_t Confusion::total() const {
  std::size_t n = 0;
  for (const auto& row : counts)
    for (std::size_t c : row) n += c;
  return n;
}

std::size_t Confusion::row_sum(std::size_t k) const {
  return counts[k][0] + counts[k][1] + counts[k][2];
}

std::size_t Confusion::col_sum(std::size_t k) const {
  return counts[0][k] + counts[1][k] + counts[2][k];
}

Confusion confusion(const std::vector<int>& truth,
                    const std::vector<int>& predicted) {
  if (truth.size() != predicted.size()) {
    throw ContractError("got " + std::to_string(predicted.size()) +
                        " predictions for " + std::to_string(truth.size()) +
                        " labels");
  }
  Confusion c;
  for (std::size_t i = 0; i < truth.size(); ++i) c.add(truth[i], predicted[i]);
  return c;
}

MetricsReport per_class_metrics(const Confusion& c) {
  std::size_t total = c.total();
  if (total == 0) throw DegenerateError("empty confusion table");

  MetricsReport report;
  std::size_t diag = c.counts[0][0] + c.counts[1][1] + c.counts[2][2];
  report.accuracy = double(diag) / double(total);

  for (std::size_t k = 0; k < 3; ++k) {
    ClassMetrics& m = report.per_class[k];
    std::size_t col = c.col_sum(k);
    std::size_t row = c.row_sum(k);
    if (col == 0) {
      m.degenerate = true;
    } else {
      m.precision = double(c.counts[k][k]) / double(col);
    }
    if (row == 0) {
      m.degenerate = true;
    } else {
      m.recall = double(c.counts[k][k]) / double(row);
    }
    if (m.precision + m.recall == 0.0) {
      m.degenerate = true;
    } else {
      m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    }
  }
  return report;
}

double embedding_norm_std(const ad::Tensor& embeddings) {
  if (embeddings.rank() != 2) {
    throw DimensionError("embedding_norm_std expects a matrix of embeddings");
  }
  std::size_t n = embeddings.rows();
  if (n < 2) {
    throw DegenerateError("need at least two embeddings for a spread");
  }
  std::size_t d = embeddings.cols();
  const auto& v = embeddings.value();

  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) sq += v[i * d + j] * v[i * d + j];
    norms[i] = std::sqrt(sq);
  }
  double mean = 0.0;
  for (double x : norms) mean += x;
  mean /= double(n);
  double var = 0.0;
  for (double x : norms) var += (x - mean) * (x - mean);
  var /= double(n);
  return std::sqrt(var);
}

}  // namespace tmn::metrics
