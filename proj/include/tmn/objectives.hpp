// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tmn/tensor.hpp"
#include "tmn/tree.hpp"

namespace tmn::objectives {

struct LossConfig {
  double tau = 0.05;
  double beta = 10.0;
  double w_entail = 0.55;   // pulls entailment pairs together
  double w_contra = 0.30;   // pushes contradiction pairs apart
  double w_neutral = 0.15;  // steers neutral pairs toward zero similarity

  void validate() const;
  bool operator==(const LossConfig&) const = default;

  static LossConfig snli3();
  static LossConfig semeval2();
};

/// Clamped cosine similarity of two equal-length vectors.
double cosine(const double* a, const double* b, std::size_t n);
double cosine(const std::vector<double>& a, const std::vector<double>& b);

/// Cosine matrix between the rows of a [na,d] and b [nb,d].
ad::Tensor pairwise_cosine(const ad::Tensor& a, const ad::Tensor& b);

/// Rows of the embedding matrix holding one side of every pair, pair order.
ad::Tensor side_rows(const ad::Tensor& embeddings, const data::GraphBatch& batch,
                     data::Side side);

/// Cosine of each true pair's two embeddings, pair order.
ad::Tensor pair_cosines(const ad::Tensor& embeddings,
                        const data::GraphBatch& batch);

/// One anchor row with its positive and negative partner rows.
struct AnchorSet {
  std::size_t anchor = 0;
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
};

struct BatchRelations {
  std::vector<AnchorSet> anchors;

  /// Every referenced row must exist, the positive and negative sets must
  /// be duplicate-free and disjoint, and no anchor may relate to itself.
  void validate(std::size_t num_rows) const;
};

/// Pretraining relations: each entailment pair's premise anchors its own
/// hypothesis against every other hypothesis in the batch.
BatchRelations entailment_relations(const data::GraphBatch& batch);

struct NceResult {
  ad::Tensor loss;          // scalar
  std::size_t used = 0;     // anchors contributing a term
  std::size_t skipped = 0;  // anchors without positives or negatives
};

/// Contrastive loss over cosine similarities:
///   -mean_i log( sum_P exp(s/tau) / (sum_P exp(s/tau) + sum_N exp(s/tau)) )
/// Anchors missing either set are skipped; if none remain the batch cannot
/// produce a loss and EmptyLossError is thrown.
NceResult infonce(const ad::Tensor& embeddings, const BatchRelations& relations,
                  double tau);

/// Similarity reshaping per relation class: identity for entailment,
/// negation for contradiction, 1 - |s| for neutral (peaks at s = 0).
enum class Transform { sim_pos, dist_cos, sim_mid };

ad::Tensor apply_transform(Transform t, const ad::Tensor& s);
Transform transform_for_label(int label);

/// Weighted sum of per-class contrastive terms over the pair cosine matrix.
/// Each pair anchors its own partner against the partners of differently
/// labeled pairs, scored through its class transform. Classes with zero
/// weight contribute nothing at all.
NceResult multi_objective_loss(const ad::Tensor& embeddings,
                               const data::GraphBatch& batch,
                               const LossConfig& config);

/// Banded decision rule on a similarity: below lo is contradiction, above
/// hi is entailment, the closed band between is neutral.
int threshold_classify(double s, double lo = -0.33, double hi = 0.33);

struct SoftLogits {
  double contradiction = 0.0;
  double neutral = 0.0;
  double entailment = 0.0;
};

/// Distance-to-center logits: -beta * |s - c| with centers -0.66, 0, 0.66.
SoftLogits soft_logits(double s, double beta = 10.0);

/// Argmax over soft logits; exact ties resolve to neutral.
int soft_classify(double s, double beta = 10.0);

/// Mean cross entropy of soft logits against the given labels, one
/// similarity per pair.
ad::Tensor soft_cross_entropy(const ad::Tensor& similarities,
                              const std::vector<int>& labels,
                              double beta = 10.0);

}  // namespace tmn::objectives
