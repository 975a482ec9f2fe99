// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#include "tmn/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "tmn/error.hpp"
#include "tmn/ops.hpp"

namespace tmn::objectives {

using ad::Tensor;

void LossConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  if (w_entail < 0.0 || w_contra < 0.0 || w_neutral < 0.0) {
    throw ConfigError("objective weights must be nonnegative");
  }
  if (w_entail + w_contra + w_neutral <= 0.0) {
    throw ConfigError("at least one objective weight must be positive");
  }
}

LossConfig LossConfig::snli3() { return LossConfig{}; }

LossConfig LossConfig::semeval2() {
  LossConfig c;
  c.w_entail = 0.65;
  c.w_contra = 0.35;
  c.w_neutral = 0.0;
  return c;
}

double cosine(const double* a, const double* b, std::size_t n) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw DegenerateError("cosine of a zero vector is undefined");
  }
  double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw ContractError("cosine needs equal lengths, got " +
                        std::to_string(a.size()) + " and " +
                        std::to_string(b.size()));
  }
  if (a.empty()) throw ContractError("cosine of empty vectors");
  return cosine(a.data(), b.data(), a.size());
}

namespace {

Tensor row_norms(const Tensor& m, const char* what) {
  Tensor sq = ad::row_sum(ad::mul(m, m));
  for (std::size_t i = 0; i < sq.numel(); ++i) {
    if (sq.value()[i] == 0.0) {
      throw DegenerateError(std::string(what) + " row " + std::to_string(i) +
                            " has zero norm");
    }
  }
  return ad::sqrt(sq);
}

/// Per-anchor -log( sum_P e^s / (sum_P e^s + sum_N e^s) ) as a [used,1]
/// column, computed with a per-anchor constant shift for stability.
Tensor nce_terms(const Tensor& pos_scores, const Tensor& neg_scores,
                 const std::vector<std::size_t>& seg_pos,
                 const std::vector<std::size_t>& seg_neg, std::size_t used) {
  std::vector<double> peak(used, -std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < seg_pos.size(); ++k) {
    peak[seg_pos[k]] = std::max(peak[seg_pos[k]], pos_scores.value()[k]);
  }
  for (std::size_t k = 0; k < seg_neg.size(); ++k) {
    peak[seg_neg[k]] = std::max(peak[seg_neg[k]], neg_scores.value()[k]);
  }

  std::vector<double> shift_pos(seg_pos.size()), shift_neg(seg_neg.size());
  for (std::size_t k = 0; k < seg_pos.size(); ++k) shift_pos[k] = peak[seg_pos[k]];
  for (std::size_t k = 0; k < seg_neg.size(); ++k) shift_neg[k] = peak[seg_neg[k]];

  Tensor ep = ad::exp(ad::sub(pos_scores, Tensor::from(shift_pos, {seg_pos.size()})));
  Tensor en = ad::exp(ad::sub(neg_scores, Tensor::from(shift_neg, {seg_neg.size()})));

  Tensor pos_sum = ad::segment_sum(ad::reshape(ep, {seg_pos.size(), 1}), seg_pos, used);
  Tensor neg_sum = ad::segment_sum(ad::reshape(en, {seg_neg.size(), 1}), seg_neg, used);
  return ad::sub(ad::log(ad::add(pos_sum, neg_sum)), ad::log(pos_sum));
}

/// Cosine of embedding row pairs (left[k], right[k]).
Tensor gathered_cosines(const Tensor& embeddings,
                        const std::vector<std::size_t>& left,
                        const std::vector<std::size_t>& right,
                        const char* what) {
  Tensor xl = ad::gather_rows(embeddings, left);
  Tensor xr = ad::gather_rows(embeddings, right);
  Tensor dots = ad::row_sum(ad::mul(xl, xr));
  Tensor nl = row_norms(xl, what);
  Tensor nr = row_norms(xr, what);
  return ad::mul(dots, ad::reciprocal(ad::mul(nl, nr)));
}

}  // namespace

Tensor pairwise_cosine(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) {
    throw DimensionError("pairwise_cosine needs matrices with equal widths");
  }
  Tensor inv_na = ad::reciprocal(row_norms(a, "left"));
  Tensor inv_nb = ad::reciprocal(row_norms(b, "right"));
  Tensor dots = ad::matmul(a, ad::transpose(b));
  Tensor scaled = ad::scale_rows(dots, inv_na);
  return ad::transpose(ad::scale_rows(ad::transpose(scaled), inv_nb));
}

Tensor side_rows(const Tensor& embeddings, const data::GraphBatch& batch,
                 data::Side side) {
  std::vector<std::size_t> idx(batch.num_pairs());
  for (std::size_t p = 0; p < batch.num_pairs(); ++p) {
    idx[p] = batch.graph_of(p, side);
  }
  return ad::gather_rows(embeddings, idx);
}

Tensor pair_cosines(const Tensor& embeddings, const data::GraphBatch& batch) {
  if (batch.num_pairs() == 0) throw EmptyLossError("batch holds no pairs");
  std::vector<std::size_t> left(batch.num_pairs()), right(batch.num_pairs());
  for (std::size_t p = 0; p < batch.num_pairs(); ++p) {
    left[p] = batch.graph_of(p, data::Side::A);
    right[p] = batch.graph_of(p, data::Side::B);
  }
  return gathered_cosines(embeddings, left, right, "pair embedding");
}

void BatchRelations::validate(std::size_t num_rows) const {
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const AnchorSet& a = anchors[i];
    auto context = [&](const std::string& msg) {
      return "anchor set " + std::to_string(i) + ": " + msg;
    };
    if (a.anchor >= num_rows) {
      throw IndexError(context("anchor row " + std::to_string(a.anchor) +
                               " out of range"));
    }
    std::unordered_set<std::size_t> pos, neg;
    for (std::size_t r : a.positives) {
      if (r >= num_rows) {
        throw IndexError(context("positive row " + std::to_string(r) +
                                 " out of range"));
      }
      if (!pos.insert(r).second) {
        throw ContractError(context("duplicate positive row " + std::to_string(r)));
      }
    }
    for (std::size_t r : a.negatives) {
      if (r >= num_rows) {
        throw IndexError(context("negative row " + std::to_string(r) +
                                 " out of range"));
      }
      if (!neg.insert(r).second) {
        throw ContractError(context("duplicate negative row " + std::to_string(r)));
      }
      if (pos.count(r) != 0) {
        throw ContractError(context("row " + std::to_string(r) +
                                    " is both positive and negative"));
      }
    }
    if (pos.count(a.anchor) != 0 || neg.count(a.anchor) != 0) {
      throw ContractError(context("anchor row relates to itself"));
    }
  }
}

BatchRelations entailment_relations(const data::GraphBatch& batch) {
  BatchRelations rel;
  std::size_t pairs = batch.num_pairs();
  for (std::size_t p = 0; p < pairs; ++p) {
    if (batch.labels[p] != data::kEntailment) continue;
    AnchorSet a;
    a.anchor = batch.graph_of(p, data::Side::A);
    a.positives.push_back(batch.graph_of(p, data::Side::B));
    for (std::size_t q = 0; q < pairs; ++q) {
      if (q == p) continue;
      a.negatives.push_back(batch.graph_of(q, data::Side::B));
    }
    rel.anchors.push_back(std::move(a));
  }
  return rel;
}

NceResult infonce(const Tensor& embeddings, const BatchRelations& relations,
                  double tau) {
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (embeddings.rank() != 2) {
    throw DimensionError("infonce expects an embedding matrix");
  }
  relations.validate(embeddings.rows());

  std::vector<const AnchorSet*> used;
  std::size_t skipped = 0;
  for (const AnchorSet& a : relations.anchors) {
    if (a.positives.empty() || a.negatives.empty()) {
      ++skipped;
      continue;
    }
    used.push_back(&a);
  }
  if (used.empty()) {
    throw EmptyLossError("no anchor has both positives and negatives");
  }

  std::vector<std::size_t> lp, rp, sp, ln, rn, sn;
  for (std::size_t i = 0; i < used.size(); ++i) {
    for (std::size_t r : used[i]->positives) {
      lp.push_back(used[i]->anchor);
      rp.push_back(r);
      sp.push_back(i);
    }
    for (std::size_t r : used[i]->negatives) {
      ln.push_back(used[i]->anchor);
      rn.push_back(r);
      sn.push_back(i);
    }
  }

  Tensor pos = ad::scale(gathered_cosines(embeddings, lp, rp, "embedding"), 1.0 / tau);
  Tensor neg = ad::scale(gathered_cosines(embeddings, ln, rn, "embedding"), 1.0 / tau);
  Tensor terms = nce_terms(pos, neg, sp, sn, used.size());
  NceResult result;
  result.loss = ad::scale(ad::sum(terms), 1.0 / double(used.size()));
  result.used = used.size();
  result.skipped = skipped;
  return result;
}

Tensor apply_transform(Transform t, const Tensor& s) {
  switch (t) {
    case Transform::sim_pos:
      return s;
    case Transform::dist_cos:
      return ad::neg(s);
    case Transform::sim_mid:
      return ad::sub(Tensor::constant(s.shape(), 1.0), ad::abs(s));
  }
  throw ContractError("unknown transform");
}

Transform transform_for_label(int label) {
  switch (label) {
    case data::kEntailment:
      return Transform::sim_pos;
    case data::kContradiction:
      return Transform::dist_cos;
    case data::kNeutral:
      return Transform::sim_mid;
  }
  throw ContractError("unknown label " + std::to_string(label));
}

NceResult multi_objective_loss(const Tensor& embeddings,
                               const data::GraphBatch& batch,
                               const LossConfig& config) {
  config.validate();
  std::size_t pairs = batch.num_pairs();
  if (pairs == 0) throw EmptyLossError("batch holds no pairs");

  Tensor a_rows = side_rows(embeddings, batch, data::Side::A);
  Tensor b_rows = side_rows(embeddings, batch, data::Side::B);
  Tensor sims = pairwise_cosine(a_rows, b_rows);

  struct ClassSpec {
    int label;
    double weight;
  };
  const ClassSpec classes[] = {{data::kEntailment, config.w_entail},
                               {data::kContradiction, config.w_contra},
                               {data::kNeutral, config.w_neutral}};

  NceResult result;
  Tensor total;
  for (const ClassSpec& spec : classes) {
    if (spec.weight == 0.0) continue;

    std::vector<std::size_t> pos_idx, neg_idx, sp, sn;
    std::size_t used = 0;
    for (std::size_t i = 0; i < pairs; ++i) {
      if (batch.labels[i] != spec.label) continue;
      std::vector<std::size_t> negs;
      for (std::size_t j = 0; j < pairs; ++j) {
        if (batch.labels[j] != spec.label) negs.push_back(j);
      }
      if (negs.empty()) {
        ++result.skipped;
        continue;
      }
      pos_idx.push_back(i * pairs + i);
      sp.push_back(used);
      for (std::size_t j : negs) {
        neg_idx.push_back(i * pairs + j);
        sn.push_back(used);
      }
      ++used;
    }
    if (used == 0) continue;

    Tensor flat = ad::reshape(apply_transform(transform_for_label(spec.label), sims),
                              {pairs * pairs});
    Tensor pos = ad::scale(ad::gather(flat, pos_idx), 1.0 / config.tau);
    Tensor neg = ad::scale(ad::gather(flat, neg_idx), 1.0 / config.tau);
    Tensor terms = nce_terms(pos, neg, sp, sn, used);
    Tensor class_loss = ad::scale(ad::sum(terms), spec.weight / double(used));
    total = total.valid() ? ad::add(total, class_loss) : class_loss;
    result.used += used;
  }

  if (!total.valid()) {
    throw EmptyLossError("no pair produced an objective term");
  }
  result.loss = total;
  return result;
}

int threshold_classify(double s, double lo, double hi) {
  if (!(lo <= hi)) throw ConfigError("thresholds out of order");
  if (!std::isfinite(s)) throw NumericError("similarity is not finite");
  if (s < lo) return data::kContradiction;
  if (s > hi) return data::kEntailment;
  return data::kNeutral;
}

SoftLogits soft_logits(double s, double beta) {
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  if (!std::isfinite(s)) throw NumericError("similarity is not finite");
  SoftLogits l;
  l.contradiction = -beta * std::abs(s + 0.66);
  l.neutral = -beta * std::abs(s);
  l.entailment = -beta * std::abs(s - 0.66);
  return l;
}

int soft_classify(double s, double beta) {
  SoftLogits l = soft_logits(s, beta);
  int label = data::kNeutral;
  double best = l.neutral;
  if (l.contradiction > best) {
    best = l.contradiction;
    label = data::kContradiction;
  }
  if (l.entailment > best) {
    label = data::kEntailment;
  }
  return label;
}

Tensor soft_cross_entropy(const Tensor& similarities,
                          const std::vector<int>& labels, double beta) {
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  if (similarities.rank() != 1) {
    throw DimensionError("soft_cross_entropy expects one similarity per pair");
  }
  std::size_t n = similarities.numel();
  if (n == 0 || labels.empty()) throw EmptyLossError("no pairs to score");
  if (labels.size() != n) {
    throw ContractError("got " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(n) + " similarities");
  }

  const double centers[3] = {-0.66, 0.0, 0.66};
  Tensor logits[3];
  for (int k = 0; k < 3; ++k) {
    Tensor dist = ad::abs(ad::sub(similarities, Tensor::constant({n}, centers[k])));
    logits[k] = ad::scale(dist, -beta);
  }

  std::vector<double> mask[3];
  for (int k = 0; k < 3; ++k) mask[k].assign(n, 0.0);
  std::vector<double> peak(n);
  for (std::size_t i = 0; i < n; ++i) {
    int k;
    switch (labels[i]) {
      case data::kContradiction: k = 0; break;
      case data::kNeutral: k = 1; break;
      case data::kEntailment: k = 2; break;
      default:
        throw ContractError("unknown label " + std::to_string(labels[i]) +
                            " at pair " + std::to_string(i));
    }
    mask[k][i] = 1.0;
    peak[i] = std::max({logits[0].value()[i], logits[1].value()[i],
                        logits[2].value()[i]});
  }

  Tensor shift = Tensor::from(peak, {n});
  Tensor denom;
  Tensor picked;
  for (int k = 0; k < 3; ++k) {
    Tensor ek = ad::exp(ad::sub(logits[k], shift));
    denom = denom.valid() ? ad::add(denom, ek) : ek;
    Tensor part = ad::mul(logits[k], Tensor::from(mask[k], {n}));
    picked = picked.valid() ? ad::add(picked, part) : part;
  }
  Tensor ce = ad::sub(ad::add(ad::log(denom), shift), picked);
  return ad::scale(ad::sum(ce), 1.0 / double(n));
}

}  // namespace tmn::objectives
