// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace tmn::data {

/// Dense row-major matrix of float64 features.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
  double* row(std::size_t r) { return data.data() + r * cols; }

  bool operator==(const FeatureMatrix&) const = default;
};

/// A featurized dependency parse: nodes with feature rows, edges stored
/// head -> dependent in the parser's direction, edge features aligned with
/// the edge list.
struct DepTree {
  FeatureMatrix node_features;  // n x D_node
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // (head, dependent)
  FeatureMatrix edge_features;  // |edges| x D_edge
  std::size_t root = 0;
  std::string text;

  std::size_t num_nodes() const { return node_features.rows; }
};

constexpr int kContradiction = -1;
constexpr int kNeutral = 0;
constexpr int kEntailment = 1;

struct TreePair {
  DepTree tree_a;  // premise
  DepTree tree_b;  // hypothesis
  int label = kNeutral;
  std::string pair_id;
};

/// Checks tree invariants at the given strictness and returns every
/// violation as "rule" or "rule: node i" / "rule: edge k". Empty result
/// means the tree is valid at that level.
///   0: structural coherence and weak connectivity (any connected digraph)
///   1: + tree shape (edge count, single head, acyclicity, root reachability)
///   2: + one-hot slices for the 804/70 feature layout (morphology multi-hot
///        still allowed)
///   3: + finite features and strictly one-hot morphology
std::vector<std::string> validate_tree(const DepTree& tree, int strictness);

/// Side of a pair a graph belongs to.
enum class Side : char { A = 'A', B = 'B' };

struct PairSlot {
  std::size_t pair = 0;
  Side side = Side::A;
};

/// Flat packing of 2P graphs (two per pair) with global node/edge indexing.
/// Graphs 2k and 2k+1 are co-processed as a unit by the matching model;
/// pair_of_graph maps each graph back to its true pair, which differs from
/// its slot under randomized pairing.
struct GraphBatch {
  FeatureMatrix node_features;          // N_total x D_node
  std::vector<std::size_t> from_idx;    // E_total, global head indices
  std::vector<std::size_t> to_idx;      // E_total, global dependent indices
  FeatureMatrix edge_features;          // E_total x D_edge
  std::vector<std::size_t> graph_id;    // N_total
  std::vector<std::size_t> graph_node_offset;  // 2P + 1
  std::vector<PairSlot> pair_of_graph;  // 2P
  std::vector<std::size_t> root_of_graph;      // 2P, local root indices
  std::vector<int> labels;              // P, per true pair

  std::size_t num_nodes() const { return node_features.rows; }
  std::size_t num_edges() const { return from_idx.size(); }
  std::size_t num_graphs() const { return pair_of_graph.size(); }
  std::size_t num_pairs() const { return labels.size(); }
  std::size_t graph_size(std::size_t g) const {
    return graph_node_offset[g + 1] - graph_node_offset[g];
  }

  /// Slot of the graph holding the given side of a true pair.
  std::size_t graph_of(std::size_t pair, Side side) const;
};

/// Packs pairs in order: slot i holds (A_i, B_i).
GraphBatch batch_pairs(const std::vector<TreePair>& pairs);

/// Packs with a partner permutation: slot i holds (A_i, B_{perm[i]}).
/// perm must be a permutation of [0, pairs.size()).
GraphBatch batch_pairs(const std::vector<TreePair>& pairs,
                       const std::vector<std::size_t>& partner_perm);

/// Reconstructs the true pairs (features, edges, roots, labels). Texts and
/// pair ids are not carried by a batch and come back empty.
std::vector<TreePair> unbatch(const GraphBatch& batch);

}  // namespace tmn::data
