// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#include "tmn/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

#include "tmn/error.hpp"

namespace tmn::data {

namespace {

constexpr std::size_t kEmbeddingSlice = 768;
constexpr std::size_t kPosSlice = 17;
constexpr std::size_t kPaperNodeDim = 804;

std::size_t embedding_width(std::size_t node_dim) {
  return node_dim == kPaperNodeDim ? kEmbeddingSlice : node_dim;
}

DepTree random_tree(std::mt19937_64& rng, std::size_t n, std::size_t node_dim,
                    std::size_t edge_dim) {
  DepTree tree;
  tree.root = 0;
  tree.node_features = FeatureMatrix(n, node_dim);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::size_t emb = embedding_width(node_dim);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = tree.node_features.row(i);
    for (std::size_t j = 0; j < emb; ++j) row[j] = gauss(rng);
    if (node_dim == kPaperNodeDim) {
      std::uniform_int_distribution<std::size_t> pos(0, kPosSlice - 1);
      std::uniform_int_distribution<std::size_t> morph(
          0, node_dim - emb - kPosSlice - 1);
      row[emb + pos(rng)] = 1.0;
      row[emb + kPosSlice + morph(rng)] = 1.0;
    }
  }
  // parent(i) < i keeps every prefix of the node list a connected subtree.
  tree.edge_features = FeatureMatrix(n - 1, edge_dim);
  for (std::size_t i = 1; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> parent(0, i - 1);
    tree.edges.push_back({parent(rng), i});
    std::uniform_int_distribution<std::size_t> rel(0, edge_dim - 1);
    tree.edge_features.at(i - 1, rel(rng)) = 1.0;
  }
  return tree;
}

DepTree prefix_subtree(const DepTree& anchor, std::size_t m) {
  DepTree tree;
  tree.root = 0;
  std::size_t node_dim = anchor.node_features.cols;
  std::size_t edge_dim = anchor.edge_features.cols;
  tree.node_features = FeatureMatrix(m, node_dim);
  std::copy(anchor.node_features.data.begin(),
            anchor.node_features.data.begin() + m * node_dim,
            tree.node_features.data.begin());
  tree.edge_features = FeatureMatrix(m - 1, edge_dim);
  std::copy(anchor.edge_features.data.begin(),
            anchor.edge_features.data.begin() + (m - 1) * edge_dim,
            tree.edge_features.data.begin());
  tree.edges.assign(anchor.edges.begin(), anchor.edges.begin() + (m - 1));
  return tree;
}

}  // namespace

std::vector<TreePair> synth_task(std::uint64_t seed, std::size_t n_pairs,
                                 std::size_t node_dim, std::size_t edge_dim,
                                 std::size_t max_nodes) {
  if (node_dim < 4) throw ContractError("synth_task needs node_dim >= 4");
  if (max_nodes < 3) throw ContractError("synth_task needs max_nodes >= 3");
  if (edge_dim < 1) throw ContractError("synth_task needs edge_dim >= 1");
  if (n_pairs == 0) throw ContractError("synth_task needs n_pairs >= 1");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> size_dist(3, max_nodes);
  std::normal_distribution<double> noise(0.0, 0.05);
  const int label_cycle[3] = {kEntailment, kContradiction, kNeutral};
  std::size_t emb = embedding_width(node_dim);

  std::vector<TreePair> pairs;
  pairs.reserve(n_pairs);
  for (std::size_t k = 0; k < n_pairs; ++k) {
    TreePair pair;
    pair.label = label_cycle[k % 3];
    char buf[32];
    std::snprintf(buf, sizeof(buf), "synth-%06zu", k);
    pair.pair_id = buf;

    std::size_t n_a = size_dist(rng);
    pair.tree_a = random_tree(rng, n_a, node_dim, edge_dim);

    switch (pair.label) {
      case kEntailment: {
        std::uniform_int_distribution<std::size_t> sub(3, n_a);
        pair.tree_b = prefix_subtree(pair.tree_a, sub(rng));
        for (std::size_t i = 0; i < pair.tree_b.num_nodes(); ++i) {
          double* row = pair.tree_b.node_features.row(i);
          for (std::size_t j = 0; j < emb; ++j) row[j] += noise(rng);
        }
        break;
      }
      case kContradiction: {
        pair.tree_b = pair.tree_a;
        for (std::size_t i = 0; i < pair.tree_b.num_nodes(); ++i) {
          double* row = pair.tree_b.node_features.row(i);
          for (std::size_t j = 0; j < emb; ++j) row[j] = -row[j];
        }
        break;
      }
      default:
        pair.tree_b = random_tree(rng, size_dist(rng), node_dim, edge_dim);
        break;
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

}  // namespace tmn::data
