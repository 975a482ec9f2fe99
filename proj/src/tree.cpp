// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#include "tmn/tree.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tmn/error.hpp"

namespace tmn::data {

namespace {

constexpr std::size_t kEmbeddingSlice = 768;
constexpr std::size_t kPosSlice = 17;
constexpr std::size_t kMorphSlice = 19;
constexpr std::size_t kPaperNodeDim = kEmbeddingSlice + kPosSlice + kMorphSlice;
constexpr std::size_t kPaperEdgeDim = 70;

bool is_binary(double v) { return v == 0.0 || v == 1.0; }

void check_slice(const double* row, std::size_t begin, std::size_t width,
                 bool exact_one, const std::string& rule, std::size_t node,
                 std::vector<std::string>& out) {
  double sum = 0.0;
  bool binary = true;
  for (std::size_t j = begin; j < begin + width; ++j) {
    binary = binary && is_binary(row[j]);
    sum += row[j];
  }
  bool ok = binary && (exact_one ? sum == 1.0 : sum >= 1.0);
  if (!ok) out.push_back(rule + ": node " + std::to_string(node));
}

}  // namespace

std::vector<std::string> validate_tree(const DepTree& tree, int strictness) {
  std::vector<std::string> out;
  std::size_t n = tree.num_nodes();

  if (n == 0) {
    out.push_back("empty-tree");
    return out;
  }
  if (tree.edge_features.rows != tree.edges.size()) {
    out.push_back("edge-feature-count");
  }
  if (tree.root >= n) {
    out.push_back("root-range");
    return out;
  }
  bool endpoints_ok = true;
  for (std::size_t k = 0; k < tree.edges.size(); ++k) {
    auto [h, d] = tree.edges[k];
    if (h >= n || d >= n) {
      out.push_back("edge-endpoints: edge " + std::to_string(k));
      endpoints_ok = false;
    }
  }
  if (!endpoints_ok) return out;

  // Weak connectivity: every node in one undirected component.
  {
    std::vector<std::vector<std::size_t>> adj(n);
    for (auto [h, d] : tree.edges) {
      adj[h].push_back(d);
      adj[d].push_back(h);
    }
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> stack{tree.root};
    seen[tree.root] = 1;
    std::size_t visited = 0;
    while (!stack.empty()) {
      std::size_t u = stack.back();
      stack.pop_back();
      ++visited;
      for (std::size_t v : adj[u]) {
        if (!seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
      }
    }
    if (visited != n) out.push_back("connectivity");
  }

  if (strictness >= 1) {
    if (tree.edges.size() != n - 1) out.push_back("edge-count");

    std::vector<std::size_t> head_count(n, 0);
    for (auto [h, d] : tree.edges) {
      (void)h;
      ++head_count[d];
    }
    if (head_count[tree.root] != 0) out.push_back("root-has-head");
    for (std::size_t i = 0; i < n; ++i) {
      if (i != tree.root && head_count[i] != 1) {
        out.push_back("single-head: node " + std::to_string(i));
      }
    }

    // Directed cycle detection, head -> dependent.
    std::vector<std::vector<std::size_t>> children(n);
    for (auto [h, d] : tree.edges) children[h].push_back(d);
    std::vector<char> color(n, 0);  // 0 white, 1 gray, 2 black
    bool cycle = false;
    for (std::size_t s = 0; s < n && !cycle; ++s) {
      if (color[s] != 0) continue;
      // Iterative DFS keeping an explicit exit marker per node.
      std::vector<std::pair<std::size_t, bool>> stack{{s, false}};
      while (!stack.empty() && !cycle) {
        auto [u, exiting] = stack.back();
        stack.pop_back();
        if (exiting) {
          color[u] = 2;
          continue;
        }
        if (color[u] == 1) continue;
        color[u] = 1;
        stack.push_back({u, true});
        for (std::size_t v : children[u]) {
          if (color[v] == 1) cycle = true;
          if (color[v] == 0) stack.push_back({v, false});
        }
      }
    }
    if (cycle) out.push_back("acyclicity");

    std::vector<char> reach(n, 0);
    std::vector<std::size_t> stack{tree.root};
    reach[tree.root] = 1;
    std::size_t visited = 0;
    while (!stack.empty()) {
      std::size_t u = stack.back();
      stack.pop_back();
      ++visited;
      for (std::size_t v : children[u]) {
        if (!reach[v]) {
          reach[v] = 1;
          stack.push_back(v);
        }
      }
    }
    if (visited != n) out.push_back("root-reachability");
  }

  bool paper_node_layout = tree.node_features.cols == kPaperNodeDim;
  bool paper_edge_layout = tree.edge_features.cols == kPaperEdgeDim;

  if (strictness >= 2) {
    if (paper_node_layout) {
      for (std::size_t i = 0; i < n; ++i) {
        const double* row = tree.node_features.row(i);
        check_slice(row, kEmbeddingSlice, kPosSlice, true, "one-hot POS", i, out);
        check_slice(row, kEmbeddingSlice + kPosSlice, kMorphSlice, false,
                    "morph-slice", i, out);
      }
    }
    if (paper_edge_layout) {
      for (std::size_t k = 0; k < tree.edge_features.rows; ++k) {
        const double* row = tree.edge_features.row(k);
        double sum = 0.0;
        bool binary = true;
        for (std::size_t j = 0; j < kPaperEdgeDim; ++j) {
          binary = binary && is_binary(row[j]);
          sum += row[j];
        }
        if (!binary || sum != 1.0) {
          out.push_back("one-hot edge: edge " + std::to_string(k));
        }
      }
    }
  }

  if (strictness >= 3) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = tree.node_features.row(i);
      for (std::size_t j = 0; j < tree.node_features.cols; ++j) {
        if (!std::isfinite(row[j])) {
          out.push_back("finite-features: node " + std::to_string(i));
          break;
        }
      }
    }
    for (std::size_t k = 0; k < tree.edge_features.rows; ++k) {
      const double* row = tree.edge_features.row(k);
      for (std::size_t j = 0; j < tree.edge_features.cols; ++j) {
        if (!std::isfinite(row[j])) {
          out.push_back("finite-features: edge " + std::to_string(k));
          break;
        }
      }
    }
    if (paper_node_layout) {
      for (std::size_t i = 0; i < n; ++i) {
        check_slice(tree.node_features.row(i), kEmbeddingSlice + kPosSlice,
                    kMorphSlice, true, "one-hot morph", i, out);
      }
    }
  }

  return out;
}

namespace {

GraphBatch build_batch(const std::vector<TreePair>& pairs,
                       const std::vector<std::size_t>* perm) {
  if (pairs.empty()) throw ContractError("batch_pairs needs at least one pair");
  std::size_t node_dim = pairs[0].tree_a.node_features.cols;
  // Zero-edge trees carry no edge width of their own; take it from the
  // first tree that has edges.
  std::size_t edge_dim = 0;
  for (const TreePair& p : pairs) {
    if (!p.tree_a.edges.empty()) {
      edge_dim = p.tree_a.edge_features.cols;
      break;
    }
    if (!p.tree_b.edges.empty()) {
      edge_dim = p.tree_b.edge_features.cols;
      break;
    }
  }

  if (perm) {
    if (perm->size() != pairs.size()) {
      throw ContractError("partner permutation length " +
                          std::to_string(perm->size()) + " for " +
                          std::to_string(pairs.size()) + " pairs");
    }
    std::vector<char> hit(pairs.size(), 0);
    for (std::size_t p : *perm) {
      if (p >= pairs.size() || hit[p]) {
        throw ContractError("partner assignment is not a permutation");
      }
      hit[p] = 1;
    }
  }

  std::vector<const DepTree*> trees(2 * pairs.size());
  GraphBatch batch;
  batch.pair_of_graph.resize(2 * pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    std::size_t partner = perm ? (*perm)[i] : i;
    trees[2 * i] = &pairs[i].tree_a;
    trees[2 * i + 1] = &pairs[partner].tree_b;
    batch.pair_of_graph[2 * i] = {i, Side::A};
    batch.pair_of_graph[2 * i + 1] = {partner, Side::B};
    batch.labels.push_back(pairs[i].label);
  }

  std::size_t total_nodes = 0, total_edges = 0;
  for (const DepTree* t : trees) {
    bool bad_nodes = t->node_features.cols != node_dim;
    bool bad_edges = !t->edges.empty() && t->edge_features.cols != edge_dim;
    if (bad_nodes || bad_edges) {
      throw DimensionError("mixed feature dimensions in batch: " +
                           std::to_string(t->node_features.cols) + "x" +
                           std::to_string(t->edge_features.cols) + " vs " +
                           std::to_string(node_dim) + "x" +
                           std::to_string(edge_dim));
    }
    total_nodes += t->num_nodes();
    total_edges += t->edges.size();
  }

  batch.node_features = FeatureMatrix(total_nodes, node_dim);
  batch.edge_features = FeatureMatrix(total_edges, edge_dim);
  batch.graph_id.resize(total_nodes);
  batch.graph_node_offset.assign(1, 0);
  batch.from_idx.reserve(total_edges);
  batch.to_idx.reserve(total_edges);
  batch.root_of_graph.reserve(trees.size());

  std::size_t node_cursor = 0, edge_cursor = 0;
  for (std::size_t g = 0; g < trees.size(); ++g) {
    const DepTree& t = *trees[g];
    std::size_t base = node_cursor;
    std::copy(t.node_features.data.begin(), t.node_features.data.end(),
              batch.node_features.data.begin() + base * node_dim);
    for (std::size_t i = 0; i < t.num_nodes(); ++i) batch.graph_id[base + i] = g;
    for (std::size_t k = 0; k < t.edges.size(); ++k) {
      batch.from_idx.push_back(base + t.edges[k].first);
      batch.to_idx.push_back(base + t.edges[k].second);
    }
    std::copy(t.edge_features.data.begin(), t.edge_features.data.end(),
              batch.edge_features.data.begin() + edge_cursor * edge_dim);
    batch.root_of_graph.push_back(t.root);
    node_cursor += t.num_nodes();
    edge_cursor += t.edges.size();
    batch.graph_node_offset.push_back(node_cursor);
  }
  return batch;
}

}  // namespace

std::size_t GraphBatch::graph_of(std::size_t pair, Side side) const {
  if (side == Side::A) return 2 * pair;  // A sides are never permuted
  for (std::size_t g = 1; g < pair_of_graph.size(); g += 2) {
    if (pair_of_graph[g].pair == pair) return g;
  }
  throw IndexError("no graph holds side B of pair " + std::to_string(pair));
}

GraphBatch batch_pairs(const std::vector<TreePair>& pairs) {
  return build_batch(pairs, nullptr);
}

GraphBatch batch_pairs(const std::vector<TreePair>& pairs,
                       const std::vector<std::size_t>& partner_perm) {
  return build_batch(pairs, &partner_perm);
}

std::vector<TreePair> unbatch(const GraphBatch& batch) {
  std::vector<TreePair> pairs(batch.num_pairs());
  for (std::size_t p = 0; p < pairs.size(); ++p) pairs[p].label = batch.labels[p];

  std::size_t node_dim = batch.node_features.cols;
  std::size_t edge_dim = batch.edge_features.cols;

  // Edge rows are laid out graph by graph, in slot order.
  std::size_t edge_cursor = 0;
  for (std::size_t g = 0; g < batch.num_graphs(); ++g) {
    std::size_t base = batch.graph_node_offset[g];
    std::size_t n = batch.graph_size(g);
    DepTree tree;
    tree.node_features = FeatureMatrix(n, node_dim);
    std::copy(batch.node_features.data.begin() + base * node_dim,
              batch.node_features.data.begin() + (base + n) * node_dim,
              tree.node_features.data.begin());
    std::size_t edge_count = 0;
    while (edge_cursor + edge_count < batch.num_edges() &&
           batch.from_idx[edge_cursor + edge_count] >= base &&
           batch.from_idx[edge_cursor + edge_count] < base + n) {
      ++edge_count;
    }
    tree.edge_features = FeatureMatrix(edge_count, edge_dim);
    std::copy(batch.edge_features.data.begin() + edge_cursor * edge_dim,
              batch.edge_features.data.begin() + (edge_cursor + edge_count) * edge_dim,
              tree.edge_features.data.begin());
    for (std::size_t k = 0; k < edge_count; ++k) {
      tree.edges.push_back({batch.from_idx[edge_cursor + k] - base,
                            batch.to_idx[edge_cursor + k] - base});
    }
    tree.root = batch.root_of_graph[g];
    edge_cursor += edge_count;

    const PairSlot& slot = batch.pair_of_graph[g];
    if (slot.side == Side::A) {
      pairs[slot.pair].tree_a = std::move(tree);
    } else {
      pairs[slot.pair].tree_b = std::move(tree);
    }
  }
  return pairs;
}

}  // namespace tmn::data
