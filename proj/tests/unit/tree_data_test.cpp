// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include "tmn/error.hpp"
#include "tmn/io.hpp"
#include "tmn/synth.hpp"
#include "tmn/tree.hpp"

using namespace tmn;
using namespace tmn::data;

namespace {

DepTree chain(std::size_t n, std::size_t node_dim = 4, std::size_t edge_dim = 2) {
  DepTree t;
  t.root = 0;
  t.node_features = FeatureMatrix(n, node_dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < node_dim; ++j) {
      t.node_features.at(i, j) = double(i) + 0.1 * double(j);
    }
  }
  t.edge_features = FeatureMatrix(n - 1, edge_dim);
  for (std::size_t i = 1; i < n; ++i) {
    t.edges.push_back({i - 1, i});
    t.edge_features.at(i - 1, 0) = 1.0;
  }
  return t;
}

bool has_violation(const std::vector<std::string>& vs, const std::string& needle) {
  return std::any_of(vs.begin(), vs.end(), [&](const std::string& v) {
    return v.find(needle) != std::string::npos;
  });
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

bool trees_equal(const DepTree& a, const DepTree& b) {
  return a.node_features == b.node_features && a.edges == b.edges &&
         a.edge_features == b.edge_features && a.root == b.root;
}

}  // namespace

TEST_CASE("valid chain passes all strictness levels") {
  DepTree t = chain(3);
  for (int s = 0; s <= 3; ++s) {
    CHECK(validate_tree(t, s).empty());
  }
}

TEST_CASE("cycle is rejected at strictness 1") {
  DepTree t = chain(2);
  t.edges.push_back({1, 0});
  t.edge_features = FeatureMatrix(2, 2);
  CHECK(validate_tree(t, 0).empty());
  auto vs = validate_tree(t, 1);
  CHECK(has_violation(vs, "acyclicity"));
}

TEST_CASE("duplicated dependent names the node") {
  DepTree t = chain(3);
  t.edges[1] = {0, 2};
  t.edges.push_back({1, 2});
  t.edge_features = FeatureMatrix(3, 2);
  auto vs = validate_tree(t, 1);
  CHECK(has_violation(vs, "single-head: node 2"));
}

TEST_CASE("disconnected graph fails connectivity at strictness 0") {
  DepTree t = chain(4);
  t.edges.erase(t.edges.begin() + 1);
  t.edge_features = FeatureMatrix(2, 2);
  auto vs = validate_tree(t, 0);
  CHECK(has_violation(vs, "connectivity"));
}

TEST_CASE("non-finite feature flagged only at strictness 3") {
  DepTree t = chain(3);
  t.node_features.at(1, 2) = std::numeric_limits<double>::quiet_NaN();
  CHECK(validate_tree(t, 2).empty());
  auto vs = validate_tree(t, 3);
  CHECK(has_violation(vs, "finite-features: node 1"));
}

TEST_CASE("804 layout checks one-hot slices at strictness 2") {
  DepTree t = chain(2, 804, 70);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 804; ++j) t.node_features.at(i, j) = 0.0;
    t.node_features.at(i, 0) = 0.5;
    t.node_features.at(i, 768 + 3) = 1.0;
    t.node_features.at(i, 785 + 5) = 1.0;
  }
  for (std::size_t j = 0; j < 70; ++j) t.edge_features.at(0, j) = 0.0;
  t.edge_features.at(0, 7) = 1.0;
  CHECK(validate_tree(t, 3).empty());

  SUBCASE("POS slice summing to 0") {
    t.node_features.at(0, 768 + 3) = 0.0;
    CHECK(validate_tree(t, 1).empty());
    CHECK(has_violation(validate_tree(t, 2), "one-hot POS: node 0"));
  }
  SUBCASE("multi-hot morphology allowed at 2, flagged at 3") {
    t.node_features.at(1, 785 + 6) = 1.0;
    CHECK(validate_tree(t, 2).empty());
    CHECK(has_violation(validate_tree(t, 3), "one-hot morph: node 1"));
  }
  SUBCASE("empty morphology flagged at 2") {
    t.node_features.at(1, 785 + 5) = 0.0;
    CHECK(has_violation(validate_tree(t, 2), "morph-slice: node 1"));
  }
  SUBCASE("edge row not one-hot") {
    t.edge_features.at(0, 8) = 1.0;
    CHECK(has_violation(validate_tree(t, 2), "one-hot edge: edge 0"));
  }
}

TEST_CASE("batch packs two trees with offsets") {
  TreePair p;
  p.tree_a = chain(2);
  p.tree_b = chain(3);
  p.label = kEntailment;
  GraphBatch b = batch_pairs({p});
  CHECK(b.num_nodes() == 5);
  CHECK(b.num_edges() == 3);
  CHECK(b.num_graphs() == 2);
  CHECK(b.num_pairs() == 1);
  CHECK(b.graph_id == std::vector<std::size_t>{0, 0, 1, 1, 1});
  CHECK(b.from_idx == std::vector<std::size_t>{0, 2, 3});
  CHECK(b.to_idx == std::vector<std::size_t>{1, 3, 4});

  // Every edge is intra-graph.
  for (std::size_t e = 0; e < b.num_edges(); ++e) {
    CHECK(b.graph_id[b.from_idx[e]] == b.graph_id[b.to_idx[e]]);
  }
}

TEST_CASE("unbatch is the inverse of batch_pairs") {
  auto pairs = synth_task(3, 9, 6, 3, 7);
  GraphBatch b = batch_pairs(pairs);
  auto back = unbatch(b);
  REQUIRE(back.size() == pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(back[i].label == pairs[i].label);
    CHECK(trees_equal(back[i].tree_a, pairs[i].tree_a));
    CHECK(trees_equal(back[i].tree_b, pairs[i].tree_b));
  }
}

TEST_CASE("randomized partner slots keep true pair bookkeeping") {
  auto pairs = synth_task(4, 4, 6, 3, 6);
  std::vector<std::size_t> perm{2, 0, 3, 1};
  GraphBatch b = batch_pairs(pairs, perm);
  CHECK(b.num_graphs() == 8);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(b.pair_of_graph[2 * i].pair == i);
    CHECK(b.pair_of_graph[2 * i].side == Side::A);
    CHECK(b.pair_of_graph[2 * i + 1].pair == perm[i]);
    CHECK(b.pair_of_graph[2 * i + 1].side == Side::B);
  }
  // Unbatch still restores true pairs.
  auto back = unbatch(b);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(trees_equal(back[i].tree_b, pairs[i].tree_b));
  }
  CHECK_THROWS_AS(batch_pairs(pairs, {0, 0, 1, 2}), ContractError);
  CHECK_THROWS_AS(batch_pairs(pairs, {0, 1}), ContractError);
}

TEST_CASE("mixed feature dimensions are rejected") {
  TreePair p1, p2;
  p1.tree_a = chain(2, 4);
  p1.tree_b = chain(2, 4);
  p2.tree_a = chain(2, 6);
  p2.tree_b = chain(2, 6);
  CHECK_THROWS_AS(batch_pairs({p1, p2}), DimensionError);
  CHECK_THROWS_AS(batch_pairs({}), ContractError);
}

TEST_CASE("a batch of 256 pairs has 512 graphs") {
  auto pairs = synth_task(99, 256, 4, 2, 4);
  GraphBatch b = batch_pairs(pairs);
  CHECK(b.num_graphs() == 512);
}

TEST_CASE("synth_task is deterministic and balanced") {
  auto a = synth_task(7, 30, 8, 4, 8);
  auto b = synth_task(7, 30, 8, 4, 8);
  REQUIRE(a.size() == 30);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].label == b[i].label);
    CHECK(trees_equal(a[i].tree_a, b[i].tree_a));
    CHECK(trees_equal(a[i].tree_b, b[i].tree_b));
  }

  auto big = synth_task(11, 300, 8, 4, 8);
  int counts[3] = {0, 0, 0};
  for (const TreePair& p : big) ++counts[p.label + 1];
  CHECK(counts[0] == 100);
  CHECK(counts[1] == 100);
  CHECK(counts[2] == 100);

  CHECK_THROWS_AS(synth_task(1, 10, 3, 4, 8), ContractError);
  CHECK_THROWS_AS(synth_task(1, 10, 8, 4, 2), ContractError);
}

TEST_CASE("synth trees validate at strictness 3") {
  for (auto dims : {std::pair<std::size_t, std::size_t>{16, 8},
                    std::pair<std::size_t, std::size_t>{804, 70}}) {
    auto pairs = synth_task(21, 12, dims.first, dims.second, 9);
    for (const TreePair& p : pairs) {
      CHECK(validate_tree(p.tree_a, 3).empty());
      CHECK(validate_tree(p.tree_b, 3).empty());
    }
  }
}

TEST_CASE("mean-feature cosine probe separates entailment from contradiction") {
  auto pairs = synth_task(123, 1000, 16, 8, 12);
  std::size_t correct = 0, total = 0;
  for (const TreePair& p : pairs) {
    if (p.label == kNeutral) continue;
    std::size_t d = p.tree_a.node_features.cols;
    std::vector<double> ma(d, 0.0), mb(d, 0.0);
    for (std::size_t i = 0; i < p.tree_a.num_nodes(); ++i) {
      for (std::size_t j = 0; j < d; ++j) ma[j] += p.tree_a.node_features.at(i, j);
    }
    for (std::size_t i = 0; i < p.tree_b.num_nodes(); ++i) {
      for (std::size_t j = 0; j < d; ++j) mb[j] += p.tree_b.node_features.at(i, j);
    }
    double dot = 0;
    for (std::size_t j = 0; j < d; ++j) dot += ma[j] * mb[j];
    int predicted = dot > 0 ? kEntailment : kContradiction;
    total += 1;
    correct += predicted == p.label ? 1 : 0;
  }
  CHECK(double(correct) / double(total) > 0.95);
}

TEST_CASE("pair file round trip") {
  auto pairs = synth_task(17, 6, 8, 4, 6);
  auto path = temp_file("tmn_roundtrip.jsonl");
  save_pairs(path.string(), pairs);
  auto loaded = load_pairs(path.string(), 3);
  REQUIRE(loaded.size() == pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(loaded[i].pair_id == pairs[i].pair_id);
    CHECK(loaded[i].label == pairs[i].label);
    CHECK(trees_equal(loaded[i].tree_a, pairs[i].tree_a));
    CHECK(trees_equal(loaded[i].tree_b, pairs[i].tree_b));
  }
  std::filesystem::remove(path);
}

TEST_CASE("save_pairs is byte deterministic") {
  auto pairs = synth_task(29, 8, 8, 4, 6);
  auto p1 = temp_file("tmn_det1.jsonl");
  auto p2 = temp_file("tmn_det2.jsonl");
  save_pairs(p1.string(), pairs);
  save_pairs(p2.string(), pairs);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), {});
  std::string s2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(s1 == s2);
  CHECK(!s1.empty());
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST_CASE("load_pairs reports parse errors with line numbers") {
  auto path = temp_file("tmn_bad.jsonl");
  {
    std::ofstream out(path);
    out << R"({"schema":"tmnlab/1","pair_id":"ok","label":1,)"
        << R"("tree_a":{"n":1,"node_features":[[1.0,2.0]],"edges":[],"edge_features":[],"root":0},)"
        << R"("tree_b":{"n":1,"node_features":[[1.0,2.0]],"edges":[],"edge_features":[],"root":0}})"
        << "\n";
    out << "{not json\n";
  }
  try {
    load_pairs(path.string(), 1);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("load_pairs rejects wrong schema, bad label, invalid tree") {
  auto path = temp_file("tmn_bad2.jsonl");
  auto one_node = R"({"n":1,"node_features":[[1.0,2.0]],"edges":[],"edge_features":[],"root":0})";
  auto cyclic =
      R"({"n":2,"node_features":[[1.0,2.0],[3.0,4.0]],"edges":[[0,1],[1,0]],"edge_features":[[1.0],[1.0]],"root":0})";

  SUBCASE("schema") {
    std::ofstream(path) << R"({"schema":"tmnlab/9","pair_id":"x","label":0,"tree_a":)"
                        << one_node << R"(,"tree_b":)" << one_node << "}\n";
    CHECK_THROWS_AS(load_pairs(path.string(), 0), ParseError);
  }
  SUBCASE("label") {
    std::ofstream(path) << R"({"schema":"tmnlab/1","pair_id":"x","label":5,"tree_a":)"
                        << one_node << R"(,"tree_b":)" << one_node << "}\n";
    CHECK_THROWS_AS(load_pairs(path.string(), 0), ValidationError);
  }
  SUBCASE("cycle mentions rule and pair id") {
    std::ofstream(path) << R"({"schema":"tmnlab/1","pair_id":"cyc","label":0,"tree_a":)"
                        << cyclic << R"(,"tree_b":)" << one_node << "}\n";
    CHECK(load_pairs(path.string(), 0).size() == 1);
    try {
      load_pairs(path.string(), 1);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      std::string what = e.what();
      CHECK(what.find("acyclicity") != std::string::npos);
      CHECK(what.find("cyc") != std::string::npos);
    }
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_pairs("/nonexistent/nowhere.jsonl", 0), IoError);
  }
  SUBCASE("bom") {
    std::ofstream(path, std::ios::binary) << "\xEF\xBB\xBF{}\n";
    CHECK_THROWS_AS(load_pairs(path.string(), 0), ParseError);
  }
  std::filesystem::remove(path);
}
