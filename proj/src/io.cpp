// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#include "tmn/io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tmn/error.hpp"

namespace tmn::data {

namespace {

using nlohmann::json;

FeatureMatrix parse_matrix(const json& rows, std::size_t expect_rows,
                           const char* what) {
  if (!rows.is_array() || rows.size() != expect_rows) {
    throw std::runtime_error(std::string(what) + " must be an array of " +
                             std::to_string(expect_rows) + " rows");
  }
  std::size_t cols = 0;
  FeatureMatrix m;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const json& row = rows[r];
    if (!row.is_array()) {
      throw std::runtime_error(std::string(what) + " row " + std::to_string(r) +
                               " is not an array");
    }
    if (r == 0) {
      cols = row.size();
      if (cols == 0) {
        throw std::runtime_error(std::string(what) + " rows must be non-empty");
      }
      m = FeatureMatrix(expect_rows, cols);
    } else if (row.size() != cols) {
      throw std::runtime_error(std::string(what) + " row " + std::to_string(r) +
                               " has ragged width");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      m.at(r, c) = row[c].get<double>();
    }
  }
  return m;
}

DepTree parse_tree(const json& j, const char* which) {
  if (!j.is_object()) {
    throw std::runtime_error(std::string(which) + " must be an object");
  }
  DepTree tree;
  std::size_t n = j.at("n").get<std::size_t>();
  if (n == 0) throw std::runtime_error(std::string(which) + ".n must be positive");
  tree.node_features = parse_matrix(j.at("node_features"), n, "node_features");
  const json& edges = j.at("edges");
  if (!edges.is_array()) throw std::runtime_error("edges must be an array");
  for (const json& e : edges) {
    if (!e.is_array() || e.size() != 2) {
      throw std::runtime_error("each edge must be a [head, dependent] pair");
    }
    tree.edges.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>()});
  }
  tree.edge_features =
      parse_matrix(j.at("edge_features"), tree.edges.size(), "edge_features");
  tree.root = j.at("root").get<std::size_t>();
  if (j.contains("text")) tree.text = j.at("text").get<std::string>();
  return tree;
}

json dump_matrix(const FeatureMatrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols; ++c) row.push_back(m.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json dump_tree(const DepTree& tree) {
  json j;
  j["n"] = tree.num_nodes();
  j["node_features"] = dump_matrix(tree.node_features);
  json edges = json::array();
  for (auto [h, d] : tree.edges) edges.push_back(json::array({h, d}));
  j["edges"] = std::move(edges);
  j["edge_features"] = dump_matrix(tree.edge_features);
  j["root"] = tree.root;
  if (!tree.text.empty()) j["text"] = tree.text;
  return j;
}

}  // namespace

std::vector<TreePair> load_pairs(const std::string& path, int strictness) {
  if (strictness < 0 || strictness > 3) {
    throw ContractError("strictness must be in 0..3, got " +
                        std::to_string(strictness));
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);

  std::vector<TreePair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line[0] == '\xEF' &&
        line[1] == '\xBB' && line[2] == '\xBF') {
      throw ParseError("line 1: byte-order mark not allowed (UTF-8, no BOM)");
    }
    if (line.empty()) continue;

    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }

    TreePair pair;
    try {
      if (!j.is_object()) throw std::runtime_error("record must be an object");
      std::string schema = j.at("schema").get<std::string>();
      if (schema != kSchemaVersion) {
        throw std::runtime_error("unsupported schema \"" + schema +
                                 "\" (expected \"" + kSchemaVersion + "\")");
      }
      pair.pair_id = j.at("pair_id").get<std::string>();
      pair.label = j.at("label").get<int>();
      pair.tree_a = parse_tree(j.at("tree_a"), "tree_a");
      pair.tree_b = parse_tree(j.at("tree_b"), "tree_b");
    } catch (const std::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }

    if (pair.label != kContradiction && pair.label != kNeutral &&
        pair.label != kEntailment) {
      throw ValidationError("pair " + pair.pair_id + ": label must be -1, 0 or 1");
    }
    for (const char* which : {"tree_a", "tree_b"}) {
      const DepTree& tree = which[5] == 'a' ? pair.tree_a : pair.tree_b;
      auto violations = validate_tree(tree, strictness);
      if (!violations.empty()) {
        std::ostringstream msg;
        msg << "pair " << pair.pair_id << " " << which << ":";
        for (const std::string& v : violations) msg << " [" << v << "]";
        throw ValidationError(msg.str());
      }
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

void save_pairs(const std::string& path, const std::vector<TreePair>& pairs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (const TreePair& pair : pairs) {
    json j;
    j["schema"] = kSchemaVersion;
    j["pair_id"] = pair.pair_id;
    j["label"] = pair.label;
    j["tree_a"] = dump_tree(pair.tree_a);
    j["tree_b"] = dump_tree(pair.tree_b);
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace tmn::data
