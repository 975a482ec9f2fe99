// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "tmn/tree.hpp"

namespace tmn::data {

/// Deterministic three-class toy task over random trees. Per pair, cycling
/// entailment / contradiction / neutral:
///   entailment    tree_b is a random subtree of the anchor with gaussian
///                 noise (sigma 0.05) on the embedding slice
///   contradiction tree_b is the anchor with the embedding slice negated
///   neutral       tree_b is an independently sampled tree
/// The embedding slice is the first 768 columns for the 804-dim layout and
/// the whole row otherwise. Same seed, same output, byte for byte.
std::vector<TreePair> synth_task(std::uint64_t seed, std::size_t n_pairs,
                                 std::size_t node_dim, std::size_t edge_dim,
                                 std::size_t max_nodes);

}  // namespace tmn::data
