// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "tmn/tree.hpp"

namespace tmn::data {

inline constexpr const char* kSchemaVersion = "tmnlab/1";

/// Reads a line-delimited pair file (one JSON object per line, schema
/// "tmnlab/1") and validates every tree at the given strictness.
/// Malformed lines raise ParseError with the line number; invariant
/// violations raise ValidationError naming the rule and pair_id.
std::vector<TreePair> load_pairs(const std::string& path, int strictness);

/// Writes pairs in the same format, one per line, UTF-8 without BOM.
/// Deterministic: equal inputs produce byte-identical files.
void save_pairs(const std::string& path, const std::vector<TreePair>& pairs);

}  // namespace tmn::data
