// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tmn/model.hpp"

namespace tmn::ckpt {

/// Adam accumulator snapshot, flattened in named() parameter order.
struct OptimizerBlob {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
};

struct Checkpoint {
  model::ModelConfig config;
  std::uint64_t seed = 0;
  std::uint32_t phase = 0;
  std::uint64_t epoch = 0;
  std::vector<std::pair<std::string, std::vector<double>>> tensors;
  std::optional<OptimizerBlob> optimizer;
};

/// Binary format: 8-byte magic "TMNCKPT1", little-endian u64 header length,
/// JSON header (config, seed, phase, epoch, tensor names and shapes,
/// optimizer metadata), then all tensor values as raw little-endian float64
/// in header order, followed by optimizer m and v if present.
void save_checkpoint(const std::string& path, const model::ModelParams& params,
                     const model::ModelConfig& config, std::uint64_t seed,
                     std::uint32_t phase, std::uint64_t epoch,
                     const OptimizerBlob* optimizer = nullptr);

Checkpoint load_checkpoint(const std::string& path);

/// Copies checkpoint values into params. The checkpoint config must equal
/// the given config and every tensor name and shape must line up;
/// the first mismatch is named in the ConfigError.
void apply_checkpoint(const Checkpoint& ckpt, model::ModelParams& params,
                      const model::ModelConfig& config);

}  // namespace tmn::ckpt
