// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tmn/ops.hpp"
#include "tmn/tensor.hpp"
#include "tmn/tree.hpp"

namespace tmn::model {

enum class Mode { matching, embedding };
enum class Similarity { dot, scaled_dot };

const char* to_string(Mode mode);
const char* to_string(Similarity similarity);
Mode mode_from_string(const std::string& s);
Similarity similarity_from_string(const std::string& s);

struct ModelConfig {
  std::size_t node_feature_dim = 804;
  std::size_t edge_feature_dim = 70;
  std::size_t node_state_dim = 1536;
  std::size_t edge_state_dim = 768;
  std::size_t prop_layers = 5;  // T, shared weights across layers
  std::size_t graph_rep_dim = 2048;
  Mode mode = Mode::matching;
  std::size_t mlp_hidden_layers = 1;  // hidden width equals output width
  Similarity similarity = Similarity::scaled_dot;

  void validate() const;  // ConfigError on nonsense
  bool operator==(const ModelConfig&) const = default;

  static ModelConfig desk(Mode mode = Mode::matching);
  static ModelConfig paper(Mode mode = Mode::matching);
};

/// ReLU-hidden, linear-output MLP. With zero hidden layers it is a single
/// affine map.
struct Mlp {
  std::vector<ad::Tensor> weights;
  std::vector<ad::Tensor> biases;

  ad::Tensor forward(const ad::Tensor& x) const;
};

struct Gru {
  ad::Tensor wz, uz, bz;
  ad::Tensor wr, ur, br;
  ad::Tensor wh, uh, bh;

  /// x: [n, input_dim], h: [n, state_dim] -> [n, state_dim].
  /// h' = (1 - z) * h + z * candidate, so a saturated update gate hands the
  /// state over to the candidate entirely.
  ad::Tensor forward(const ad::Tensor& x, const ad::Tensor& h) const;
};

struct ModelParams {
  Mlp node_encoder;
  Mlp edge_encoder;
  Mlp message;
  Gru gru;
  Mlp gate;
  Mlp transform;
  Mlp readout;

  /// Stable name -> tensor listing (checkpoint and optimizer order):
  /// encoder.node.*, encoder.edge.*, propagator.message.*,
  /// propagator.gru.{wz,uz,bz,wr,ur,br,wh,uh,bh}, aggregator.gate.*,
  /// aggregator.transform.*, aggregator.out.*.
  std::vector<std::pair<std::string, ad::Tensor>> named() const;
};

/// Fan-in uniform init, biases zero, deterministic in seed.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

std::size_t count_parameters(const ModelParams& params);

struct EncodedBatch {
  ad::Tensor node_states;                  // N_total x node_state_dim
  std::optional<ad::Tensor> edge_states;   // E_total x edge_state_dim
};

/// Initial states from raw features; edge states are computed once and
/// reused across all propagation layers.
EncodedBatch encode(const data::GraphBatch& batch, const ModelParams& params,
                    const ModelConfig& config);

/// Bidirectional messages over stored edges (head->dependent and back, each
/// tagged with a direction flag), summed per receiving node.
ad::Tensor propagate_within(const ad::Tensor& h,
                            const std::optional<ad::Tensor>& edge_states,
                            const data::GraphBatch& batch,
                            const ModelParams& params);

/// Cross-graph attention between co-batched partners: for each node,
/// softmax-attend over every node of the partner graph and return
/// h_i - sum_j a_j h_j per node.
ad::Tensor cross_attention(const ad::Tensor& h, const data::GraphBatch& batch,
                           const ModelConfig& config);

/// GRU update; match_sums must be present exactly in matching mode.
ad::Tensor node_update(const ad::Tensor& h, const ad::Tensor& message_sums,
                       const std::optional<ad::Tensor>& match_sums,
                       const ModelParams& params, const ModelConfig& config);

/// Gated readout per graph: MLP_out( sum_i sigmoid(gate(h_i)) * transform(h_i) ).
ad::Tensor aggregate(const ad::Tensor& h, const data::GraphBatch& batch,
                     const ModelParams& params);

/// Full pass: encode, T propagation layers (messages, attention in matching
/// mode, GRU), aggregate. Returns one embedding row per graph, slot order.
ad::Tensor forward_pair(const data::GraphBatch& batch, const ModelParams& params,
                        const ModelConfig& config);

}  // namespace tmn::model
