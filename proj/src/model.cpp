// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#include "tmn/model.hpp"

#include <cmath>
#include <random>

#include "tmn/error.hpp"

namespace tmn::model {

using ad::Tensor;

const char* to_string(Mode mode) {
  return mode == Mode::matching ? "matching" : "embedding";
}

const char* to_string(Similarity similarity) {
  return similarity == Similarity::dot ? "dot" : "scaled_dot";
}

Mode mode_from_string(const std::string& s) {
  if (s == "matching") return Mode::matching;
  if (s == "embedding") return Mode::embedding;
  throw ConfigError("unknown mode \"" + s + "\" (matching|embedding)");
}

Similarity similarity_from_string(const std::string& s) {
  if (s == "dot") return Similarity::dot;
  if (s == "scaled_dot") return Similarity::scaled_dot;
  throw ConfigError("unknown similarity \"" + s + "\" (dot|scaled_dot)");
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(node_feature_dim, "node_feature_dim");
  positive(edge_feature_dim, "edge_feature_dim");
  positive(node_state_dim, "node_state_dim");
  positive(edge_state_dim, "edge_state_dim");
  positive(graph_rep_dim, "graph_rep_dim");
  if (prop_layers < 1) throw ConfigError("prop_layers must be >= 1");
}

ModelConfig ModelConfig::desk(Mode mode) {
  ModelConfig c;
  c.node_feature_dim = 16;
  c.edge_feature_dim = 8;
  c.node_state_dim = 32;
  c.edge_state_dim = 16;
  c.prop_layers = 3;
  c.graph_rep_dim = 32;
  c.mode = mode;
  c.mlp_hidden_layers = 1;
  return c;
}

ModelConfig ModelConfig::paper(Mode mode) {
  ModelConfig c;
  c.mode = mode;
  // Affine maps keep the total near the published scale; hidden layers at
  // these widths would overshoot it by half again.
  c.mlp_hidden_layers = 0;
  return c;
}

Tensor Mlp::forward(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    h = ad::bias_add(ad::matmul(h, weights[l]), biases[l]);
    if (l + 1 < weights.size()) h = ad::relu(h);
  }
  return h;
}

Tensor Gru::forward(const Tensor& x, const Tensor& h) const {
  using namespace ad;
  Tensor z = sigmoid(bias_add(add(matmul(x, wz), matmul(h, uz)), bz));
  Tensor r = sigmoid(bias_add(add(matmul(x, wr), matmul(h, ur)), br));
  Tensor cand = tanh(bias_add(add(matmul(x, wh), matmul(mul(r, h), uh)), bh));
  Tensor ones = Tensor::constant(h.shape(), 1.0);
  return add(mul(sub(ones, z), h), mul(z, cand));
}

namespace {

Tensor init_weight(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  double bound = 1.0 / std::sqrt(double(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor w = Tensor::zeros({in, out}, true);
  for (double& v : w.value()) v = dist(rng);
  return w;
}

Mlp init_mlp(std::size_t in, std::size_t out, std::size_t hidden_layers,
             std::mt19937_64& rng) {
  Mlp mlp;
  std::size_t cur = in;
  for (std::size_t l = 0; l < hidden_layers + 1; ++l) {
    mlp.weights.push_back(init_weight(cur, out, rng));
    mlp.biases.push_back(Tensor::zeros({out}, true));
    cur = out;
  }
  return mlp;
}

Gru init_gru(std::size_t in, std::size_t state, std::mt19937_64& rng) {
  Gru g;
  g.wz = init_weight(in, state, rng);
  g.uz = init_weight(state, state, rng);
  g.bz = Tensor::zeros({state}, true);
  g.wr = init_weight(in, state, rng);
  g.ur = init_weight(state, state, rng);
  g.br = Tensor::zeros({state}, true);
  g.wh = init_weight(in, state, rng);
  g.uh = init_weight(state, state, rng);
  g.bh = Tensor::zeros({state}, true);
  return g;
}

void push_mlp(std::vector<std::pair<std::string, Tensor>>& out,
              const std::string& prefix, const Mlp& mlp) {
  for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
    out.push_back({prefix + ".w" + std::to_string(l), mlp.weights[l]});
    out.push_back({prefix + ".b" + std::to_string(l), mlp.biases[l]});
  }
}

std::size_t message_input_dim(const ModelConfig& c) {
  return 2 * c.node_state_dim + c.edge_state_dim + 2;
}

std::size_t gru_input_dim(const ModelConfig& c) {
  return c.mode == Mode::matching ? 2 * c.node_state_dim : c.node_state_dim;
}

}  // namespace

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  ModelParams p;
  p.node_encoder = init_mlp(config.node_feature_dim, config.node_state_dim,
                            config.mlp_hidden_layers, rng);
  p.edge_encoder = init_mlp(config.edge_feature_dim, config.edge_state_dim,
                            config.mlp_hidden_layers, rng);
  p.message = init_mlp(message_input_dim(config), config.node_state_dim,
                       config.mlp_hidden_layers, rng);
  p.gru = init_gru(gru_input_dim(config), config.node_state_dim, rng);
  p.gate = init_mlp(config.node_state_dim, config.graph_rep_dim,
                    config.mlp_hidden_layers, rng);
  p.transform = init_mlp(config.node_state_dim, config.graph_rep_dim,
                         config.mlp_hidden_layers, rng);
  p.readout = init_mlp(config.graph_rep_dim, config.graph_rep_dim,
                       config.mlp_hidden_layers, rng);
  return p;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named() const {
  std::vector<std::pair<std::string, Tensor>> out;
  push_mlp(out, "encoder.node", node_encoder);
  push_mlp(out, "encoder.edge", edge_encoder);
  push_mlp(out, "propagator.message", message);
  out.push_back({"propagator.gru.wz", gru.wz});
  out.push_back({"propagator.gru.uz", gru.uz});
  out.push_back({"propagator.gru.bz", gru.bz});
  out.push_back({"propagator.gru.wr", gru.wr});
  out.push_back({"propagator.gru.ur", gru.ur});
  out.push_back({"propagator.gru.br", gru.br});
  out.push_back({"propagator.gru.wh", gru.wh});
  out.push_back({"propagator.gru.uh", gru.uh});
  out.push_back({"propagator.gru.bh", gru.bh});
  push_mlp(out, "aggregator.gate", gate);
  push_mlp(out, "aggregator.transform", transform);
  push_mlp(out, "aggregator.out", readout);
  return out;
}

std::size_t count_parameters(const ModelParams& params) {
  std::size_t total = 0;
  for (const auto& [name, t] : params.named()) total += t.numel();
  return total;
}

EncodedBatch encode(const data::GraphBatch& batch, const ModelParams& params,
                    const ModelConfig& config) {
  if (batch.node_features.cols != config.node_feature_dim) {
    throw ConfigError("node feature dim " +
                      std::to_string(batch.node_features.cols) +
                      " does not match config " +
                      std::to_string(config.node_feature_dim));
  }
  EncodedBatch out;
  Tensor x = Tensor::from(batch.node_features.data,
                          {batch.num_nodes(), batch.node_features.cols});
  out.node_states = params.node_encoder.forward(x);
  if (batch.num_edges() > 0) {
    if (batch.edge_features.cols != config.edge_feature_dim) {
      throw ConfigError("edge feature dim " +
                        std::to_string(batch.edge_features.cols) +
                        " does not match config " +
                        std::to_string(config.edge_feature_dim));
    }
    Tensor e = Tensor::from(batch.edge_features.data,
                            {batch.num_edges(), batch.edge_features.cols});
    out.edge_states = params.edge_encoder.forward(e);
  }
  return out;
}

ad::Tensor propagate_within(const Tensor& h,
                            const std::optional<Tensor>& edge_states,
                            const data::GraphBatch& batch,
                            const ModelParams& params) {
  std::size_t n = batch.num_nodes();
  std::size_t e = batch.num_edges();
  if (e == 0) {
    return Tensor::constant({n, h.cols()}, 0.0);
  }
  if (!edge_states.has_value()) {
    throw ContractError("propagate_within needs edge states when edges exist");
  }

  std::vector<std::size_t> src(2 * e), dst(2 * e);
  for (std::size_t k = 0; k < e; ++k) {
    src[k] = batch.from_idx[k];
    dst[k] = batch.to_idx[k];
    src[e + k] = batch.to_idx[k];
    dst[e + k] = batch.from_idx[k];
  }

  Tensor h_src = ad::gather_rows(h, src);
  Tensor h_dst = ad::gather_rows(h, dst);
  Tensor e2 = ad::concat({*edge_states, *edge_states}, 0);
  Tensor flags = Tensor::zeros({2 * e, 2});
  for (std::size_t k = 0; k < e; ++k) {
    flags.value()[k * 2] = 1.0;            // head -> dependent
    flags.value()[(e + k) * 2 + 1] = 1.0;  // dependent -> head
  }

  Tensor input = ad::concat({h_src, h_dst, e2, flags}, 1);
  Tensor messages = params.message.forward(input);
  return ad::segment_sum(messages, dst, n);
}

ad::Tensor cross_attention(const Tensor& h, const data::GraphBatch& batch,
                           const ModelConfig& config) {
  if (config.mode != Mode::matching) {
    throw ContractError("cross_attention requires matching mode");
  }
  std::size_t n_graphs = batch.num_graphs();
  if (n_graphs % 2 != 0) {
    throw ContractError("unpaired graph in batch: " + std::to_string(n_graphs) +
                        " graphs");
  }

  // Candidate enumeration: each node attends over every node of its
  // partner graph, in both directions.
  std::size_t total = 0;
  for (std::size_t k = 0; k < n_graphs; k += 2) {
    total += 2 * batch.graph_size(k) * batch.graph_size(k + 1);
  }
  std::vector<std::size_t> src, dst;
  src.reserve(total);
  dst.reserve(total);
  for (std::size_t k = 0; k < n_graphs; k += 2) {
    std::size_t a0 = batch.graph_node_offset[k];
    std::size_t a1 = batch.graph_node_offset[k + 1];
    std::size_t b0 = batch.graph_node_offset[k + 1];
    std::size_t b1 = batch.graph_node_offset[k + 2];
    for (std::size_t u = a0; u < a1; ++u) {
      for (std::size_t v = b0; v < b1; ++v) {
        src.push_back(u);
        dst.push_back(v);
      }
    }
    for (std::size_t v = b0; v < b1; ++v) {
      for (std::size_t u = a0; u < a1; ++u) {
        src.push_back(v);
        dst.push_back(u);
      }
    }
  }

  Tensor h_src = ad::gather_rows(h, src);
  Tensor h_dst = ad::gather_rows(h, dst);
  Tensor scores = ad::row_sum(ad::mul(h_src, h_dst));
  if (config.similarity == Similarity::scaled_dot) {
    scores = ad::scale(scores, 1.0 / std::sqrt(double(config.node_state_dim)));
  }
  Tensor attention = ad::segment_softmax(scores, src, batch.num_nodes());
  Tensor attended =
      ad::segment_sum(ad::scale_rows(h_dst, attention), src, batch.num_nodes());
  return ad::sub(h, attended);
}

ad::Tensor node_update(const Tensor& h, const Tensor& message_sums,
                       const std::optional<Tensor>& match_sums,
                       const ModelParams& params, const ModelConfig& config) {
  bool matching = config.mode == Mode::matching;
  if (matching != match_sums.has_value()) {
    throw ContractError(std::string("node_update: match sums ") +
                        (matching ? "missing in" : "supplied outside") +
                        " matching mode");
  }
  Tensor input = matching ? ad::concat({message_sums, *match_sums}, 1)
                          : message_sums;
  return params.gru.forward(input, h);
}

ad::Tensor aggregate(const Tensor& h, const data::GraphBatch& batch,
                     const ModelParams& params) {
  Tensor gates = ad::sigmoid(params.gate.forward(h));
  Tensor transformed = params.transform.forward(h);
  Tensor gated = ad::mul(gates, transformed);
  Tensor sums = ad::segment_sum(gated, batch.graph_id, batch.num_graphs());
  return params.readout.forward(sums);
}

ad::Tensor forward_pair(const data::GraphBatch& batch, const ModelParams& params,
                        const ModelConfig& config) {
  config.validate();
  EncodedBatch encoded = encode(batch, params, config);
  Tensor h = encoded.node_states;
  for (std::size_t t = 0; t < config.prop_layers; ++t) {
    Tensor message_sums = propagate_within(h, encoded.edge_states, batch, params);
    if (config.mode == Mode::matching) {
      Tensor match = cross_attention(h, batch, config);
      h = node_update(h, message_sums, match, params, config);
    } else {
      h = node_update(h, message_sums, std::nullopt, params, config);
    }
  }
  return aggregate(h, batch, params);
}

}  // namespace tmn::model
