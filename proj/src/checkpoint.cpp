// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#include "tmn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "tmn/error.hpp"

namespace tmn::ckpt {

namespace {

constexpr char kMagic[8] = {'T', 'M', 'N', 'C', 'K', 'P', 'T', '1'};

using json = nlohmann::json;

json config_to_json(const model::ModelConfig& c) {
  return json{{"node_feature_dim", c.node_feature_dim},
              {"edge_feature_dim", c.edge_feature_dim},
              {"node_state_dim", c.node_state_dim},
              {"edge_state_dim", c.edge_state_dim},
              {"prop_layers", c.prop_layers},
              {"graph_rep_dim", c.graph_rep_dim},
              {"mode", model::to_string(c.mode)},
              {"mlp_hidden_layers", c.mlp_hidden_layers},
              {"similarity", model::to_string(c.similarity)}};
}

model::ModelConfig config_from_json(const json& j) {
  model::ModelConfig c;
  c.node_feature_dim = j.at("node_feature_dim").get<std::size_t>();
  c.edge_feature_dim = j.at("edge_feature_dim").get<std::size_t>();
  c.node_state_dim = j.at("node_state_dim").get<std::size_t>();
  c.edge_state_dim = j.at("edge_state_dim").get<std::size_t>();
  c.prop_layers = j.at("prop_layers").get<std::size_t>();
  c.graph_rep_dim = j.at("graph_rep_dim").get<std::size_t>();
  c.mode = model::mode_from_string(j.at("mode").get<std::string>());
  c.mlp_hidden_layers = j.at("mlp_hidden_layers").get<std::size_t>();
  c.similarity =
      model::similarity_from_string(j.at("similarity").get<std::string>());
  return c;
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = (v >> (8 * i)) & 0xff;
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(buf[i]) << (8 * i);
  return v;
}

void write_doubles(std::ostream& out, const std::vector<double>& values) {
  for (double d : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    write_u64(out, bits);
  }
}

void read_doubles(std::istream& in, std::vector<double>& values,
                  std::size_t count) {
  values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = read_u64(in);
    std::memcpy(&values[i], &bits, 8);
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const model::ModelParams& params,
                     const model::ModelConfig& config, std::uint64_t seed,
                     std::uint32_t phase, std::uint64_t epoch,
                     const OptimizerBlob* optimizer) {
  auto named = params.named();

  json tensors = json::array();
  for (const auto& [name, t] : named) {
    tensors.push_back(json{{"name", name}, {"shape", t.shape()}});
  }
  json header{{"format", "tmnckpt/1"},
              {"config", config_to_json(config)},
              {"seed", seed},
              {"phase", phase},
              {"epoch", epoch},
              {"tensors", tensors}};
  if (optimizer != nullptr) {
    header["optimizer"] = json{{"kind", "adam"},
                               {"beta1", optimizer->beta1},
                               {"beta2", optimizer->beta2},
                               {"eps", optimizer->eps},
                               {"step", optimizer->step},
                               {"count", optimizer->m.size()}};
  }
  std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, 8);
  write_u64(out, header_str.size());
  out.write(header_str.data(), std::streamsize(header_str.size()));
  for (const auto& [name, t] : named) write_doubles(out, t.value());
  if (optimizer != nullptr) {
    write_doubles(out, optimizer->m);
    write_doubles(out, optimizer->v);
  }
  out.flush();
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);

  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw ParseError("not a checkpoint file: " + path);
  }
  std::uint64_t header_len = read_u64(in);
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), std::streamsize(header_len));
  if (!in) throw ParseError("truncated checkpoint header: " + path);

  json header;
  try {
    header = json::parse(header_str);
  } catch (const json::parse_error& e) {
    throw ParseError("bad checkpoint header: " + std::string(e.what()));
  }

  Checkpoint ckpt;
  ckpt.config = config_from_json(header.at("config"));
  ckpt.seed = header.at("seed").get<std::uint64_t>();
  ckpt.phase = header.at("phase").get<std::uint32_t>();
  ckpt.epoch = header.at("epoch").get<std::uint64_t>();

  for (const auto& entry : header.at("tensors")) {
    std::string name = entry.at("name").get<std::string>();
    auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    std::size_t count = 1;
    for (std::size_t d : shape) count *= d;
    std::vector<double> values;
    read_doubles(in, values, count);
    if (!in) throw ParseError("truncated checkpoint payload: " + path);
    ckpt.tensors.emplace_back(std::move(name), std::move(values));
  }

  if (header.contains("optimizer")) {
    const json& opt = header.at("optimizer");
    OptimizerBlob blob;
    blob.beta1 = opt.at("beta1").get<double>();
    blob.beta2 = opt.at("beta2").get<double>();
    blob.eps = opt.at("eps").get<double>();
    blob.step = opt.at("step").get<std::uint64_t>();
    std::size_t count = opt.at("count").get<std::size_t>();
    read_doubles(in, blob.m, count);
    read_doubles(in, blob.v, count);
    if (!in) throw ParseError("truncated optimizer payload: " + path);
    ckpt.optimizer = std::move(blob);
  }
  return ckpt;
}

void apply_checkpoint(const Checkpoint& ckpt, model::ModelParams& params,
                      const model::ModelConfig& config) {
  if (!(ckpt.config == config)) {
    throw ConfigError("checkpoint config does not match the model config");
  }
  auto named = params.named();
  if (named.size() != ckpt.tensors.size()) {
    throw ConfigError("checkpoint holds " + std::to_string(ckpt.tensors.size()) +
                      " tensors, model has " + std::to_string(named.size()));
  }
  for (std::size_t i = 0; i < named.size(); ++i) {
    auto& [name, tensor] = named[i];
    const auto& [ckpt_name, values] = ckpt.tensors[i];
    if (name != ckpt_name) {
      throw ConfigError("checkpoint tensor \"" + ckpt_name +
                        "\" does not match model tensor \"" + name + "\"");
    }
    if (values.size() != tensor.numel()) {
      throw ConfigError("checkpoint tensor \"" + ckpt_name + "\" holds " +
                        std::to_string(values.size()) + " values, model expects " +
                        std::to_string(tensor.numel()));
    }
    tensor.value() = values;
  }
}

}  // namespace tmn::ckpt
