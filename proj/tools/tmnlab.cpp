// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tmn/checkpoint.hpp"
#include "tmn/error.hpp"
#include "tmn/io.hpp"
#include "tmn/metrics.hpp"
#include "tmn/model.hpp"
#include "tmn/objectives.hpp"
#include "tmn/ops.hpp"
#include "tmn/synth.hpp"
#include "tmn/trainer.hpp"
#include "tmn/tree.hpp"

namespace {

using nlohmann::json;
using namespace tmn;

struct SynthSpec {
  std::uint64_t seed = 7;
  std::size_t count = 3000;
  std::size_t node_dim = 16;
  std::size_t edge_dim = 8;
  std::size_t max_nodes = 8;
};

struct RunConfig {
  model::ModelConfig model = model::ModelConfig::desk();
  objectives::LossConfig loss;
  std::map<std::uint32_t, train::PhaseConfig> phases;
  std::string data_file;
  bool use_synth = false;
  SynthSpec synth;
  std::uint64_t seed = 42;
  std::string out_dir = "runs/out";
  int strictness = 3;

  RunConfig() {
    for (std::uint32_t p : {1u, 2u, 3u}) phases[p] = train::PhaseConfig::desk(p);
  }
};

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

model::ModelConfig model_from_json(const json& j) {
  model::ModelConfig c = model::ModelConfig::desk();
  if (j.contains("preset")) {
    const auto preset = j.at("preset").get<std::string>();
    if (preset == "desk")
      c = model::ModelConfig::desk();
    else if (preset == "paper")
      c = model::ModelConfig::paper();
    else
      throw ConfigError("unknown model preset '" + preset + "'");
  }
  maybe(j, "node_feature_dim", c.node_feature_dim);
  maybe(j, "edge_feature_dim", c.edge_feature_dim);
  maybe(j, "node_state_dim", c.node_state_dim);
  maybe(j, "edge_state_dim", c.edge_state_dim);
  maybe(j, "prop_layers", c.prop_layers);
  maybe(j, "graph_rep_dim", c.graph_rep_dim);
  maybe(j, "mlp_hidden_layers", c.mlp_hidden_layers);
  if (j.contains("mode"))
    c.mode = model::mode_from_string(j.at("mode").get<std::string>());
  if (j.contains("similarity"))
    c.similarity =
        model::similarity_from_string(j.at("similarity").get<std::string>());
  return c;
}

objectives::LossConfig loss_from_json(const json& j) {
  objectives::LossConfig c;
  if (j.contains("preset")) {
    const auto preset = j.at("preset").get<std::string>();
    if (preset == "snli3")
      c = objectives::LossConfig::snli3();
    else if (preset == "semeval2")
      c = objectives::LossConfig::semeval2();
    else
      throw ConfigError("unknown loss preset '" + preset + "'");
  }
  maybe(j, "tau", c.tau);
  maybe(j, "beta", c.beta);
  maybe(j, "w_entail", c.w_entail);
  maybe(j, "w_contra", c.w_contra);
  maybe(j, "w_neutral", c.w_neutral);
  return c;
}

void phase_overrides(const json& j, train::PhaseConfig& c) {
  maybe(j, "batch_size", c.batch_size);
  maybe(j, "max_batches_per_epoch", c.max_batches_per_epoch);
  maybe(j, "learning_rate", c.learning_rate);
  maybe(j, "max_epochs", c.max_epochs);
  maybe(j, "patience", c.patience);
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("config file " + path + ": " + e.what());
  }

  RunConfig cfg;
  if (j.contains("model")) cfg.model = model_from_json(j.at("model"));
  if (j.contains("loss")) cfg.loss = loss_from_json(j.at("loss"));
  if (j.contains("phases")) {
    const json& ph = j.at("phases");
    if (ph.contains("preset")) {
      const auto preset = ph.at("preset").get<std::string>();
      for (std::uint32_t p : {1u, 2u, 3u}) {
        if (preset == "desk")
          cfg.phases[p] = train::PhaseConfig::desk(p);
        else if (preset == "paper")
          cfg.phases[p] = train::PhaseConfig::paper(p);
        else
          throw ConfigError("unknown phase preset '" + preset + "'");
      }
    }
    for (std::uint32_t p : {1u, 2u, 3u}) {
      const std::string key = std::to_string(p);
      if (ph.contains(key)) phase_overrides(ph.at(key), cfg.phases[p]);
    }
  }
  if (j.contains("data")) {
    const json& d = j.at("data");
    if (d.contains("file") && d.contains("synth"))
      throw ConfigError("config lists both a data file and a synth source");
    if (d.contains("file")) cfg.data_file = d.at("file").get<std::string>();
    if (d.contains("synth")) {
      cfg.use_synth = true;
      const json& s = d.at("synth");
      maybe(s, "seed", cfg.synth.seed);
      maybe(s, "count", cfg.synth.count);
      maybe(s, "node_dim", cfg.synth.node_dim);
      maybe(s, "edge_dim", cfg.synth.edge_dim);
      maybe(s, "max_nodes", cfg.synth.max_nodes);
    }
  }
  maybe(j, "seed", cfg.seed);
  maybe(j, "out_dir", cfg.out_dir);
  maybe(j, "strictness", cfg.strictness);
  return cfg;
}

std::vector<data::TreePair> load_dataset(const RunConfig& cfg) {
  const bool has_file = !cfg.data_file.empty();
  if (has_file == cfg.use_synth)
    throw ConfigError(
        "exactly one data source is required: a pair file or synth "
        "parameters");
  if (has_file) return data::load_pairs(cfg.data_file, cfg.strictness);
  return data::synth_task(cfg.synth.seed, cfg.synth.count, cfg.synth.node_dim,
                          cfg.synth.edge_dim, cfg.synth.max_nodes);
}

void check_dims(const RunConfig& cfg, const std::vector<data::TreePair>& pairs) {
  if (pairs.empty()) return;
  const std::size_t node_dim = pairs.front().tree_a.node_features.cols;
  if (node_dim != cfg.model.node_feature_dim)
    throw ConfigError("data has " + std::to_string(node_dim) +
                      "-dim node features but the model expects " +
                      std::to_string(cfg.model.node_feature_dim));
}

std::string format_report(const std::string& source,
                          const ckpt::Checkpoint& snapshot,
                          const train::Evaluation& eval, double lo, double hi,
                          std::size_t n_pairs) {
  std::ostringstream out;
  char buf[160];
  out << "tmnlab evaluation report\n";
  out << "checkpoint_phase: " << snapshot.phase << "\n";
  out << "checkpoint_epoch: " << snapshot.epoch << "\n";
  out << "data: " << source << " (" << n_pairs << " pairs)\n";
  std::snprintf(buf, sizeof(buf), "thresholds: lo=%.6g hi=%.6g\n", lo, hi);
  out << buf;
  std::snprintf(buf, sizeof(buf), "accuracy: %.6f\n", eval.accuracy);
  out << buf;
  std::snprintf(buf, sizeof(buf), "mean_loss: %.6f\n", eval.mean_loss);
  out << buf;
  std::snprintf(buf, sizeof(buf), "embedding_norm_std: %.6f\n",
                eval.embedding_norm_std);
  out << buf;
  out << "skipped_anchors: " << eval.skipped_anchors << "\n";
  out << "confusion_matrix: rows true, cols predicted, order "
         "contradiction/neutral/entailment\n";
  for (std::size_t r = 0; r < 3; ++r) {
    std::snprintf(buf, sizeof(buf), "  %8zu %8zu %8zu\n",
                  eval.confusion.counts[r][0], eval.confusion.counts[r][1],
                  eval.confusion.counts[r][2]);
    out << buf;
  }
  out << "per_class: precision recall f1 (degenerate cells flagged)\n";
  const char* names[3] = {"contradiction", "neutral", "entailment"};
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& m = eval.report.per_class[k];
    std::snprintf(buf, sizeof(buf), "  %-13s %.6f %.6f %.6f%s\n", names[k],
                  m.precision, m.recall, m.f1, m.degenerate ? " degenerate" : "");
    out << buf;
  }
  return out.str();
}

int cmd_synth(const SynthSpec& spec, const std::string& out_path) {
  auto pairs = data::synth_task(spec.seed, spec.count, spec.node_dim,
                                spec.edge_dim, spec.max_nodes);
  data::save_pairs(out_path, pairs);
  std::size_t histogram[3] = {0, 0, 0};
  for (const auto& p : pairs) histogram[metrics::Confusion::index_of(p.label)]++;
  std::cout << "wrote " << pairs.size() << " pairs to " << out_path << "\n";
  std::cout << "labels: contradiction " << histogram[0] << ", neutral "
            << histogram[1] << ", entailment " << histogram[2] << "\n";
  return 0;
}

int cmd_train(RunConfig cfg, std::vector<std::uint32_t> phase_list,
              bool skip_pretrain, bool resume) {
  if (phase_list.empty()) phase_list = {1, 2, 3};
  std::sort(phase_list.begin(), phase_list.end());
  phase_list.erase(std::unique(phase_list.begin(), phase_list.end()),
                   phase_list.end());

  auto pairs = load_dataset(cfg);
  check_dims(cfg, pairs);
  std::vector<data::TreePair> train_set, val_set;
  train::split_pairs(pairs, 0.1, train_set, val_set);
  std::cout << "data: " << pairs.size() << " pairs (" << train_set.size()
            << " train, " << val_set.size() << " held out)\n";

  const std::string ckpt_dir = cfg.out_dir + "/checkpoints";
  std::filesystem::create_directories(ckpt_dir);

  model::ModelParams params;
  bool params_live = false;

  for (std::size_t i = 0; i < phase_list.size(); ++i) {
    const std::uint32_t p = phase_list[i];
    train::PhaseConfig pcfg = cfg.phases.at(p);
    pcfg.phase = p;
    pcfg.seed = cfg.seed;
    pcfg.loss = cfg.loss;

    train::OptimizerState opt;
    std::size_t start_epoch = 0;

    const std::string own_ckpt =
        ckpt_dir + "/phase" + std::to_string(p) + "_last.ckpt";
    const std::string prev_ckpt =
        ckpt_dir + "/phase" + std::to_string(p - 1) + "_last.ckpt";

    if (resume && i == 0) {
      if (!std::filesystem::exists(own_ckpt))
        throw ProtocolError("nothing to resume: " + own_ckpt + " not found");
      auto snapshot = ckpt::load_checkpoint(own_ckpt);
      params = model::init_params(cfg.model, cfg.seed);
      ckpt::apply_checkpoint(snapshot, params, cfg.model);
      if (snapshot.optimizer) opt.from_blob(*snapshot.optimizer, params);
      start_epoch = snapshot.epoch;
      params_live = true;
      if (start_epoch >= pcfg.max_epochs) {
        std::cout << "phase " << p << " already complete ("
                  << start_epoch << " epochs)\n";
        continue;
      }
    } else if (!params_live) {
      if (p == 1 || (p == 2 && skip_pretrain)) {
        params = model::init_params(cfg.model, cfg.seed);
      } else if (std::filesystem::exists(prev_ckpt)) {
        auto snapshot = ckpt::load_checkpoint(prev_ckpt);
        params = model::init_params(cfg.model, cfg.seed);
        ckpt::apply_checkpoint(snapshot, params, cfg.model);
      } else {
        throw ProtocolError(
            "phase " + std::to_string(p) + " needs " + prev_ckpt +
            (p == 2 ? " (train phase 1 first or pass --skip-pretrain)"
                    : " (train the earlier phase first)"));
      }
      params_live = true;
    }

    const std::string log_path =
        cfg.out_dir + "/metrics_phase" + std::to_string(p) + ".jsonl";
    std::cout << "phase " << p << ": lr " << pcfg.learning_rate << ", batch "
              << pcfg.batch_size << ", up to " << pcfg.max_epochs
              << " epochs -> " << log_path << "\n";

    auto result = train::run_phase(params, opt, train_set, val_set, cfg.model,
                                   pcfg, ckpt_dir, log_path, start_epoch);
    for (const auto& r : result.reports) {
      char line[200];
      std::snprintf(line, sizeof(line),
                    "phase %u epoch %zu/%zu  train_loss %.4f  val_loss %.4f  "
                    "train_acc %.4f  val_acc %.4f",
                    r.phase, r.epoch, pcfg.max_epochs, r.train_loss, r.val_loss,
                    r.train_accuracy, r.val_accuracy);
      std::cout << line << "\n";
    }
    if (result.aborted)
      throw NumericError("training aborted in phase " + std::to_string(p) +
                         ": " + result.abort_reason);
    if (!result.reports.empty()) {
      const auto& last = result.reports.back();
      std::cout << "phase " << p << " done: train_acc " << last.train_accuracy
                << " val_acc " << last.val_accuracy << "\n";
    }
  }
  return 0;
}

int cmd_eval(const std::string& ckpt_path, RunConfig cfg, double lo, double hi,
             const std::string& out_path) {
  auto snapshot = ckpt::load_checkpoint(ckpt_path);
  auto params = model::init_params(snapshot.config, 0);
  ckpt::apply_checkpoint(snapshot, params, snapshot.config);

  cfg.model = snapshot.config;
  auto pairs = load_dataset(cfg);
  check_dims(cfg, pairs);

  train::PhaseConfig pcfg = cfg.phases.at(snapshot.phase == 0 ? 2 : snapshot.phase);
  pcfg.phase = snapshot.phase == 0 ? 2 : snapshot.phase;
  pcfg.loss = cfg.loss;

  auto eval = train::evaluate(pairs, params, snapshot.config, pcfg, lo, hi);
  const std::string source = cfg.data_file.empty() ? "synth" : cfg.data_file;
  const std::string text =
      format_report(source, snapshot, eval, lo, hi, pairs.size());
  std::cout << text;
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw IoError("cannot write report to " + out_path);
  out << text;
  std::cout << "report written to " << out_path << "\n";
  return 0;
}

data::DepTree chain_tree(std::mt19937_64& rng, std::size_t n,
                         std::size_t node_dim, std::size_t edge_dim) {
  data::DepTree tree;
  tree.node_features = data::FeatureMatrix(n, node_dim);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& x : tree.node_features.data) x = gauss(rng);
  tree.edge_features = data::FeatureMatrix(n - 1, edge_dim);
  for (auto& x : tree.edge_features.data) x = gauss(rng);
  for (std::size_t i = 1; i < n; ++i) tree.edges.emplace_back(i - 1, i);
  tree.root = 0;
  return tree;
}

int cmd_gradcheck(std::size_t node_state, std::uint64_t seed, bool corrupt) {
  model::ModelConfig mc;
  mc.node_feature_dim = 8;
  mc.edge_feature_dim = 4;
  mc.node_state_dim = node_state;
  mc.edge_state_dim = 4;
  mc.prop_layers = 2;
  mc.graph_rep_dim = 6;
  mc.mode = model::Mode::matching;
  // Affine maps keep the check well conditioned: a dead hidden layer at
  // this width can zero an embedding row outright, and near-zero norms
  // push the cosine's curvature beyond finite-difference resolution.
  mc.mlp_hidden_layers = 0;

  std::mt19937_64 rng(seed);
  std::vector<data::TreePair> pairs(3);
  const std::size_t sizes[3][2] = {{4, 3}, {5, 4}, {3, 5}};
  const int labels[3] = {data::kEntailment, data::kContradiction,
                         data::kNeutral};
  for (std::size_t i = 0; i < 3; ++i) {
    pairs[i].tree_a = chain_tree(rng, sizes[i][0], 8, 4);
    pairs[i].tree_b = chain_tree(rng, sizes[i][1], 8, 4);
    pairs[i].label = labels[i];
  }
  auto batch = data::batch_pairs(pairs);

  auto params = model::init_params(mc, seed);
  auto named = params.named();
  for (auto& [name, t] : named) {
    (void)name;
    t.set_requires_grad(true);
  }

  objectives::LossConfig loss;
  loss.tau = 0.2;  // keeps every anchor off the saturated softmax plateau

  auto f = [&]() {
    ad::Tensor emb = model::forward_pair(batch, params, mc);
    ad::Tensor l = objectives::multi_objective_loss(emb, batch, loss).loss;
    if (!corrupt) return l;
    // Negative control: an identity op recorded with a wrong backward rule.
    ad::Tensor bad = ad::Tensor::from(l.value(), l.shape(), true);
    if (ad::Tape* tape = ad::Tape::current()) {
      auto in = l.impl();
      auto out = bad.impl();
      tape->record({{in},
                    out,
                    [in, out]() {
                      auto& g = in->ensure_grad();
                      for (std::size_t i = 0; i < g.size(); ++i)
                        g[i] += 1.5 * out->grad[i];
                    }});
    }
    return bad;
  };

  auto report = ad::grad_check(f, named, 1e-5);
  char line[200];
  std::snprintf(line, sizeof(line),
                "checked %zu partial derivatives: max relative error %.3e "
                "(worst %s[%zu])",
                report.checked, report.max_rel_error,
                report.worst_param.c_str(), report.worst_index);
  std::cout << line << "\n";
  if (report.max_rel_error < 1e-4) {
    std::cout << "PASS (threshold 1e-4)\n";
    return 0;
  }
  std::cout << "FAIL (threshold 1e-4)\n";
  return 3;
}

int cmd_inspect(const std::string& path) {
  auto snapshot = ckpt::load_checkpoint(path);
  std::size_t total = 0;
  for (const auto& [name, values] : snapshot.tensors) total += values.size();
  std::cout << "checkpoint: " << path << "\n";
  std::cout << "phase " << snapshot.phase << ", epoch " << snapshot.epoch
            << ", seed " << snapshot.seed << "\n";
  const auto& m = snapshot.config;
  std::cout << "model: mode=" << model::to_string(m.mode)
            << " node_feature_dim=" << m.node_feature_dim
            << " edge_feature_dim=" << m.edge_feature_dim
            << " node_state_dim=" << m.node_state_dim
            << " edge_state_dim=" << m.edge_state_dim << " prop_layers="
            << m.prop_layers << " graph_rep_dim=" << m.graph_rep_dim
            << " mlp_hidden_layers=" << m.mlp_hidden_layers << "\n";
  std::cout << "tensors: " << snapshot.tensors.size() << " (" << total
            << " parameters)\n";
  if (snapshot.optimizer) {
    std::cout << "optimizer: adam, step " << snapshot.optimizer->step << "\n";
  } else {
    std::cout << "optimizer: none\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tree matching and embedding networks over dependency parses"};
  app.require_subcommand(1);

  SynthSpec synth_spec;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "generate a synthetic pair file");
  synth->add_option("--seed", synth_spec.seed, "generator seed");
  synth->add_option("--count", synth_spec.count, "number of pairs")
      ->check(CLI::PositiveNumber);
  synth->add_option("--node-dim", synth_spec.node_dim, "node feature width")
      ->check(CLI::Range(std::size_t{4}, std::size_t{100000}));
  synth->add_option("--edge-dim", synth_spec.edge_dim, "edge feature width")
      ->check(CLI::PositiveNumber);
  synth->add_option("--max-nodes", synth_spec.max_nodes, "maximum tree size")
      ->check(CLI::Range(std::size_t{3}, std::size_t{100000}));
  synth->add_option("--out", synth_out, "output path")->required();

  std::string train_config;
  std::vector<std::uint32_t> train_phases;
  bool skip_pretrain = false;
  bool resume = false;
  std::string train_mode;
  std::string train_data;
  bool train_synth = false;
  std::string train_out;
  std::int64_t train_seed = -1;
  auto* traincmd = app.add_subcommand("train", "run one or more phases");
  traincmd->add_option("--config", train_config, "run config file (JSON)");
  traincmd->add_option("--phase", train_phases, "phases to run, in order")
      ->check(CLI::Range(1u, 3u));
  traincmd->add_flag("--skip-pretrain", skip_pretrain,
                     "allow phase 2 to start from fresh weights");
  traincmd->add_flag("--resume", resume,
                     "continue the first listed phase from its last checkpoint");
  traincmd->add_option("--mode", train_mode, "matching | embedding");
  traincmd->add_option("--data", train_data, "pair file (overrides config)");
  traincmd->add_flag("--synth", train_synth,
                     "use the synthetic task (overrides config)");
  traincmd->add_option("--out", train_out, "output directory");
  traincmd->add_option("--seed", train_seed, "run seed")
      ->check(CLI::NonNegativeNumber);

  std::string eval_ckpt;
  std::string eval_data;
  bool eval_synth = false;
  std::string eval_config;
  std::string eval_thresholds = "-0.33,0.33";
  std::string eval_out = "eval_report.txt";
  int eval_strictness = 3;
  auto* evalcmd = app.add_subcommand("eval", "evaluate a checkpoint");
  evalcmd->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
  evalcmd->add_option("--data", eval_data, "pair file");
  evalcmd->add_flag("--synth", eval_synth, "use the synthetic task");
  evalcmd->add_option("--config", eval_config, "run config file (JSON)");
  evalcmd->add_option("--thresholds", eval_thresholds,
                      "decision boundaries as lo,hi");
  evalcmd->add_option("--out", eval_out, "report file");
  evalcmd->add_option("--strictness", eval_strictness, "tree validation level")
      ->check(CLI::Range(0, 3));

  std::size_t gc_node_state = 6;
  std::uint64_t gc_seed = 17;
  bool gc_corrupt = false;
  auto* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference check of the full model");
  gradcheck->add_option("--node-state", gc_node_state, "node state width")
      ->check(CLI::Range(std::size_t{1}, std::size_t{64}));
  gradcheck->add_option("--seed", gc_seed, "model and data seed");
  gradcheck->add_flag("--corrupt-backward", gc_corrupt,
                      "negative control: sabotage one backward rule");

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect", "print a checkpoint summary");
  inspect->add_option("--checkpoint", inspect_path, "checkpoint path")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*synth) return cmd_synth(synth_spec, synth_out);

    if (*traincmd) {
      RunConfig cfg =
          train_config.empty() ? RunConfig{} : load_run_config(train_config);
      if (!train_data.empty() && train_synth)
        throw ConfigError("--data and --synth are mutually exclusive");
      if (!train_data.empty()) {
        cfg.data_file = train_data;
        cfg.use_synth = false;
      }
      if (train_synth) {
        cfg.use_synth = true;
        cfg.data_file.clear();
      }
      if (!train_mode.empty()) cfg.model.mode = model::mode_from_string(train_mode);
      if (!train_out.empty()) cfg.out_dir = train_out;
      if (train_seed >= 0) cfg.seed = static_cast<std::uint64_t>(train_seed);
      return cmd_train(std::move(cfg), train_phases, skip_pretrain, resume);
    }

    if (*evalcmd) {
      RunConfig cfg =
          eval_config.empty() ? RunConfig{} : load_run_config(eval_config);
      if (!eval_data.empty() && eval_synth)
        throw ConfigError("--data and --synth are mutually exclusive");
      if (!eval_data.empty()) {
        cfg.data_file = eval_data;
        cfg.use_synth = false;
      }
      if (eval_synth) {
        cfg.use_synth = true;
        cfg.data_file.clear();
      }
      if (eval_config.empty() && eval_data.empty() && !eval_synth)
        throw ConfigError(
            "exactly one data source is required: pass --data or --synth");
      cfg.strictness = eval_strictness;

      double lo = 0.0, hi = 0.0;
      char comma = 0;
      std::istringstream ts(eval_thresholds);
      if (!(ts >> lo >> comma >> hi) || comma != ',') {
        std::cerr << "error: --thresholds expects two numbers as lo,hi\n";
        return 1;
      }
      return cmd_eval(eval_ckpt, std::move(cfg), lo, hi, eval_out);
    }

    if (*gradcheck) return cmd_gradcheck(gc_node_state, gc_seed, gc_corrupt);
    if (*inspect) return cmd_inspect(inspect_path);
  } catch (const ProtocolError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
