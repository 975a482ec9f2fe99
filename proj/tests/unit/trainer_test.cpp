// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tmn/checkpoint.hpp"
#include "tmn/error.hpp"
#include "tmn/synth.hpp"
#include "tmn/trainer.hpp"

using namespace tmn;
using namespace tmn::train;
using ad::Tensor;

namespace {

std::string temp_dir(const char* stem) {
  auto path = std::filesystem::temp_directory_path() /
              (std::string("tmn_") + stem + "_" + std::to_string(getpid()));
  return path.string();
}

struct TempDir {
  std::string path;
  explicit TempDir(const char* stem) : path(temp_dir(stem)) {
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const char* name) const { return path + "/" + name; }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

model::ModelConfig tiny_config(model::Mode mode) {
  model::ModelConfig c;
  c.node_feature_dim = 16;
  c.edge_feature_dim = 8;
  c.node_state_dim = 8;
  c.edge_state_dim = 6;
  c.prop_layers = 2;
  c.graph_rep_dim = 8;
  c.mode = mode;
  c.mlp_hidden_layers = 1;
  return c;
}

PhaseConfig tiny_phase(std::uint32_t phase) {
  PhaseConfig c;
  c.phase = phase;
  c.batch_size = 16;
  c.max_batches_per_epoch = 4;
  c.learning_rate = 1e-3;
  c.max_epochs = 3;
  c.seed = 11;
  c.loss.tau = 0.2;
  return c;
}

std::vector<data::TreePair> tiny_data(std::size_t n, std::uint64_t seed = 3) {
  return data::synth_task(seed, n, 16, 8, 5);
}

bool reports_equal(const EpochReport& a, const EpochReport& b) {
  return a.phase == b.phase && a.epoch == b.epoch &&
         a.train_loss == b.train_loss && a.val_loss == b.val_loss &&
         a.train_accuracy == b.train_accuracy &&
         a.val_accuracy == b.val_accuracy &&
         a.embedding_norm_std == b.embedding_norm_std &&
         a.skipped_anchors == b.skipped_anchors;
}

bool params_equal(const model::ModelParams& a, const model::ModelParams& b) {
  auto na = a.named();
  auto nb = b.named();
  if (na.size() != nb.size()) return false;
  for (std::size_t i = 0; i < na.size(); ++i) {
    if (na[i].first != nb[i].first) return false;
    if (na[i].second.value() != nb[i].second.value()) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("phase presets carry the documented schedules") {
  for (std::uint32_t p : {1u, 2u, 3u}) {
    PhaseConfig::desk(p).validate();
    PhaseConfig::paper(p).validate();
  }
  CHECK(PhaseConfig::desk(1).batch_size == 32);
  CHECK(PhaseConfig::desk(1).learning_rate == 1e-3);
  CHECK(PhaseConfig::desk(3).learning_rate == 5e-4);
  CHECK(PhaseConfig::paper(2).batch_size == 256);
  CHECK(PhaseConfig::paper(2).max_batches_per_epoch == 600);
  CHECK(PhaseConfig::paper(2).learning_rate == 1e-6);
  CHECK(PhaseConfig::paper(3).learning_rate == 5e-7);
  CHECK(PhaseConfig::paper(1).max_epochs == 50);
  CHECK(PhaseConfig::paper(2).max_epochs == 100);
  CHECK(PhaseConfig::desk(2).patience == 999);
}

TEST_CASE("phase config rejects unusable settings") {
  PhaseConfig c = tiny_phase(1);
  c.phase = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_phase(4);
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_phase(1);
  c.batch_size = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_phase(3);
  c.batch_size = 1;
  CHECK_NOTHROW(c.validate());
  c = tiny_phase(2);
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_phase(2);
  c.max_epochs = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("adam leaves parameters untouched on zero gradients") {
  auto config = tiny_config(model::Mode::matching);
  auto params = model::init_params(config, 5);
  std::vector<std::vector<double>> before;
  for (const auto& [name, t] : params.named()) before.push_back(t.value());

  OptimizerState opt;
  opt.init(params);
  adam_step(params, opt, 1e-2);
  CHECK(opt.step == 1);

  std::size_t i = 0;
  for (const auto& [name, t] : params.named()) {
    INFO(name);
    CHECK(t.value() == before[i]);
    ++i;
  }
}

TEST_CASE("a single adam step matches the hand calculation") {
  // Minimizing f(x) = x^2 from x = 1: the gradient is 2, so after one step
  //   m = 0.1 * 2,  v = 0.001 * 4,  mhat = 2,  vhat = 4,
  //   x' = 1 - lr * 2 / (sqrt(4) + eps), which is 1 - lr up to eps.
  Tensor x = Tensor::from({1.0}, {1}, true);
  x.grad() = {2.0};
  NamedTensors named{{"x", x}};

  OptimizerState opt;
  const double lr = 0.1;
  adam_step(named, opt, lr);

  const double m = (1.0 - 0.9) * 2.0;
  const double v = (1.0 - 0.999) * 4.0;
  const double mhat = m / (1.0 - 0.9);
  const double vhat = v / (1.0 - 0.999);
  const double expected = 1.0 - lr * mhat / (std::sqrt(vhat) + 1e-8);
  CHECK(x.value()[0] == doctest::Approx(expected).epsilon(1e-14));
  CHECK(x.value()[0] == doctest::Approx(1.0 - lr).epsilon(1e-7));
  CHECK(opt.step == 1);
}

TEST_CASE("constant gradients drive the update magnitude toward lr") {
  Tensor x = Tensor::from({0.0}, {1}, true);
  NamedTensors named{{"x", x}};
  OptimizerState opt;
  const double lr = 0.05;

  double last_delta = 0.0;
  for (int i = 0; i < 300; ++i) {
    x.grad() = {3.0};
    const double before = x.value()[0];
    adam_step(named, opt, lr);
    last_delta = before - x.value()[0];
  }
  CHECK(std::abs(last_delta - lr) < 1e-3 * lr);
}

TEST_CASE("a non-finite gradient aborts the step naming the parameter") {
  auto config = tiny_config(model::Mode::matching);
  auto params = model::init_params(config, 5);
  auto named = params.named();
  named[3].second.grad()[0] = std::numeric_limits<double>::quiet_NaN();

  OptimizerState opt;
  opt.init(params);
  CHECK_THROWS_WITH_AS(adam_step(params, opt, 1e-3),
                       doctest::Contains(named[3].first.c_str()),
                       NumericError);
}

TEST_CASE("optimizer state round-trips through the flat snapshot") {
  auto config = tiny_config(model::Mode::matching);
  auto params = model::init_params(config, 5);
  OptimizerState opt;
  opt.init(params);
  for (int i = 0; i < 3; ++i) {
    for (auto& [name, t] : params.named()) {
      (void)name;
      auto& g = t.grad();
      std::fill(g.begin(), g.end(), 0.25);
    }
    adam_step(params, opt, 1e-2);
  }

  auto blob = opt.to_blob();
  CHECK(blob.step == 3);
  CHECK(blob.m.size() == model::count_parameters(params));

  OptimizerState restored;
  restored.from_blob(blob, params);
  CHECK(restored.m == opt.m);
  CHECK(restored.v == opt.v);
  CHECK(restored.step == opt.step);

  // Restoring needs a snapshot of matching size.
  ckpt::OptimizerBlob wrong = blob;
  wrong.m.pop_back();
  OptimizerState other;
  CHECK_THROWS_AS(other.from_blob(wrong, params), ContractError);
}

TEST_CASE("randomized pairing is a seeded bijection") {
  std::mt19937_64 rng(7);
  auto perm = randomized_pairing(17, rng);
  REQUIRE(perm.size() == 17);
  auto sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> iota(17);
  std::iota(iota.begin(), iota.end(), std::size_t{0});
  CHECK(sorted == iota);

  std::mt19937_64 again(7);
  CHECK(randomized_pairing(17, again) == perm);

  std::mt19937_64 other(8);
  CHECK(randomized_pairing(17, other) != perm);
}

TEST_CASE("single-pair batches cannot train in phase 1") {
  auto pairs = tiny_data(1);
  pairs[0].label = data::kEntailment;
  std::mt19937_64 rng(1);
  OptimizerState opt;

  auto matching = tiny_config(model::Mode::matching);
  auto mparams = model::init_params(matching, 5);
  CHECK_THROWS_AS(
      train_on_batch(mparams, opt, pairs, matching, tiny_phase(1), rng),
      DegenerateError);

  auto embedding = tiny_config(model::Mode::embedding);
  auto eparams = model::init_params(embedding, 5);
  OptimizerState eopt;
  CHECK_THROWS_AS(
      train_on_batch(eparams, eopt, pairs, embedding, tiny_phase(1), rng),
      EmptyLossError);
}

TEST_CASE("the validation split is deterministic and uses pair ids") {
  auto all = tiny_data(400, 21);
  std::vector<data::TreePair> train_a, val_a, train_b, val_b;
  split_pairs(all, 0.1, train_a, val_a);
  split_pairs(all, 0.1, train_b, val_b);

  CHECK(train_a.size() + val_a.size() == all.size());
  CHECK(val_a.size() > all.size() / 20);
  CHECK(val_a.size() < all.size() / 5);

  auto ids = [](const std::vector<data::TreePair>& v) {
    std::vector<std::string> out;
    for (const auto& p : v) out.push_back(p.pair_id);
    return out;
  };
  CHECK(ids(train_a) == ids(train_b));
  CHECK(ids(val_a) == ids(val_b));

  auto train_id_list = ids(train_a);
  std::set<std::string> train_ids(train_id_list.begin(), train_id_list.end());
  for (const auto& p : val_a) CHECK(train_ids.count(p.pair_id) == 0);

  CHECK_THROWS_AS(split_pairs(all, 1.0, train_a, val_a), ConfigError);
}

TEST_CASE("phase losses dispatch to the documented objectives") {
  auto pairs = tiny_data(9);
  auto batch = data::batch_pairs(pairs);
  std::mt19937_64 rng(41);
  std::vector<double> raw(batch.num_graphs() * 6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& x : raw) x = u(rng);
  Tensor emb = Tensor::from(raw, {batch.num_graphs(), 6});

  auto p1 = tiny_phase(1);
  auto direct1 =
      objectives::infonce(emb, objectives::entailment_relations(batch), p1.loss.tau);
  CHECK(phase_loss(emb, batch, p1).loss.item() == direct1.loss.item());

  auto p2 = tiny_phase(2);
  auto direct2 = objectives::multi_objective_loss(emb, batch, p2.loss);
  CHECK(phase_loss(emb, batch, p2).loss.item() == direct2.loss.item());

  auto p3 = tiny_phase(3);
  auto direct3 = objectives::soft_cross_entropy(objectives::pair_cosines(emb, batch),
                                                batch.labels, p3.loss.beta);
  CHECK(phase_loss(emb, batch, p3).loss.item() == direct3.item());
  CHECK(phase_loss(emb, batch, p3).used == batch.num_pairs());
}

TEST_CASE("identically seeded runs reproduce reports and logs exactly") {
  auto all = tiny_data(120);
  std::vector<data::TreePair> train_set, val_set;
  split_pairs(all, 0.1, train_set, val_set);
  auto config = tiny_config(model::Mode::matching);
  auto phase = tiny_phase(2);

  TempDir dir_a("run_a");
  TempDir dir_b("run_b");

  auto params_a = model::init_params(config, 5);
  OptimizerState opt_a;
  auto run_a = run_phase(params_a, opt_a, train_set, val_set, config, phase,
                         dir_a.path, dir_a.file("metrics.jsonl"));

  auto params_b = model::init_params(config, 5);
  OptimizerState opt_b;
  auto run_b = run_phase(params_b, opt_b, train_set, val_set, config, phase,
                         dir_b.path, dir_b.file("metrics.jsonl"));

  REQUIRE(run_a.reports.size() == phase.max_epochs);
  REQUIRE(run_b.reports.size() == phase.max_epochs);
  CHECK_FALSE(run_a.aborted);
  for (std::size_t i = 0; i < run_a.reports.size(); ++i)
    CHECK(reports_equal(run_a.reports[i], run_b.reports[i]));
  CHECK(params_equal(params_a, params_b));

  auto log_a = read_file(dir_a.file("metrics.jsonl"));
  auto log_b = read_file(dir_b.file("metrics.jsonl"));
  CHECK(log_a == log_b);
  CHECK(!log_a.empty());

  // Every line parses and carries no wall-clock field.
  std::istringstream lines(log_a);
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    auto j = nlohmann::json::parse(line);
    CHECK(j.contains("train_loss"));
    CHECK(j.contains("val_loss"));
    CHECK(j.contains("embedding_norm_std"));
    CHECK(j.contains("skipped_anchors"));
    CHECK(!j.contains("wall_time"));
    CHECK(!j.contains("wall_time_s"));
    ++n;
  }
  CHECK(n == phase.max_epochs);
}

TEST_CASE("a resumed run continues step for step") {
  auto all = tiny_data(90, 9);
  std::vector<data::TreePair> train_set, val_set;
  split_pairs(all, 0.1, train_set, val_set);
  auto config = tiny_config(model::Mode::matching);
  auto phase = tiny_phase(2);
  phase.max_epochs = 4;

  TempDir dir_a("full_run");
  auto params_a = model::init_params(config, 5);
  OptimizerState opt_a;
  auto run_a = run_phase(params_a, opt_a, train_set, val_set, config, phase,
                         dir_a.path, dir_a.file("metrics.jsonl"));
  REQUIRE(run_a.reports.size() == 4);

  TempDir dir_b("split_run");
  auto params_b = model::init_params(config, 5);
  OptimizerState opt_b;
  auto phase_head = phase;
  phase_head.max_epochs = 2;
  auto run_head = run_phase(params_b, opt_b, train_set, val_set, config,
                            phase_head, dir_b.path, dir_b.file("metrics.jsonl"));
  REQUIRE(run_head.reports.size() == 2);

  auto snapshot = ckpt::load_checkpoint(dir_b.file("phase2_last.ckpt"));
  CHECK(snapshot.epoch == 2);
  REQUIRE(snapshot.optimizer.has_value());

  auto params_c = model::init_params(config, 99);
  ckpt::apply_checkpoint(snapshot, params_c, config);
  OptimizerState opt_c;
  opt_c.from_blob(*snapshot.optimizer, params_c);

  auto run_tail =
      run_phase(params_c, opt_c, train_set, val_set, config, phase, dir_b.path,
                dir_b.file("metrics.jsonl"), snapshot.epoch);
  REQUIRE(run_tail.reports.size() == 2);

  CHECK(reports_equal(run_tail.reports[0], run_a.reports[2]));
  CHECK(reports_equal(run_tail.reports[1], run_a.reports[3]));
  CHECK(params_equal(params_a, params_c));
  CHECK(read_file(dir_a.file("metrics.jsonl")) ==
        read_file(dir_b.file("metrics.jsonl")));
}

TEST_CASE("a non-finite loss aborts and keeps the last good checkpoint") {
  auto all = tiny_data(60, 13);
  std::vector<data::TreePair> train_set, val_set;
  split_pairs(all, 0.1, train_set, val_set);
  auto config = tiny_config(model::Mode::matching);
  auto phase = tiny_phase(2);
  phase.max_epochs = 1;

  TempDir dir("abort_run");
  auto params = model::init_params(config, 5);
  OptimizerState opt;
  auto head = run_phase(params, opt, train_set, val_set, config, phase,
                        dir.path, dir.file("metrics.jsonl"));
  REQUIRE(head.reports.size() == 1);

  // The readout bias feeds the embeddings directly, with no saturating
  // activation downstream that could swallow the NaN.
  params.named().back().second.value()[0] =
      std::numeric_limits<double>::quiet_NaN();
  auto tail_phase = phase;
  tail_phase.max_epochs = 2;
  auto tail = run_phase(params, opt, train_set, val_set, config, tail_phase,
                        dir.path, dir.file("metrics.jsonl"), 1);

  CHECK(tail.aborted);
  CHECK(tail.reports.empty());
  CHECK(tail.abort_reason.find("non-finite") != std::string::npos);

  auto kept = ckpt::load_checkpoint(dir.file("phase2_last.ckpt"));
  CHECK(kept.epoch == 1);
}

TEST_CASE("patience 999 never stops a bounded run") {
  auto all = tiny_data(40, 17);
  auto config = tiny_config(model::Mode::matching);
  auto phase = tiny_phase(2);
  phase.max_epochs = 6;
  phase.batch_size = 8;

  std::vector<data::TreePair> train_set, val_set;
  split_pairs(all, 0.1, train_set, val_set);
  auto params = model::init_params(config, 5);
  OptimizerState opt;
  auto run = run_phase(params, opt, train_set, val_set, config, phase, "", "");
  CHECK(run.reports.size() == 6);
}

TEST_CASE("evaluation agrees with the final epoch report") {
  auto all = tiny_data(50, 23);
  std::vector<data::TreePair> train_set, val_set;
  split_pairs(all, 0.1, train_set, val_set);
  auto config = tiny_config(model::Mode::matching);
  auto phase = tiny_phase(2);
  phase.max_epochs = 2;

  auto params = model::init_params(config, 5);
  OptimizerState opt;
  auto run = run_phase(params, opt, train_set, val_set, config, phase, "", "");
  REQUIRE(run.reports.size() == 2);

  auto eval = evaluate(train_set, params, config, phase);
  CHECK(std::abs(eval.accuracy - run.reports.back().train_accuracy) < 1e-9);
  CHECK(eval.confusion.total() == train_set.size());

  auto on_val = evaluate(val_set, params, config, phase);
  CHECK(std::abs(on_val.mean_loss - run.reports.back().val_loss) < 1e-9);
  CHECK(std::abs(on_val.accuracy - run.reports.back().val_accuracy) < 1e-9);

  CHECK_THROWS_AS(evaluate({}, params, config, phase), DegenerateError);
}

TEST_CASE("run_phase rejects impossible requests") {
  auto all = tiny_data(20, 29);
  auto config = tiny_config(model::Mode::matching);
  auto phase = tiny_phase(2);
  auto params = model::init_params(config, 5);
  OptimizerState opt;

  CHECK_THROWS_AS(run_phase(params, opt, {}, all, config, phase, "", ""),
                  DegenerateError);
  CHECK_THROWS_AS(
      run_phase(params, opt, all, {}, config, phase, "", "", phase.max_epochs),
      ConfigError);
}

TEST_CASE("epoch reports serialize compactly without wall time") {
  EpochReport r;
  r.phase = 2;
  r.epoch = 7;
  r.train_loss = 0.5;
  r.val_loss = 0.25;
  r.train_accuracy = 0.75;
  r.val_accuracy = 0.5;
  r.embedding_norm_std = 0.125;
  r.skipped_anchors = 3;
  r.wall_time_s = 123.0;

  auto line = report_line(r);
  auto j = nlohmann::json::parse(line);
  CHECK(j.size() == 8);
  CHECK(j["phase"] == 2);
  CHECK(j["epoch"] == 7);
  CHECK(j["train_loss"] == 0.5);
  CHECK(j["skipped_anchors"] == 3);
  CHECK(line.find("wall") == std::string::npos);
}
