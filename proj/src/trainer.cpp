// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#include "tmn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <utility>

#include <nlohmann/json.hpp>

#include "tmn/error.hpp"
#include "tmn/ops.hpp"

namespace tmn::train {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t epoch_stream(std::uint64_t seed, std::uint32_t phase,
                           std::size_t epoch) {
  std::uint64_t s = splitmix64(seed);
  s = splitmix64(s ^ (0x100000001B3ULL * phase));
  s = splitmix64(s ^ (0xCBF29CE484222325ULL + epoch));
  return s;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

double population_std(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return std::sqrt(var / n);
}

void append_row_norms(const ad::Tensor& embeddings, std::vector<double>& out) {
  const std::size_t rows = embeddings.rows();
  const std::size_t cols = embeddings.cols();
  const auto& value = embeddings.value();
  for (std::size_t r = 0; r < rows; ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double x = value[r * cols + c];
      sq += x * x;
    }
    out.push_back(std::sqrt(sq));
  }
}

std::vector<std::size_t> identity_perm(std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  return perm;
}

}  // namespace

void PhaseConfig::validate() const {
  if (phase < 1 || phase > 3) throw ConfigError("phase must be 1, 2, or 3");
  if (phase != 3 && batch_size < 2)
    throw ConfigError("in-batch negatives need a batch of at least 2 pairs");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(learning_rate > 0.0))
    throw ConfigError("learning rate must be positive");
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (max_batches_per_epoch == 0)
    throw ConfigError("max_batches_per_epoch must be positive");
  loss.validate();
}

PhaseConfig PhaseConfig::desk(std::uint32_t phase) {
  PhaseConfig c;
  c.phase = phase;
  c.batch_size = 32;
  c.max_batches_per_epoch = 20;
  c.learning_rate = phase == 3 ? 5e-4 : 1e-3;
  c.max_epochs = phase == 1 ? 10 : 12;
  c.patience = 999;
  return c;
}

PhaseConfig PhaseConfig::paper(std::uint32_t phase) {
  PhaseConfig c;
  c.phase = phase;
  c.batch_size = 256;
  c.max_batches_per_epoch = 600;
  c.learning_rate = phase == 3 ? 5e-7 : 1e-6;
  c.max_epochs = phase == 1 ? 50 : 100;
  c.patience = 999;
  return c;
}

void OptimizerState::init(const NamedTensors& named) {
  m.clear();
  v.clear();
  step = 0;
  for (const auto& [name, tensor] : named) {
    (void)name;
    m.emplace_back(tensor.numel(), 0.0);
    v.emplace_back(tensor.numel(), 0.0);
  }
}

void OptimizerState::init(const model::ModelParams& params) {
  init(params.named());
}

ckpt::OptimizerBlob OptimizerState::to_blob() const {
  ckpt::OptimizerBlob blob;
  blob.beta1 = beta1;
  blob.beta2 = beta2;
  blob.eps = eps;
  blob.step = step;
  for (const auto& chunk : m) blob.m.insert(blob.m.end(), chunk.begin(), chunk.end());
  for (const auto& chunk : v) blob.v.insert(blob.v.end(), chunk.begin(), chunk.end());
  return blob;
}

void OptimizerState::from_blob(const ckpt::OptimizerBlob& blob,
                               const model::ModelParams& params) {
  init(params);
  beta1 = blob.beta1;
  beta2 = blob.beta2;
  eps = blob.eps;
  step = blob.step;
  std::size_t total = 0;
  for (const auto& chunk : m) total += chunk.size();
  if (blob.m.size() != total || blob.v.size() != total)
    throw ContractError("optimizer snapshot does not match the parameter list");
  std::size_t at = 0;
  for (std::size_t p = 0; p < m.size(); ++p) {
    std::copy_n(blob.m.begin() + static_cast<std::ptrdiff_t>(at), m[p].size(),
                m[p].begin());
    std::copy_n(blob.v.begin() + static_cast<std::ptrdiff_t>(at), v[p].size(),
                v[p].begin());
    at += m[p].size();
  }
}

void adam_step(const NamedTensors& named, OptimizerState& state, double lr) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!state.initialized()) state.init(named);
  if (state.m.size() != named.size())
    throw ContractError("optimizer state does not match the parameter list");
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t p = 0; p < named.size(); ++p) {
    ad::Tensor tensor = named[p].second;
    auto& value = tensor.value();
    if (state.m[p].size() != value.size())
      throw ContractError("optimizer state does not match " + named[p].first);
    const std::vector<double>* grad = nullptr;
    if (tensor.has_grad()) grad = &std::as_const(tensor).grad();
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double g = grad ? (*grad)[k] : 0.0;
      if (!std::isfinite(g))
        throw NumericError("non-finite gradient in " + named[p].first);
      state.m[p][k] = state.beta1 * state.m[p][k] + (1.0 - state.beta1) * g;
      state.v[p][k] = state.beta2 * state.v[p][k] + (1.0 - state.beta2) * g * g;
      const double mhat = state.m[p][k] / bc1;
      const double vhat = state.v[p][k] / bc2;
      value[k] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

void adam_step(model::ModelParams& params, OptimizerState& state, double lr) {
  adam_step(params.named(), state, lr);
}

std::vector<std::size_t> randomized_pairing(std::size_t num_pairs,
                                            std::mt19937_64& rng) {
  auto perm = identity_perm(num_pairs);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

void split_pairs(const std::vector<data::TreePair>& all, double val_fraction,
                 std::vector<data::TreePair>& train_out,
                 std::vector<data::TreePair>& val_out) {
  if (!(val_fraction >= 0.0) || !(val_fraction < 1.0))
    throw ConfigError("validation fraction must lie in [0, 1)");
  train_out.clear();
  val_out.clear();
  const auto cut =
      static_cast<std::uint64_t>(std::llround(val_fraction * 1000.0));
  for (std::size_t i = 0; i < all.size(); ++i) {
    const std::string key =
        all[i].pair_id.empty() ? std::to_string(i) : all[i].pair_id;
    if (fnv1a(key) % 1000 < cut)
      val_out.push_back(all[i]);
    else
      train_out.push_back(all[i]);
  }
}

objectives::NceResult phase_loss(const ad::Tensor& embeddings,
                                 const data::GraphBatch& batch,
                                 const PhaseConfig& config) {
  switch (config.phase) {
    case 1:
      return objectives::infonce(embeddings, objectives::entailment_relations(batch),
                                 config.loss.tau);
    case 2:
      return objectives::multi_objective_loss(embeddings, batch, config.loss);
    case 3: {
      ad::Tensor sims = objectives::pair_cosines(embeddings, batch);
      objectives::NceResult result;
      result.loss = objectives::soft_cross_entropy(sims, batch.labels,
                                                   config.loss.beta);
      result.used = batch.num_pairs();
      result.skipped = 0;
      return result;
    }
    default:
      throw ConfigError("phase must be 1, 2, or 3");
  }
}

BatchOutcome train_on_batch(model::ModelParams& params, OptimizerState& opt,
                            const std::vector<data::TreePair>& batch,
                            const model::ModelConfig& mconfig,
                            const PhaseConfig& pconfig, std::mt19937_64& rng) {
  const bool shuffle_partners =
      pconfig.phase == 1 && mconfig.mode == model::Mode::matching;
  if (shuffle_partners && batch.size() < 2)
    throw DegenerateError(
        "randomized pairing needs at least 2 pairs in a batch");

  data::GraphBatch packed =
      shuffle_partners
          ? data::batch_pairs(batch, randomized_pairing(batch.size(), rng))
          : data::batch_pairs(batch);

  for (auto& [name, tensor] : params.named()) {
    (void)name;
    tensor.zero_grad();
  }

  ad::Tape tape;
  BatchOutcome outcome;
  {
    ad::TapeScope scope(tape);
    outcome.embeddings = model::forward_pair(packed, params, mconfig);
    if (!outcome.embeddings.all_finite())
      throw NumericError("non-finite embeddings in phase " +
                         std::to_string(pconfig.phase));
    objectives::NceResult result = phase_loss(outcome.embeddings, packed, pconfig);
    outcome.loss = result.loss.item();
    outcome.skipped_anchors = result.skipped;
    if (!std::isfinite(outcome.loss))
      throw NumericError("non-finite loss in phase " +
                         std::to_string(pconfig.phase));
    ad::backward(result.loss, tape);
  }
  adam_step(params, opt, pconfig.learning_rate);
  return outcome;
}

std::string report_line(const EpochReport& report) {
  nlohmann::ordered_json j;
  j["phase"] = report.phase;
  j["epoch"] = report.epoch;
  j["train_loss"] = report.train_loss;
  j["val_loss"] = report.val_loss;
  j["train_accuracy"] = report.train_accuracy;
  j["val_accuracy"] = report.val_accuracy;
  j["embedding_norm_std"] = report.embedding_norm_std;
  j["skipped_anchors"] = report.skipped_anchors;
  return j.dump();
}

Evaluation evaluate(const std::vector<data::TreePair>& pairs,
                    const model::ModelParams& params,
                    const model::ModelConfig& mconfig,
                    const PhaseConfig& pconfig, double lo, double hi) {
  if (pairs.empty()) throw DegenerateError("nothing to evaluate");
  ad::NoGradScope frozen;

  Evaluation eval;
  std::vector<int> truth;
  std::vector<int> predicted;
  std::vector<double> norms;
  double loss_sum = 0.0;
  std::size_t loss_batches = 0;

  for (std::size_t at = 0; at < pairs.size(); at += pconfig.batch_size) {
    const std::size_t take = std::min(pconfig.batch_size, pairs.size() - at);
    std::vector<data::TreePair> chunk(pairs.begin() + static_cast<std::ptrdiff_t>(at),
                                      pairs.begin() + static_cast<std::ptrdiff_t>(at + take));
    data::GraphBatch packed = data::batch_pairs(chunk);
    ad::Tensor embeddings = model::forward_pair(packed, params, mconfig);
    append_row_norms(embeddings, norms);

    try {
      objectives::NceResult result = phase_loss(embeddings, packed, pconfig);
      loss_sum += result.loss.item();
      loss_batches += 1;
      eval.skipped_anchors += result.skipped;
    } catch (const EmptyLossError&) {
      // A batch can lack the relations its objective needs (for example no
      // entailment pair in phase 1); it still counts toward classification.
    }

    ad::Tensor sims = objectives::pair_cosines(embeddings, packed);
    const auto& s = sims.value();
    for (std::size_t p = 0; p < packed.num_pairs(); ++p) {
      truth.push_back(packed.labels[p]);
      predicted.push_back(objectives::threshold_classify(s[p], lo, hi));
    }
  }

  eval.mean_loss = loss_batches > 0 ? loss_sum / static_cast<double>(loss_batches) : 0.0;
  eval.confusion = metrics::confusion(truth, predicted);
  eval.report = metrics::per_class_metrics(eval.confusion);
  eval.accuracy = eval.report.accuracy;
  eval.embedding_norm_std = norms.size() >= 2 ? population_std(norms) : 0.0;
  return eval;
}

RunResult run_phase(model::ModelParams& params, OptimizerState& opt,
                    const std::vector<data::TreePair>& train_pairs,
                    const std::vector<data::TreePair>& val_pairs,
                    const model::ModelConfig& mconfig,
                    const PhaseConfig& pconfig,
                    const std::string& checkpoint_dir,
                    const std::string& metrics_log_path,
                    std::size_t start_epoch) {
  mconfig.validate();
  pconfig.validate();
  if (train_pairs.empty()) throw DegenerateError("no training pairs");
  if (start_epoch >= pconfig.max_epochs)
    throw ConfigError("start_epoch leaves no epochs to run");
  if (!opt.initialized()) opt.init(params);

  if (!checkpoint_dir.empty())
    std::filesystem::create_directories(checkpoint_dir);

  std::ofstream log;
  if (!metrics_log_path.empty()) {
    log.open(metrics_log_path,
             start_epoch == 0 ? std::ios::trunc : std::ios::app);
    if (!log) throw IoError("cannot open metrics log " + metrics_log_path);
  }

  RunResult result;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t stale_epochs = 0;

  for (std::size_t epoch = start_epoch + 1; epoch <= pconfig.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(epoch_stream(pconfig.seed, pconfig.phase, epoch));

    auto order = identity_perm(train_pairs.size());
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    std::size_t skipped = 0;
    ad::Tensor last_embeddings;

    std::size_t at = 0;
    while (at < order.size() && batches < pconfig.max_batches_per_epoch) {
      const std::size_t take = std::min(pconfig.batch_size, order.size() - at);
      if (take < 2 && pconfig.batch_size >= 2) break;  // unusable tail
      std::vector<data::TreePair> chunk;
      chunk.reserve(take);
      for (std::size_t k = 0; k < take; ++k)
        chunk.push_back(train_pairs[order[at + k]]);
      at += take;

      try {
        BatchOutcome outcome =
            train_on_batch(params, opt, chunk, mconfig, pconfig, rng);
        loss_sum += outcome.loss;
        skipped += outcome.skipped_anchors;
        last_embeddings = outcome.embeddings;
      } catch (const NumericError& e) {
        result.aborted = true;
        result.abort_reason = e.what();
        return result;
      }
      batches += 1;
    }

    EpochReport report;
    report.phase = pconfig.phase;
    report.epoch = epoch;
    report.train_loss = batches > 0 ? loss_sum / static_cast<double>(batches) : 0.0;
    report.skipped_anchors = skipped;
    if (last_embeddings.valid() && last_embeddings.rows() >= 2)
      report.embedding_norm_std = metrics::embedding_norm_std(last_embeddings);

    Evaluation on_train = evaluate(train_pairs, params, mconfig, pconfig);
    report.train_accuracy = on_train.accuracy;
    if (!val_pairs.empty()) {
      Evaluation on_val = evaluate(val_pairs, params, mconfig, pconfig);
      report.val_loss = on_val.mean_loss;
      report.val_accuracy = on_val.accuracy;
    }

    if (!checkpoint_dir.empty()) {
      const ckpt::OptimizerBlob blob = opt.to_blob();
      char name[64];
      std::snprintf(name, sizeof(name), "phase%u_epoch%zu.ckpt", pconfig.phase,
                    epoch);
      const std::string base = checkpoint_dir + "/";
      ckpt::save_checkpoint(base + name, params, mconfig, pconfig.seed,
                            pconfig.phase, epoch, &blob);
      ckpt::save_checkpoint(base + "phase" + std::to_string(pconfig.phase) +
                                "_last.ckpt",
                            params, mconfig, pconfig.seed, pconfig.phase,
                            epoch, &blob);
    }

    report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (log.is_open()) log << report_line(report) << "\n" << std::flush;
    result.reports.push_back(report);

    const double tracked = val_pairs.empty() ? report.train_loss : report.val_loss;
    if (tracked < best_val) {
      best_val = tracked;
      stale_epochs = 0;
    } else {
      stale_epochs += 1;
      if (stale_epochs > pconfig.patience) break;
    }
  }
  return result;
}

}  // namespace tmn::train
