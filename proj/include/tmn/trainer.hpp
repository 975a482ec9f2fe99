// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tmn/checkpoint.hpp"
#include "tmn/metrics.hpp"
#include "tmn/model.hpp"
#include "tmn/objectives.hpp"
#include "tmn/tree.hpp"

namespace tmn::train {

struct PhaseConfig {
  std::uint32_t phase = 1;  // 1 contrastive, 2 multi-objective, 3 fine-tune
  std::size_t batch_size = 32;
  std::size_t max_batches_per_epoch = 20;
  double learning_rate = 1e-3;
  std::size_t max_epochs = 10;
  std::size_t patience = 999;
  std::uint64_t seed = 1;
  objectives::LossConfig loss;

  void validate() const;

  static PhaseConfig desk(std::uint32_t phase);
  static PhaseConfig paper(std::uint32_t phase);
};

using NamedTensors = std::vector<std::pair<std::string, ad::Tensor>>;

struct OptimizerState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;  // named() order
  std::vector<std::vector<double>> v;

  void init(const NamedTensors& named);
  void init(const model::ModelParams& params);
  bool initialized() const { return !m.empty(); }

  ckpt::OptimizerBlob to_blob() const;
  void from_blob(const ckpt::OptimizerBlob& blob, const model::ModelParams& params);
};

/// One bias-corrected Adam update from the gradients currently held by the
/// tensors. Tensors that never received a gradient count as zero.
/// A non-finite gradient aborts the step, naming the parameter.
void adam_step(const NamedTensors& named, OptimizerState& state, double lr);
void adam_step(model::ModelParams& params, OptimizerState& state, double lr);

/// Seeded partner permutation over the pairs of one batch.
std::vector<std::size_t> randomized_pairing(std::size_t num_pairs,
                                            std::mt19937_64& rng);

/// Deterministic 90/10-style split on a stable hash of pair_id (falls back
/// to the pair's position for empty ids).
void split_pairs(const std::vector<data::TreePair>& all, double val_fraction,
                 std::vector<data::TreePair>& train_out,
                 std::vector<data::TreePair>& val_out);

/// The objective for one phase: entailment-anchored contrastive loss (1),
/// weighted per-class contrastive terms (2), soft-logit cross entropy (3).
objectives::NceResult phase_loss(const ad::Tensor& embeddings,
                                 const data::GraphBatch& batch,
                                 const PhaseConfig& config);

struct BatchOutcome {
  double loss = 0.0;
  std::size_t skipped_anchors = 0;
  ad::Tensor embeddings;
};

/// Forward, loss, backward, Adam on one batch. Phase 1 in matching mode
/// shuffles forward-pass partners with rng and refuses single-pair batches.
BatchOutcome train_on_batch(model::ModelParams& params, OptimizerState& opt,
                            const std::vector<data::TreePair>& batch,
                            const model::ModelConfig& mconfig,
                            const PhaseConfig& pconfig, std::mt19937_64& rng);

struct EpochReport {
  std::uint32_t phase = 0;
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double embedding_norm_std = 0.0;  // final train batch of the epoch
  std::size_t skipped_anchors = 0;
  double wall_time_s = 0.0;  // diagnostic only, never logged
};

/// The serialized form of a report: one compact JSON object per line,
/// wall time omitted so identical runs write identical logs.
std::string report_line(const EpochReport& report);

struct Evaluation {
  double mean_loss = 0.0;  // over batches that produced a loss
  double accuracy = 0.0;
  metrics::Confusion confusion;
  metrics::MetricsReport report;
  double embedding_norm_std = 0.0;  // over all evaluated embeddings
  std::size_t skipped_anchors = 0;
};

/// Deterministic batched evaluation with identity pairing: phase loss,
/// banded classification of pair cosines, full metric report.
Evaluation evaluate(const std::vector<data::TreePair>& pairs,
                    const model::ModelParams& params,
                    const model::ModelConfig& mconfig,
                    const PhaseConfig& pconfig, double lo = -0.33,
                    double hi = 0.33);

struct RunResult {
  std::vector<EpochReport> reports;
  bool aborted = false;
  std::string abort_reason;
};

/// Runs epochs start_epoch+1 .. max_epochs: shuffle, visit each pair at
/// most once in batches (a trailing batch of one pair is dropped), train,
/// then evaluate both splits. Each epoch appends one line to the metrics
/// log and writes phase{p}_epoch{e}.ckpt plus phase{p}_last.ckpt. The
/// per-epoch schedule is seeded by (seed, phase, epoch) alone, so a resumed
/// run replays exactly. A non-finite loss or gradient stops the run before
/// the epoch checkpoint, keeping the last good one.
RunResult run_phase(model::ModelParams& params, OptimizerState& opt,
                    const std::vector<data::TreePair>& train_pairs,
                    const std::vector<data::TreePair>& val_pairs,
                    const model::ModelConfig& mconfig,
                    const PhaseConfig& pconfig,
                    const std::string& checkpoint_dir,
                    const std::string& metrics_log_path,
                    std::size_t start_epoch = 0);

}  // namespace tmn::train
