// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "tmn/checkpoint.hpp"
#include "tmn/error.hpp"
#include "tmn/io.hpp"
#include "tmn/metrics.hpp"
#include "tmn/model.hpp"
#include "tmn/objectives.hpp"
#include "tmn/synth.hpp"
#include "tmn/tensor.hpp"
#include "tmn/trainer.hpp"
#include "tmn/tree.hpp"

namespace py = pybind11;
using namespace tmn;

namespace {

using CArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::array_t<double> matrix_to_array(const data::FeatureMatrix& m) {
  py::array_t<double> out({m.rows, m.cols});
  if (!m.data.empty())
    std::memcpy(out.mutable_data(), m.data.data(),
                m.data.size() * sizeof(double));
  return out;
}

data::FeatureMatrix array_to_matrix(const CArray& a) {
  if (a.ndim() != 2) throw DimensionError("feature matrix must be 2-d");
  data::FeatureMatrix m(static_cast<std::size_t>(a.shape(0)),
                        static_cast<std::size_t>(a.shape(1)));
  if (!m.data.empty())
    std::memcpy(m.data.data(), a.data(), m.data.size() * sizeof(double));
  return m;
}

py::array_t<double> tensor_to_array(const ad::Tensor& t) {
  py::array_t<double> out(t.shape());
  if (t.numel() > 0)
    std::memcpy(out.mutable_data(), t.value().data(),
                t.numel() * sizeof(double));
  return out;
}

ad::Tensor array_to_tensor(const CArray& a) {
  std::vector<std::size_t> shape(a.ndim());
  for (py::ssize_t i = 0; i < a.ndim(); ++i)
    shape[i] = static_cast<std::size_t>(a.shape(i));
  std::vector<double> values(a.data(), a.data() + a.size());
  return ad::Tensor::from(std::move(values), std::move(shape));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Tree matching and embedding networks over dependency parses";
  m.attr("__version__") = "0.1.0";
  m.attr("SCHEMA_VERSION") = data::kSchemaVersion;
  m.attr("CONTRADICTION") = data::kContradiction;
  m.attr("NEUTRAL") = data::kNeutral;
  m.attr("ENTAILMENT") = data::kEntailment;

  py::register_exception<tmn::Error>(m, "Error");

  // data ---------------------------------------------------------------

  py::class_<data::DepTree>(m, "DepTree")
      .def(py::init<>())
      .def(py::init([](const CArray& node_features,
                       std::vector<std::pair<std::size_t, std::size_t>> edges,
                       const CArray& edge_features, std::size_t root,
                       std::string text) {
             data::DepTree t;
             t.node_features = array_to_matrix(node_features);
             t.edges = std::move(edges);
             t.edge_features = array_to_matrix(edge_features);
             t.root = root;
             t.text = std::move(text);
             return t;
           }),
           py::arg("node_features"), py::arg("edges"),
           py::arg("edge_features"), py::arg("root") = 0,
           py::arg("text") = "")
      .def_property(
          "node_features",
          [](const data::DepTree& t) { return matrix_to_array(t.node_features); },
          [](data::DepTree& t, const CArray& a) {
            t.node_features = array_to_matrix(a);
          })
      .def_property(
          "edge_features",
          [](const data::DepTree& t) { return matrix_to_array(t.edge_features); },
          [](data::DepTree& t, const CArray& a) {
            t.edge_features = array_to_matrix(a);
          })
      .def_readwrite("edges", &data::DepTree::edges)
      .def_readwrite("root", &data::DepTree::root)
      .def_readwrite("text", &data::DepTree::text)
      .def("num_nodes", &data::DepTree::num_nodes)
      .def("__repr__", [](const data::DepTree& t) {
        return "DepTree(" + std::to_string(t.num_nodes()) + " nodes, " +
               std::to_string(t.edges.size()) + " edges)";
      });

  py::class_<data::TreePair>(m, "TreePair")
      .def(py::init<>())
      .def(py::init([](data::DepTree a, data::DepTree b, int label,
                       std::string pair_id) {
             data::TreePair p;
             p.tree_a = std::move(a);
             p.tree_b = std::move(b);
             p.label = label;
             p.pair_id = std::move(pair_id);
             return p;
           }),
           py::arg("tree_a"), py::arg("tree_b"),
           py::arg("label") = data::kNeutral, py::arg("pair_id") = "")
      .def_readwrite("tree_a", &data::TreePair::tree_a)
      .def_readwrite("tree_b", &data::TreePair::tree_b)
      .def_readwrite("label", &data::TreePair::label)
      .def_readwrite("pair_id", &data::TreePair::pair_id);

  py::enum_<data::Side>(m, "Side")
      .value("A", data::Side::A)
      .value("B", data::Side::B);

  py::class_<data::GraphBatch>(m, "GraphBatch")
      .def("num_nodes", &data::GraphBatch::num_nodes)
      .def("num_edges", &data::GraphBatch::num_edges)
      .def("num_graphs", &data::GraphBatch::num_graphs)
      .def("num_pairs", &data::GraphBatch::num_pairs)
      .def("graph_of", &data::GraphBatch::graph_of, py::arg("pair"),
           py::arg("side"))
      .def_readonly("labels", &data::GraphBatch::labels);

  m.def("batch_pairs",
        [](const std::vector<data::TreePair>& pairs) {
          return data::batch_pairs(pairs);
        },
        py::arg("pairs"));
  m.def("batch_pairs",
        [](const std::vector<data::TreePair>& pairs,
           const std::vector<std::size_t>& partner_perm) {
          return data::batch_pairs(pairs, partner_perm);
        },
        py::arg("pairs"), py::arg("partner_perm"));
  m.def("unbatch", &data::unbatch, py::arg("batch"));
  m.def("validate_tree", &data::validate_tree, py::arg("tree"),
        py::arg("strictness"));
  m.def("synth_task", &data::synth_task, py::arg("seed"), py::arg("n_pairs"),
        py::arg("node_dim"), py::arg("edge_dim"), py::arg("max_nodes"));
  m.def("load_pairs", &data::load_pairs, py::arg("path"),
        py::arg("strictness") = 3);
  m.def("save_pairs", &data::save_pairs, py::arg("path"), py::arg("pairs"));

  // model ----------------------------------------------------------------

  py::enum_<model::Mode>(m, "Mode")
      .value("matching", model::Mode::matching)
      .value("embedding", model::Mode::embedding);

  py::enum_<model::Similarity>(m, "Similarity")
      .value("dot", model::Similarity::dot)
      .value("scaled_dot", model::Similarity::scaled_dot);

  py::class_<model::ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("node_feature_dim", &model::ModelConfig::node_feature_dim)
      .def_readwrite("edge_feature_dim", &model::ModelConfig::edge_feature_dim)
      .def_readwrite("node_state_dim", &model::ModelConfig::node_state_dim)
      .def_readwrite("edge_state_dim", &model::ModelConfig::edge_state_dim)
      .def_readwrite("prop_layers", &model::ModelConfig::prop_layers)
      .def_readwrite("graph_rep_dim", &model::ModelConfig::graph_rep_dim)
      .def_readwrite("mode", &model::ModelConfig::mode)
      .def_readwrite("mlp_hidden_layers", &model::ModelConfig::mlp_hidden_layers)
      .def_readwrite("similarity", &model::ModelConfig::similarity)
      .def("validate", &model::ModelConfig::validate)
      .def("__eq__",
           [](const model::ModelConfig& a, const model::ModelConfig& b) {
             return a == b;
           })
      .def_static("desk", &model::ModelConfig::desk,
                  py::arg("mode") = model::Mode::matching)
      .def_static("paper", &model::ModelConfig::paper,
                  py::arg("mode") = model::Mode::matching);

  py::class_<model::ModelParams>(m, "ModelParams")
      .def(py::init<>())
      .def("state_dict",
           [](const model::ModelParams& p) {
             py::dict out;
             for (const auto& [name, tensor] : p.named())
               out[py::str(name)] = tensor_to_array(tensor);
             return out;
           })
      .def("__repr__", [](const model::ModelParams& p) {
        return "ModelParams(" + std::to_string(model::count_parameters(p)) +
               " parameters)";
      });

  m.def("init_params", &model::init_params, py::arg("config"), py::arg("seed"));
  m.def("count_parameters", &model::count_parameters, py::arg("params"));

  m.def("forward_pair",
        [](const data::GraphBatch& batch, const model::ModelParams& params,
           const model::ModelConfig& config) {
          return tensor_to_array(model::forward_pair(batch, params, config));
        },
        py::arg("batch"), py::arg("params"), py::arg("config"));

  m.def("pair_similarities",
        [](const data::GraphBatch& batch, const model::ModelParams& params,
           const model::ModelConfig& config) {
          ad::Tensor emb = model::forward_pair(batch, params, config);
          return tensor_to_array(objectives::pair_cosines(emb, batch));
        },
        py::arg("batch"), py::arg("params"), py::arg("config"));

  // objectives -------------------------------------------------------------

  py::class_<objectives::LossConfig>(m, "LossConfig")
      .def(py::init<>())
      .def_readwrite("tau", &objectives::LossConfig::tau)
      .def_readwrite("beta", &objectives::LossConfig::beta)
      .def_readwrite("w_entail", &objectives::LossConfig::w_entail)
      .def_readwrite("w_contra", &objectives::LossConfig::w_contra)
      .def_readwrite("w_neutral", &objectives::LossConfig::w_neutral)
      .def("validate", &objectives::LossConfig::validate)
      .def_static("snli3", &objectives::LossConfig::snli3)
      .def_static("semeval2", &objectives::LossConfig::semeval2);

  m.def("cosine",
        [](const std::vector<double>& a, const std::vector<double>& b) {
          return objectives::cosine(a, b);
        },
        py::arg("a"), py::arg("b"));

  m.def("infonce_value",
        [](const CArray& embeddings, const data::GraphBatch& batch, double tau) {
          ad::Tensor emb = array_to_tensor(embeddings);
          auto rel = objectives::entailment_relations(batch);
          auto r = objectives::infonce(emb, rel, tau);
          return py::make_tuple(r.loss.item(), r.used, r.skipped);
        },
        py::arg("embeddings"), py::arg("batch"), py::arg("tau") = 0.05);

  m.def("multi_objective_value",
        [](const CArray& embeddings, const data::GraphBatch& batch,
           const objectives::LossConfig& config) {
          ad::Tensor emb = array_to_tensor(embeddings);
          auto r = objectives::multi_objective_loss(emb, batch, config);
          return py::make_tuple(r.loss.item(), r.used, r.skipped);
        },
        py::arg("embeddings"), py::arg("batch"),
        py::arg("config") = objectives::LossConfig());

  m.def("soft_cross_entropy_value",
        [](const std::vector<double>& similarities,
           const std::vector<int>& labels, double beta) {
          ad::Tensor s = ad::Tensor::from(similarities, {similarities.size()});
          return objectives::soft_cross_entropy(s, labels, beta).item();
        },
        py::arg("similarities"), py::arg("labels"), py::arg("beta") = 10.0);

  m.def("threshold_classify", &objectives::threshold_classify, py::arg("s"),
        py::arg("lo") = -0.33, py::arg("hi") = 0.33);
  m.def("soft_logits",
        [](double s, double beta) {
          auto l = objectives::soft_logits(s, beta);
          return py::make_tuple(l.contradiction, l.neutral, l.entailment);
        },
        py::arg("s"), py::arg("beta") = 10.0);
  m.def("soft_classify", &objectives::soft_classify, py::arg("s"),
        py::arg("beta") = 10.0);

  // metrics ----------------------------------------------------------------

  py::class_<metrics::Confusion>(m, "Confusion")
      .def(py::init<>())
      .def(py::init([](const std::vector<std::vector<std::size_t>>& counts) {
             if (counts.size() != 3) throw DimensionError("expected 3 rows");
             metrics::Confusion c;
             for (std::size_t i = 0; i < 3; ++i) {
               if (counts[i].size() != 3)
                 throw DimensionError("expected 3 columns");
               for (std::size_t j = 0; j < 3; ++j)
                 c.counts[i][j] = counts[i][j];
             }
             return c;
           }),
           py::arg("counts"))
      .def_property_readonly("counts",
                             [](const metrics::Confusion& c) {
                               std::vector<std::vector<std::size_t>> out(3);
                               for (std::size_t i = 0; i < 3; ++i)
                                 out[i] = {c.counts[i][0], c.counts[i][1],
                                           c.counts[i][2]};
                               return out;
                             })
      .def("add", &metrics::Confusion::add, py::arg("true_label"),
           py::arg("predicted_label"))
      .def("total", &metrics::Confusion::total)
      .def_static("index_of", &metrics::Confusion::index_of, py::arg("label"));

  m.def("confusion", &metrics::confusion, py::arg("truth"),
        py::arg("predicted"));

  py::class_<metrics::ClassMetrics>(m, "ClassMetrics")
      .def_readonly("precision", &metrics::ClassMetrics::precision)
      .def_readonly("recall", &metrics::ClassMetrics::recall)
      .def_readonly("f1", &metrics::ClassMetrics::f1)
      .def_readonly("degenerate", &metrics::ClassMetrics::degenerate);

  py::class_<metrics::MetricsReport>(m, "MetricsReport")
      .def_readonly("accuracy", &metrics::MetricsReport::accuracy)
      .def_property_readonly("per_class",
                             [](const metrics::MetricsReport& r) {
                               return std::vector<metrics::ClassMetrics>(
                                   r.per_class.begin(), r.per_class.end());
                             });

  m.def("per_class_metrics", &metrics::per_class_metrics, py::arg("confusion"));
  m.def("embedding_norm_std",
        [](const CArray& embeddings) {
          return metrics::embedding_norm_std(array_to_tensor(embeddings));
        },
        py::arg("embeddings"));

  // training -----------------------------------------------------------

  py::class_<train::PhaseConfig>(m, "PhaseConfig")
      .def(py::init<>())
      .def_readwrite("phase", &train::PhaseConfig::phase)
      .def_readwrite("batch_size", &train::PhaseConfig::batch_size)
      .def_readwrite("max_batches_per_epoch",
                     &train::PhaseConfig::max_batches_per_epoch)
      .def_readwrite("learning_rate", &train::PhaseConfig::learning_rate)
      .def_readwrite("max_epochs", &train::PhaseConfig::max_epochs)
      .def_readwrite("patience", &train::PhaseConfig::patience)
      .def_readwrite("seed", &train::PhaseConfig::seed)
      .def_readwrite("loss", &train::PhaseConfig::loss)
      .def("validate", &train::PhaseConfig::validate)
      .def_static("desk", &train::PhaseConfig::desk, py::arg("phase"))
      .def_static("paper", &train::PhaseConfig::paper, py::arg("phase"));

  py::class_<train::OptimizerState>(m, "OptimizerState")
      .def(py::init<>())
      .def_readonly("step", &train::OptimizerState::step)
      .def("initialized", &train::OptimizerState::initialized);

  py::class_<train::EpochReport>(m, "EpochReport")
      .def_readonly("phase", &train::EpochReport::phase)
      .def_readonly("epoch", &train::EpochReport::epoch)
      .def_readonly("train_loss", &train::EpochReport::train_loss)
      .def_readonly("val_loss", &train::EpochReport::val_loss)
      .def_readonly("train_accuracy", &train::EpochReport::train_accuracy)
      .def_readonly("val_accuracy", &train::EpochReport::val_accuracy)
      .def_readonly("embedding_norm_std",
                    &train::EpochReport::embedding_norm_std)
      .def_readonly("skipped_anchors", &train::EpochReport::skipped_anchors);

  py::class_<train::RunResult>(m, "RunResult")
      .def_readonly("reports", &train::RunResult::reports)
      .def_readonly("aborted", &train::RunResult::aborted)
      .def_readonly("abort_reason", &train::RunResult::abort_reason);

  py::class_<train::Evaluation>(m, "Evaluation")
      .def_readonly("mean_loss", &train::Evaluation::mean_loss)
      .def_readonly("accuracy", &train::Evaluation::accuracy)
      .def_readonly("confusion", &train::Evaluation::confusion)
      .def_readonly("report", &train::Evaluation::report)
      .def_readonly("embedding_norm_std", &train::Evaluation::embedding_norm_std)
      .def_readonly("skipped_anchors", &train::Evaluation::skipped_anchors);

  m.def("split_pairs",
        [](const std::vector<data::TreePair>& all, double val_fraction) {
          std::vector<data::TreePair> train_out, val_out;
          train::split_pairs(all, val_fraction, train_out, val_out);
          return py::make_tuple(std::move(train_out), std::move(val_out));
        },
        py::arg("pairs"), py::arg("val_fraction") = 0.1);

  m.def("run_phase", &train::run_phase, py::arg("params"), py::arg("opt"),
        py::arg("train_pairs"), py::arg("val_pairs"), py::arg("model_config"),
        py::arg("phase_config"), py::arg("checkpoint_dir"),
        py::arg("metrics_log_path"), py::arg("start_epoch") = 0);

  m.def("evaluate", &train::evaluate, py::arg("pairs"), py::arg("params"),
        py::arg("model_config"), py::arg("phase_config"),
        py::arg("lo") = -0.33, py::arg("hi") = 0.33);

  // checkpoints ----------------------------------------------------------

  m.def("save_checkpoint",
        [](const std::string& path, const model::ModelParams& params,
           const model::ModelConfig& config, std::uint64_t seed,
           std::uint32_t phase, std::uint64_t epoch) {
          ckpt::save_checkpoint(path, params, config, seed, phase, epoch);
        },
        py::arg("path"), py::arg("params"), py::arg("config"), py::arg("seed"),
        py::arg("phase"), py::arg("epoch"));

  m.def("load_params",
        [](const std::string& path) {
          auto snapshot = ckpt::load_checkpoint(path);
          auto params = model::init_params(snapshot.config, snapshot.seed);
          ckpt::apply_checkpoint(snapshot, params, snapshot.config);
          return py::make_tuple(std::move(params), snapshot.config,
                                snapshot.phase, snapshot.epoch);
        },
        py::arg("path"));
}
