#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <iostream>
#include <sstream>

#include "bm3/checkpoint.hpp"
#include "bm3/cli.hpp"
#include "bm3/data.hpp"
#include "bm3/fmat.hpp"
#include "bm3/graph.hpp"
#include "bm3/nn.hpp"
#include "bm3/trainer.hpp"

namespace py = pybind11;
using namespace bm3;

namespace {

using EdgeArray = Eigen::Matrix<Index, Eigen::Dynamic, 2, Eigen::RowMajor>;

EdgeArray to_array(const std::vector<Edge>& edges) {
  EdgeArray a(static_cast<Index>(edges.size()), 2);
  for (std::size_t k = 0; k < edges.size(); ++k) a.row(static_cast<Index>(k)) << edges[k].user, edges[k].item;
  return a;
}

std::vector<Edge> from_array(const EdgeArray& a) {
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(a.rows()));
  for (Index r = 0; r < a.rows(); ++r) edges.push_back({a(r, 0), a(r, 1)});
  return edges;
}

py::dict metrics_dict(const MetricsReport& m) {
  py::dict recall, ndcg;
  for (std::size_t k = 0; k < m.cutoffs.size(); ++k) {
    recall[py::int_(m.cutoffs[k])] = m.recall[k];
    ndcg[py::int_(m.cutoffs[k])] = m.ndcg[k];
  }
  py::dict d;
  d["recall"] = recall;
  d["ndcg"] = ndcg;
  d["users"] = m.num_users;
  return d;
}

py::dict report_dict(const TrainReport& r) {
  py::dict d;
  d["best_epoch"] = r.best_epoch;
  d["best_valid_r20"] = r.best_valid_r20;
  d["best_valid"] = metrics_dict(r.best_valid);
  d["test"] = metrics_dict(r.test_metrics);
  py::list losses;
  for (const auto& l : r.loss_trace) {
    py::dict ld;
    ld["rec"] = l.rec;
    ld["align"] = l.align;
    ld["mask"] = l.mask;
    ld["reg"] = l.reg;
    ld["total"] = l.total;
    losses.append(ld);
  }
  d["loss_trace"] = losses;
  d["epoch_seconds"] = r.epoch_seconds;
  return d;
}

std::vector<FeatureMatrix> features_from_dict(const std::map<std::string, Matrix>& features) {
  std::vector<FeatureMatrix> out;
  for (const auto& [tag, m] : features) out.push_back({tag, m});
  return out;
}

}  // namespace

PYBIND11_MODULE(_bm3, m) {
  m.doc() = "BM3 self-supervised multi-modal recommender: data pipeline, training and all-ranking evaluation.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<InteractionRecord>(m, "InteractionRecord")
      .def(py::init([](std::string u, std::string i, std::optional<std::int64_t> ts) {
             return InteractionRecord{std::move(u), std::move(i), ts};
           }),
           py::arg("user_key"), py::arg("item_key"), py::arg("timestamp") = py::none())
      .def_readwrite("user_key", &InteractionRecord::user_key)
      .def_readwrite("item_key", &InteractionRecord::item_key)
      .def_readwrite("timestamp", &InteractionRecord::timestamp)
      .def("__repr__", [](const InteractionRecord& r) {
        return "InteractionRecord('" + r.user_key + "', '" + r.item_key + "')";
      });

  m.def("load_interactions", [](const std::filesystem::path& p) { return load_interactions(p); }, py::arg("path"));
  m.def("kcore_filter", &kcore_filter, py::arg("records"), py::arg("k"));

  py::class_<InteractionDataset>(m, "InteractionDataset")
      .def_property_readonly("num_users", &InteractionDataset::num_users)
      .def_property_readonly("num_items", &InteractionDataset::num_items)
      .def_property_readonly("edges", [](const InteractionDataset& d) { return to_array(d.edges); })
      .def_property_readonly("user_keys", [](const InteractionDataset& d) { return d.users.keys(); })
      .def_property_readonly("item_keys", [](const InteractionDataset& d) { return d.items.keys(); });
  m.def("build_dataset", &build_dataset, py::arg("records"));
  m.def("sparsity", py::overload_cast<const InteractionDataset&>(&sparsity), py::arg("dataset"));

  py::class_<SplitDataset>(m, "SplitDataset")
      .def(py::init([](Index nu, Index ni, const EdgeArray& tr, const EdgeArray& va, const EdgeArray& te) {
             SplitDataset s;
             s.num_users = nu;
             s.num_items = ni;
             s.train_edges = from_array(tr);
             s.valid_edges = from_array(va);
             s.test_edges = from_array(te);
             s.index_per_user();
             return s;
           }),
           py::arg("num_users"), py::arg("num_items"), py::arg("train"), py::arg("valid"), py::arg("test"))
      .def_readonly("num_users", &SplitDataset::num_users)
      .def_readonly("num_items", &SplitDataset::num_items)
      .def_property_readonly("train", [](const SplitDataset& s) { return to_array(s.train_edges); })
      .def_property_readonly("valid", [](const SplitDataset& s) { return to_array(s.valid_edges); })
      .def_property_readonly("test", [](const SplitDataset& s) { return to_array(s.test_edges); });
  m.def("split_per_user", &split_per_user, py::arg("dataset"), py::arg("seed"));
  m.def("load_split", [](const std::filesystem::path& p) { return load_split(p); }, py::arg("directory"));

  m.def("read_fmat", [](const std::filesystem::path& p) { return fmat::read(p); }, py::arg("path"));
  m.def("write_fmat", [](const std::filesystem::path& p, const Matrix& v) { fmat::write(p, v); }, py::arg("path"),
        py::arg("values"));

  py::class_<NormalizedAdjacency>(m, "NormalizedAdjacency")
      .def_readonly("num_users", &NormalizedAdjacency::num_users)
      .def_readonly("num_items", &NormalizedAdjacency::num_items)
      .def_property_readonly("nnz", &NormalizedAdjacency::nnz)
      .def("to_dense", &NormalizedAdjacency::to_dense)
      .def("propagate", [](const NormalizedAdjacency& a, const Matrix& h) { return propagate(a, h); });
  m.def("build_adjacency",
        [](const EdgeArray& edges, Index nu, Index ni) { return build_adjacency(from_array(edges), nu, ni); },
        py::arg("train_edges"), py::arg("num_users"), py::arg("num_items"));

  m.def("neg_cosine",
        [](const RowVector& u, const RowVector& v) {
          auto r = neg_cosine_grad(u, v, 0.0);
          return py::make_tuple(r.value, RowVector(r.grad_u));
        },
        py::arg("u"), py::arg("v"), "Returns (value, gradient with respect to u).");

  m.def("recall_at_k",
        [](const std::vector<Index>& ranked, const std::vector<Index>& targets, int k) {
          return recall_at_k(ranked, targets, k);
        },
        py::arg("ranked"), py::arg("targets"), py::arg("k"));
  m.def("ndcg_at_k",
        [](const std::vector<Index>& ranked, const std::vector<Index>& targets, int k) {
          return ndcg_at_k(ranked, targets, k);
        },
        py::arg("ranked"), py::arg("targets"), py::arg("k"));

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("dim", &TrainConfig::dim)
      .def_readwrite("layers", &TrainConfig::layers)
      .def_readwrite("drop_prob", &TrainConfig::drop_prob)
      .def_readwrite("lambda_reg", &TrainConfig::lambda_reg)
      .def_readwrite("lr", &TrainConfig::lr)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("max_epochs", &TrainConfig::max_epochs)
      .def_readwrite("patience", &TrainConfig::patience)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("use_visual", &TrainConfig::use_visual)
      .def_readwrite("use_textual", &TrainConfig::use_textual)
      .def_readwrite("enable_align", &TrainConfig::enable_align)
      .def_readwrite("enable_mask", &TrainConfig::enable_mask)
      .def_readwrite("cutoffs", &TrainConfig::cutoffs);

  m.def("train",
        [](const SplitDataset& split, const std::map<std::string, Matrix>& features, const TrainConfig& cfg,
           const std::optional<std::filesystem::path>& out_dir) {
          TrainOptions opts;
          if (out_dir) opts.out_dir = *out_dir;
          TrainReport report;
          {
            py::gil_scoped_release release;
            report = train(split, features_from_dict(features), cfg, opts).report;
          }
          return report_dict(report);
        },
        py::arg("split"), py::arg("features") = std::map<std::string, Matrix>{}, py::arg("config") = TrainConfig{},
        py::arg("out_dir") = py::none(),
        "Trains with early stopping. `features` maps a modality tag ('visual', 'textual') to an items x d_m array.");

  m.def("run_ablation",
        [](const SplitDataset& split, const std::map<std::string, Matrix>& features, const TrainConfig& cfg) {
          std::vector<AblationRow> rows;
          {
            py::gil_scoped_release release;
            rows = run_ablation(split, features_from_dict(features), cfg);
          }
          py::list out;
          for (const auto& r : rows) out.append(py::make_tuple(r.label, report_dict(r.report)));
          return out;
        },
        py::arg("split"), py::arg("features"), py::arg("config") = TrainConfig{});

  m.def("main",
        [](const std::vector<std::string>& args) {
          std::vector<const char*> argv{"bm3"};
          for (const auto& a : args) argv.push_back(a.c_str());
          std::ostringstream out, err;
          int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command-line interface; returns (exit_code, stdout, stderr).");
}
