#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qexpand/corpus.hpp"
#include "qexpand/dba.hpp"
#include "qexpand/evaluation.hpp"
#include "qexpand/io.hpp"
#include "qexpand/lattqe.hpp"
#include "qexpand/qe_classic.hpp"
#include "qexpand/tensor.hpp"
#include "qexpand/training.hpp"

namespace py = pybind11;
using namespace qexpand;

namespace {

EmbeddingMatrix matrix_from_numpy(py::array_t<float, py::array::c_style | py::array::forcecast> a,
                                  std::vector<std::string> ids) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-D float array");
  EmbeddingMatrix m;
  m.n = std::size_t(a.shape(0));
  m.d = std::size_t(a.shape(1));
  if (ids.empty()) {
    for (std::size_t i = 0; i < m.n; ++i) ids.push_back(std::to_string(i));
  }
  if (ids.size() != m.n) throw ShapeError("ids length must match row count");
  m.ids = std::move(ids);
  m.rows.assign(a.data(), a.data() + m.n * m.d);
  return m;
}

py::array_t<float> numpy_from_matrix(const EmbeddingMatrix& m) {
  py::array_t<float> a({py::ssize_t(m.n), py::ssize_t(m.d)});
  std::copy(m.rows.begin(), m.rows.end(), a.mutable_data());
  return a;
}

std::vector<float> vec_from_numpy(
    py::array_t<float, py::array::c_style | py::array::forcecast> a) {
  if (a.ndim() != 1) throw ShapeError("expected a 1-D float array");
  return {a.data(), a.data() + a.shape(0)};
}

QEMethodConfig make_config(const std::string& method, std::size_t nqe, float alpha, float c_svm,
                           std::size_t neg, const std::string& weight_mode) {
  QEMethodConfig cfg;
  cfg.method = parse_method(method);
  cfg.nqe = nqe;
  cfg.alpha = alpha;
  cfg.c_svm = c_svm;
  cfg.neg = neg;
  cfg.weight_mode =
      weight_mode == "tempered-softmax" ? WeightMode::TemperedSoftmax : WeightMode::Similarity;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_qexpand, m) {
  m.doc() = "query-expansion engine for embedding-based retrieval";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<DataError>(m, "DataError");
  py::register_exception<NumericError>(m, "NumericError");

  m.def(
      "softmax",
      [](std::vector<double> scores, double t) { return softmax(scores, t); },
      py::arg("scores"), py::arg("temperature") = 1.0);
  m.def(
      "layer_norm",
      [](std::vector<double> x, std::vector<double> gain, std::vector<double> bias, double eps) {
        return layer_norm(x, gain, bias, eps);
      },
      py::arg("x"), py::arg("gain"), py::arg("bias"), py::arg("eps") = 1e-5);

  py::class_<Neighbor>(m, "Neighbor")
      .def_readonly("id", &Neighbor::id)
      .def_readonly("row", &Neighbor::row)
      .def_readonly("similarity", &Neighbor::similarity);

  py::class_<VectorIndex>(m, "Index")
      .def(py::init([](py::array_t<float, py::array::c_style | py::array::forcecast> rows,
                       std::vector<std::string> ids) {
             EmbeddingMatrix mat = matrix_from_numpy(rows, std::move(ids));
             normalize_rows(mat);
             return VectorIndex(std::move(mat));
           }),
           py::arg("rows"), py::arg("ids") = std::vector<std::string>{})
      .def("__len__", &VectorIndex::size)
      .def_property_readonly("dim", &VectorIndex::dim)
      .def(
          "knn",
          [](const VectorIndex& idx, py::array_t<float> q, std::size_t k,
             std::vector<std::string> exclude) {
            std::unordered_set<std::string> ex(exclude.begin(), exclude.end());
            return idx.knn(vec_from_numpy(q), k, exclude.empty() ? nullptr : &ex).entries;
          },
          py::arg("query"), py::arg("k"), py::arg("exclude") = std::vector<std::string>{})
      .def(
          "bottom_k",
          [](const VectorIndex& idx, py::array_t<float> q, std::size_t k) {
            return idx.bottom_k(vec_from_numpy(q), k).entries;
          },
          py::arg("query"), py::arg("k"))
      .def(
          "expand_query",
          [](const VectorIndex& idx, py::array_t<float> q, const std::string& method,
             std::size_t nqe, float alpha, float c_svm, std::size_t neg,
             const std::string& checkpoint, const std::string& weight_mode) {
            QEMethodConfig cfg = make_config(method, nqe, alpha, c_svm, neg, weight_mode);
            std::optional<LattqeRunner> runner;
            if (cfg.method == QEMethod::Lattqe) {
              if (checkpoint.empty()) throw ConfigError("lattqe needs a checkpoint path");
              runner.emplace(load_model(checkpoint));
            }
            auto out =
                expand_query(vec_from_numpy(q), idx, cfg, runner ? &*runner : nullptr);
            py::array_t<float> arr({py::ssize_t(out.size())},
                                   {py::ssize_t(sizeof(float))});
            std::copy(out.begin(), out.end(), arr.mutable_data());
            return arr;
          },
          py::arg("query"), py::arg("method"), py::arg("nqe") = 0, py::arg("alpha") = 3.0f,
          py::arg("c_svm") = 0.1f, py::arg("neg") = 5, py::arg("checkpoint") = std::string{},
          py::arg("weight_mode") = "similarity");

  m.def(
      "average_precision",
      [](std::vector<std::string> ranked, std::vector<std::string> positives,
         std::vector<std::string> junk) {
        std::unordered_set<std::string> p(positives.begin(), positives.end());
        std::unordered_set<std::string> j(junk.begin(), junk.end());
        auto ap = average_precision(ranked, p, j);
        return ap ? py::object(py::cast(*ap)) : py::object(py::none());
      },
      py::arg("ranked"), py::arg("positives"), py::arg("junk") = std::vector<std::string>{});

  m.def(
      "generate_corpus",
      [](std::size_t n_classes, std::size_t dim, double sigma, std::size_t distractors,
         std::size_t items_lo, std::size_t items_hi, double query_fraction,
         double train_fraction, std::uint64_t seed, double center_correlation,
         double sigma_hi, std::size_t subspace_dim, double subspace_sigma,
         double arc_extent, double sibling_fraction, std::size_t sibling_items_hi) {
        SynthConfig cfg;
        cfg.n_classes = n_classes;
        cfg.dim = dim;
        cfg.sigma = sigma;
        cfg.center_correlation = center_correlation;
        cfg.sigma_hi = sigma_hi;
        cfg.subspace_dim = subspace_dim;
        cfg.subspace_sigma = subspace_sigma;
        cfg.arc_extent = arc_extent;
        cfg.sibling_fraction = sibling_fraction;
        cfg.sibling_items_hi = sibling_items_hi;
        cfg.n_distractors = distractors;
        cfg.items_per_class_lo = items_lo;
        cfg.items_per_class_hi = items_hi;
        cfg.query_fraction = query_fraction;
        cfg.train_fraction = train_fraction;
        cfg.seed = seed;
        Corpus c = generate_corpus(cfg);
        py::list meta;
        for (const auto& it : c.meta) {
          py::dict d;
          d["row"] = it.row;
          d["id"] = it.id;
          d["class"] = it.cls ? py::object(py::cast(*it.cls)) : py::object(py::none());
          d["split"] = split_name(it.split);
          meta.append(d);
        }
        py::list anns;
        for (const auto& a : c.annotations) {
          py::dict d;
          d["id"] = a.id;
          d["easy"] = a.easy;
          d["hard"] = a.hard;
          d["junk"] = a.junk;
          anns.append(d);
        }
        return py::make_tuple(numpy_from_matrix(c.embeddings), meta, anns);
      },
      py::arg("n_classes") = 200, py::arg("dim") = 64, py::arg("sigma") = 0.25,
      py::arg("distractors") = 2000, py::arg("items_lo") = 5, py::arg("items_hi") = 50,
      py::arg("query_fraction") = 0.2, py::arg("train_fraction") = 0.6, py::arg("seed") = 0,
      py::arg("center_correlation") = 0.0, py::arg("sigma_hi") = 0.0,
      py::arg("subspace_dim") = 0, py::arg("subspace_sigma") = 0.0,
      py::arg("arc_extent") = 0.0, py::arg("sibling_fraction") = 1.0,
      py::arg("sibling_items_hi") = 0);

  m.def("load_embeddings", [](const std::string& path) {
    return numpy_from_matrix(load_embeddings(path));
  });
  m.def("save_embeddings", [](const std::string& path, py::array_t<float> rows) {
    EmbeddingMatrix mat = matrix_from_numpy(rows, {});
    save_embeddings(path, mat);
  });
}
