#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "textshift/analysis.hpp"
#include "textshift/checkpoint.hpp"
#include "textshift/cli.hpp"
#include "textshift/corpus.hpp"
#include "textshift/error.hpp"
#include "textshift/training.hpp"
#include "textshift/tsne.hpp"

namespace py = pybind11;
using namespace textshift;

namespace {

struct LoadedModel {
  AnyModel model;
  std::size_t max_len = kDefaultMaxLen;

  const LabelSet& labels() const {
    return std::visit([](const auto& m) -> const LabelSet& { return m.labels; }, model);
  }
  std::string kind() const { return std::holds_alternative<CnnModel>(model) ? "cnn" : "fasttext"; }
};

LoadedModel load(const std::filesystem::path& path) {
  CheckpointExtras extras;
  LoadedModel out{load_model(path, &extras)};
  if (extras.info.contains("max_len")) out.max_len = extras.info["max_len"].get<std::size_t>();
  return out;
}

Corpus unlabeled_corpus(const std::vector<std::string>& texts, std::size_t max_len) {
  Corpus c{LabelSet({"unlabeled"}), {}};
  for (std::size_t i = 0; i < texts.size(); ++i) {
    c.documents.push_back({0, tokenize(texts[i], max_len), Domain::Source, std::to_string(i)});
  }
  return c;
}

py::dict comparison_dict(const DomainComparison& c) {
  auto rows = [](const std::vector<RatioRow>& table) {
    py::list out;
    for (const auto& r : table) out.append(py::make_tuple(r.rank, r.token, r.f_a, r.f_b, r.ratio));
    return out;
  };
  py::dict shared;
  for (const auto& t : c.shared) shared[py::str(t.token)] = py::make_tuple(t.f_a, t.f_b);
  py::dict d;
  d["rho"] = c.rho;
  d["shared"] = shared;
  d["a_over_b"] = rows(c.a_over_b);
  d["b_over_a"] = rows(c.b_over_a);
  return d;
}

}  // namespace

PYBIND11_MODULE(_textshift, m) {
  m.doc() = "Short-text classification across domains";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&]() { return py::object(py::exception<Error>(m, "TextshiftError", PyExc_RuntimeError)); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const auto& type = error_type.get_stored();
      py::object instance = type(e.what());
      instance.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(type.ptr(), instance.ptr());
    }
  });

  m.def("tokenize", [](const std::string& text, std::size_t max_len) { return tokenize(text, max_len); },
        py::arg("text"), py::arg("max_len") = kDefaultMaxLen);

  m.def("job_categories", [] { return job_categories().names(); });

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args, const std::string& stdin_text) {
        std::istringstream in(stdin_text);
        std::ostringstream out;
        std::ostringstream err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, in, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), py::arg("stdin") = "",
      "Runs one textshift command in-process; returns (exit_code, stdout, stderr).");

  py::class_<LoadedModel>(m, "Model")
      .def_static("load", &load, py::arg("path"))
      .def_property_readonly("kind", &LoadedModel::kind)
      .def_property_readonly("labels", [](const LoadedModel& lm) { return lm.labels().names(); })
      .def_readonly("max_len", &LoadedModel::max_len)
      .def(
          "predict_proba",
          [](const LoadedModel& lm, const std::string& text) {
            return predict_proba(lm.model, tokenize(text, lm.max_len));
          },
          py::arg("text"))
      .def(
          "classify",
          [](const LoadedModel& lm, const std::string& text, std::size_t topk) {
            const auto p = predict_proba(lm.model, tokenize(text, lm.max_len));
            if (topk == 0 || topk > p.size()) throw Error(ErrorCode::InvalidConfig, "topk out of range");
            std::vector<std::size_t> order(p.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
            std::vector<std::pair<std::string, double>> out;
            for (std::size_t i = 0; i < topk; ++i) out.emplace_back(lm.labels().name(order[i]), p[order[i]]);
            return out;
          },
          py::arg("text"), py::arg("topk") = 1)
      .def(
          "features",
          [](const LoadedModel& lm, const std::string& text) {
            const auto* cnn = std::get_if<CnnModel>(&lm.model);
            if (!cnn) throw Error(ErrorCode::InvalidConfig, "features need a CNN checkpoint");
            return extract_features(*cnn, tokenize(text, lm.max_len));
          },
          py::arg("text"), "Max-pooled convolution features of one text.");

  m.def(
      "compare_domains",
      [](const std::vector<std::string>& a, const std::vector<std::string>& b, std::size_t min_count,
         std::size_t top_k) {
        return comparison_dict(
            compare_domains(unlabeled_corpus(a, kDefaultMaxLen), unlabeled_corpus(b, kDefaultMaxLen), min_count, top_k));
      },
      py::arg("texts_a"), py::arg("texts_b"), py::arg("min_count") = 5, py::arg("top_k") = 15);

  m.def(
      "tsne",
      [](const std::vector<std::vector<double>>& points, double perplexity, std::size_t iterations,
         std::uint64_t seed) {
        const std::size_t n = points.size();
        const std::size_t d = n ? points[0].size() : 0;
        Matrix X(n, d);
        for (std::size_t i = 0; i < n; ++i) {
          if (points[i].size() != d) throw Error(ErrorCode::InvalidConfig, "ragged input rows");
          for (std::size_t j = 0; j < d; ++j) X(i, j) = points[i][j];
        }
        TsneConfig config;
        config.perplexity = perplexity;
        config.iterations = iterations;
        config.seed = seed;
        TsneResult result;
        {
          py::gil_scoped_release release;
          result = tsne(X, config);
        }
        std::vector<std::pair<double, double>> coords;
        for (std::size_t i = 0; i < n; ++i) coords.emplace_back(result.embedding(i, 0), result.embedding(i, 1));
        return py::make_tuple(coords, result.kl);
      },
      py::arg("points"), py::arg("perplexity") = 30.0, py::arg("iterations") = 1000, py::arg("seed") = 1,
      "Returns (coordinates, kl_trace).");

  m.def("crc32c", [](const py::bytes& data) {
    const std::string_view view = data;
    return crc32c({reinterpret_cast<const std::uint8_t*>(view.data()), view.size()});
  });
}
