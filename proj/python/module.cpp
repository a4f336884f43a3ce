#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "threatrag/chunker.hpp"
#include "threatrag/embed.hpp"
#include "threatrag/engine.hpp"
#include "threatrag/error.hpp"
#include "threatrag/evalkit.hpp"
#include "threatrag/index.hpp"

namespace py = pybind11;
using namespace threatrag;

namespace {

PyObject* g_error_type = nullptr;

// Round-trips through text so callers get plain dicts and lists.
py::object to_python(const nlohmann::ordered_json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

py::dict hit_to_dict(const RetrievalHit& h) {
  py::dict d;
  d["id"] = h.record_id;
  d["text"] = h.text;
  d["score"] = h.score;
  d["rank"] = h.rank;
  d["store_id"] = h.store_id;
  d["metadata"] = h.metadata;
  return d;
}

std::vector<float> as_floats(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 1) throw InvalidArgument("expected a 1-d vector");
  return {a.data(), a.data() + a.size()};
}

std::vector<std::vector<float>> as_rows(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw InvalidArgument("expected a 2-d array");
  std::vector<std::vector<float>> rows;
  for (py::ssize_t r = 0; r < a.shape(0); ++r) rows.emplace_back(a.data(r, 0), a.data(r, 0) + a.shape(1));
  return rows;
}

class PyEngine {
 public:
  explicit PyEngine(const std::filesystem::path& config_path) : engine_(load_config(config_path)) {}

  py::object ingest(const std::vector<std::string>& sources) {
    IngestSummary summary;
    {
      py::gil_scoped_release release;
      summary = engine_.ingest(sources);
    }
    return to_python(to_json(summary));
  }

  py::object query(const std::string& text, std::optional<std::size_t> top_k, bool timing) {
    ChatAnswer answer;
    {
      py::gil_scoped_release release;
      answer = engine_.query(text, top_k);
    }
    return to_python(to_json(answer, timing));
  }

  py::object evaluate(const std::filesystem::path& cases, const std::string& mode,
                      std::optional<std::filesystem::path> out_dir) {
    const EvalMode m = parse_eval_mode(mode);
    EvalOutcome outcome;
    {
      py::gil_scoped_release release;
      outcome = engine_.evaluate(cases, m, std::move(out_dir));
    }
    return to_python(to_json(outcome));
  }

  py::list chunks(const std::vector<std::string>& sources) {
    auto all = engine_.chunk_sources(sources);
    std::ostringstream out;
    write_chunks_jsonl(out, all);
    py::list result;
    auto loads = py::module_::import("json").attr("loads");
    std::istringstream in(out.str());
    for (std::string line; std::getline(in, line);) result.append(loads(line));
    return result;
  }

  py::object health() const { return to_python(engine_.health()); }
  py::object stores() const { return to_python(engine_.store_manifests()); }

 private:
  Engine engine_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Threat-intelligence retrieval engine";

  g_error_type = PyErr_NewException("threatrag._core.Error", PyExc_RuntimeError, nullptr);
  m.attr("Error") = py::handle(g_error_type);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(g_error_type)(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(g_error_type, exc.ptr());
    }
  });

  py::class_<PyEngine>(m, "Engine")
      .def(py::init<std::filesystem::path>(), py::arg("config_path"))
      .def("ingest", &PyEngine::ingest, py::arg("sources") = std::vector<std::string>{})
      .def("query", &PyEngine::query, py::arg("text"), py::arg("top_k") = std::nullopt, py::arg("timing") = true)
      .def("evaluate", &PyEngine::evaluate, py::arg("cases"), py::arg("mode") = "replay",
           py::arg("out_dir") = std::nullopt)
      .def("chunks", &PyEngine::chunks, py::arg("sources") = std::vector<std::string>{})
      .def("health", &PyEngine::health)
      .def("stores", &PyEngine::stores);

  m.def(
      "split_text",
      [](const std::string& text, std::size_t chunk_size, std::size_t chunk_overlap,
         std::optional<std::vector<std::string>> separators) {
        ChunkerConfig c;
        c.chunk_size = chunk_size;
        c.chunk_overlap = chunk_overlap;
        if (separators) c.separators = *separators;
        Document d{"py", SourceKind::text, text, {{"source", "python"}}};
        std::vector<std::string> out;
        for (auto& chunk : split_document(d, c)) out.push_back(std::move(chunk.text));
        return out;
      },
      py::arg("text"), py::arg("chunk_size") = 1000, py::arg("chunk_overlap") = 50,
      py::arg("separators") = std::nullopt);

  m.def(
      "cosine",
      [](const std::vector<double>& a, const std::vector<double>& b) { return cosine(a, b); }, py::arg("a"),
      py::arg("b"));

  m.def(
      "rrf_fuse",
      [](const std::vector<std::vector<std::string>>& ranked, std::size_t rrf_k, std::size_t top_k) {
        std::vector<std::vector<RetrievalHit>> lists;
        std::uint64_t id = 0;
        for (const auto& texts : ranked) {
          auto& list = lists.emplace_back();
          for (std::size_t r = 0; r < texts.size(); ++r) {
            RetrievalHit h;
            h.record_id = ++id;
            h.text = texts[r];
            h.rank = r + 1;
            list.push_back(std::move(h));
          }
        }
        std::vector<std::pair<std::string, double>> out;
        for (auto& h : rrf_fuse(lists, rrf_k, top_k)) out.emplace_back(h.text, h.score);
        return out;
      },
      py::arg("ranked_lists"), py::arg("rrf_k") = 60, py::arg("top_k") = 3);

  m.def(
      "bert_score",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& candidate,
         const py::array_t<float, py::array::c_style | py::array::forcecast>& reference) {
        auto s = bert_score_vectors(as_rows(candidate), as_rows(reference));
        return std::make_tuple(s.precision, s.recall, s.f1);
      },
      py::arg("candidate"), py::arg("reference"));

  m.def(
      "embed_deterministic",
      [](const std::vector<std::string>& texts, std::size_t dim) {
        DeterministicEmbedder e(dim);
        auto vectors = e.embed(texts);
        py::array_t<float> out({texts.size(), dim});
        auto view = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < vectors.size(); ++i)
          for (std::size_t d = 0; d < dim; ++d) view(i, d) = vectors[i].values[d];
        return out;
      },
      py::arg("texts"), py::arg("dim") = 256);

  py::class_<VectorStore>(m, "VectorStore")
      .def(py::init([](std::size_t dim, std::string store_id, const std::string& kind) {
             return VectorStore(std::move(store_id), parse_source_kind(kind), dim);
           }),
           py::arg("dim"), py::arg("store_id") = "python", py::arg("kind") = "text")
      .def_property_readonly("dim", &VectorStore::dim)
      .def_property_readonly("store_id", &VectorStore::store_id)
      .def("__len__", &VectorStore::size)
      .def(
          "add",
          [](VectorStore& s, const py::array_t<float, py::array::c_style | py::array::forcecast>& vectors,
             const std::vector<std::string>& texts, const std::string& source) {
            auto rows = as_rows(vectors);
            if (rows.size() != texts.size()) throw InvalidArgument("vectors and texts differ in length");
            std::vector<StoreItem> items;
            for (std::size_t i = 0; i < rows.size(); ++i) items.push_back({std::move(rows[i]), texts[i], {{"source", source}}});
            return s.upsert(items);
          },
          py::arg("vectors"), py::arg("texts"), py::arg("source") = "python")
      .def(
          "search",
          [](const VectorStore& s, const py::array_t<float, py::array::c_style | py::array::forcecast>& query,
             std::size_t k) {
            py::list out;
            for (auto& h : s.search(as_floats(query), k)) out.append(hit_to_dict(h));
            return out;
          },
          py::arg("query"), py::arg("k") = 3)
      .def("save", &VectorStore::save, py::arg("directory"))
      .def_static("load", &VectorStore::load, py::arg("directory"));
}
