#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "fewshot/bench.hpp"
#include "fewshot/corpus.hpp"
#include "fewshot/errors.hpp"
#include "fewshot/losses.hpp"
#include "fewshot/metrics.hpp"
#include "fewshot/sampler.hpp"
#include "fewshot/trainer.hpp"
#include "fewshot/version.hpp"

namespace py = pybind11;

namespace {

py::object json_to_py(const nlohmann::ordered_json& j) {
  using value_t = nlohmann::ordered_json::value_t;
  switch (j.type()) {
    case value_t::object: {
      py::dict out;
      for (const auto& [key, value] : j.items()) out[py::str(key)] = json_to_py(value);
      return out;
    }
    case value_t::array: {
      py::list out;
      for (const auto& value : j) out.append(json_to_py(value));
      return out;
    }
    case value_t::string:
      return py::str(j.get<std::string>());
    case value_t::boolean:
      return py::bool_(j.get<bool>());
    case value_t::number_integer:
      return py::int_(j.get<long long>());
    case value_t::number_unsigned:
      return py::int_(j.get<unsigned long long>());
    case value_t::number_float:
      return py::float_(j.get<double>());
    default:
      return py::none();
  }
}

fewshot::MethodSpec make_spec(const std::string& method, double lambda, double alpha) {
  fewshot::MethodSpec spec;
  spec.method = fewshot::method_from_name(method);
  spec.lambda = lambda;
  spec.alpha = alpha;
  return spec;
}

fewshot::OptimizerConfig make_opt(int iterations, double learning_rate) {
  fewshot::OptimizerConfig opt;
  opt.iterations = iterations;
  opt.learning_rate = learning_rate;
  return opt;
}

}  // namespace

PYBIND11_MODULE(fewshot, m) {
  m.doc() = "episodic few-shot classification over embedding corpora";
  m.attr("__version__") = fewshot::kVersion;

  py::register_exception<fewshot::ValidationError>(m, "ValidationError", PyExc_ValueError);

  py::class_<fewshot::LabeledCorpus>(m, "Corpus")
      .def_property_readonly("size", &fewshot::LabeledCorpus::size)
      .def_property_readonly("dim", &fewshot::LabeledCorpus::dim)
      .def_property_readonly("label_space", &fewshot::LabeledCorpus::label_space)
      .def("__len__", &fewshot::LabeledCorpus::size);

  m.def(
      "load_corpus", [](const std::string& path) { return fewshot::load_corpus(path); },
      py::arg("path"), "Load a JSONL embedding corpus.");
  m.def("l2_normalize", &fewshot::l2_normalize, py::arg("corpus"),
        "Corpus copy with unit-norm vectors.");

  py::class_<fewshot::Episode>(m, "Episode")
      .def_property_readonly("ways", &fewshot::Episode::ways)
      .def_property_readonly("shots", &fewshot::Episode::shots)
      .def_property_readonly("queries_per_class", &fewshot::Episode::queries_per_class)
      .def_property_readonly("dim", &fewshot::Episode::dim)
      .def_property_readonly("class_map", &fewshot::Episode::class_map)
      .def_property_readonly("support_vectors", &fewshot::Episode::support_vectors)
      .def_property_readonly("support_labels", &fewshot::Episode::support_labels)
      .def_property_readonly("query_vectors", &fewshot::Episode::query_vectors)
      .def_property_readonly("support_indices", &fewshot::Episode::support_indices)
      .def_property_readonly("query_indices", &fewshot::Episode::query_indices);

  m.def(
      "sample_episode",
      [](const fewshot::LabeledCorpus& corpus, int ways, int shots, int queries,
         std::uint64_t seed, std::uint64_t episode_index) {
        fewshot::EpisodeSpec spec;
        spec.ways = ways;
        spec.shots = shots;
        spec.queries_per_class = queries;
        spec.seed = seed;
        spec.episode_index = episode_index;
        return fewshot::sample_episode(corpus, spec);
      },
      py::arg("corpus"), py::arg("ways") = 5, py::arg("shots") = 5, py::arg("queries") = 15,
      py::arg("seed") = 0, py::arg("episode_index") = 0,
      "Draw one deterministic episode. Query labels stay internal; score "
      "predictions with evaluate().");

  m.def("softmax_rows", &fewshot::softmax_rows, py::arg("logits"));
  m.def("cross_entropy", &fewshot::cross_entropy, py::arg("probs"), py::arg("labels"));
  m.def("entropy_regularizer", &fewshot::entropy_regularizer, py::arg("probs"));
  m.def("mi_regularizer", &fewshot::mi_regularizer, py::arg("probs"), py::arg("alpha") = 1.0);
  m.def("fisher_rao_distance", &fewshot::fisher_rao_distance, py::arg("q"), py::arg("p"));
  m.def("fisher_rao_regularizer", &fewshot::fisher_rao_regularizer, py::arg("probs"));
  m.def("macro_f1", &fewshot::macro_f1, py::arg("truth"), py::arg("predicted"), py::arg("ways"));

  m.def(
      "run_method",
      [](const fewshot::Episode& episode, const std::string& method, double lambda, double alpha,
         int iterations, double learning_rate) {
        const fewshot::EpisodePrediction pred = fewshot::run_method(
            episode, make_spec(method, lambda, alpha), make_opt(iterations, learning_rate));
        py::dict out;
        out["predicted"] = pred.predicted;
        out["probabilities"] = pred.probabilities;
        out["train_seconds"] = pred.train_seconds;
        return out;
      },
      py::arg("episode"), py::arg("method") = "fr", py::arg("lambda_") = 1.0,
      py::arg("alpha") = 1.0, py::arg("iterations") = 150, py::arg("learning_rate") = 1e-3,
      "Fit the episode with one method and predict its query set.");

  m.def(
      "evaluate",
      [](const fewshot::Episode& episode, const std::vector<int>& predicted) {
        fewshot::EpisodePrediction pred;
        pred.predicted = predicted;
        const fewshot::EpisodeResult result = fewshot::evaluate(episode, pred);
        py::dict out;
        out["f1"] = result.f1;
        out["acc"] = result.acc;
        return out;
      },
      py::arg("episode"), py::arg("predicted"),
      "Score query predictions against the episode's held-out labels.");

  m.def(
      "run_benchmark",
      [](const fewshot::LabeledCorpus& corpus, const std::string& method, int ways, int shots,
         int queries, std::uint64_t episodes, std::uint64_t seed, double lambda, double alpha,
         int iterations, double learning_rate, int workers) {
        fewshot::BenchOptions options;
        options.method = make_spec(method, lambda, alpha);
        options.episode.ways = ways;
        options.episode.shots = shots;
        options.episode.queries_per_class = queries;
        options.episode.seed = seed;
        options.episodes = episodes;
        options.optimizer = make_opt(iterations, learning_rate);
        options.workers = workers;
        fewshot::BenchmarkReport report;
        {
          py::gil_scoped_release release;
          report = fewshot::run_benchmark(corpus, options);
        }
        return json_to_py(fewshot::report_to_json(report));
      },
      py::arg("corpus"), py::arg("method") = "fr", py::arg("ways") = 5, py::arg("shots") = 5,
      py::arg("queries") = 15, py::arg("episodes") = 100, py::arg("seed") = 0,
      py::arg("lambda_") = 1.0, py::arg("alpha") = 1.0, py::arg("iterations") = 150,
      py::arg("learning_rate") = 1e-3, py::arg("workers") = 1,
      "Aggregate macro-F1 over seeded episodes; returns the report as a dict.");
}
