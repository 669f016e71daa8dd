#include "fewshot/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>
#include <utility>

#include <CLI11.hpp>
#include <json.hpp>

#include "fewshot/bench.hpp"
#include "fewshot/client.hpp"
#include "fewshot/corpus.hpp"
#include "fewshot/errors.hpp"
#include "fewshot/mock_provider.hpp"
#include "fewshot/version.hpp"

namespace fewshot {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void print_error(const std::string& kind, const std::string& message) {
  ordered_json j;
  j["error"] = ordered_json{{"kind", kind}, {"message", message}};
  std::cerr << j.dump() << '\n';
}

struct TextRecord {
  std::string id;
  std::string label;
  std::string text;
};

std::vector<TextRecord> load_text_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open \"" + path + "\"");

  std::vector<TextRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    bool blank = true;
    for (char c : line) {
      if (c != ' ' && c != '\t' && c != '\r') {
        blank = false;
        break;
      }
    }
    if (blank) continue;

    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(path + " line " + std::to_string(lineno) + ": malformed JSON (" +
                            e.what() + ")");
    }
    if (!j.is_object()) {
      throw ValidationError(path + " line " + std::to_string(lineno) + ": expected a JSON object");
    }
    auto require_string = [&](const char* key) -> std::string {
      if (!j.contains(key)) {
        throw ValidationError(path + " line " + std::to_string(lineno) + ": missing key \"" +
                              key + "\"");
      }
      if (!j[key].is_string()) {
        throw ValidationError(path + " line " + std::to_string(lineno) + ": key \"" + key +
                              "\" must be a string");
      }
      return j[key].get<std::string>();
    };
    TextRecord rec;
    rec.id = require_string("id");
    rec.label = require_string("label");
    rec.text = require_string("text");
    records.push_back(std::move(rec));
  }
  return records;
}

std::string short_number(double x, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, x);
  return buf;
}

std::string exact_number(const json& x) { return x.dump(); }

std::string row_label(const json& config) {
  std::string label = config.value("method", std::string("?"));
  std::vector<std::string> mods;
  if (label == "mi") mods.push_back("alpha=" + exact_number(config.value("alpha", 1.0)));
  if ((label == "h" || label == "mi" || label == "fr") && config.value("lambda", 1.0) != 1.0) {
    mods.push_back("lambda=" + exact_number(config.value("lambda", 1.0)));
  }
  if (!mods.empty()) {
    label += "(";
    for (std::size_t i = 0; i < mods.size(); ++i) {
      if (i > 0) label += ",";
      label += mods[i];
    }
    label += ")";
  }
  return label;
}

}  // namespace

int cmd_embed(const EmbedArgs& args) {
  const std::vector<TextRecord> inputs = load_text_records(args.input);
  if (inputs.empty()) throw ValidationError(args.input + ": no records");

  ProviderConfig config;
  config.base_url = args.endpoint;
  config.model = args.model;
  config.batch_size = args.batch_size;
  config.max_retries = args.retries;
  config.timeout_seconds = args.timeout_seconds;
  config.max_concurrency = args.concurrency;

  std::vector<std::string> texts;
  texts.reserve(inputs.size());
  for (const TextRecord& rec : inputs) texts.push_back(rec.text);

  const std::vector<Eigen::VectorXd> vectors = embed_texts(texts, config, args.cache);

  // labels join the records here, after the provider round trip
  std::vector<EmbeddingRecord> records;
  records.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    EmbeddingRecord rec;
    rec.id = inputs[i].id;
    rec.label = inputs[i].label;
    rec.vector = vectors[i];
    rec.text = inputs[i].text;
    records.push_back(std::move(rec));
  }
  const LabeledCorpus corpus(std::move(records));
  save_corpus(corpus, args.out);
  std::cout << "embedded " << corpus.size() << " texts into " << args.out
            << " (d=" << corpus.dim() << ")\n";
  return 0;
}

int cmd_bench(const BenchArgs& args) {
  LabeledCorpus corpus = load_corpus(args.embeddings);
  if (!args.raw) corpus = l2_normalize(corpus);

  BenchOptions options;
  options.method.method = method_from_name(args.method);
  options.method.lambda = args.lambda;
  options.method.alpha = args.alpha;
  options.episode.ways = args.ways;
  options.episode.shots = args.shots;
  options.episode.queries_per_class = args.queries;
  options.episode.seed = args.seed;
  options.episodes = args.episodes;
  options.optimizer.iterations = args.iterations;
  options.optimizer.learning_rate = args.learning_rate;
  options.workers = args.workers;

  BenchmarkReport report = run_benchmark(corpus, options);
  report.config["embeddings"] = args.embeddings;
  report.config["normalize"] = !args.raw;

  if (!args.out.empty()) {
    std::ofstream out(args.out, std::ios::trunc);
    if (!out) throw ValidationError("cannot write \"" + args.out + "\"");
    out << report_to_json(report).dump(2) << '\n';
  }
  if (!args.csv.empty()) {
    std::ofstream out(args.csv, std::ios::trunc);
    if (!out) throw ValidationError("cannot write \"" + args.csv + "\"");
    out << report_csv(report);
  }
  if (!args.dump_episodes.empty()) {
    std::ofstream out(args.dump_episodes, std::ios::trunc);
    if (!out) throw ValidationError("cannot write \"" + args.dump_episodes + "\"");
    EpisodeSpec spec = options.episode;
    for (std::uint64_t i = 0; i < options.episodes; ++i) {
      spec.episode_index = i;
      const Episode episode = sample_episode(corpus, spec);
      ordered_json j;
      j["i"] = i;
      j["support"] = episode.support_indices();
      j["query"] = episode.query_indices();
      out << j.dump() << '\n';
    }
  }

  std::cout << "mean_f1 = " << short_number(report.mean_f1, 6) << " +/- "
            << short_number(report.ci95, 6) << " (ci95, " << report.episodes.size()
            << " episodes)\n";
  return 0;
}

int cmd_report(const ReportArgs& args) {
  if (args.inputs.empty()) throw ValidationError("at least one report file is required");
  if (args.format != "md" && args.format != "csv") {
    throw ValidationError("format must be md or csv");
  }

  std::vector<BenchmarkReport> reports;
  for (const std::string& path : args.inputs) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open \"" + path + "\"");
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ValidationError(path + ": malformed JSON (" + e.what() + ")");
    }
    reports.push_back(report_from_json(j));
  }

  const json& first = reports.front().config;
  for (std::size_t r = 1; r < reports.size(); ++r) {
    const json& other = reports[r].config;
    for (const char* key : {"ways", "shots"}) {
      if (first.value(key, -1) != other.value(key, -1)) {
        throw ValidationError("incompatible configs: \"" + args.inputs[0] + "\" has " + key +
                              "=" + exact_number(first.value(key, -1)) + " but \"" +
                              args.inputs[r] + "\" has " + key + "=" +
                              exact_number(other.value(key, -1)));
      }
    }
  }

  std::vector<std::size_t> order(reports.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return reports[a].mean_f1 > reports[b].mean_f1;
  });

  if (args.format == "csv") {
    std::cout << "method,mean_f1,ci95,mean_seconds\n";
    for (std::size_t i : order) {
      std::cout << row_label(reports[i].config) << ',' << exact_number(reports[i].mean_f1) << ','
                << exact_number(reports[i].ci95) << ',' << exact_number(reports[i].mean_seconds)
                << '\n';
    }
  } else {
    std::cout << "config: ways=" << exact_number(first.value("ways", -1))
              << " shots=" << exact_number(first.value("shots", -1))
              << " queries=" << exact_number(first.value("queries", -1))
              << " episodes=" << exact_number(first.value("episodes", -1))
              << " seed=" << exact_number(first.value("seed", 0)) << "\n\n";
    std::cout << "| method | mean_f1 | ci95 | mean_seconds |\n";
    std::cout << "|---|---|---|---|\n";
    for (std::size_t i : order) {
      std::cout << "| " << row_label(reports[i].config) << " | "
                << short_number(reports[i].mean_f1, 4) << " | "
                << short_number(reports[i].ci95, 4) << " | "
                << short_number(reports[i].mean_seconds, 4) << " |\n";
    }
  }
  return 0;
}

int cmd_mock_serve(const MockServeArgs& args) {
  MockProviderOptions options;
  options.seed = args.seed;
  options.dim = args.dim;
  MockProvider server(options);
  std::cout << "mock provider listening at " << server.base_url() << std::endl;
  for (;;) std::this_thread::sleep_for(std::chrono::seconds(1));
}

int run_cli(int argc, char** argv) {
  CLI::App app{"few-shot text classification over embedding endpoints"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  EmbedArgs embed;
  CLI::App* embed_cmd =
      app.add_subcommand("embed", "fetch embeddings for a labeled JSONL text file");
  embed_cmd->add_option("--input", embed.input, "JSONL lines {\"id\",\"label\",\"text\"}")
      ->required();
  embed_cmd->add_option("--out", embed.out, "output embedding JSONL")->required();
  embed_cmd->add_option("--endpoint", embed.endpoint, "provider base URL")->required();
  embed_cmd->add_option("--model", embed.model, "embedding model name")->required();
  embed_cmd->add_option("--cache", embed.cache, "embedding cache directory");
  embed_cmd->add_option("--batch-size", embed.batch_size, "texts per request");
  embed_cmd->add_option("--retries", embed.retries, "max retries per request");
  embed_cmd->add_option("--timeout", embed.timeout_seconds, "request timeout seconds");
  embed_cmd->add_option("--concurrency", embed.concurrency, "max in-flight requests");

  BenchArgs bench;
  CLI::App* bench_cmd = app.add_subcommand("bench", "run an episodic benchmark");
  bench_cmd->add_option("--embeddings", bench.embeddings, "embedding JSONL corpus")->required();
  bench_cmd->add_option("--method", bench.method, "ce|pt|ssl|h|mi|fr");
  bench_cmd->add_option("--ways", bench.ways, "classes per episode");
  bench_cmd->add_option("--shots", bench.shots, "support examples per class");
  bench_cmd->add_option("--queries", bench.queries, "query examples per class");
  bench_cmd->add_option("--episodes", bench.episodes, "episode count");
  bench_cmd->add_option("--seed", bench.seed, "run seed");
  bench_cmd->add_option("--lambda", bench.lambda, "regularizer weight");
  bench_cmd->add_option("--alpha", bench.alpha, "conditional entropy weight (mi)");
  bench_cmd->add_option("--iters", bench.iterations, "optimizer iterations");
  bench_cmd->add_option("--lr", bench.learning_rate, "optimizer learning rate");
  bench_cmd->add_option("--workers", bench.workers, "episode worker threads (0 = all cores)");
  bench_cmd->add_option("--out", bench.out, "write the report JSON here");
  bench_cmd->add_option("--csv", bench.csv, "write per-episode CSV here");
  bench_cmd->add_option("--dump-episodes", bench.dump_episodes,
                        "write sampled index lists here for audit");
  bench_cmd->add_flag("--raw", bench.raw, "skip L2 normalization of the corpus");

  ReportArgs report;
  CLI::App* report_cmd = app.add_subcommand("report", "tabulate benchmark reports");
  report_cmd->add_option("--in", report.inputs, "report JSON files")->required()->expected(-1);
  report_cmd->add_option("--format", report.format, "md or csv")
      ->check(CLI::IsMember({"md", "csv"}));

  MockServeArgs mock;
  CLI::App* mock_cmd =
      app.add_subcommand("mock-serve", "run the deterministic mock embedding provider");
  mock_cmd->add_option("--seed", mock.seed, "mock seed");
  mock_cmd->add_option("--dim", mock.dim, "embedding dimension");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    print_error("usage", e.what());
    return 2;
  }

  try {
    if (*embed_cmd) return cmd_embed(embed);
    if (*bench_cmd) return cmd_bench(bench);
    if (*report_cmd) return cmd_report(report);
    if (*mock_cmd) return cmd_mock_serve(mock);
    print_error("usage", "no subcommand given");
    return 2;
  } catch (const ValidationError& e) {
    print_error("validation", e.what());
    return 2;
  } catch (const AuthError& e) {
    print_error("auth", e.what());
    return 1;
  } catch (const TransportError& e) {
    print_error("transport", e.what());
    return 1;
  } catch (const ProviderError& e) {
    print_error("provider", e.what());
    return 1;
  } catch (const TrainingError& e) {
    print_error("training", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("runtime", e.what());
    return 1;
  }
}

}  // namespace fewshot
