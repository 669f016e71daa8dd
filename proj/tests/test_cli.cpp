#include <doctest.h>

#include <algorithm>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fewshot/cli.hpp"
#include "fewshot/corpus.hpp"
#include "fewshot/mock_provider.hpp"
#include "test_fixtures.hpp"

using nlohmann::json;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "fewshot");
  std::vector<char*> argv;
  argv.reserve(args.size());
  for (auto& a : args) argv.push_back(a.data());

  std::ostringstream out, err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  CliResult result;
  result.code = fewshot::run_cli(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  result.out = out.str();
  result.err = err.str();
  return result;
}

std::string ten_texts_jsonl() {
  std::string lines;
  for (int i = 0; i < 10; ++i) {
    json j = {{"id", "doc" + std::to_string(i)},
              {"label", "topic" + std::to_string(i % 3)},
              {"text", "document number " + std::to_string(i)}};
    lines += j.dump() + "\n";
  }
  return lines;
}

std::string bench_corpus(const testsupport::TempDir& dir) {
  const auto corpus = testsupport::gaussian_corpus(6, 20, 8, 3.0, 2024);
  const auto path = dir.file("corpus.jsonl");
  fewshot::save_corpus(corpus, path);
  return path;
}

json strip_timing(json report) {
  report["mean_seconds"] = 0.0;
  for (auto& ep : report["episodes"]) ep["sec"] = 0.0;
  return report;
}

std::vector<double> episode_f1s(const json& report) {
  std::vector<double> f1s;
  for (const auto& ep : report["episodes"]) f1s.push_back(ep["f1"].get<double>());
  return f1s;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("version flag") {
  const auto r = run({"--version"});
  CHECK(r.code == 0);
  CHECK(r.out.find("0.1.0") != std::string::npos);
}

TEST_CASE("missing subcommand is a usage error") {
  const auto r = run({});
  CHECK(r.code == 2);
}

TEST_CASE("unknown flags are usage errors") {
  const auto r = run({"bench", "--embeddings", "x.jsonl", "--no-such-flag"});
  CHECK(r.code == 2);
}

TEST_CASE("embed pipeline against the in-process provider") {
  testsupport::TempDir dir;
  testsupport::write_text(dir.file("texts.jsonl"), ten_texts_jsonl());
  fewshot::MockProvider mock(fewshot::MockProviderOptions{.seed = 0, .dim = 64});

  const std::vector<std::string> args = {
      "embed",      "--input", dir.file("texts.jsonl"), "--out",   dir.file("embedded.jsonl"),
      "--endpoint", mock.base_url(), "--model", "demo-model", "--cache", dir.file("cache")};

  const auto first = run(args);
  CAPTURE(first.err);
  CHECK(first.code == 0);
  CHECK(first.out.find("embedded 10 texts") != std::string::npos);

  const auto corpus = fewshot::load_corpus(dir.file("embedded.jsonl"));
  REQUIRE(corpus.size() == 10);
  CHECK(corpus.dim() == 64);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& rec = corpus.records()[i];
    CHECK(rec.id == "doc" + std::to_string(i));
    CHECK(rec.label == "topic" + std::to_string(i % 3));
    REQUIRE(rec.text.has_value());
    const auto expected = fewshot::MockProvider::embedding_for(0, "demo-model", *rec.text, 64);
    CHECK(rec.vector == expected);
  }

  // labels stay out of every request
  for (const auto& body : mock.request_bodies()) {
    CHECK(body.find("topic") == std::string::npos);
    CHECK(body.find("label") == std::string::npos);
  }
  for (const auto& target : mock.request_targets()) {
    CHECK(target.find("topic") == std::string::npos);
  }

  // second run is answered from cache: same bytes, no new requests
  const int requests_before = mock.request_count();
  const auto bytes_before = testsupport::read_text(dir.file("embedded.jsonl"));
  const auto second = run(args);
  CHECK(second.code == 0);
  CHECK(mock.request_count() == requests_before);
  CHECK(testsupport::read_text(dir.file("embedded.jsonl")) == bytes_before);
}

TEST_CASE("embed reports the line of a missing text field") {
  testsupport::TempDir dir;
  std::string lines;
  for (int i = 0; i < 6; ++i) {
    json j = {{"id", "d" + std::to_string(i)}, {"label", "x"}, {"text", "body"}};
    if (i == 3) j.erase("text");  // line 4 is broken
    lines += j.dump() + "\n";
  }
  testsupport::write_text(dir.file("texts.jsonl"), lines);

  const auto r = run({"embed", "--input", dir.file("texts.jsonl"), "--out", dir.file("o.jsonl"),
                      "--endpoint", "http://127.0.0.1:1", "--model", "m"});
  CHECK(r.code == 2);
  CHECK(r.err.find("line 4") != std::string::npos);
  CHECK(r.err.find("text") != std::string::npos);
  CHECK(r.err.find("validation") != std::string::npos);
}

TEST_CASE("embed maps unreachable endpoints to exit 1") {
  testsupport::TempDir dir;
  testsupport::write_text(dir.file("texts.jsonl"), ten_texts_jsonl());
  const auto r = run({"embed", "--input", dir.file("texts.jsonl"), "--out", dir.file("o.jsonl"),
                      "--endpoint", "http://127.0.0.1:1", "--model", "m", "--retries", "0",
                      "--timeout", "2"});
  CHECK(r.code == 1);
  CHECK(r.err.find("transport") != std::string::npos);
}

TEST_CASE("bench runs are reproducible and worker-count independent") {
  testsupport::TempDir dir;
  const auto corpus = bench_corpus(dir);

  auto bench = [&](const std::string& out, const std::string& workers) {
    return run({"bench", "--embeddings", corpus, "--method", "fr", "--episodes", "6", "--seed",
                "99", "--iters", "30", "--workers", workers, "--out", dir.file(out)});
  };

  const auto a = bench("a.json", "1");
  CAPTURE(a.err);
  CHECK(a.code == 0);
  CHECK(a.out.find("mean_f1 = ") != std::string::npos);
  const auto b = bench("b.json", "1");
  CHECK(b.code == 0);
  const auto c = bench("c.json", "8");
  CHECK(c.code == 0);

  const auto ja = json::parse(testsupport::read_text(dir.file("a.json")));
  const auto jb = json::parse(testsupport::read_text(dir.file("b.json")));
  const auto jc = json::parse(testsupport::read_text(dir.file("c.json")));
  CHECK(strip_timing(ja) == strip_timing(jb));  // same seed, same run
  CHECK(episode_f1s(ja) == episode_f1s(jc));    // 1 worker vs 8 workers
  CHECK(ja["config"]["method"] == "fr");
  CHECK(ja["episodes"].size() == 6);
}

TEST_CASE("mutual information at lambda zero reduces to cross entropy") {
  testsupport::TempDir dir;
  const auto corpus = bench_corpus(dir);
  const auto mi = run({"bench", "--embeddings", corpus, "--method", "mi", "--lambda", "0",
                       "--episodes", "5", "--seed", "3", "--iters", "20", "--out",
                       dir.file("mi.json")});
  const auto ce = run({"bench", "--embeddings", corpus, "--method", "ce", "--episodes", "5",
                       "--seed", "3", "--iters", "20", "--out", dir.file("ce.json")});
  CHECK(mi.code == 0);
  CHECK(ce.code == 0);
  const auto jmi = json::parse(testsupport::read_text(dir.file("mi.json")));
  const auto jce = json::parse(testsupport::read_text(dir.file("ce.json")));
  CHECK(episode_f1s(jmi) == episode_f1s(jce));
}

TEST_CASE("bench rejects bad configurations with exit 2") {
  testsupport::TempDir dir;
  const auto corpus = bench_corpus(dir);

  SUBCASE("unknown method") {
    const auto r = run({"bench", "--embeddings", corpus, "--method", "xa"});
    CHECK(r.code == 2);
  }
  SUBCASE("more ways than eligible classes") {
    const auto r = run({"bench", "--embeddings", corpus, "--ways", "9", "--episodes", "2"});
    CHECK(r.code == 2);
    CHECK(r.err.find("eligible") != std::string::npos);
    CHECK(r.err.find("6") != std::string::npos);  // how many classes qualified
  }
  SUBCASE("missing corpus file") {
    const auto r = run({"bench", "--embeddings", dir.file("absent.jsonl"), "--episodes", "2"});
    CHECK(r.code == 2);
  }
}

TEST_CASE("bench side outputs: per-episode csv and sampled-index dumps") {
  testsupport::TempDir dir;
  const auto corpus = bench_corpus(dir);
  const auto r = run({"bench", "--embeddings", corpus, "--method", "pt", "--ways", "4",
                      "--shots", "2", "--queries", "3", "--episodes", "4", "--seed", "11",
                      "--csv", dir.file("eps.csv"), "--dump-episodes", dir.file("eps.jsonl")});
  CAPTURE(r.err);
  CHECK(r.code == 0);

  const auto csv = testsupport::read_text(dir.file("eps.csv"));
  CHECK(csv.substr(0, 13) == "i,f1,acc,sec\n");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

  std::istringstream dump(testsupport::read_text(dir.file("eps.jsonl")));
  std::string line;
  int lines = 0;
  while (std::getline(dump, line)) {
    const auto j = json::parse(line);
    CHECK(j["i"] == lines);
    CHECK(j["support"].size() == 8);  // 4 ways x 2 shots
    CHECK(j["query"].size() == 12);   // 4 ways x 3 queries
    ++lines;
  }
  CHECK(lines == 4);
}

TEST_CASE("report renders sorted tables from compatible runs") {
  testsupport::TempDir dir;
  const auto corpus = bench_corpus(dir);
  for (const auto& m : {"pt", "fr", "ce"}) {
    const auto r = run({"bench", "--embeddings", corpus, "--method", m, "--episodes", "5",
                        "--seed", "21", "--iters", "25", "--out", dir.file(std::string(m) + ".json")});
    REQUIRE(r.code == 0);
  }

  SUBCASE("markdown") {
    const auto r =
        run({"report", "--in", dir.file("pt.json"), dir.file("fr.json"), dir.file("ce.json"),
             "--format", "md"});
    CHECK(r.code == 0);
    CHECK(r.out.find("config: ways=5 shots=5") != std::string::npos);
    CHECK(r.out.find("| method | mean_f1 | ci95 | mean_seconds |") != std::string::npos);
    CHECK(r.out.find("| pt |") != std::string::npos);
    CHECK(r.out.find("| fr |") != std::string::npos);
    CHECK(r.out.find("| ce |") != std::string::npos);

    // rows ordered by mean_f1, best first
    std::vector<std::pair<double, std::string>> rows;
    for (const auto& m : {"pt", "fr", "ce"}) {
      const auto j = json::parse(testsupport::read_text(dir.file(std::string(m) + ".json")));
      rows.emplace_back(j["mean_f1"].get<double>(), m);
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::size_t last = 0;
    for (const auto& [f1, name] : rows) {
      const auto pos = r.out.find("| " + name + " |");
      REQUIRE(pos != std::string::npos);
      CHECK(pos > last);
      last = pos;
    }
  }

  SUBCASE("csv") {
    const auto r = run({"report", "--in", dir.file("pt.json"), dir.file("ce.json"), "--format",
                        "csv"});
    CHECK(r.code == 0);
    CHECK(r.out.rfind("method,mean_f1,ci95,mean_seconds\n", 0) == 0);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 3);
  }

  SUBCASE("single input renders one row") {
    const auto r = run({"report", "--in", dir.file("fr.json")});
    CHECK(r.code == 0);
    CHECK(r.out.find("| fr |") != std::string::npos);
  }
}

TEST_CASE("report refuses runs with different task shapes") {
  testsupport::TempDir dir;
  const auto corpus = bench_corpus(dir);
  auto r = run({"bench", "--embeddings", corpus, "--method", "pt", "--episodes", "3", "--out",
                dir.file("a.json")});
  REQUIRE(r.code == 0);
  r = run({"bench", "--embeddings", corpus, "--method", "pt", "--shots", "3", "--episodes", "3",
           "--out", dir.file("b.json")});
  REQUIRE(r.code == 0);

  const auto mixed = run({"report", "--in", dir.file("a.json"), dir.file("b.json")});
  CHECK(mixed.code == 2);
  CHECK(mixed.err.find("a.json") != std::string::npos);
  CHECK(mixed.err.find("b.json") != std::string::npos);
}

TEST_CASE("report rejects unreadable inputs") {
  testsupport::TempDir dir;
  testsupport::write_text(dir.file("junk.json"), "not json at all");
  const auto r = run({"report", "--in", dir.file("junk.json")});
  CHECK(r.code == 2);

  const auto missing = run({"report", "--in", dir.file("absent.json")});
  CHECK(missing.code == 2);
}

TEST_CASE("report format flag only accepts md and csv") {
  testsupport::TempDir dir;
  testsupport::write_text(dir.file("r.json"), "{}");
  const auto r = run({"report", "--in", dir.file("r.json"), "--format", "xml"});
  CHECK(r.code == 2);
}

}  // TEST_SUITE
