#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fewshot {

struct EmbedArgs {
  std::string input;     // JSONL of {"id","label","text"}
  std::string out;       // JSONL corpus with embeddings
  std::string endpoint;  // provider base URL
  std::string model;
  std::string cache;     // cache directory, empty disables
  int batch_size = 64;
  int retries = 5;
  double timeout_seconds = 30.0;
  int concurrency = 4;
};

struct BenchArgs {
  std::string embeddings;  // JSONL corpus
  std::string method = "ce";
  int ways = 5;
  int shots = 5;
  int queries = 15;
  std::uint64_t episodes = 1000;
  std::uint64_t seed = 0;
  double lambda = 1.0;
  double alpha = 1.0;
  int iterations = 150;
  double learning_rate = 1e-3;
  int workers = 1;
  std::string out;            // report JSON path, empty skips
  std::string csv;            // per-episode CSV path, empty skips
  std::string dump_episodes;  // JSONL of sampled index lists, empty skips
  bool raw = false;           // skip the default L2 normalization
};

struct ReportArgs {
  std::vector<std::string> inputs;  // report JSON files
  std::string format = "md";        // md or csv
};

struct MockServeArgs {
  std::uint64_t seed = 0;
  int dim = 64;
};

int cmd_embed(const EmbedArgs& args);
int cmd_bench(const BenchArgs& args);
int cmd_report(const ReportArgs& args);
int cmd_mock_serve(const MockServeArgs& args);  // serves until interrupted

/// Parses argv, dispatches, and maps failures to exit codes: 0 success,
/// 1 runtime failure, 2 usage or validation error. Failures print one line
/// of JSON to stderr: {"error":{"kind":...,"message":...}}.
int run_cli(int argc, char** argv);

}  // namespace fewshot
