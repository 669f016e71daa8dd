#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fewshot/sampler.hpp"
#include "fewshot/trainer.hpp"

namespace fewshot {

/// The only gate to an episode's held-out query labels. Defined in the
/// metrics translation unit; training code cannot see through it.
struct EvalAccess {
  static const std::vector<int>& query_labels(const Episode& episode);
};

/// Fraction of predictions equal to the truth.
double accuracy(const std::vector<int>& truth, const std::vector<int>& predicted);

/// Unweighted mean over classes of 2PR/(P+R), with empty-denominator
/// precision, recall, or F1 taken as zero. Classes are 0..ways-1 even if
/// absent from both vectors.
double macro_f1(const std::vector<int>& truth, const std::vector<int>& predicted, int ways);

struct EpisodeResult {
  std::uint64_t index = 0;
  double f1 = 0.0;
  double acc = 0.0;
  double seconds = 0.0;
};

/// Scores a prediction against the episode's held-out labels.
EpisodeResult evaluate(const Episode& episode, const EpisodePrediction& prediction);

struct BenchmarkReport {
  nlohmann::ordered_json config;  // method, ways, shots, queries, episodes, seed, lambda, alpha
  std::vector<EpisodeResult> episodes;
  double mean_f1 = 0.0;
  double std_f1 = 0.0;   // sample standard deviation, n-1
  double ci95 = 0.0;     // 1.96 * std / sqrt(episodes)
  double mean_seconds = 0.0;
};

/// Fills the summary fields from the per-episode results. One episode gives
/// std 0; zero episodes is a ValidationError.
void aggregate(BenchmarkReport& report);

nlohmann::ordered_json report_to_json(const BenchmarkReport& report);
BenchmarkReport report_from_json(const nlohmann::json& j);

/// Header row then one row per episode: i,f1,acc,sec.
std::string report_csv(const BenchmarkReport& report);

}  // namespace fewshot
