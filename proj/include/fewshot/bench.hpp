#pragma once

#include <cstdint>
#include <functional>

#include "fewshot/corpus.hpp"
#include "fewshot/metrics.hpp"

namespace fewshot {

struct BenchOptions {
  MethodSpec method;
  EpisodeSpec episode;        // episode_index ignored; set per draw
  std::uint64_t episodes = 1000;
  OptimizerConfig optimizer;
  int workers = 1;            // 0 means hardware concurrency

  void validate() const;
};

/// Runs `episodes` independent tasks and aggregates. Results land in a slot
/// keyed by episode index, so the outcome is identical for any worker count.
/// progress, if set, is called after each finished episode with (done, total)
/// from one thread at a time.
BenchmarkReport run_benchmark(const LabeledCorpus& corpus, const BenchOptions& options,
                              const std::function<void(std::uint64_t, std::uint64_t)>& progress = {});

}  // namespace fewshot
