#include "fewshot/bench.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "fewshot/errors.hpp"
#include "fewshot/version.hpp"

namespace fewshot {

void BenchOptions::validate() const {
  method.validate();
  episode.validate();
  optimizer.validate();
  if (episodes < 1) throw ValidationError("episode count must be at least 1");
  if (workers < 0) throw ValidationError("workers must be non-negative");
}

BenchmarkReport run_benchmark(const LabeledCorpus& corpus, const BenchOptions& options,
                              const std::function<void(std::uint64_t, std::uint64_t)>& progress) {
  options.validate();
  // fail fast on infeasible specs before spinning up workers
  {
    EpisodeSpec probe = options.episode;
    probe.episode_index = 0;
    sample_episode(corpus, probe);
  }

  unsigned worker_count = options.workers == 0
                              ? std::max(1u, std::thread::hardware_concurrency())
                              : static_cast<unsigned>(options.workers);
  if (static_cast<std::uint64_t>(worker_count) > options.episodes) {
    worker_count = static_cast<unsigned>(options.episodes);
  }

  std::vector<EpisodeResult> results(options.episodes);
  std::atomic<std::uint64_t> next{0};
  std::atomic<std::uint64_t> done{0};
  std::mutex sync;
  std::exception_ptr failure;

  auto work = [&]() {
    for (;;) {
      const std::uint64_t i = next.fetch_add(1);
      if (i >= options.episodes) return;
      {
        std::lock_guard<std::mutex> lock(sync);
        if (failure) return;
      }
      try {
        EpisodeSpec spec = options.episode;
        spec.episode_index = i;
        const Episode episode = sample_episode(corpus, spec);
        const EpisodePrediction prediction = run_method(episode, options.method, options.optimizer);
        results[i] = evaluate(episode, prediction);
        const std::uint64_t finished = done.fetch_add(1) + 1;
        if (progress) {
          std::lock_guard<std::mutex> lock(sync);
          progress(finished, options.episodes);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(sync);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  if (worker_count <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(worker_count);
    for (unsigned w = 0; w < worker_count; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  BenchmarkReport report;
  report.config = nlohmann::ordered_json{
      {"version", kVersion},
      {"method", method_name(options.method.method)},
      {"ways", options.episode.ways},
      {"shots", options.episode.shots},
      {"queries", options.episode.queries_per_class},
      {"episodes", options.episodes},
      {"seed", options.episode.seed},
      {"lambda", options.method.lambda},
      {"alpha", options.method.alpha},
      {"iterations", options.optimizer.iterations},
      {"learning_rate", options.optimizer.learning_rate},
      {"workers", options.workers},
  };
  report.episodes = std::move(results);
  aggregate(report);
  return report;
}

}  // namespace fewshot
