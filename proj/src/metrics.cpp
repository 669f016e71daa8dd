#include "fewshot/metrics.hpp"

#include <cmath>
#include <string>

#include "fewshot/errors.hpp"

namespace fewshot {

namespace {

void check_pair(const std::vector<int>& truth, const std::vector<int>& predicted, int ways) {
  if (truth.size() != predicted.size()) {
    throw ValidationError("truth and prediction lengths differ (" +
                          std::to_string(truth.size()) + " vs " +
                          std::to_string(predicted.size()) + ")");
  }
  if (truth.empty()) throw ValidationError("cannot score zero predictions");
  for (const std::vector<int>* v : {&truth, &predicted}) {
    for (int y : *v) {
      if (y < 0 || y >= ways) {
        throw ValidationError("label " + std::to_string(y) + " outside 0.." +
                              std::to_string(ways - 1));
      }
    }
  }
}

std::string dump_number(double x) { return nlohmann::json(x).dump(); }

}  // namespace

const std::vector<int>& EvalAccess::query_labels(const Episode& episode) {
  return episode.query_labels_;
}

double accuracy(const std::vector<int>& truth, const std::vector<int>& predicted) {
  if (truth.size() != predicted.size()) {
    throw ValidationError("truth and prediction lengths differ");
  }
  if (truth.empty()) throw ValidationError("cannot score zero predictions");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == predicted[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double macro_f1(const std::vector<int>& truth, const std::vector<int>& predicted, int ways) {
  if (ways < 1) throw ValidationError("ways must be positive");
  check_pair(truth, predicted, ways);

  std::vector<std::size_t> tp(static_cast<std::size_t>(ways), 0);
  std::vector<std::size_t> fp(tp), fn(tp);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == predicted[i]) {
      ++tp[static_cast<std::size_t>(truth[i])];
    } else {
      ++fp[static_cast<std::size_t>(predicted[i])];
      ++fn[static_cast<std::size_t>(truth[i])];
    }
  }

  double total = 0.0;
  for (int k = 0; k < ways; ++k) {
    const auto idx = static_cast<std::size_t>(k);
    const double p_den = static_cast<double>(tp[idx] + fp[idx]);
    const double r_den = static_cast<double>(tp[idx] + fn[idx]);
    const double precision = p_den > 0.0 ? static_cast<double>(tp[idx]) / p_den : 0.0;
    const double recall = r_den > 0.0 ? static_cast<double>(tp[idx]) / r_den : 0.0;
    const double f1 =
        (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    total += f1;
  }
  return total / static_cast<double>(ways);
}

EpisodeResult evaluate(const Episode& episode, const EpisodePrediction& prediction) {
  const std::vector<int>& truth = EvalAccess::query_labels(episode);
  EpisodeResult result;
  result.index = episode.index();
  result.f1 = macro_f1(truth, prediction.predicted, episode.ways());
  result.acc = accuracy(truth, prediction.predicted);
  result.seconds = prediction.train_seconds;
  return result;
}

void aggregate(BenchmarkReport& report) {
  const std::size_t n = report.episodes.size();
  if (n == 0) throw ValidationError("cannot aggregate an empty result set");

  double f1_sum = 0.0;
  double sec_sum = 0.0;
  for (const EpisodeResult& r : report.episodes) {
    f1_sum += r.f1;
    sec_sum += r.seconds;
  }
  report.mean_f1 = f1_sum / static_cast<double>(n);
  report.mean_seconds = sec_sum / static_cast<double>(n);

  if (n == 1) {
    report.std_f1 = 0.0;
  } else {
    double ss = 0.0;
    for (const EpisodeResult& r : report.episodes) {
      const double d = r.f1 - report.mean_f1;
      ss += d * d;
    }
    report.std_f1 = std::sqrt(ss / static_cast<double>(n - 1));
  }
  report.ci95 = 1.96 * report.std_f1 / std::sqrt(static_cast<double>(n));
}

nlohmann::ordered_json report_to_json(const BenchmarkReport& report) {
  nlohmann::ordered_json j;
  j["config"] = report.config;
  j["mean_f1"] = report.mean_f1;
  j["std_f1"] = report.std_f1;
  j["ci95"] = report.ci95;
  j["mean_seconds"] = report.mean_seconds;
  nlohmann::ordered_json episodes = nlohmann::ordered_json::array();
  for (const EpisodeResult& r : report.episodes) {
    nlohmann::ordered_json e;
    e["i"] = r.index;
    e["f1"] = r.f1;
    e["acc"] = r.acc;
    e["sec"] = r.seconds;
    episodes.push_back(std::move(e));
  }
  j["episodes"] = std::move(episodes);
  return j;
}

BenchmarkReport report_from_json(const nlohmann::json& j) {
  for (const char* key : {"config", "mean_f1", "std_f1", "ci95", "mean_seconds", "episodes"}) {
    if (!j.contains(key)) {
      throw ValidationError(std::string("report is missing key \"") + key + "\"");
    }
  }
  BenchmarkReport report;
  report.config = j["config"];
  report.mean_f1 = j["mean_f1"].get<double>();
  report.std_f1 = j["std_f1"].get<double>();
  report.ci95 = j["ci95"].get<double>();
  report.mean_seconds = j["mean_seconds"].get<double>();
  if (!j["episodes"].is_array()) throw ValidationError("report key \"episodes\" must be an array");
  for (const auto& e : j["episodes"]) {
    for (const char* key : {"i", "f1", "acc", "sec"}) {
      if (!e.contains(key)) {
        throw ValidationError(std::string("episode entry is missing key \"") + key + "\"");
      }
    }
    EpisodeResult r;
    r.index = e["i"].get<std::uint64_t>();
    r.f1 = e["f1"].get<double>();
    r.acc = e["acc"].get<double>();
    r.seconds = e["sec"].get<double>();
    report.episodes.push_back(r);
  }
  return report;
}

std::string report_csv(const BenchmarkReport& report) {
  std::string out = "i,f1,acc,sec\n";
  for (const EpisodeResult& r : report.episodes) {
    out += std::to_string(r.index);
    out += ',';
    out += dump_number(r.f1);
    out += ',';
    out += dump_number(r.acc);
    out += ',';
    out += dump_number(r.seconds);
    out += '\n';
  }
  return out;
}

}  // namespace fewshot
