#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace fewshot {

struct MockProviderOptions {
  std::uint64_t seed = 0;
  int dim = 64;
  int rate_limit_every = 0;    // every nth request answers 429 (0 = never)
  int truncate_every = 0;      // every nth response body is cut short (0 = never)
  bool shuffle_data = false;   // scramble the order of the response "data" array
  std::string require_bearer;  // nonempty: reject requests missing this bearer token
};

/// In-process embeddings endpoint for tests and offline runs. Binds an
/// ephemeral local port. Embeddings are a pure function of
/// (seed, model, text), so runs are bit-stable. Every request is recorded
/// for payload audits.
class MockProvider {
 public:
  explicit MockProvider(MockProviderOptions options = {});
  ~MockProvider();

  MockProvider(const MockProvider&) = delete;
  MockProvider& operator=(const MockProvider&) = delete;

  int port() const;
  std::string base_url() const;

  int request_count() const;
  std::vector<std::string> request_bodies() const;
  std::vector<std::string> request_targets() const;  // "METHOD /path?query"

  /// Deterministic unit vector for one text.
  static Eigen::VectorXd embedding_for(std::uint64_t seed, const std::string& model,
                                       const std::string& text, int dim);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fewshot
