#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fewshot {

/// Connection settings for the embeddings endpoint. The API key is resolved
/// from the environment variable named here, never stored in the config.
struct ProviderConfig {
  std::string base_url;  // e.g. http://127.0.0.1:8080
  std::string model;
  std::string api_key_env = "FEWSHOT_API_KEY";
  int batch_size = 64;
  int max_retries = 5;
  double timeout_seconds = 30.0;
  int max_concurrency = 4;
  double backoff_base_seconds = 0.5;  // doubles per attempt, full jitter
  double backoff_cap_seconds = 30.0;

  void validate() const;
};

/// One embedding per input text, in input order. The disk cache (if a
/// directory is given) is consulted first; misses are batched into requests
/// of at most batch_size, with up to max_concurrency in flight. 429 and 5xx
/// responses retry with exponential backoff; auth failures do not retry.
std::vector<Eigen::VectorXd> embed_texts(const std::vector<std::string>& texts,
                                         const ProviderConfig& config,
                                         const std::filesystem::path& cache_dir = {});

std::string sha256_hex(std::string_view data);

/// SHA-256 of model + NUL + text; NUL keeps ("ab","c") and ("a","bc") apart.
std::string cache_key(const std::string& model, const std::string& text);

/// {cache_dir}/{first 2 hex of key}/{key}.emb
std::filesystem::path cache_entry_path(const std::filesystem::path& cache_dir,
                                       const std::string& key);

/// nullopt on missing, truncated, or corrupt entries; corrupt cache means
/// re-fetch, never a crash.
std::optional<Eigen::VectorXd> read_cache_entry(const std::filesystem::path& file);

void write_cache_entry(const std::filesystem::path& file, const Eigen::VectorXd& vector);

}  // namespace fewshot
