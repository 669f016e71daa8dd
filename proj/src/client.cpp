#include "fewshot/client.hpp"

#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <mutex>
#include <random>
#include <thread>
#include <unordered_map>
#include <utility>

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "fewshot/errors.hpp"

namespace fewshot {

namespace {

using nlohmann::json;

std::string env_value(const std::string& name) {
  const char* value = std::getenv(name.c_str());
  return value == nullptr ? std::string() : std::string(value);
}

void sleep_with_jitter(int attempt, const ProviderConfig& config) {
  const double ceiling = std::min(config.backoff_cap_seconds,
                                  config.backoff_base_seconds * std::pow(2.0, attempt));
  if (ceiling <= 0.0) return;
  thread_local std::mt19937_64 gen(
      (static_cast<std::uint64_t>(std::random_device{}()) << 32) ^ std::random_device{}());
  std::uniform_real_distribution<double> jitter(0.0, ceiling);
  std::this_thread::sleep_for(std::chrono::duration<double>(jitter(gen)));
}

void append_u32(std::string& out, std::uint32_t value) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

void append_f64(std::string& out, double value) {
  const auto bits = std::bit_cast<std::uint64_t>(value);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

std::uint32_t parse_u32(const unsigned char* p) {
  std::uint32_t value = 0;
  for (int i = 0; i < 4; ++i) value |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return value;
}

double parse_f64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

constexpr char kCacheMagic[4] = {'F', 'S', 'E', 'M'};
constexpr std::uint32_t kCacheVersion = 1;

/// One fetched batch, ordered by the provider's "index" field.
std::vector<Eigen::VectorXd> parse_batch_response(const std::string& body,
                                                  std::size_t expected) {
  json parsed;
  try {
    parsed = json::parse(body);
  } catch (const json::parse_error&) {
    throw TransportError("unparseable response body");  // mapped to a retry upstream
  }
  if (!parsed.is_object() || !parsed.contains("data") || !parsed["data"].is_array()) {
    throw ProviderError("response has no \"data\" array");
  }
  const json& data = parsed["data"];
  if (data.size() != expected) {
    throw ProviderError("response carries " + std::to_string(data.size()) +
                        " items for " + std::to_string(expected) + " inputs");
  }
  std::vector<Eigen::VectorXd> out(expected);
  std::vector<bool> filled(expected, false);
  Eigen::Index dim = -1;
  for (const json& item : data) {
    if (!item.is_object() || !item.contains("index") || !item["index"].is_number_integer() ||
        !item.contains("embedding") || !item["embedding"].is_array()) {
      throw ProviderError("response item lacks \"index\" or \"embedding\"");
    }
    const auto idx = item["index"].get<long long>();
    if (idx < 0 || static_cast<std::size_t>(idx) >= expected ||
        filled[static_cast<std::size_t>(idx)]) {
      throw ProviderError("response item index " + std::to_string(idx) + " is out of range");
    }
    const json& emb = item["embedding"];
    if (emb.empty()) throw ProviderError("response embedding is empty");
    Eigen::VectorXd v(static_cast<Eigen::Index>(emb.size()));
    for (std::size_t k = 0; k < emb.size(); ++k) {
      if (!emb[k].is_number()) throw ProviderError("response embedding holds a non-number");
      v[static_cast<Eigen::Index>(k)] = emb[k].get<double>();
    }
    if (dim < 0) {
      dim = v.size();
    } else if (v.size() != dim) {
      throw ProviderError("inconsistent embedding dimensions within one batch");
    }
    out[static_cast<std::size_t>(idx)] = std::move(v);
    filled[static_cast<std::size_t>(idx)] = true;
  }
  return out;
}

std::vector<Eigen::VectorXd> fetch_batch(const std::vector<std::string>& batch,
                                         const ProviderConfig& config,
                                         const std::string& api_key) {
  json payload;
  payload["model"] = config.model;
  payload["input"] = batch;
  const std::string body = payload.dump();

  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

  std::string last_failure = "no attempt made";
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    if (attempt > 0) sleep_with_jitter(attempt - 1, config);

    httplib::Client client(config.base_url);
    const auto timeout = std::chrono::duration<double>(config.timeout_seconds);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Result res = client.Post("/v1/embeddings", headers, body, "application/json");
    if (!res) {
      last_failure = "connection failed (" + httplib::to_string(res.error()) + ")";
      continue;
    }
    if (res->status == 401 || res->status == 403) {
      throw AuthError("provider rejected credentials (status " + std::to_string(res->status) +
                      "); set " + config.api_key_env);
    }
    if (res->status == 429 || res->status >= 500) {
      last_failure = "status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw ProviderError("unexpected status " + std::to_string(res->status));
    }
    try {
      return parse_batch_response(res->body, batch.size());
    } catch (const TransportError& e) {
      last_failure = e.what();  // truncated or garbled body, worth retrying
      continue;
    }
  }
  throw TransportError("giving up on " + config.base_url + " after " +
                       std::to_string(config.max_retries + 1) + " attempts: " + last_failure);
}

}  // namespace

void ProviderConfig::validate() const {
  if (base_url.empty()) throw ValidationError("provider base_url is required");
  if (base_url.rfind("https://", 0) == 0) {
    throw ValidationError("this build speaks plain http only");
  }
  if (base_url.rfind("http://", 0) != 0) {
    throw ValidationError("base_url must start with http://");
  }
  if (model.empty()) throw ValidationError("provider model name is required");
  if (api_key_env.empty()) throw ValidationError("api_key_env must name an environment variable");
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (max_retries < 0) throw ValidationError("max_retries must be non-negative");
  if (!(timeout_seconds > 0.0)) throw ValidationError("timeout_seconds must be positive");
  if (max_concurrency < 1) throw ValidationError("max_concurrency must be at least 1");
  if (backoff_base_seconds < 0.0 || backoff_cap_seconds < 0.0) {
    throw ValidationError("backoff settings must be non-negative");
  }
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string cache_key(const std::string& model, const std::string& text) {
  std::string data;
  data.reserve(model.size() + 1 + text.size());
  data += model;
  data.push_back('\0');
  data += text;
  return sha256_hex(data);
}

std::filesystem::path cache_entry_path(const std::filesystem::path& cache_dir,
                                       const std::string& key) {
  return cache_dir / key.substr(0, 2) / (key + ".emb");
}

std::optional<Eigen::VectorXd> read_cache_entry(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return std::nullopt;
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (blob.size() < 12) return std::nullopt;
  const auto* p = reinterpret_cast<const unsigned char*>(blob.data());
  if (std::memcmp(p, kCacheMagic, 4) != 0) return std::nullopt;
  if (parse_u32(p + 4) != kCacheVersion) return std::nullopt;
  const std::uint32_t dim = parse_u32(p + 8);
  if (dim == 0 || blob.size() != 12 + 8 * static_cast<std::size_t>(dim)) return std::nullopt;
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  for (std::uint32_t i = 0; i < dim; ++i) {
    v[static_cast<Eigen::Index>(i)] = parse_f64(p + 12 + 8 * static_cast<std::size_t>(i));
  }
  if (!v.allFinite()) return std::nullopt;
  return v;
}

void write_cache_entry(const std::filesystem::path& file, const Eigen::VectorXd& vector) {
  std::filesystem::create_directories(file.parent_path());
  std::string blob;
  blob.reserve(12 + 8 * static_cast<std::size_t>(vector.size()));
  blob.append(kCacheMagic, 4);
  append_u32(blob, kCacheVersion);
  append_u32(blob, static_cast<std::uint32_t>(vector.size()));
  for (Eigen::Index i = 0; i < vector.size(); ++i) append_f64(blob, vector[i]);

  std::filesystem::path tmp = file;
  tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()) & 0xffff);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out.write(blob.data(), static_cast<std::streamsize>(blob.size())).flush()) {
      throw Error("cache write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, file);
}

std::vector<Eigen::VectorXd> embed_texts(const std::vector<std::string>& texts,
                                         const ProviderConfig& config,
                                         const std::filesystem::path& cache_dir) {
  config.validate();
  if (texts.empty()) throw ValidationError("no texts to embed");
  const std::string api_key = env_value(config.api_key_env);
  const bool use_cache = !cache_dir.empty();

  // dedupe, keeping first-occurrence order
  std::vector<std::string> unique_texts;
  std::unordered_map<std::string, std::size_t> unique_of_text;
  std::vector<std::size_t> unique_of_input(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    auto [it, inserted] = unique_of_text.emplace(texts[i], unique_texts.size());
    if (inserted) unique_texts.push_back(texts[i]);
    unique_of_input[i] = it->second;
  }

  std::vector<Eigen::VectorXd> fetched(unique_texts.size());
  std::vector<std::size_t> missing;
  for (std::size_t u = 0; u < unique_texts.size(); ++u) {
    if (use_cache) {
      const auto path = cache_entry_path(cache_dir, cache_key(config.model, unique_texts[u]));
      if (auto hit = read_cache_entry(path)) {
        fetched[u] = std::move(*hit);
        continue;
      }
    }
    missing.push_back(u);
  }

  if (!missing.empty()) {
    const std::size_t batch_size = static_cast<std::size_t>(config.batch_size);
    const std::size_t batch_count = (missing.size() + batch_size - 1) / batch_size;

    std::atomic<std::size_t> next{0};
    std::mutex sync;
    std::exception_ptr failure;

    auto work = [&]() {
      for (;;) {
        const std::size_t b = next.fetch_add(1);
        if (b >= batch_count) return;
        {
          std::lock_guard<std::mutex> lock(sync);
          if (failure) return;
        }
        const std::size_t begin = b * batch_size;
        const std::size_t end = std::min(begin + batch_size, missing.size());
        std::vector<std::string> batch;
        batch.reserve(end - begin);
        for (std::size_t m = begin; m < end; ++m) batch.push_back(unique_texts[missing[m]]);
        try {
          std::vector<Eigen::VectorXd> vectors = fetch_batch(batch, config, api_key);
          std::lock_guard<std::mutex> lock(sync);
          for (std::size_t m = begin; m < end; ++m) {
            fetched[missing[m]] = std::move(vectors[m - begin]);
            if (use_cache) {
              const auto path =
                  cache_entry_path(cache_dir, cache_key(config.model, unique_texts[missing[m]]));
              write_cache_entry(path, fetched[missing[m]]);
            }
          }
        } catch (...) {
          std::lock_guard<std::mutex> lock(sync);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    };

    const std::size_t worker_count =
        std::min<std::size_t>(static_cast<std::size_t>(config.max_concurrency), batch_count);
    if (worker_count <= 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(worker_count);
      for (std::size_t w = 0; w < worker_count; ++w) pool.emplace_back(work);
      for (std::thread& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
  }

  const Eigen::Index dim = fetched.empty() ? 0 : fetched.front().size();
  for (const Eigen::VectorXd& v : fetched) {
    if (v.size() != dim) throw ProviderError("inconsistent embedding dimensions across batches");
  }

  std::vector<Eigen::VectorXd> out(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) out[i] = fetched[unique_of_input[i]];
  return out;
}

}  // namespace fewshot
