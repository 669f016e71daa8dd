#include "fewshot/mock_provider.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "fewshot/errors.hpp"
#include "fewshot/rng.hpp"

namespace fewshot {

namespace {

using nlohmann::json;

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

double unit_interval(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace

struct MockProvider::Impl {
  MockProviderOptions options;
  httplib::Server server;
  std::thread runner;
  int port = 0;

  mutable std::mutex sync;
  std::atomic<int> requests{0};
  std::vector<std::string> bodies;
  std::vector<std::string> targets;

  explicit Impl(MockProviderOptions opts) : options(opts) {
    server.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res);
    });
    port = server.bind_to_any_port("127.0.0.1");
    if (port <= 0) throw Error("mock provider could not bind a port");
    runner = std::thread([this]() { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~Impl() {
    server.stop();
    if (runner.joinable()) runner.join();
  }

  void handle(const httplib::Request& req, httplib::Response& res) {
    const int serial = requests.fetch_add(1) + 1;
    {
      std::lock_guard<std::mutex> lock(sync);
      std::string target = req.method + " " + req.path;
      char sep = '?';
      for (const auto& [key, value] : req.params) {
        target += sep;
        target += key;
        target += '=';
        target += value;
        sep = '&';
      }
      targets.push_back(std::move(target));
      bodies.push_back(req.body);
    }

    if (!options.require_bearer.empty()) {
      if (req.get_header_value("Authorization") != "Bearer " + options.require_bearer) {
        res.status = 401;
        res.set_content(R"({"error":"unauthorized"})", "application/json");
        return;
      }
    }
    if (options.rate_limit_every > 0 && serial % options.rate_limit_every == 0) {
      res.status = 429;
      res.set_content(R"({"error":"rate limited"})", "application/json");
      return;
    }

    json payload;
    try {
      payload = json::parse(req.body);
    } catch (const json::parse_error&) {
      res.status = 400;
      res.set_content(R"({"error":"malformed body"})", "application/json");
      return;
    }
    if (!payload.is_object() || !payload.contains("model") || !payload["model"].is_string() ||
        !payload.contains("input") || !payload["input"].is_array()) {
      res.status = 400;
      res.set_content(R"({"error":"expected model and input"})", "application/json");
      return;
    }

    const std::string model = payload["model"].get<std::string>();
    json data = json::array();
    for (std::size_t i = 0; i < payload["input"].size(); ++i) {
      if (!payload["input"][i].is_string()) {
        res.status = 400;
        res.set_content(R"({"error":"input entries must be strings"})", "application/json");
        return;
      }
      const Eigen::VectorXd v = embedding_for(options.seed, model,
                                              payload["input"][i].get<std::string>(), options.dim);
      json item;
      item["index"] = i;
      item["embedding"] = std::vector<double>(v.data(), v.data() + v.size());
      data.push_back(std::move(item));
    }
    if (options.shuffle_data) {
      std::reverse(data.begin(), data.end());  // order differs from input for any n >= 2
    }

    json body;
    body["data"] = std::move(data);
    std::string text = body.dump();
    if (options.truncate_every > 0 && serial % options.truncate_every == 0) {
      text.resize(text.size() / 2);
    }
    res.status = 200;
    res.set_content(text, "application/json");
  }
};

MockProvider::MockProvider(MockProviderOptions options) {
  if (options.dim < 1) throw ValidationError("mock provider dim must be at least 1");
  impl_ = std::make_unique<Impl>(options);
}

MockProvider::~MockProvider() = default;

int MockProvider::port() const { return impl_->port; }

std::string MockProvider::base_url() const {
  return "http://127.0.0.1:" + std::to_string(impl_->port);
}

int MockProvider::request_count() const { return impl_->requests.load(); }

std::vector<std::string> MockProvider::request_bodies() const {
  std::lock_guard<std::mutex> lock(impl_->sync);
  return impl_->bodies;
}

std::vector<std::string> MockProvider::request_targets() const {
  std::lock_guard<std::mutex> lock(impl_->sync);
  return impl_->targets;
}

Eigen::VectorXd MockProvider::embedding_for(std::uint64_t seed, const std::string& model,
                                            const std::string& text, int dim) {
  if (dim < 1) throw ValidationError("dim must be at least 1");
  std::string keyed;
  keyed.reserve(model.size() + 1 + text.size());
  keyed += model;
  keyed.push_back('\0');
  keyed += text;
  const std::uint64_t state = splitmix64(seed ^ fnv1a64(keyed));

  Eigen::VectorXd v(dim);
  for (int j = 0; j < dim; ++j) {
    v[j] = 2.0 * unit_interval(splitmix64(state + 1 + static_cast<std::uint64_t>(j))) - 1.0;
  }
  const double norm = v.norm();
  if (norm == 0.0) v[0] = 1.0;  // unreachable in practice, keeps the contract total
  else v /= norm;
  return v;
}

}  // namespace fewshot
