#ifndef DRBENCH_SERVICE_HPP
#define DRBENCH_SERVICE_HPP

// HTTP client for an embedding service exposing
//   GET  /health
//   POST /tokenize  {"model": str, "texts": [str]}       -> {"token_ids": [[int]]}
//   POST /embed     {"model": str, "token_ids": [[int]]} -> {"dim": int, "embeddings": [[float]]}

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "drbench/embed.hpp"
#include "drbench/error.hpp"
#include "drbench/perturb.hpp"
#include "drbench/tokenizer.hpp"

namespace drbench {

inline constexpr std::size_t kDefaultServiceBatch = 64;

struct ServiceEndpoint {
  std::string url;    // scheme://host:port
  std::string model;
  std::size_t batch_size = kDefaultServiceBatch;
  int timeout_seconds = 120;
};

class ServiceClient {
 public:
  explicit ServiceClient(ServiceEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    if (endpoint_.batch_size == 0) throw InvalidArgument("service batch size must be positive");
  }

  const ServiceEndpoint& endpoint() const noexcept { return endpoint_; }

  nlohmann::json health() const {
    auto cli = client();
    auto res = cli.Get("/health");
    return unwrap(res, "/health");
  }

  std::vector<TokenSequence> tokenize(std::span<const std::string> texts) const {
    std::vector<TokenSequence> out;
    out.reserve(texts.size());
    for (std::size_t lo = 0; lo < texts.size(); lo += endpoint_.batch_size) {
      const auto chunk = texts.subspan(lo, std::min(endpoint_.batch_size, texts.size() - lo));
      nlohmann::json req{{"model", endpoint_.model},
                         {"texts", std::vector<std::string>(chunk.begin(), chunk.end())}};
      auto body = post("/tokenize", req);
      const auto& ids = field(body, "token_ids", "/tokenize");
      if (!ids.is_array() || ids.size() != chunk.size()) {
        throw ProviderError("/tokenize returned " + std::to_string(ids.size()) + " sequences for " +
                            std::to_string(chunk.size()) + " texts");
      }
      for (const auto& row : ids) {
        TokenSequence seq;
        try {
          seq.ids = row.get<std::vector<TokenId>>();
        } catch (const nlohmann::json::exception& e) {
          throw ProviderError(std::string("/tokenize returned malformed ids: ") + e.what());
        }
        out.push_back(std::move(seq));
      }
    }
    return out;
  }

  // One vector per sequence, in request order. Requests are split into
  // batches of at most `batch_size`; every vector must share one dimension.
  std::vector<EmbeddingVector> fetch_embeddings(std::span<const TokenSequence> seqs) const {
    std::vector<EmbeddingVector> out;
    out.reserve(seqs.size());
    std::optional<std::size_t> dim;
    for (std::size_t lo = 0; lo < seqs.size(); lo += endpoint_.batch_size) {
      const auto chunk = seqs.subspan(lo, std::min(endpoint_.batch_size, seqs.size() - lo));
      nlohmann::json ids = nlohmann::json::array();
      for (const auto& s : chunk) ids.push_back(s.ids);
      auto body = post("/embed", nlohmann::json{{"model", endpoint_.model}, {"token_ids", ids}});

      const auto& embeddings = field(body, "embeddings", "/embed");
      if (!embeddings.is_array() || embeddings.size() != chunk.size()) {
        throw ProviderError("/embed returned " + std::to_string(embeddings.size()) +
                            " vectors for " + std::to_string(chunk.size()) + " sequences");
      }
      std::size_t declared = 0;
      try {
        declared = field(body, "dim", "/embed").get<std::size_t>();
      } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("/embed returned a malformed dim: ") + e.what());
      }
      if (!dim) dim = declared;
      if (declared != *dim) {
        throw ProviderError("dimension mismatch: service returned dim " + std::to_string(declared) +
                            " after dim " + std::to_string(*dim));
      }
      for (const auto& row : embeddings) {
        EmbeddingVector v;
        try {
          v = row.get<EmbeddingVector>();
        } catch (const nlohmann::json::exception& e) {
          throw ProviderError(std::string("/embed returned a malformed vector: ") + e.what());
        }
        if (v.size() != *dim) {
          throw ProviderError("dimension mismatch: vector of length " + std::to_string(v.size()) +
                              " in a dim " + std::to_string(*dim) + " response");
        }
        out.push_back(std::move(v));
      }
    }
    return out;
  }

 private:
  httplib::Client client() const {
    httplib::Client cli(endpoint_.url);
    cli.set_connection_timeout(endpoint_.timeout_seconds, 0);
    cli.set_read_timeout(endpoint_.timeout_seconds, 0);
    cli.set_write_timeout(endpoint_.timeout_seconds, 0);
    return cli;
  }

  nlohmann::json post(const char* route, const nlohmann::json& req) const {
    auto cli = client();
    auto res = cli.Post(route, req.dump(), "application/json");
    return unwrap(res, route);
  }

  nlohmann::json unwrap(const httplib::Result& res, const std::string& route) const {
    if (!res) {
      throw ProviderError("cannot reach " + endpoint_.url + route + ": " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
      throw ProviderError(route + " failed with HTTP " + std::to_string(res->status) + ": " +
                          server_message(res->body));
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ProviderError(route + " returned invalid JSON: " + e.what());
    }
  }

  static const nlohmann::json& field(const nlohmann::json& body, const char* name, const char* route) {
    if (!body.is_object() || !body.contains(name)) {
      throw ProviderError(std::string(route) + " response lacks \"" + name + "\"");
    }
    return body.at(name);
  }

  // Pulls "error"/"detail"/"message" out of a JSON error body, else returns it verbatim.
  static std::string server_message(const std::string& body) {
    auto parsed = nlohmann::json::parse(body, nullptr, false);
    if (parsed.is_object()) {
      for (const char* key : {"error", "detail", "message"}) {
        if (parsed.contains(key)) {
          const auto& v = parsed.at(key);
          return v.is_string() ? v.get<std::string>() : v.dump();
        }
      }
    }
    return body;
  }

  ServiceEndpoint endpoint_;
};

// The service owns its tokenizer; perturbation needs its vocabulary size and
// special ids from configuration.
class ServiceProvider final : public EmbeddingProvider {
 public:
  ServiceProvider(ServiceEndpoint endpoint, TokenSpace space)
      : client_(std::move(endpoint)), space_(std::move(space)) {}

  std::string name() const override { return client_.endpoint().model; }
  TokenSpace token_space() const override { return space_; }

  std::vector<TokenSequence> tokenize(std::span<const std::string> texts) override {
    return client_.tokenize(texts);
  }

  std::vector<EmbeddingVector> embed(std::span<const TokenSequence> seqs) override {
    return client_.fetch_embeddings(seqs);
  }

 private:
  ServiceClient client_;
  TokenSpace space_;
};

}  // namespace drbench

#endif  // DRBENCH_SERVICE_HPP
