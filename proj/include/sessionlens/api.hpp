#pragma once

#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "sessionlens/embed.hpp"
#include "sessionlens/ingest.hpp"

namespace sessionlens::service {

using Json = nlohmann::json;
using QueryParams = std::multimap<std::string, std::string>;

// Serialized as {"code", "message", "detail"} with the given HTTP status.
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, std::string code, const std::string& message, std::string detail = {})
      : std::runtime_error(message), status_(status), code_(std::move(code)), detail_(std::move(detail)) {}

  int status() const { return status_; }
  const std::string& code() const { return code_; }
  const std::string& detail() const { return detail_; }
  Json to_json() const;

 private:
  int status_;
  std::string code_;
  std::string detail_;
};

struct VideoFile {
  std::filesystem::path path;
  std::string content_type;
};

// Endpoint logic over an immutable dataset snapshot. Thread-safe; reload() swaps the
// snapshot and drops cached embeddings.
class Api {
 public:
  Api(std::shared_ptr<const Dataset> dataset, embed::EmbedParams embed_defaults);

  Json health() const;
  Json sessions(const QueryParams& params) const;
  Json quality() const;
  Json embedding(const QueryParams& params) const;
  Json aggregate(const Json& body) const;
  Json timeline(const std::string& id, const QueryParams& params) const;
  Json matrix(const std::string& id, const QueryParams& params) const;
  Json brush(const std::string& id, const QueryParams& params) const;
  Json series(const std::string& id, const QueryParams& params) const;
  VideoFile video(const std::string& id) const;

  void reload(std::shared_ptr<const Dataset> dataset);
  std::shared_ptr<const Dataset> dataset() const;
  // Embeddings computed so far for the current snapshot.
  std::size_t embedding_computations() const;

 private:
  struct EmbeddingCache {
    std::mutex mutex;
    std::map<std::string, std::shared_future<Json>> entries;
    std::size_t computations = 0;
  };
  struct Snapshot {
    std::shared_ptr<const Dataset> dataset;
    std::shared_ptr<EmbeddingCache> cache;
  };

  Snapshot snapshot() const;

  embed::EmbedParams embed_defaults_;
  mutable std::mutex snapshot_mutex_;
  Snapshot snapshot_;
};

// JSON forms shared by the endpoints.
Json quality_json(const QualityReport& report);
Json finite_or_null(double v);
Json finite_or_null(const std::optional<double>& v);
// True when every number in the document is finite.
bool all_numbers_finite(const Json& j);

}  // namespace sessionlens::service
