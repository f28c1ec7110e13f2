#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sessionlens/model.hpp"

namespace sessionlens {

struct ManifestEntry {
  SessionId id;
  std::string dir;
};

struct DatasetManifest {
  std::string dataset_name;
  std::vector<std::string> procedure_labels;
  std::vector<ManifestEntry> sessions;
};

enum class Presence { present, absent };

struct Gap {
  std::string stream;
  double start_s = 0.0;
  double end_s = 0.0;
};

// Stream keys: procedures, errors, phases, workload.attention, workload.perception,
// workload.memory, imu, gaze, video.
struct QualityReport {
  SessionId session_id;
  bool loaded = false;
  std::optional<Violation> rejection;
  std::map<std::string, Presence> stream_presence;
  std::vector<Gap> gaps;
  std::map<std::string, double> coverage;  // sampled streams only
  std::vector<std::string> diagnostics;
};

const std::vector<std::string>& quality_stream_keys();

struct Dataset {
  DatasetManifest manifest;
  std::filesystem::path root;
  std::vector<Session> sessions;  // manifest order, rejected sessions omitted
  std::vector<QualityReport> reports;  // one per manifest entry

  const Session* find(const SessionId& id) const;
};

// Missing or malformed manifest.
class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

DatasetManifest read_manifest(const std::filesystem::path& root);

// Loads one bundle directory. The session is nullopt when it was rejected; the report
// always describes what was found.
std::pair<std::optional<Session>, QualityReport> load_session(
    const std::filesystem::path& dir, const SessionId& id,
    const std::vector<std::string>& procedure_labels);

// Bundles are parsed concurrently; output order follows the manifest.
Dataset load_dataset(const std::filesystem::path& root);

// Spans where consecutive timestamps (or the session edges) are further apart than
// kGapFactor nominal periods. A gap starts one period after the last sample before it.
std::vector<std::pair<double, double>> detect_gaps(const std::vector<double>& timestamps,
                                                   double duration_s, double nominal_rate_hz);

}  // namespace sessionlens
