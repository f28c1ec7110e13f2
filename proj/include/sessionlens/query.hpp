#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "sessionlens/ingest.hpp"
#include "sessionlens/model.hpp"

namespace sessionlens::query {

inline constexpr std::size_t kMaxConfidencePoints = 2000;
inline constexpr std::size_t kDefaultMaxPoints = 4000;

// A request the caller got wrong: bad window, unknown channel, absent stream.
class QueryError : public std::invalid_argument {
 public:
  QueryError(std::string code, const std::string& message)
      : std::invalid_argument(message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

struct ConfidencePoint {
  double t_s = 0.0;
  double confidence = 0.0;

  bool operator==(const ConfidencePoint&) const = default;
};

struct TimelineBundle {
  SessionId session_id;
  double duration_s = 0.0;
  WorkloadCategory category = WorkloadCategory::attention;
  std::vector<Interval> procedures;
  std::vector<Interval> errors;
  std::vector<Interval> phases;
  std::vector<WorkloadRun> workload;
  std::vector<ConfidencePoint> confidence;

  bool operator==(const TimelineBundle&) const = default;
};

struct VideoWindow {
  double start_s = 0.0;
  double end_s = 0.0;
};

struct BrushResult {
  double t0 = 0.0;
  double t1 = 0.0;
  TimelineBundle timeline;
  std::vector<std::string> labels_touched;  // sorted
  std::optional<VideoWindow> video;
};

struct SeriesPoint {
  double t_s = 0.0;
  double value = 0.0;
};

struct SeriesSlice {
  SensorKind stream = SensorKind::imu;
  std::string channel;
  double t0 = 0.0;
  double t1 = 0.0;
  std::vector<SeriesPoint> points;
  bool decimated = false;
};

TimelineBundle build_timeline(const Session& session, WorkloadCategory category);

BrushResult brush(const Session& session, double t0, double t1, WorkloadCategory category);

// Raw channel names plus derived: accel_mag, gyro_mag, mag_mag (imu);
// gaze_angular_speed, gaze_origin_speed (gaze).
std::vector<std::string> valid_channels(SensorKind stream);

SeriesSlice slice_series(const Session& session, SensorKind stream, const std::string& channel,
                         double t0, double t1, std::size_t max_points = kDefaultMaxPoints);

// Keeps at most max_points points by emitting each bucket's minimum and maximum in time
// order. max_points must be at least 2.
std::vector<SeriesPoint> minmax_decimate(const std::vector<SeriesPoint>& points,
                                         std::size_t max_points);

struct SessionFilter {
  std::optional<std::set<SubjectId>> subjects;
  std::optional<std::set<TrialId>> trials;
  std::optional<std::size_t> top_k_trials;
};

struct SessionMeta {
  SessionId id;
  SubjectId subject;
  TrialId trial;
  double duration_s = 0.0;
  std::map<std::string, bool> streams;
};

// Sorted by (trial, subject, id).
std::vector<SessionMeta> list_sessions(const Dataset& dataset, const SessionFilter& filter);

}  // namespace sessionlens::query
