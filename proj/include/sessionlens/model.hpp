#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sessionlens {

using SessionId = std::string;
using SubjectId = std::string;
using TrialId = std::string;

// Ordinal: Underload < Optimal < Overload.
enum class MentalState { underload = 0, optimal = 1, overload = 2 };

enum class WorkloadCategory { perception = 0, attention = 1, memory = 2 };

inline constexpr MentalState kAllStates[] = {MentalState::underload, MentalState::optimal,
                                             MentalState::overload};
inline constexpr WorkloadCategory kAllCategories[] = {
    WorkloadCategory::perception, WorkloadCategory::attention, WorkloadCategory::memory};

std::string_view to_string(MentalState s);
std::string_view to_string(WorkloadCategory c);
std::optional<MentalState> parse_mental_state(std::string_view s);
std::optional<WorkloadCategory> parse_workload_category(std::string_view s);

// A sampled stream counts as missing when consecutive samples are further apart than
// this many nominal periods.
inline constexpr double kGapFactor = 5.0;
inline constexpr double kDefaultWorkloadRateHz = 10.0;
// Point errors are widened to this extent.
inline constexpr double kMinErrorSpan = 0.1;

struct Interval {
  double start_s = 0.0;
  double end_s = 0.0;
  std::string label;

  double length() const { return end_s - start_s; }
  bool operator==(const Interval&) const = default;
};

enum class TrackKind { procedure, error, phase };

std::string_view to_string(TrackKind k);

struct IntervalTrack {
  TrackKind kind = TrackKind::procedure;
  std::vector<Interval> intervals;  // sorted by start_s, non-overlapping

  bool empty() const { return intervals.empty(); }
  bool operator==(const IntervalTrack&) const = default;
};

struct WorkloadSample {
  double t_s = 0.0;
  MentalState state = MentalState::optimal;
  double confidence = 0.0;

  bool operator==(const WorkloadSample&) const = default;
};

struct WorkloadSeries {
  WorkloadCategory category = WorkloadCategory::attention;
  std::vector<WorkloadSample> samples;  // strictly increasing t_s
  double nominal_rate_hz = kDefaultWorkloadRateHz;

  bool operator==(const WorkloadSeries&) const = default;
};

enum class SensorKind { imu, gaze };

std::string_view to_string(SensorKind k);
const std::vector<std::string>& sensor_channel_names(SensorKind k);

// Row-major storage: values[i * arity() + c] is channel c of sample i.
struct SensorSeries {
  SensorKind kind = SensorKind::imu;
  std::vector<std::string> channel_names;
  std::vector<double> times;
  std::vector<double> values;

  std::size_t arity() const { return channel_names.size(); }
  std::size_t size() const { return times.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values).subspan(i * arity(), arity());
  }
  // Median sample spacing inverted; 0 when fewer than two samples.
  double estimated_rate_hz() const;

  bool operator==(const SensorSeries&) const = default;
};

struct VideoRef {
  std::string file_path;
  double offset_s = 0.0;  // video time = session time - offset_s

  bool operator==(const VideoRef&) const = default;
};

struct Session {
  SessionId id;
  SubjectId subject;
  TrialId trial;
  double duration_s = 0.0;
  std::optional<IntervalTrack> procedures;
  std::optional<IntervalTrack> errors;
  std::optional<IntervalTrack> phases;
  std::map<WorkloadCategory, WorkloadSeries> workload;
  std::optional<SensorSeries> imu;
  std::optional<SensorSeries> gaze;
  std::optional<VideoRef> video;

  const WorkloadSeries* workload_for(WorkloadCategory c) const;
  const SensorSeries* sensor(SensorKind k) const;

  bool operator==(const Session&) const = default;
};

// Machine-readable reason a track, series or session was rejected.
struct Violation {
  std::string code;
  std::string message;
};

std::optional<Violation> validate_track(const IntervalTrack& track, double duration_s);
std::optional<Violation> validate_workload(const WorkloadSeries& series, double duration_s);
std::optional<Violation> validate_sensor(const SensorSeries& series, double duration_s);
// Checks every Session invariant. procedure_vocabulary, when non-empty, restricts
// procedure labels.
std::optional<Violation> validate_session(const Session& session,
                                          std::span<const std::string> procedure_vocabulary = {});

std::optional<Interval> clip_interval(const Interval& iv, double t0, double t1);

double total_label_duration(const IntervalTrack& track, std::string_view label);

// Seconds of [t0, t1] covered by the track.
double overlap_seconds(const IntervalTrack& track, double t0, double t1);

// Distinct labels in first-seen order.
std::vector<std::string> distinct_labels(const IntervalTrack& track);

// Maximal constant-state span of workload samples.
struct WorkloadRun {
  double start_s = 0.0;
  double end_s = 0.0;
  MentalState state = MentalState::optimal;

  bool operator==(const WorkloadRun&) const = default;
};

// Run-length encodes samples. A sample dwells until the next sample; the last sample
// before a gap (spacing > kGapFactor periods) and the final sample dwell one nominal
// period. Runs are clipped to [0, duration_s].
std::vector<WorkloadRun> workload_runs(const WorkloadSeries& series, double duration_s);

// Seconds of [t0, t1] spent in `state` according to precomputed runs.
double state_seconds(std::span<const WorkloadRun> runs, MentalState state, double t0, double t1);

}  // namespace sessionlens
