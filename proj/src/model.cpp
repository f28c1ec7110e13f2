#include "sessionlens/model.hpp"

#include <algorithm>
#include <cmath>

namespace sessionlens {

std::string_view to_string(MentalState s) {
  switch (s) {
    case MentalState::underload: return "underload";
    case MentalState::optimal: return "optimal";
    case MentalState::overload: return "overload";
  }
  return "unknown";
}

std::string_view to_string(WorkloadCategory c) {
  switch (c) {
    case WorkloadCategory::perception: return "perception";
    case WorkloadCategory::attention: return "attention";
    case WorkloadCategory::memory: return "memory";
  }
  return "unknown";
}

std::string_view to_string(TrackKind k) {
  switch (k) {
    case TrackKind::procedure: return "procedures";
    case TrackKind::error: return "errors";
    case TrackKind::phase: return "phases";
  }
  return "unknown";
}

std::string_view to_string(SensorKind k) { return k == SensorKind::imu ? "imu" : "gaze"; }

std::optional<MentalState> parse_mental_state(std::string_view s) {
  for (auto st : kAllStates)
    if (to_string(st) == s) return st;
  return std::nullopt;
}

std::optional<WorkloadCategory> parse_workload_category(std::string_view s) {
  for (auto c : kAllCategories)
    if (to_string(c) == s) return c;
  return std::nullopt;
}

const std::vector<std::string>& sensor_channel_names(SensorKind k) {
  static const std::vector<std::string> imu{"ax", "ay", "az", "gx", "gy", "gz", "mx", "my", "mz"};
  static const std::vector<std::string> gaze{"ox", "oy", "oz", "dx", "dy", "dz"};
  return k == SensorKind::imu ? imu : gaze;
}

double SensorSeries::estimated_rate_hz() const {
  if (times.size() < 2) return 0.0;
  std::vector<double> dt(times.size() - 1);
  for (std::size_t i = 1; i < times.size(); ++i) dt[i - 1] = times[i] - times[i - 1];
  auto mid = dt.begin() + static_cast<std::ptrdiff_t>(dt.size() / 2);
  std::nth_element(dt.begin(), mid, dt.end());
  return *mid > 0.0 ? 1.0 / *mid : 0.0;
}

const WorkloadSeries* Session::workload_for(WorkloadCategory c) const {
  auto it = workload.find(c);
  return it == workload.end() ? nullptr : &it->second;
}

const SensorSeries* Session::sensor(SensorKind k) const {
  const auto& s = k == SensorKind::imu ? imu : gaze;
  return s ? &*s : nullptr;
}

namespace {

Violation violation(std::string code, std::string message) {
  return Violation{std::move(code), std::move(message)};
}

std::string where(std::string_view stream, std::size_t index) {
  return std::string(stream) + "[" + std::to_string(index) + "]";
}

}  // namespace

std::optional<Violation> validate_track(const IntervalTrack& track, double duration_s) {
  const auto name = to_string(track.kind);
  for (std::size_t i = 0; i < track.intervals.size(); ++i) {
    const auto& iv = track.intervals[i];
    if (!std::isfinite(iv.start_s) || !std::isfinite(iv.end_s))
      return violation("non_finite_time", where(name, i) + " has a non-finite bound");
    if (iv.start_s < 0.0)
      return violation("interval_negative_start", where(name, i) + " starts before 0");
    if (!(iv.end_s > iv.start_s))
      return violation("interval_empty", where(name, i) + " has end_s <= start_s");
    if (iv.end_s > duration_s)
      return violation("interval_beyond_duration", where(name, i) + " ends after duration_s");
    if (i > 0) {
      const auto& prev = track.intervals[i - 1];
      if (iv.start_s < prev.start_s)
        return violation("interval_unsorted", where(name, i) + " is out of order");
      if (iv.start_s < prev.end_s)
        return violation("interval_overlap", where(name, i) + " overlaps its predecessor");
    }
    if (track.kind == TrackKind::phase && iv.label != "PF" && iv.label != "FL")
      return violation("phase_label_invalid", where(name, i) + " label '" + iv.label +
                                                  "' is not PF or FL");
  }
  return std::nullopt;
}

std::optional<Violation> validate_workload(const WorkloadSeries& series, double duration_s) {
  const auto name = "workload." + std::string(to_string(series.category));
  if (!(series.nominal_rate_hz > 0.0))
    return violation("rate_invalid", name + " nominal rate must be positive");
  for (std::size_t i = 0; i < series.samples.size(); ++i) {
    const auto& s = series.samples[i];
    if (!std::isfinite(s.t_s) || s.t_s < 0.0)
      return violation("time_invalid", where(name, i) + " has an invalid timestamp");
    if (i > 0 && !(s.t_s > series.samples[i - 1].t_s))
      return violation("time_not_increasing", where(name, i) + " is not strictly increasing");
    if (s.t_s > duration_s)
      return violation("sample_beyond_duration", where(name, i) + " is after duration_s");
    if (!(s.confidence >= 0.0 && s.confidence <= 1.0))
      return violation("confidence_out_of_range", where(name, i) + " confidence outside [0,1]");
  }
  return std::nullopt;
}

std::optional<Violation> validate_sensor(const SensorSeries& series, double duration_s) {
  const auto name = to_string(series.kind);
  if (series.channel_names != sensor_channel_names(series.kind))
    return violation("channels_invalid", std::string(name) + " has unexpected channel names");
  if (series.values.size() != series.times.size() * series.arity())
    return violation("arity_mismatch", std::string(name) + " sample arity mismatch");
  for (std::size_t i = 0; i < series.times.size(); ++i) {
    const double t = series.times[i];
    if (!std::isfinite(t) || t < 0.0)
      return violation("time_invalid", where(name, i) + " has an invalid timestamp");
    if (i > 0 && !(t > series.times[i - 1]))
      return violation("time_not_increasing", where(name, i) + " is not strictly increasing");
    if (t > duration_s)
      return violation("sample_beyond_duration", where(name, i) + " is after duration_s");
    for (double v : series.row(i))
      if (!std::isfinite(v))
        return violation("value_non_finite", where(name, i) + " has a non-finite value");
  }
  return std::nullopt;
}

std::optional<Violation> validate_session(const Session& session,
                                          std::span<const std::string> procedure_vocabulary) {
  if (session.id.empty()) return violation("id_missing", "session id is empty");
  if (!std::isfinite(session.duration_s) || !(session.duration_s > 0.0))
    return violation("duration_invalid", "duration_s must be positive and finite");
  for (const auto* track : {&session.procedures, &session.errors, &session.phases}) {
    if (!*track) continue;
    if (auto v = validate_track(**track, session.duration_s)) return v;
  }
  if (session.procedures && !procedure_vocabulary.empty()) {
    for (std::size_t i = 0; i < session.procedures->intervals.size(); ++i) {
      const auto& label = session.procedures->intervals[i].label;
      if (std::find(procedure_vocabulary.begin(), procedure_vocabulary.end(), label) ==
          procedure_vocabulary.end())
        return violation("procedure_label_unknown",
                         where("procedures", i) + " label '" + label + "' is not in the vocabulary");
    }
  }
  for (const auto& [cat, series] : session.workload) {
    if (series.category != cat)
      return violation("category_mismatch", "workload map key does not match series category");
    if (auto v = validate_workload(series, session.duration_s)) return v;
  }
  for (const auto* s : {&session.imu, &session.gaze}) {
    if (!*s) continue;
    if (auto v = validate_sensor(**s, session.duration_s)) return v;
  }
  if (session.video && !std::isfinite(session.video->offset_s))
    return violation("video_offset_invalid", "video offset_s must be finite");
  if (!session.procedures && session.workload.empty() && !session.imu && !session.gaze)
    return violation("no_streams", "none of procedures, workload, imu, gaze is present");
  return std::nullopt;
}

std::optional<Interval> clip_interval(const Interval& iv, double t0, double t1) {
  const double a = std::max(iv.start_s, t0);
  const double b = std::min(iv.end_s, t1);
  if (!(b > a)) return std::nullopt;
  return Interval{a, b, iv.label};
}

double total_label_duration(const IntervalTrack& track, std::string_view label) {
  double total = 0.0;
  for (const auto& iv : track.intervals)
    if (iv.label == label) total += iv.length();
  return total;
}

double overlap_seconds(const IntervalTrack& track, double t0, double t1) {
  double total = 0.0;
  // intervals are sorted and disjoint; skip those ending before t0
  auto it = std::lower_bound(track.intervals.begin(), track.intervals.end(), t0,
                             [](const Interval& iv, double t) { return iv.end_s <= t; });
  for (; it != track.intervals.end() && it->start_s < t1; ++it)
    total += std::max(0.0, std::min(it->end_s, t1) - std::max(it->start_s, t0));
  return total;
}

std::vector<std::string> distinct_labels(const IntervalTrack& track) {
  std::vector<std::string> out;
  for (const auto& iv : track.intervals)
    if (std::find(out.begin(), out.end(), iv.label) == out.end()) out.push_back(iv.label);
  return out;
}

std::vector<WorkloadRun> workload_runs(const WorkloadSeries& series, double duration_s) {
  std::vector<WorkloadRun> runs;
  const auto& s = series.samples;
  const double period = 1.0 / series.nominal_rate_hz;
  const double gap_threshold = kGapFactor * period;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool has_next = i + 1 < s.size();
    const bool gap_after = has_next && s[i + 1].t_s - s[i].t_s > gap_threshold;
    const double end = (has_next && !gap_after) ? s[i + 1].t_s : s[i].t_s + period;
    const double a = std::clamp(s[i].t_s, 0.0, duration_s);
    const double b = std::clamp(end, 0.0, duration_s);
    if (!(b > a)) continue;
    if (!runs.empty() && runs.back().state == s[i].state && runs.back().end_s == a) {
      runs.back().end_s = b;
    } else {
      runs.push_back(WorkloadRun{a, b, s[i].state});
    }
  }
  return runs;
}

double state_seconds(std::span<const WorkloadRun> runs, MentalState state, double t0, double t1) {
  double total = 0.0;
  auto it = std::lower_bound(runs.begin(), runs.end(), t0,
                             [](const WorkloadRun& r, double t) { return r.end_s <= t; });
  for (; it != runs.end() && it->start_s < t1; ++it)
    if (it->state == state)
      total += std::max(0.0, std::min(it->end_s, t1) - std::max(it->start_s, t0));
  return total;
}

}  // namespace sessionlens
