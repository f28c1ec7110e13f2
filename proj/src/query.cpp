#include "sessionlens/query.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "sessionlens/embed.hpp"

namespace sessionlens::query {

namespace {

std::vector<ConfidencePoint> decimate_confidence(const WorkloadSeries& series, double t0, double t1) {
  std::vector<ConfidencePoint> all;
  for (const auto& s : series.samples)
    if (s.t_s >= t0 && s.t_s <= t1) all.push_back(ConfidencePoint{s.t_s, s.confidence});
  if (all.size() <= kMaxConfidencePoints) return all;
  const std::size_t stride = (all.size() + kMaxConfidencePoints - 1) / kMaxConfidencePoints;
  std::vector<ConfidencePoint> out;
  for (std::size_t i = 0; i < all.size(); i += stride) out.push_back(all[i]);
  return out;
}

std::vector<Interval> clip_track(const std::optional<IntervalTrack>& track, double t0, double t1) {
  std::vector<Interval> out;
  if (!track) return out;
  for (const auto& iv : track->intervals)
    if (auto c = clip_interval(iv, t0, t1)) out.push_back(std::move(*c));
  return out;
}

void check_window(const Session& session, double t0, double t1) {
  if (!std::isfinite(t0) || !std::isfinite(t1) || t0 < 0.0 || !(t0 < t1) || t1 > session.duration_s)
    throw QueryError("invalid_window", "window must satisfy 0 <= t0 < t1 <= duration_s (" +
                                           std::to_string(session.duration_s) + ")");
}

TimelineBundle timeline_window(const Session& session, WorkloadCategory category, double t0,
                               double t1) {
  TimelineBundle tb;
  tb.session_id = session.id;
  tb.duration_s = session.duration_s;
  tb.category = category;
  tb.procedures = clip_track(session.procedures, t0, t1);
  tb.errors = clip_track(session.errors, t0, t1);
  tb.phases = clip_track(session.phases, t0, t1);
  if (const auto* series = session.workload_for(category)) {
    for (const auto& run : workload_runs(*series, session.duration_s)) {
      const double a = std::max(run.start_s, t0);
      const double b = std::min(run.end_s, t1);
      if (b > a) tb.workload.push_back(WorkloadRun{a, b, run.state});
    }
    tb.confidence = decimate_confidence(*series, t0, t1);
  }
  return tb;
}

}  // namespace

TimelineBundle build_timeline(const Session& session, WorkloadCategory category) {
  return timeline_window(session, category, 0.0, session.duration_s);
}

BrushResult brush(const Session& session, double t0, double t1, WorkloadCategory category) {
  check_window(session, t0, t1);
  BrushResult out;
  out.t0 = t0;
  out.t1 = t1;
  out.timeline = timeline_window(session, category, t0, t1);
  for (const auto& iv : out.timeline.procedures)
    if (std::find(out.labels_touched.begin(), out.labels_touched.end(), iv.label) ==
        out.labels_touched.end())
      out.labels_touched.push_back(iv.label);
  std::sort(out.labels_touched.begin(), out.labels_touched.end());
  if (session.video) {
    const double off = session.video->offset_s;
    out.video = VideoWindow{std::max(0.0, t0 - off), std::max(0.0, t1 - off)};
  }
  return out;
}

std::vector<std::string> valid_channels(SensorKind stream) {
  auto out = sensor_channel_names(stream);
  if (stream == SensorKind::imu) {
    out.insert(out.end(), {"accel_mag", "gyro_mag", "mag_mag"});
  } else {
    out.insert(out.end(), {"gaze_angular_speed", "gaze_origin_speed"});
  }
  return out;
}

namespace {

std::vector<double> channel_values(const SensorSeries& series, const std::string& channel) {
  const auto& raw = series.channel_names;
  if (auto it = std::find(raw.begin(), raw.end(), channel); it != raw.end()) {
    const auto c = static_cast<std::size_t>(it - raw.begin());
    std::vector<double> out(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) out[i] = series.row(i)[c];
    return out;
  }
  if (series.kind == SensorKind::imu) {
    static const std::map<std::string, std::size_t> groups{
        {"accel_mag", 0}, {"gyro_mag", 3}, {"mag_mag", 6}};
    if (auto g = groups.find(channel); g != groups.end()) {
      std::vector<double> out(series.size());
      for (std::size_t i = 0; i < series.size(); ++i) {
        auto r = series.row(i).subspan(g->second, 3);
        out[i] = std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]);
      }
      return out;
    }
  } else {
    if (channel == "gaze_angular_speed") return embed::gaze_angular_speed(series);
    if (channel == "gaze_origin_speed") return embed::gaze_origin_speed(series);
  }
  std::string valid;
  for (const auto& name : valid_channels(series.kind)) valid += (valid.empty() ? "" : ", ") + name;
  throw QueryError("unknown_channel",
                   "unknown channel '" + channel + "'; valid channels: " + valid);
}

}  // namespace

std::vector<SeriesPoint> minmax_decimate(const std::vector<SeriesPoint>& points,
                                         std::size_t max_points) {
  if (max_points < 2) throw QueryError("invalid_max_points", "max_points must be at least 2");
  if (points.size() <= max_points) return points;
  const std::size_t buckets = max_points / 2;
  const std::size_t n = points.size();
  std::vector<SeriesPoint> out;
  out.reserve(2 * buckets);
  for (std::size_t b = 0; b < buckets; ++b) {
    const std::size_t lo = b * n / buckets;
    const std::size_t hi = (b + 1) * n / buckets;
    std::size_t imin = lo, imax = lo;
    for (std::size_t i = lo + 1; i < hi; ++i) {
      if (points[i].value < points[imin].value) imin = i;
      if (points[i].value > points[imax].value) imax = i;
    }
    out.push_back(points[std::min(imin, imax)]);
    if (imin != imax) out.push_back(points[std::max(imin, imax)]);
  }
  return out;
}

SeriesSlice slice_series(const Session& session, SensorKind stream, const std::string& channel,
                         double t0, double t1, std::size_t max_points) {
  const auto* series = session.sensor(stream);
  if (!series)
    throw QueryError("stream_absent", "session " + session.id + " has no " +
                                          std::string(to_string(stream)) + " stream");
  check_window(session, t0, t1);
  if (max_points < 2) throw QueryError("invalid_max_points", "max_points must be at least 2");
  const auto values = channel_values(*series, channel);

  std::vector<SeriesPoint> in_window;
  const auto first = std::lower_bound(series->times.begin(), series->times.end(), t0);
  for (auto it = first; it != series->times.end() && *it <= t1; ++it) {
    const auto i = static_cast<std::size_t>(it - series->times.begin());
    in_window.push_back(SeriesPoint{*it, values[i]});
  }
  SeriesSlice slice{stream, channel, t0, t1, {}, in_window.size() > max_points};
  slice.points = minmax_decimate(in_window, max_points);
  return slice;
}

std::vector<SessionMeta> list_sessions(const Dataset& dataset, const SessionFilter& filter) {
  std::vector<const Session*> kept;
  for (const auto& s : dataset.sessions) {
    if (filter.subjects && !filter.subjects->contains(s.subject)) continue;
    if (filter.trials && !filter.trials->contains(s.trial)) continue;
    kept.push_back(&s);
  }
  if (filter.top_k_trials) {
    std::map<TrialId, std::size_t> counts;
    for (const auto* s : kept) ++counts[s->trial];
    std::vector<std::pair<TrialId, std::size_t>> ranked(counts.begin(), counts.end());
    // map order already ascends by TrialId, so a stable sort by count breaks ties lexicographically
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::set<TrialId> top;
    for (std::size_t i = 0; i < std::min(*filter.top_k_trials, ranked.size()); ++i)
      top.insert(ranked[i].first);
    std::erase_if(kept, [&](const Session* s) { return !top.contains(s->trial); });
  }

  std::vector<SessionMeta> out;
  for (const auto* s : kept) {
    SessionMeta meta{s->id, s->subject, s->trial, s->duration_s, {}};
    for (const auto& key : quality_stream_keys()) meta.streams[key] = false;
    for (const auto& report : dataset.reports) {
      if (report.session_id != s->id) continue;
      for (const auto& [key, presence] : report.stream_presence)
        meta.streams[key] = presence == Presence::present;
    }
    out.push_back(std::move(meta));
  }
  std::sort(out.begin(), out.end(), [](const SessionMeta& a, const SessionMeta& b) {
    return std::tie(a.trial, a.subject, a.id) < std::tie(b.trial, b.subject, b.id);
  });
  return out;
}

}  // namespace sessionlens::query
