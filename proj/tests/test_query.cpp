#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sessionlens/query.hpp"
#include "support.hpp"

using namespace sessionlens;
using namespace sessionlens::query;

namespace {

Session sample_session() {
  auto s = testing::bare_session("q", 20.0);
  s.procedures = IntervalTrack{TrackKind::procedure, {{1, 5, "b"}, {6, 12, "a"}, {12, 19, "c"}}};
  s.errors = IntervalTrack{TrackKind::error, {{4, 7, "error"}}};
  s.phases = IntervalTrack{TrackKind::phase, {{0, 15, "PF"}, {15, 20, "FL"}}};
  s.workload[WorkloadCategory::attention] = testing::workload_from_spans(
      WorkloadCategory::attention,
      {{0, 8, MentalState::optimal}, {8, 14, MentalState::overload}, {14, 20, MentalState::underload}}, 20);
  SensorSeries imu{SensorKind::imu, sensor_channel_names(SensorKind::imu), {}, {}};
  for (int i = 0; i < 400; ++i) {
    imu.times.push_back(i * 0.05);
    const double az = (i == 123) ? 50.0 : (i == 300 ? -20.0 : 9.8 + 0.01 * std::sin(i));
    imu.values.insert(imu.values.end(), {0, 0, az, 0, 0, 0, 3, 4, 0});
  }
  s.imu = std::move(imu);
  s.video = VideoRef{"/nonexistent/clip.mp4", 2.0};
  return s;
}

}  // namespace

TEST_CASE("brushing the full session reproduces the timeline") {
  const auto s = sample_session();
  for (auto cat : kAllCategories) {
    const auto b = brush(s, 0.0, s.duration_s, cat);
    CHECK(b.timeline == build_timeline(s, cat));
  }
}

TEST_CASE("brush clips every track") {
  const auto s = sample_session();
  const auto b = brush(s, 4.5, 6.5, WorkloadCategory::attention);
  CHECK(b.labels_touched == std::vector<std::string>{"a", "b"});
  REQUIRE(b.timeline.procedures.size() == 2);
  CHECK(b.timeline.procedures[0] == Interval{4.5, 5, "b"});
  CHECK(b.timeline.errors == std::vector<Interval>{{4.5, 6.5, "error"}});
  REQUIRE(b.timeline.workload.size() == 1);
  CHECK(b.timeline.workload[0].start_s == 4.5);
  CHECK(b.timeline.confidence.size() == 21);
  REQUIRE(b.video);
  CHECK(b.video->start_s == doctest::Approx(2.5));
  CHECK(b.video->end_s == doctest::Approx(4.5));

  // video window never goes negative
  CHECK(brush(s, 0.5, 1.0, WorkloadCategory::attention).video->start_s == 0.0);
  // no workload for memory: empty, not zero-filled
  CHECK(brush(s, 4.5, 6.5, WorkloadCategory::memory).timeline.workload.empty());
}

TEST_CASE("invalid windows") {
  const auto s = sample_session();
  for (auto [t0, t1] : {std::pair{5.0, 5.0}, {6.0, 5.0}, {-1.0, 3.0}, {0.0, 20.5}, {NAN, 3.0}}) {
    try {
      brush(s, t0, t1, WorkloadCategory::attention);
      FAIL("expected invalid_window");
    } catch (const QueryError& e) {
      CHECK(e.code() == "invalid_window");
    }
  }
}

TEST_CASE("min-max decimation keeps extremes") {
  std::vector<SeriesPoint> pts;
  Rng rng(2);
  for (int i = 0; i < 10007; ++i) pts.push_back({i * 0.01, rng.normal()});
  pts[4321].value = 99;
  pts[9000].value = -99;
  for (std::size_t max : {2u, 3u, 10u, 257u, 4000u}) {
    const auto d = minmax_decimate(pts, max);
    CHECK(d.size() <= max);
    CHECK(std::is_sorted(d.begin(), d.end(), [](auto& a, auto& b) { return a.t_s < b.t_s; }));
    const auto [lo, hi] = std::minmax_element(d.begin(), d.end(), [](auto& a, auto& b) { return a.value < b.value; });
    CHECK(hi->value == 99);
    CHECK(lo->value == -99);
    CHECK(hi->t_s == pts[4321].t_s);
  }
  CHECK(minmax_decimate(pts, 20000).size() == pts.size());
  CHECK_THROWS_AS(minmax_decimate(pts, 1), QueryError);
}

TEST_CASE("series slices") {
  const auto s = sample_session();
  const auto raw = slice_series(s, SensorKind::imu, "az", 5.0, 7.0, 1000);
  CHECK_FALSE(raw.decimated);
  CHECK(raw.points.size() == 41);
  CHECK(raw.points.front().t_s == 5.0);
  CHECK(raw.points.back().t_s == doctest::Approx(7.0));

  const auto spike = slice_series(s, SensorKind::imu, "az", 0.0, 20.0, 10);
  CHECK(spike.decimated);
  double hi = -1e9, lo = 1e9;
  for (const auto& p : spike.points) {
    hi = std::max(hi, p.value);
    lo = std::min(lo, p.value);
  }
  CHECK(hi == 50.0);
  CHECK(lo == -20.0);

  const auto mag = slice_series(s, SensorKind::imu, "mag_mag", 0.0, 1.0);
  CHECK(mag.points[0].value == doctest::Approx(5.0));

  try {
    slice_series(s, SensorKind::imu, "bogus", 0, 1);
    FAIL("expected unknown_channel");
  } catch (const QueryError& e) {
    CHECK(e.code() == "unknown_channel");
    CHECK(std::string(e.what()).find("accel_mag") != std::string::npos);
  }
  try {
    slice_series(s, SensorKind::gaze, "dx", 0, 1);
    FAIL("expected stream_absent");
  } catch (const QueryError& e) {
    CHECK(e.code() == "stream_absent");
  }
}

TEST_CASE("confidence line is capped") {
  auto s = testing::bare_session("long", 1000.0);
  s.workload[WorkloadCategory::attention] =
      testing::workload_from_spans(WorkloadCategory::attention, {{0, 1000, MentalState::optimal}}, 1000);
  const auto tb = build_timeline(s, WorkloadCategory::attention);
  CHECK(tb.confidence.size() <= kMaxConfidencePoints);
  CHECK(tb.confidence.size() >= kMaxConfidencePoints / 2);
  CHECK(tb.workload.size() == 1);
}

TEST_CASE("session listing") {
  Dataset ds;
  auto add = [&](const std::string& id, const std::string& subject, const std::string& trial) {
    auto s = testing::bare_session(id, 10, subject, trial);
    s.procedures = IntervalTrack{TrackKind::procedure, {{0, 1, "a"}}};
    ds.sessions.push_back(s);
    QualityReport r;
    r.session_id = id;
    r.loaded = true;
    r.stream_presence["procedures"] = Presence::present;
    ds.reports.push_back(r);
  };
  add("x3", "x", "3");
  add("y1", "y", "1");
  add("x1", "x", "1");
  add("y2", "y", "2");
  add("x2", "x", "2");
  add("z2", "z", "2");

  const auto all = list_sessions(ds, {});
  REQUIRE(all.size() == 6);
  CHECK(all[0].id == "x1");
  CHECK(all[1].id == "y1");
  CHECK(all[0].streams.at("procedures"));
  CHECK_FALSE(all[0].streams.at("imu"));

  SessionFilter top;
  top.top_k_trials = 2;  // trial 2 has three sessions, 1 has two, 3 has one
  const auto best = list_sessions(ds, top);
  CHECK(best.size() == 5);
  for (const auto& m : best) CHECK(m.trial != "3");

  SessionFilter subj;
  subj.subjects = std::set<SubjectId>{"y"};
  subj.top_k_trials = 1;  // ties broken by trial id
  const auto y = list_sessions(ds, subj);
  REQUIRE(y.size() == 1);
  CHECK(y[0].id == "y1");
}
