#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sessionlens/ingest.hpp"
#include "support.hpp"

using namespace sessionlens;
using testing::TempDir;
using testing::write_file;

namespace {

const std::vector<std::string> kLabels{"a", "b", "c"};

void write_meta(const testing::fs::path& dir, double duration) {
  write_file(dir / "session.json",
             R"({"subject":"s","trial":"t","duration_s":)" + std::to_string(duration) + "}");
}

}  // namespace

TEST_CASE("manifest errors are fatal") {
  TempDir tmp;
  CHECK_THROWS_AS(read_manifest(tmp.path()), IngestError);
  write_file(tmp / "manifest.json", "{not json");
  CHECK_THROWS_AS(read_manifest(tmp.path()), IngestError);
  write_file(tmp / "manifest.json",
             R"({"dataset_name":"d","procedure_labels":["a"],"sessions":[{"id":"x","dir":"x"},{"id":"x","dir":"y"}]})");
  CHECK_THROWS_WITH_AS(read_manifest(tmp.path()), doctest::Contains("duplicate"), IngestError);
  write_file(tmp / "manifest.json", R"({"dataset_name":"d","procedure_labels":[],"sessions":[]})");
  CHECK_THROWS_AS(load_dataset(tmp.path()), IngestError);
}

TEST_CASE("fixture dataset") {
  const auto ds = load_dataset(SESSIONLENS_FIXTURES "/mini");
  CHECK(ds.manifest.dataset_name == "mini");
  REQUIRE(ds.reports.size() == 4);
  REQUIRE(ds.sessions.size() == 3);
  CHECK(ds.sessions[0].id == "m1");
  CHECK(ds.sessions[2].id == "m3");

  SUBCASE("complete session") {
    const auto& m1 = *ds.find("m1");
    CHECK(m1.procedures->intervals.size() == 3);
    CHECK(m1.workload.size() == 3);
    CHECK(m1.imu->size() == 80);
    CHECK_FALSE(m1.gaze);
    REQUIRE(m1.video);
    CHECK(m1.video->offset_s == 0.5);
    const auto& r = ds.reports[0];
    CHECK(r.loaded);
    CHECK(r.gaps.empty());
    CHECK(r.stream_presence.at("video") == Presence::present);
    CHECK(r.stream_presence.at("gaze") == Presence::absent);
    CHECK(r.stream_presence.size() == quality_stream_keys().size());
  }
  SUBCASE("point errors are widened and gaps reported") {
    const auto& m2 = *ds.find("m2");
    REQUIRE(m2.errors->intervals.size() == 1);
    CHECK(m2.errors->intervals[0].start_s == 0.5);
    CHECK(m2.errors->intervals[0].end_s == doctest::Approx(0.6));
    const auto& r = ds.reports[1];
    REQUIRE(r.gaps.size() == 1);
    CHECK(r.gaps[0].stream == "workload.attention");
    CHECK(r.gaps[0].start_s == doctest::Approx(1.0));
    CHECK(r.gaps[0].end_s == doctest::Approx(2.0));
    CHECK(r.coverage.at("workload.attention") == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("a malformed row makes the stream absent") {
    const auto& m3 = *ds.find("m3");
    CHECK_FALSE(m3.errors);
    const auto& r = ds.reports[2];
    CHECK(r.loaded);
    CHECK(r.stream_presence.at("errors") == Presence::absent);
    REQUIRE(r.diagnostics.size() == 1);
    CHECK(r.diagnostics[0].find("errors.csv:3") != std::string::npos);
  }
  SUBCASE("unknown procedure labels reject the session") {
    const auto& r = ds.reports[3];
    CHECK_FALSE(r.loaded);
    REQUIRE(r.rejection);
    CHECK(r.rejection->code == "procedure_label_unknown");
    CHECK(ds.find("m4") == nullptr);
  }
}

TEST_CASE("csv tolerance") {
  TempDir tmp;
  const auto dir = tmp / "s";
  write_meta(dir, 10);
  write_file(dir / "procedures.csv", "\xEF\xBB\xBFstart_s, end_s ,label\r\n0,2, a\r\n\r\n2,5,b\r\n");
  write_file(dir / "errors.csv", "start_s,end_s\n4,6\n1,2\n5,7\n");
  auto [session, report] = load_session(dir, "s", kLabels);
  REQUIRE(session);
  CHECK(report.diagnostics.empty());
  REQUIRE(session->procedures->intervals.size() == 2);
  CHECK(session->procedures->intervals[0].label == "a");
  // unsorted and overlapping error spans are normalized
  REQUIRE(session->errors->intervals.size() == 2);
  CHECK(session->errors->intervals[0] == Interval{1, 2, "error"});
  CHECK(session->errors->intervals[1] == Interval{4, 7, "error"});
}

TEST_CASE("header mismatch and arity errors") {
  TempDir tmp;
  const auto dir = tmp / "s";
  write_meta(dir, 10);
  write_file(dir / "procedures.csv", "start,end,label\n0,2,a\n");
  write_file(dir / "workload.csv", "t_s,category,state,confidence\n0,attention,optimal\n");
  write_file(dir / "imu.csv", "t_s,ax,ay,az,gx,gy,gz,mx,my,mz\n0,1,1,1,1,1,1,1,1,1\n0.05,1,1,1,1,1,1,1,1,1\n");
  auto [session, report] = load_session(dir, "s", kLabels);
  REQUIRE(session);
  CHECK_FALSE(session->procedures);
  CHECK(session->workload.empty());
  CHECK(report.diagnostics.size() == 2);
  CHECK(report.stream_presence.at("imu") == Presence::present);
  // only 0.1 s of imu over a 10 s session
  REQUIRE(report.gaps.size() == 1);
  CHECK(report.gaps[0].stream == "imu");
  CHECK(report.gaps[0].start_s == doctest::Approx(0.1));
}

TEST_CASE("invariant violations reject the session") {
  TempDir tmp;
  const auto dir = tmp / "s";
  write_meta(dir, 10);
  write_file(dir / "procedures.csv", "start_s,end_s,label\n0,5,a\n4,8,b\n");
  auto [session, report] = load_session(dir, "s", kLabels);
  CHECK_FALSE(session);
  CHECK(report.rejection->code == "interval_overlap");

  write_file(dir / "procedures.csv", "start_s,end_s,label\n0,5,a\n");
  write_file(dir / "session.json", R"({"subject":"s","trial":"t","duration_s":-1})");
  auto [s2, r2] = load_session(dir, "s", kLabels);
  CHECK_FALSE(s2);
  CHECK(r2.rejection->code == "duration_invalid");

  write_file(dir / "session.json", R"({"subject":"s"})");
  auto [s3, r3] = load_session(dir, "s", kLabels);
  CHECK_FALSE(s3);
  CHECK(r3.rejection->code == "session_json_invalid");
}

TEST_CASE("missing session.json") {
  TempDir tmp;
  auto [session, report] = load_session(tmp / "nothing", "x", kLabels);
  CHECK_FALSE(session);
  CHECK_FALSE(report.loaded);
  CHECK(report.rejection);
}

TEST_CASE("detect_gaps") {
  std::vector<double> t;
  for (int i = 0; i < 100; ++i) t.push_back(i / 10.0);
  CHECK(detect_gaps(t, 10.0, 10.0).empty());

  SUBCASE("interior gap starts one period after the last sample") {
    std::erase_if(t, [](double x) { return x >= 3.0 - 1e-9 && x < 4.5 - 1e-9; });
    const auto g = detect_gaps(t, 10.0, 10.0);
    REQUIRE(g.size() == 1);
    CHECK(g[0].first == doctest::Approx(3.0));
    CHECK(g[0].second == doctest::Approx(4.5));
  }
  SUBCASE("edges") {
    std::vector<double> mid(t.begin() + 20, t.begin() + 70);
    const auto g = detect_gaps(mid, 10.0, 10.0);
    REQUIRE(g.size() == 2);
    CHECK(g[0] == std::pair{0.0, 2.0});
    CHECK(g[1].first == doctest::Approx(7.0));
    CHECK(g[1].second == 10.0);
  }
  SUBCASE("short holes below the threshold are not gaps") {
    std::erase_if(t, [](double x) { return x > 5.05 && x < 5.35; });
    CHECK(detect_gaps(t, 10.0, 10.0).empty());
  }
  SUBCASE("no samples") {
    const auto g = detect_gaps({}, 10.0, 10.0);
    REQUIRE(g.size() == 1);
    CHECK(g[0] == std::pair{0.0, 10.0});
  }
}
