#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <thread>

#include "json_compare.hpp"
#include "sessionlens/api.hpp"
#include "sessionlens/synthgen.hpp"
#include "support.hpp"

using namespace sessionlens;
using namespace sessionlens::service;

namespace {

std::shared_ptr<const Dataset> mini() {
  return std::make_shared<Dataset>(load_dataset(SESSIONLENS_FIXTURES "/mini"));
}

Json golden(const std::string& name) {
  return Json::parse(testing::read_file(std::string(SESSIONLENS_FIXTURES "/golden/") + name));
}

template <typename F>
ApiError expect_error(F f) {
  try {
    f();
  } catch (const ApiError& e) {
    return e;
  }
  FAIL("expected ApiError");
  return ApiError(0, "", "");
}

const embed::EmbedParams kSmallEmbed{16, 8, 64, 0};

}  // namespace

TEST_CASE("golden bodies") {
  const Api api(mini(), kSmallEmbed);
  const auto check = [](const Json& got, const std::string& file) {
    const auto diff = testing::json_diff(got, golden(file));
    INFO(file << ": " << diff.value_or(""));
    CHECK_FALSE(diff);
  };
  check(api.matrix("m1", {{"category", "attention"}}), "matrix_m1_attention.json");
  check(api.brush("m1", {{"t0", "0.5"}, {"t1", "1.2"}, {"category", "attention"}}), "brush_m1_0.5_1.2.json");
  check(api.quality(), "quality.json");
}

TEST_CASE("listing endpoints") {
  const Api api(mini(), kSmallEmbed);
  CHECK(api.health() == Json{{"status", "ok"}, {"sessions", 3}});

  const auto all = api.sessions({});
  CHECK(all["dataset_name"] == "mini");
  REQUIRE(all["sessions"].size() == 3);
  CHECK(all["sessions"][0]["id"] == "m1");
  CHECK(all["sessions"][0]["streams"]["video"] == true);

  const auto bob = api.sessions({{"subject", "bob"}});
  CHECK(bob["sessions"].size() == 2);
  const auto trial = api.sessions({{"trial", "2"}, {"subject", "alice,bob"}});
  CHECK(trial["sessions"].size() == 1);
  const auto top = api.sessions({{"top_k_trials", "1"}});
  CHECK(top["sessions"].size() == 2);
  CHECK(expect_error([&] { api.sessions({{"top_k_trials", "-1"}}); }).status() == 400);
}

TEST_CASE("per-session endpoints") {
  const Api api(mini(), kSmallEmbed);
  SUBCASE("timeline defaults to attention") {
    const auto t = api.timeline("m2", {});
    CHECK(t["category"] == "attention");
    CHECK(t["workload"].size() == 2);
    CHECK(t["errors"][0]["end_s"].get<double>() == doctest::Approx(0.6));
  }
  SUBCASE("matrix with missing streams") {
    const auto m = api.matrix("m3", {});
    CHECK(m["error_proportion"].is_null());
    CHECK(m["state_distribution"].is_null());
    CHECK(m["procedures"][0]["partial_r"].is_null());
    CHECK(m["error_contribution"]["overload"]["r"].is_null());
  }
  SUBCASE("errors") {
    auto e = expect_error([&] { api.timeline("nope", {}); });
    CHECK(e.status() == 404);
    CHECK(e.code() == "unknown_session");
    CHECK(e.detail() == "nope");
    CHECK(expect_error([&] { api.brush("m1", {{"t0", "3"}, {"t1", "1"}}); }).code() == "invalid_window");
    CHECK(expect_error([&] { api.brush("m1", {{"t0", "x"}, {"t1", "1"}}); }).code() == "invalid_parameter");
    CHECK(expect_error([&] { api.brush("m1", {}); }).status() == 400);
    CHECK(expect_error([&] { api.timeline("m1", {{"category", "mood"}}); }).status() == 400);
    CHECK(expect_error([&] { api.series("m1", {{"stream", "imu"}, {"channel", "zz"}}); }).code() ==
          "unknown_channel");
    auto absent = expect_error([&] { api.series("m2", {{"stream", "imu"}, {"channel", "ax"}}); });
    CHECK(absent.status() == 404);
    CHECK(absent.code() == "stream_absent");
    CHECK(expect_error([&] { api.video("m2"); }).code() == "video_absent");
    const auto j = absent.to_json();
    CHECK(j.contains("code"));
    CHECK(j.contains("message"));
    CHECK(j.contains("detail"));
  }
  SUBCASE("series defaults to the whole session") {
    const auto s = api.series("m1", {{"stream", "imu"}, {"channel", "accel_mag"}});
    CHECK(s["points"].size() == 80);
    CHECK(s["t1"] == 4.0);
    CHECK(s["decimated"] == false);
  }
  SUBCASE("video") {
    const auto v = api.video("m1");
    CHECK(v.content_type == "video/mp4");
    CHECK(v.path.filename() == "clip.mp4");
  }
}

TEST_CASE("aggregate") {
  const Api api(mini(), kSmallEmbed);
  const auto body = Json{{"session_ids", {"m1", "m2", "m3"}}, {"group_by", "subject"}};
  const auto a = api.aggregate(body);
  REQUIRE(a["groups"].size() == 2);
  CHECK(a["groups"][0]["key"] == "alice");
  CHECK(a["groups"][1]["session_ids"] == Json{"m2", "m3"});
  CHECK(a["groups"][1]["avg_duration_s"] == 2.5);
  CHECK(all_numbers_finite(a));

  auto unknown = expect_error([&] { api.aggregate(Json{{"session_ids", {"m1", "ghost"}}}); });
  CHECK(unknown.status() == 404);
  CHECK(unknown.detail() == "ghost");
  CHECK(std::string(unknown.what()).find("ghost") != std::string::npos);
  CHECK(expect_error([&] { api.aggregate(Json{{"session_ids", Json::array()}}); }).status() == 400);
  CHECK(expect_error([&] { api.aggregate(Json{{"session_ids", {"m1"}}, {"group_by", "day"}}); }).status() == 400);
  CHECK(expect_error([&] { api.aggregate(Json::array()); }).status() == 400);
}

TEST_CASE("embedding cache") {
  Api api(mini(), kSmallEmbed);
  const auto e = api.embedding({{"stream", "imu"}});
  CHECK(e["omitted"] == Json{"m2", "m3"});
  CHECK(e["points"].size() == 1);
  CHECK(api.embedding_computations() == 1);

  std::vector<Json> results(8);
  {
    std::vector<std::jthread> threads;
    for (auto& r : results) threads.emplace_back([&] { r = api.embedding({{"stream", "imu"}, {"seed", "9"}}); });
  }
  CHECK(api.embedding_computations() == 2);
  for (const auto& r : results) CHECK(r == results[0]);

  CHECK(expect_error([&] { api.embedding({{"stream", "gaze"}}); }).status() == 422);
  CHECK(expect_error([&] { api.embedding({{"stream", "audio"}}); }).status() == 400);
  CHECK(expect_error([&] { api.embedding({{"m", "64"}}); }).status() == 400);
  // failures are cached too
  CHECK(expect_error([&] { api.embedding({{"stream", "gaze"}}); }).status() == 422);
  CHECK(api.embedding_computations() == 3);

  api.reload(mini());
  CHECK(api.embedding_computations() == 0);
  CHECK(api.embedding({{"stream", "imu"}}) == e);
}

TEST_CASE("stable finite responses on a synthetic dataset") {
  testing::TempDir tmp;
  auto spec = synth::parse_spec(Json::parse(R"({
    "seed": 4, "trials": ["1", "2"], "duration_range": [200, 260],
    "profiles": [{"subject": "p", "motion_style": "stop_start"},
                 {"subject": "q", "error_coupling": {"procedure": "c", "category": "memory", "state": "underload"}}]
  })"));
  synth::generate(spec, tmp.path());
  const Api api(std::make_shared<Dataset>(load_dataset(tmp.path())), kSmallEmbed);

  std::vector<std::function<Json()>> calls{
      [&] { return api.health(); },
      [&] { return api.sessions({}); },
      [&] { return api.quality(); },
      [&] { return api.embedding({{"stream", "imu"}}); },
      [&] { return api.embedding({{"stream", "gaze"}}); },
      [&] { return api.embedding({{"stream", "fnirs"}}); },
      [&] { return api.aggregate(Json{{"session_ids", {"p_1", "p_2", "q_1", "q_2"}}, {"group_by", "trial"}}); },
      [&] { return api.timeline("q_1", {{"category", "memory"}}); },
      [&] { return api.matrix("q_2", {{"category", "memory"}}); },
      [&] { return api.brush("p_1", {{"t0", "10"}, {"t1", "70.5"}}); },
      [&] { return api.series("p_2", {{"stream", "gaze"}, {"channel", "gaze_angular_speed"}, {"max_points", "300"}}); },
  };
  for (std::size_t i = 0; i < calls.size(); ++i) {
    const auto first = calls[i]();
    INFO("call " << i);
    CHECK(all_numbers_finite(first));
    CHECK(first.dump() == calls[i]().dump());
  }
}

TEST_CASE("finite helpers") {
  CHECK(finite_or_null(NAN).is_null());
  CHECK(finite_or_null(std::optional<double>{}).is_null());
  CHECK(finite_or_null(2.5) == 2.5);
  CHECK_FALSE(all_numbers_finite(Json{{"a", {1.0, INFINITY}}}));
  CHECK(all_numbers_finite(Json{{"a", {1.0, nullptr, "x"}}}));
}
