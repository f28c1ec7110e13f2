#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <thread>

#include "httplib.h"
#include "sessionlens/server.hpp"
#include "support.hpp"

using namespace sessionlens;
using namespace sessionlens::service;

namespace {

struct LiveServer {
  std::shared_ptr<Api> api;
  Server server;
  int port;
  std::jthread thread;

  LiveServer()
      : api(std::make_shared<Api>(std::make_shared<Dataset>(load_dataset(SESSIONLENS_FIXTURES "/mini")),
                                  embed::EmbedParams{16, 8, 64, 0})),
        server(api),
        port(server.bind("127.0.0.1", 0)) {
    REQUIRE(port > 0);
    thread = std::jthread([this] { server.listen_after_bind(); });
    for (int i = 0; i < 200 && !server.running(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  ~LiveServer() { server.stop(); }

  httplib::Client client() const { return httplib::Client("127.0.0.1", port); }
};

Json body_of(const httplib::Result& r) {
  REQUIRE(r);
  return Json::parse(r->body);
}

}  // namespace

TEST_CASE("bind address parsing") {
  CHECK(parse_bind_address("0.0.0.0:9000") == std::pair<std::string, int>{"0.0.0.0", 9000});
  CHECK(parse_bind_address(":81") == std::pair<std::string, int>{"127.0.0.1", 81});
  CHECK(parse_bind_address("8080") == std::pair<std::string, int>{"127.0.0.1", 8080});
  CHECK_THROWS(parse_bind_address("host:"));
  CHECK_THROWS(parse_bind_address("host:70000"));
  CHECK_THROWS(parse_bind_address("host:8x"));
}

TEST_CASE("live http") {
  LiveServer live;
  auto cli = live.client();

  SUBCASE("json endpoints") {
    auto r = cli.Get("/api/health");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(r->get_header_value("Content-Type") == "application/json");
    CHECK(body_of(r)["status"] == "ok");

    r = cli.Get("/api/sessions?subject=bob");
    CHECK(body_of(r)["sessions"].size() == 2);

    r = cli.Get("/api/sessions/m1/matrix?category=attention");
    CHECK(body_of(r)["error_proportion"] == 0.25);

    r = cli.Post("/api/aggregate", R"({"session_ids":["m1","m2"],"group_by":"trial"})", "application/json");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(body_of(r)["groups"].size() == 1);
  }

  SUBCASE("error bodies") {
    auto r = cli.Get("/api/nothing");
    REQUIRE(r);
    CHECK(r->status == 404);
    CHECK(body_of(r)["code"] == "not_found");

    r = cli.Get("/api/sessions/zz/timeline");
    CHECK(r->status == 404);
    CHECK(body_of(r)["code"] == "unknown_session");

    r = cli.Get("/api/sessions/m1/brush?t0=2&t1=1");
    CHECK(r->status == 400);
    CHECK(body_of(r)["code"] == "invalid_window");

    r = cli.Post("/api/aggregate", "{not json", "application/json");
    CHECK(r->status == 400);
    CHECK(body_of(r)["code"] == "bad_request");

    r = cli.Get("/api/sessions/m2/video");
    CHECK(r->status == 404);
    CHECK(body_of(r)["code"] == "video_absent");
  }

  SUBCASE("video with ranges") {
    const auto bytes = testing::read_file(SESSIONLENS_FIXTURES "/mini/m1/clip.mp4");
    auto r = cli.Get("/api/sessions/m1/video");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(r->get_header_value("Content-Type") == "video/mp4");
    CHECK(r->body == bytes);

    r = cli.Get("/api/sessions/m1/video", {httplib::make_range_header({{100, 199}})});
    REQUIRE(r);
    CHECK(r->status == 206);
    CHECK(r->body == bytes.substr(100, 100));
    CHECK(r->get_header_value("Content-Range") == "bytes 100-199/" + std::to_string(bytes.size()));
  }

  SUBCASE("reload keeps serving") {
    live.api->reload(std::make_shared<Dataset>(load_dataset(SESSIONLENS_FIXTURES "/mini")));
    CHECK(body_of(cli.Get("/api/health"))["sessions"] == 3);
  }
}
