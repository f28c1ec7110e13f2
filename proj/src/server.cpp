#include "sessionlens/server.hpp"

#include <charconv>
#include <chrono>
#include <fstream>

#include <spdlog/spdlog.h>

#include "httplib.h"

namespace sessionlens::service {

namespace {

constexpr const char* kJson = "application/json";
constexpr const char* kSessionRoute = R"(/api/sessions/([^/]+)/)";

void send_json(httplib::Response& res, const Json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, const ApiError& e) { send_json(res, e.to_json(), e.status()); }

// Runs an endpoint and maps exceptions onto error bodies.
template <typename F>
httplib::Server::Handler json_handler(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      send_json(res, f(req));
    } catch (const ApiError& e) {
      send_error(res, e);
    } catch (const std::exception& e) {
      spdlog::error("{} {}: {}", req.method, req.path, e.what());
      send_error(res, ApiError(500, "internal_error", "internal error", e.what()));
    }
  };
}

}  // namespace

std::pair<std::string, int> parse_bind_address(const std::string& s) {
  std::string host = "127.0.0.1";
  std::string_view port_part = s;
  if (auto colon = s.rfind(':'); colon != std::string::npos) {
    if (colon > 0) host = s.substr(0, colon);
    port_part = std::string_view(s).substr(colon + 1);
  }
  int port = -1;
  auto [ptr, ec] = std::from_chars(port_part.data(), port_part.data() + port_part.size(), port);
  if (ec != std::errc{} || ptr != port_part.data() + port_part.size() || port < 0 || port > 65535)
    throw std::invalid_argument("bad bind address '" + s + "', expected host:port");
  return {host, port};
}

Server::Server(std::shared_ptr<Api> api) : api_(std::move(api)), http_(std::make_unique<httplib::Server>()) {
  install_routes();
}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
  if (port == 0) return http_->bind_to_any_port(host);
  return http_->bind_to_port(host, port) ? port : -1;
}

bool Server::listen_after_bind() { return http_->listen_after_bind(); }

void Server::stop() {
  if (http_ && http_->is_running()) http_->stop();
}

bool Server::running() const { return http_->is_running(); }

void Server::install_routes() {
  auto api = api_;
  auto& http = *http_;

  http.set_logger([](const httplib::Request& req, const httplib::Response& res) {
    spdlog::debug("{} {} -> {}", req.method, req.target, res.status);
  });

  http.Get("/api/health", json_handler([api](const httplib::Request&) { return api->health(); }));
  http.Get("/api/sessions", json_handler([api](const httplib::Request& req) { return api->sessions(req.params); }));
  http.Get("/api/quality", json_handler([api](const httplib::Request&) { return api->quality(); }));
  http.Get("/api/embedding",
           json_handler([api](const httplib::Request& req) { return api->embedding(req.params); }));
  http.Post("/api/aggregate", json_handler([api](const httplib::Request& req) {
              auto body = Json::parse(req.body, nullptr, false);
              if (body.is_discarded()) throw ApiError(400, "bad_request", "request body is not valid JSON");
              return api->aggregate(body);
            }));

  const std::string session = kSessionRoute;
  http.Get(session + "timeline", json_handler([api](const httplib::Request& req) {
             return api->timeline(req.matches[1], req.params);
           }));
  http.Get(session + "matrix", json_handler([api](const httplib::Request& req) {
             return api->matrix(req.matches[1], req.params);
           }));
  http.Get(session + "brush", json_handler([api](const httplib::Request& req) {
             return api->brush(req.matches[1], req.params);
           }));
  http.Get(session + "series", json_handler([api](const httplib::Request& req) {
             return api->series(req.matches[1], req.params);
           }));

  http.Get(session + "video", [api](const httplib::Request& req, httplib::Response& res) {
    VideoFile file;
    try {
      file = api->video(req.matches[1]);
    } catch (const ApiError& e) {
      send_error(res, e);
      return;
    }
    std::error_code ec;
    const auto size = std::filesystem::file_size(file.path, ec);
    if (ec) {
      send_error(res, ApiError(404, "video_absent", "video file is unreadable", ec.message()));
      return;
    }
    auto stream = std::make_shared<std::ifstream>(file.path, std::ios::binary);
    res.set_header("Accept-Ranges", "bytes");
    res.set_content_provider(
        size, file.content_type,
        [stream](std::size_t offset, std::size_t length, httplib::DataSink& sink) {
          std::vector<char> buf(std::min<std::size_t>(length, 1 << 16));
          stream->clear();
          stream->seekg(static_cast<std::streamoff>(offset));
          std::size_t left = length;
          while (left > 0) {
            const auto n = std::min(left, buf.size());
            stream->read(buf.data(), static_cast<std::streamsize>(n));
            const auto got = static_cast<std::size_t>(stream->gcount());
            if (got == 0 || !sink.write(buf.data(), got)) return false;
            left -= got;
          }
          return true;
        });
  });

  http.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.status == 404 && res.body.empty())
      send_json(res, ApiError(404, "not_found", "no such endpoint", req.path).to_json(), 404);
  });
}

}  // namespace sessionlens::service
