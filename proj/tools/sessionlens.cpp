#include <csignal>
#include <cstdlib>
#include <thread>

#include <pthread.h>
#include <unistd.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "sessionlens/server.hpp"

using namespace sessionlens;

namespace {

std::shared_ptr<const Dataset> load(const std::string& root) {
  auto ds = std::make_shared<Dataset>(load_dataset(root));
  std::size_t rejected = 0, gaps = 0;
  for (const auto& r : ds->reports) {
    gaps += r.gaps.size();
    if (!r.loaded) {
      ++rejected;
      spdlog::warn("session {} rejected: {} ({})", r.session_id, r.rejection ? r.rejection->message : "unreadable",
                   r.rejection ? r.rejection->code : "");
    }
    for (const auto& [stream, presence] : r.stream_presence)
      if (r.loaded && presence == Presence::absent) spdlog::debug("session {}: {} absent", r.session_id, stream);
    for (const auto& g : r.gaps)
      spdlog::info("session {}: gap in {} [{:.2f}, {:.2f}]", r.session_id, g.stream, g.start_s, g.end_s);
    for (const auto& d : r.diagnostics) spdlog::info("session {}: {}", r.session_id, d);
  }
  spdlog::info("dataset '{}': {} sessions loaded, {} rejected, {} gaps", ds->manifest.dataset_name,
               ds->sessions.size(), rejected, gaps);
  return ds;
}

int serve(const std::string& data, const std::string& bind_address, const embed::EmbedParams& params) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGHUP);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  std::shared_ptr<const Dataset> dataset;
  try {
    dataset = load(data);
  } catch (const std::exception& e) {
    spdlog::error("cannot ingest {}: {}", data, e.what());
    return 1;
  }
  auto [host, port] = service::parse_bind_address(bind_address);
  auto api = std::make_shared<service::Api>(dataset, params);
  service::Server server(api);
  const int bound = server.bind(host, port);
  if (bound < 0) {
    spdlog::error("cannot bind {}", bind_address);
    return 1;
  }
  spdlog::info("listening on {}:{}", host, bound);

  std::jthread signal_thread([&] {
    for (;;) {
      int sig = 0;
      if (sigwait(&signals, &sig) != 0) continue;
      if (sig == SIGHUP) {
        try {
          api->reload(load(data));
          spdlog::info("dataset reloaded");
        } catch (const std::exception& e) {
          spdlog::error("reload failed, keeping previous snapshot: {}", e.what());
        }
      } else {
        server.stop();
        return;
      }
    }
  });
  const bool ok = server.listen_after_bind();
  if (!ok) {
    // listen failed without a signal; wake the signal thread so it can exit
    kill(getpid(), SIGTERM);
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Session analytics service"};
  app.require_subcommand(1);

  auto* serve_cmd = app.add_subcommand("serve", "Load a dataset and serve the HTTP API");
  std::string data;
  std::string bind_address = "127.0.0.1:8080";
  embed::EmbedParams params;
  bool verbose = false;
  serve_cmd->add_option("--data", data, "Dataset root (falls back to SESSIONLENS_DATA)");
  serve_cmd->add_option("--bind", bind_address, "Listen address host:port")->capture_default_str();
  serve_cmd->add_option("--embed-k", params.shapelet_count, "Shapelet count")->capture_default_str();
  serve_cmd->add_option("--embed-m", params.shapelet_length, "Shapelet length")->capture_default_str();
  serve_cmd->add_option("--embed-len", params.series_length, "Resampled series length")->capture_default_str();
  serve_cmd->add_option("--embed-seed", params.seed, "Shapelet sampling seed")->capture_default_str();
  serve_cmd->add_flag("-v,--verbose", verbose, "Log every request");

  CLI11_PARSE(app, argc, argv);

  if (verbose) spdlog::set_level(spdlog::level::debug);
  if (data.empty()) {
    if (const char* env = std::getenv("SESSIONLENS_DATA")) data = env;
  }
  if (data.empty()) {
    spdlog::error("no dataset: pass --data or set SESSIONLENS_DATA");
    return 2;
  }
  try {
    return serve(data, bind_address, params);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}
