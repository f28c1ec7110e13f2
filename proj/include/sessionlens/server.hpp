#pragma once

#include <memory>
#include <string>

#include "sessionlens/api.hpp"

namespace httplib {
class Server;
}

namespace sessionlens::service {

// HTTP front end for Api. One instance serves one listening socket.
class Server {
 public:
  explicit Server(std::shared_ptr<Api> api);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Port 0 picks an ephemeral port. Returns the bound port, or -1 on failure.
  int bind(const std::string& host, int port);
  // Blocks until stop() is called.
  bool listen_after_bind();
  void stop();
  bool running() const;

 private:
  void install_routes();

  std::shared_ptr<Api> api_;
  std::unique_ptr<httplib::Server> http_;
};

// "host:port", ":port" or "port".
std::pair<std::string, int> parse_bind_address(const std::string& s);

}  // namespace sessionlens::service
