#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "session.hpp"

namespace gom::app {

struct ServerOptions {
  int width = 512;
  int height = 512;
  unsigned render_threads = 1;  // concurrent render jobs across connections
};

/// Websocket render service. Each connection owns a Session; message intake
/// never waits on rendering, and each connection has at most one render in
/// flight, always of the newest state.
class Server {
 public:
  /// Binds immediately (port 0 picks a free port); throws IoError on failure.
  Server(std::shared_ptr<const AvatarBundle> avatar, const std::string& address,
         std::uint16_t port, const ServerOptions& options = {});
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  std::uint16_t port() const;

  /// Serves until stop() is called.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Splits "host:port"; throws ArgumentError when malformed.
std::pair<std::string, std::uint16_t> parse_bind_address(const std::string& text);

}  // namespace gom::app
