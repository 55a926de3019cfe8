#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "biopsym/api.hpp"

namespace biopsym {

/// HTTP + WebSocket front end for an Api on one port. Each connection gets
/// its own thread; a stream connection drives its session's state machine
/// synchronously, so responses leave in request order.
class Server {
 public:
  Server(std::shared_ptr<Api> api, std::string address = "127.0.0.1", std::uint16_t port = 0);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and starts accepting. With port 0 the OS picks one; see port().
  void start();
  /// Closes the listener and every open connection, then joins the threads.
  void stop();
  /// Blocks until stop() is called from another thread (or a signal handler
  /// thread).
  void wait();

  std::uint16_t port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace biopsym
