#pragma once

// WebSocket front end for Session. One I/O thread runs the acceptor and the
// connections; one simulation thread owns the Session and paces it at the
// controller tick rate.

#include <atomic>
#include <memory>
#include <thread>

#include "pneumahand/session.hpp"

namespace pneumahand {

class SessionServer {
public:
  // port 0 binds an ephemeral port. `realtime` paces ticks against the wall
  // clock; otherwise ticks run back to back.
  SessionServer(AppConfig cfg, unsigned short port, bool realtime = true);
  ~SessionServer();
  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  unsigned short port() const;
  void start();
  void stop();
  // Blocks until stop() or SIGINT/SIGTERM.
  void run();

  // Latest simulation tick, readable from any thread.
  std::uint64_t tick() const { return tick_.load(); }

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::atomic<std::uint64_t> tick_{0};
};

}  // namespace pneumahand
