#ifndef GVFSWITCH_SERVER_HPP
#define GVFSWITCH_SERVER_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gvfswitch/engine.hpp"
#include "gvfswitch/telemetry.hpp"

namespace gvfswitch {

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 0;        // 0 picks a free port
  std::string static_dir;         // plain HTTP GETs are served from here when set
  std::size_t telemetry_capacity = 64;
  std::size_t client_capacity = 64;  // per-client outgoing messages
};

/// WebSocket front end. One I/O thread owns every connection; the engine
/// thread only touches the two bounded queues. The first client to connect
/// holds pilot rights until it leaves; later clients observe.
class TelemetryServer {
 public:
  /// `hello` renders the greeting for a role ("pilot" or "observer").
  TelemetryServer(ServerOptions options, BoundedQueue<Command>& commands,
                  std::function<std::string(const std::string&)> hello);
  ~TelemetryServer();
  TelemetryServer(const TelemetryServer&) = delete;
  TelemetryServer& operator=(const TelemetryServer&) = delete;

  /// Binds and starts the I/O thread.
  void start();
  void stop();
  unsigned short port() const;

  /// Called from the engine thread; never blocks on clients.
  void publish(const std::vector<Outbound>& messages);

  std::size_t client_count() const;
  std::uint64_t telemetry_dropped() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace gvfswitch

#endif
