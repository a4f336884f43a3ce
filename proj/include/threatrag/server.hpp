#pragma once

#include <atomic>
#include <memory>
#include <string>

#include <httplib.h>

#include "threatrag/engine.hpp"

namespace threatrag {

/// Stable machine-readable code for an error, as used in API error bodies.
std::string api_error_code(const std::exception& e);
int api_error_status(const std::exception& e);

/// JSON API over an Engine:
///   GET /health, POST /chat, POST /chat/stream (server-sent events),
///   POST /ingest, GET /stores, POST /eval.
class HttpApi {
 public:
  explicit HttpApi(Engine& engine);

  /// Binds host:port (port 0 picks a free one) and returns the bound port.
  /// Throws Error on bind failure.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Blocks.
  void listen();
  /// Stops accepting; in-flight requests finish first.
  void stop();

  httplib::Server& server() noexcept { return server_; }

 private:
  void install_routes();

  Engine& engine_;
  httplib::Server server_;
};

/// Runs the API on the configured host/port until SIGINT or SIGTERM.
void serve_until_signal(Engine& engine);

}  // namespace threatrag
