#include "threatrag/server.hpp"

#include <csignal>
#include <iostream>
#include <pthread.h>
#include <stdexcept>
#include <thread>
#include <unistd.h>

#include "threatrag/error.hpp"
#include "threatrag/text.hpp"

namespace threatrag {

namespace {

using nlohmann::json;

struct ApiError : std::runtime_error {
  ApiError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status(status), code(std::move(code)) {}
  int status;
  std::string code;
};

void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  send_json(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

json parse_body(const httplib::Request& req, bool allow_empty) {
  if (req.body.empty() && allow_empty) return json::object();
  try {
    json body = json::parse(req.body);
    if (!body.is_object()) throw ApiError(400, "invalid_request", "request body must be a JSON object");
    return body;
  } catch (const json::parse_error& e) {
    throw ApiError(400, "invalid_json", e.what());
  }
}

std::string required_query(const json& body) {
  auto it = body.find("query");
  if (it == body.end() || !it->is_string()) throw ApiError(400, "invalid_request", "field 'query' must be a string");
  std::string query = it->get<std::string>();
  if (normalize(query).empty()) throw ApiError(400, "empty_query", "query is empty");
  return query;
}

std::string sse_event(const std::string& event, const std::string& data) {
  return "event: " + event + "\ndata: " + data + "\n\n";
}

// Whole-word pieces of roughly `width` bytes for streaming.
std::vector<std::string> answer_pieces(const std::string& text, std::size_t width = 48) {
  std::vector<std::string> pieces;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = std::min(text.size(), start + width);
    if (end < text.size()) {
      std::size_t space = text.find(' ', end);
      end = space == std::string::npos ? text.size() : space + 1;
    }
    pieces.push_back(text.substr(start, end - start));
    start = end;
  }
  return pieces;
}

}  // namespace

std::string api_error_code(const std::exception& e) {
  if (auto* api = dynamic_cast<const ApiError*>(&e)) return api->code;
  if (auto* err = dynamic_cast<const Error*>(&e)) return to_string(err->code());
  return "internal";
}

int api_error_status(const std::exception& e) {
  if (auto* api = dynamic_cast<const ApiError*>(&e)) return api->status;
  if (auto* err = dynamic_cast<const Error*>(&e)) {
    switch (err->code()) {
      case ErrorCode::config:
      case ErrorCode::invalid_argument:
      case ErrorCode::parse:
        return 400;
      case ErrorCode::not_found:
        return 404;
      case ErrorCode::provider:
      case ErrorCode::fetch:
      case ErrorCode::generation:
      case ErrorCode::orchestration:
        return 502;
      default:
        return 500;
    }
  }
  return 500;
}

HttpApi::HttpApi(Engine& engine) : engine_(engine) { install_routes(); }

void HttpApi::install_routes() {
  const std::string cors = engine_.config().server.cors_origin;
  server_.set_post_routing_handler([cors](const httplib::Request&, httplib::Response& res) {
    if (cors.empty()) return;
    res.set_header("Access-Control-Allow-Origin", cors);
    res.set_header("Access-Control-Allow-Headers", "Content-Type, X-Admin-Token");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
  });
  server_.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      send_error(res, api_error_status(e), api_error_code(e), e.what());
    } catch (...) {
      send_error(res, 500, "internal", "unknown error");
    }
  });

  server_.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, engine_.health());
  });

  server_.Get("/stores", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"stores", engine_.store_manifests()}});
  });

  server_.Post("/chat", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string query = required_query(parse_body(req, false));
    send_json(res, 200, to_json(engine_.query(query)));
  });

  server_.Post("/chat/stream", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string query = required_query(parse_body(req, false));
    std::vector<std::string> events;
    try {
      auto body = to_json(engine_.query(query));
      events.push_back(sse_event("contexts", nlohmann::ordered_json{{"contexts", body["contexts"]},
                                                                    {"sources", body["sources"]}}
                                                 .dump()));
      for (const auto& piece : answer_pieces(body["answer"].get<std::string>())) {
        events.push_back(sse_event("delta", json{{"text", piece}}.dump()));
      }
      events.push_back(sse_event("done", body.dump()));
    } catch (const std::exception& e) {
      events.push_back(
          sse_event("error", json{{"error", {{"code", api_error_code(e)}, {"message", e.what()}}}}.dump()));
    }
    res.status = 200;
    res.set_header("Cache-Control", "no-cache");
    auto shared = std::make_shared<std::vector<std::string>>(std::move(events));
    res.set_chunked_content_provider("text/event-stream", [shared](std::size_t, httplib::DataSink& sink) {
      for (const auto& event : *shared) {
        if (!sink.write(event.data(), event.size())) return false;
      }
      sink.done();
      return true;
    });
  });

  server_.Post("/ingest", [this](const httplib::Request& req, httplib::Response& res) {
    const auto& token = engine_.config().server.admin_token;
    if (token && req.get_header_value("X-Admin-Token") != *token) {
      throw ApiError(401, "unauthorized", "missing or wrong X-Admin-Token");
    }
    const json body = parse_body(req, true);
    std::vector<std::string> names;
    if (auto it = body.find("source_names"); it != body.end() && !it->is_null()) {
      if (!it->is_array()) throw ApiError(400, "invalid_request", "source_names must be an array of strings");
      for (const auto& n : *it) {
        if (!n.is_string()) throw ApiError(400, "invalid_request", "source_names must be an array of strings");
        names.push_back(n.get<std::string>());
      }
    }
    send_json(res, 200, to_json(engine_.ingest(names)));
  });

  server_.Post("/eval", [this](const httplib::Request& req, httplib::Response& res) {
    const auto& token = engine_.config().server.admin_token;
    if (token && req.get_header_value("X-Admin-Token") != *token) {
      throw ApiError(401, "unauthorized", "missing or wrong X-Admin-Token");
    }
    const json body = parse_body(req, false);
    auto path = body.find("case_file_path");
    if (path == body.end() || !path->is_string()) {
      throw ApiError(400, "invalid_request", "field 'case_file_path' must be a string");
    }
    const EvalMode mode = parse_eval_mode(body.value("mode", "replay"));
    std::optional<std::filesystem::path> out_dir;
    if (auto it = body.find("out_dir"); it != body.end() && it->is_string()) out_dir = it->get<std::string>();
    send_json(res, 200, to_json(engine_.evaluate(path->get<std::string>(), mode, out_dir)));
  });
}

int HttpApi::bind(const std::string& host, int port) {
  int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpApi::listen() { server_.listen_after_bind(); }

void HttpApi::stop() { server_.stop(); }

void serve_until_signal(Engine& engine) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  HttpApi api(engine);
  const auto& cfg = engine.config().server;
  const int port = api.bind(cfg.host, cfg.port);
  std::cerr << "listening on http://" << cfg.host << ":" << port << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    api.stop();
  });
  api.listen();
  // listen() can return on its own; wake the waiter so it can be joined.
  kill(getpid(), SIGTERM);
  waiter.join();
}

}  // namespace threatrag
