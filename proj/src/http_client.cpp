#include "threatrag/http_client.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "threatrag/error.hpp"
#include "threatrag/html.hpp"

namespace threatrag {

std::optional<std::string> env_value(const char* name) {
  const char* value = std::getenv(name);
  if (value == nullptr || *value == '\0') return std::nullopt;
  return std::string(value);
}

JsonHttpClient::JsonHttpClient(const std::string& base_url, HttpClientOptions options)
    : base_url_(base_url), options_(std::move(options)) {
  auto url = parse_url(base_url);
  if (!url) throw ConfigError("base_url must be an http(s) URL: " + base_url);
  origin_ = url->origin();
  prefix_ = url->path;
  while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  auto slots = static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(options_.max_in_flight, 1, 256));
  in_flight_ = std::make_unique<std::counting_semaphore<256>>(slots);
}

nlohmann::json JsonHttpClient::post(const std::string& path, const nlohmann::json& body) {
  const std::string payload = body.dump();
  const std::string target = prefix_ + path;
  httplib::Headers headers;
  if (options_.bearer_token) headers.emplace("Authorization", "Bearer " + *options_.bearer_token);

  const int attempts = std::max(1, options_.retry.max_attempts);
  auto backoff = options_.retry.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    std::optional<ProviderError> failure;
    {
      in_flight_->acquire();
      struct Release {
        std::counting_semaphore<256>& sem;
        ~Release() { sem.release(); }
      } release{*in_flight_};

      httplib::Client client(origin_);
      client.set_connection_timeout(options_.timeout);
      client.set_read_timeout(options_.timeout);
      client.set_write_timeout(options_.timeout);
      auto res = client.Post(target, headers, payload, "application/json");
      if (!res) {
        failure.emplace(base_url_ + target + ": " + httplib::to_string(res.error()), 0, true);
      } else if (res->status >= 200 && res->status < 300) {
        try {
          return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error& e) {
          throw ProviderError(base_url_ + target + ": invalid JSON response: " + e.what(), res->status, false);
        }
      } else {
        bool retryable = res->status == 429 || res->status >= 500;
        std::string snippet = res->body.substr(0, 200);
        failure.emplace(base_url_ + target + ": HTTP " + std::to_string(res->status) + " " + snippet,
                        res->status, retryable);
      }
    }
    if (!failure->retryable() || attempt >= attempts) throw *failure;
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
}

}  // namespace threatrag
