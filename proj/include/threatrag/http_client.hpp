#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>

#include <nlohmann/json.hpp>

namespace threatrag {

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{250};  // doubles per retry
};

struct HttpClientOptions {
  RetryPolicy retry;
  std::chrono::milliseconds timeout{60'000};
  std::size_t max_in_flight = 4;
  std::optional<std::string> bearer_token;
};

/// POSTs JSON to an OpenAI-compatible server rooted at `base_url`.
/// Transport errors, 429 and 5xx are retried with exponential backoff; other
/// HTTP errors fail immediately. Failures surface as ProviderError.
class JsonHttpClient {
 public:
  JsonHttpClient(const std::string& base_url, HttpClientOptions options);

  nlohmann::json post(const std::string& path, const nlohmann::json& body);

  const std::string& base_url() const noexcept { return base_url_; }

 private:
  std::string base_url_;
  std::string origin_;
  std::string prefix_;
  HttpClientOptions options_;
  std::unique_ptr<std::counting_semaphore<256>> in_flight_;
};

/// Reads an environment variable; nullopt when unset or empty.
std::optional<std::string> env_value(const char* name);

}  // namespace threatrag
