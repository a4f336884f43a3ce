#pragma once

#include <stdexcept>
#include <string>

namespace threatrag {

enum class ErrorCode {
  config,
  invalid_argument,
  integrity,
  corruption,
  parse,
  not_found,
  fetch,
  provider,
  empty_embedding,
  generation,
  orchestration,
};

const char* to_string(ErrorCode code) noexcept;

/// Base for every error the engine raises. Callers that only care about the
/// category can switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define THREATRAG_DEFINE_ERROR(Name, Code)                                   \
  class Name : public Error {                                                \
   public:                                                                   \
    explicit Name(const std::string& message) : Error(ErrorCode::Code, message) {} \
  }

THREATRAG_DEFINE_ERROR(ConfigError, config);
THREATRAG_DEFINE_ERROR(InvalidArgument, invalid_argument);
THREATRAG_DEFINE_ERROR(IntegrityError, integrity);
THREATRAG_DEFINE_ERROR(CorruptionError, corruption);
THREATRAG_DEFINE_ERROR(ParseError, parse);
THREATRAG_DEFINE_ERROR(NotFoundError, not_found);
THREATRAG_DEFINE_ERROR(FetchError, fetch);
THREATRAG_DEFINE_ERROR(EmptyEmbeddingError, empty_embedding);
THREATRAG_DEFINE_ERROR(GenerationError, generation);

#undef THREATRAG_DEFINE_ERROR

/// Transport or HTTP failure talking to a remote model endpoint.
/// status() is 0 when no HTTP response was received.
class ProviderError : public Error {
 public:
  ProviderError(const std::string& message, int status, bool retryable)
      : Error(ErrorCode::provider, message), status_(status), retryable_(retryable) {}

  int status() const noexcept { return status_; }
  bool retryable() const noexcept { return retryable_; }

 private:
  int status_;
  bool retryable_;
};

}  // namespace threatrag
