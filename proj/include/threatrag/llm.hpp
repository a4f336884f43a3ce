#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "threatrag/http_client.hpp"

namespace threatrag {

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
};

struct TokenUsage {
  long prompt_tokens = 0;
  long completion_tokens = 0;
  long total_tokens = 0;
};

struct Completion {
  std::string text;
  std::optional<TokenUsage> usage;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;

  virtual const std::string& model_name() const noexcept = 0;
  virtual Completion complete(std::span<const ChatMessage> messages) = 0;
};

/// Validates the message list (non-empty, known roles) and returns the
/// completion. Throws InvalidArgument on a bad list.
Completion chat_completion(ChatClient& client, std::span<const ChatMessage> messages);

/// OpenAI-compatible POST {base_url}/v1/chat/completions.
class HttpChatClient final : public ChatClient {
 public:
  HttpChatClient(const std::string& base_url, std::string model, double temperature = 0.0,
                 HttpClientOptions options = {});

  const std::string& model_name() const noexcept override { return model_; }
  Completion complete(std::span<const ChatMessage> messages) override;

 private:
  JsonHttpClient client_;
  std::string model_;
  double temperature_;
};

/// Offline double that answers from the first prompt context ("[context 1]").
class EchoContextChatClient final : public ChatClient {
 public:
  const std::string& model_name() const noexcept override { return model_; }
  Completion complete(std::span<const ChatMessage> messages) override;

 private:
  std::string model_ = "echo-double";
};

/// A canned response selected by substrings of the final user message.
struct ScriptRule {
  std::vector<std::string> contains;  // all must occur
  std::string response;
};

/// Rule-driven double. Rules are tried in order; the first whose substrings
/// all appear in the last user message answers. With no match it falls back
/// to the next queued response, then to `fallback`, else throws
/// GenerationError. Safe for concurrent use.
class ScriptedChatClient final : public ChatClient {
 public:
  explicit ScriptedChatClient(std::vector<ScriptRule> rules = {}, std::vector<std::string> queue = {},
                              std::optional<std::string> fallback = std::nullopt,
                              std::string model = "scripted-double");

  /// Reads {"model"?, "rules": [{"contains": str|[str], "response": str}], "fallback"?}.
  static std::unique_ptr<ScriptedChatClient> from_file(const std::filesystem::path& path);

  const std::string& model_name() const noexcept override { return model_; }
  Completion complete(std::span<const ChatMessage> messages) override;

  std::size_t calls() const;

 private:
  std::vector<ScriptRule> rules_;
  std::vector<std::string> queue_;
  std::optional<std::string> fallback_;
  std::string model_;
  mutable std::mutex mutex_;
  std::size_t next_ = 0;
  std::size_t calls_ = 0;
};

/// Adapts a callable; handy for tests that need custom failures.
class FunctionChatClient final : public ChatClient {
 public:
  using Fn = std::function<Completion(std::span<const ChatMessage>)>;
  FunctionChatClient(Fn fn, std::string model = "function-double") : fn_(std::move(fn)), model_(std::move(model)) {}

  const std::string& model_name() const noexcept override { return model_; }
  Completion complete(std::span<const ChatMessage> messages) override { return fn_(messages); }

 private:
  Fn fn_;
  std::string model_;
};

/// Request hash over (model, messages, temperature).
std::string request_key(std::string_view model, std::span<const ChatMessage> messages);

/// Directory of LLM transcripts, one `<request key>.json` file per exchange.
class ReplayStore {
 public:
  explicit ReplayStore(std::filesystem::path directory);

  std::optional<Completion> find(const std::string& key) const;
  void put(const std::string& key, std::string_view model, std::span<const ChatMessage> messages,
           const Completion& completion);

  const std::filesystem::path& directory() const noexcept { return directory_; }

 private:
  std::filesystem::path directory_;
  mutable std::mutex mutex_;
};

/// Live mode: forwards to `inner` and persists every exchange.
class RecordingChatClient final : public ChatClient {
 public:
  RecordingChatClient(std::shared_ptr<ChatClient> inner, std::shared_ptr<ReplayStore> store)
      : inner_(std::move(inner)), store_(std::move(store)) {}

  const std::string& model_name() const noexcept override { return inner_->model_name(); }
  Completion complete(std::span<const ChatMessage> messages) override;

 private:
  std::shared_ptr<ChatClient> inner_;
  std::shared_ptr<ReplayStore> store_;
};

/// Replay mode: answers only from recorded transcripts; a miss throws NotFoundError.
class ReplayChatClient final : public ChatClient {
 public:
  ReplayChatClient(std::shared_ptr<ReplayStore> store, std::string model)
      : store_(std::move(store)), model_(std::move(model)) {}

  const std::string& model_name() const noexcept override { return model_; }
  Completion complete(std::span<const ChatMessage> messages) override;

 private:
  std::shared_ptr<ReplayStore> store_;
  std::string model_;
};

struct Exchange {
  std::vector<ChatMessage> request;
  std::string response;
};

/// Appends every exchange passing through to a caller-owned log. Several
/// wrappers may share one log; the log itself is not synchronized.
class TranscriptingChatClient final : public ChatClient {
 public:
  TranscriptingChatClient(ChatClient& inner, std::vector<Exchange>& log) : inner_(inner), log_(log) {}

  const std::string& model_name() const noexcept override { return inner_.model_name(); }
  Completion complete(std::span<const ChatMessage> messages) override;

 private:
  ChatClient& inner_;
  std::vector<Exchange>& log_;
};

nlohmann::ordered_json to_json(std::span<const ChatMessage> messages);

}  // namespace threatrag
