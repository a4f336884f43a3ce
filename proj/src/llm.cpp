#include "threatrag/llm.hpp"

#include <fstream>

#include "threatrag/error.hpp"
#include "threatrag/text.hpp"

namespace threatrag {

Completion chat_completion(ChatClient& client, std::span<const ChatMessage> messages) {
  if (messages.empty()) throw InvalidArgument("chat completion needs at least one message");
  for (const auto& m : messages) {
    if (m.role != "system" && m.role != "user" && m.role != "assistant") {
      throw InvalidArgument("unsupported chat role '" + m.role + "'");
    }
  }
  return client.complete(messages);
}

nlohmann::ordered_json to_json(std::span<const ChatMessage> messages) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& m : messages) out.push_back({{"role", m.role}, {"content", m.content}});
  return out;
}

namespace {

HttpClientOptions with_llm_key(HttpClientOptions options) {
  if (!options.bearer_token) options.bearer_token = env_value("LLM_API_KEY");
  return options;
}

const ChatMessage* last_user_message(std::span<const ChatMessage> messages) {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == "user") return &*it;
  }
  return nullptr;
}

}  // namespace

HttpChatClient::HttpChatClient(const std::string& base_url, std::string model, double temperature,
                               HttpClientOptions options)
    : client_(base_url, with_llm_key(std::move(options))), model_(std::move(model)), temperature_(temperature) {
  if (model_.empty()) throw ConfigError("chat model name is required");
}

Completion HttpChatClient::complete(std::span<const ChatMessage> messages) {
  nlohmann::json body{{"model", model_}, {"messages", to_json(messages)}, {"temperature", temperature_}};
  nlohmann::json response = client_.post("/v1/chat/completions", body);
  try {
    Completion out;
    out.text = response.at("choices").at(0).at("message").at("content").get<std::string>();
    if (auto it = response.find("usage"); it != response.end() && it->is_object()) {
      out.usage = TokenUsage{it->value("prompt_tokens", 0L), it->value("completion_tokens", 0L),
                             it->value("total_tokens", 0L)};
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError("malformed chat completion response: " + std::string(e.what()), 200, false);
  }
}

Completion EchoContextChatClient::complete(std::span<const ChatMessage> messages) {
  const ChatMessage* user = last_user_message(messages);
  const std::string_view prompt = user ? std::string_view(user->content) : std::string_view{};
  constexpr std::string_view kLabel = "[context 1]\n";
  auto start = prompt.find(kLabel);
  if (start == std::string_view::npos) return {"No context is available to answer this question.", std::nullopt};
  start += kLabel.size();
  auto end = prompt.find("\n\n[context ", start);
  std::string_view context = prompt.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
  return {"According to the retrieved context: " + normalize(context), std::nullopt};
}

ScriptedChatClient::ScriptedChatClient(std::vector<ScriptRule> rules, std::vector<std::string> queue,
                                       std::optional<std::string> fallback, std::string model)
    : rules_(std::move(rules)), queue_(std::move(queue)), fallback_(std::move(fallback)), model_(std::move(model)) {}

std::unique_ptr<ScriptedChatClient> ScriptedChatClient::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open script " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  std::vector<ScriptRule> rules;
  for (const auto& r : j.value("rules", nlohmann::json::array())) {
    ScriptRule rule;
    const auto& c = r.at("contains");
    if (c.is_string()) {
      rule.contains.push_back(c.get<std::string>());
    } else {
      rule.contains = c.get<std::vector<std::string>>();
    }
    rule.response = r.at("response").get<std::string>();
    rules.push_back(std::move(rule));
  }
  std::optional<std::string> fallback;
  if (j.contains("fallback")) fallback = j["fallback"].get<std::string>();
  return std::make_unique<ScriptedChatClient>(std::move(rules), j.value("queue", std::vector<std::string>{}),
                                              std::move(fallback), j.value("model", std::string("scripted-double")));
}

Completion ScriptedChatClient::complete(std::span<const ChatMessage> messages) {
  const ChatMessage* user = last_user_message(messages);
  const std::string prompt = user ? user->content : std::string{};
  std::lock_guard lock(mutex_);
  ++calls_;
  for (const auto& rule : rules_) {
    bool all = true;
    for (const auto& needle : rule.contains) {
      if (prompt.find(needle) == std::string::npos) {
        all = false;
        break;
      }
    }
    if (all) return {rule.response, std::nullopt};
  }
  if (next_ < queue_.size()) return {queue_[next_++], std::nullopt};
  if (fallback_) return {*fallback_, std::nullopt};
  throw GenerationError("scripted client has no response for prompt: " + prompt.substr(0, 120));
}

std::size_t ScriptedChatClient::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::string request_key(std::string_view model, std::span<const ChatMessage> messages) {
  nlohmann::ordered_json canonical{{"model", model}, {"messages", to_json(messages)}, {"temperature", 0}};
  return sha256_hex(canonical.dump());
}

ReplayStore::ReplayStore(std::filesystem::path directory) : directory_(std::move(directory)) {}

std::optional<Completion> ReplayStore::find(const std::string& key) const {
  std::lock_guard lock(mutex_);
  std::ifstream in(directory_ / (key + ".json"));
  if (!in) return std::nullopt;
  try {
    auto j = nlohmann::json::parse(in);
    return Completion{j.at("response").get<std::string>(), std::nullopt};
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError("replay transcript " + key + ": " + e.what());
  }
}

void ReplayStore::put(const std::string& key, std::string_view model, std::span<const ChatMessage> messages,
                      const Completion& completion) {
  std::lock_guard lock(mutex_);
  std::filesystem::create_directories(directory_);
  nlohmann::ordered_json j{{"key", key}, {"model", model}, {"messages", to_json(messages)}, {"response", completion.text}};
  std::ofstream out(directory_ / (key + ".json"), std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw IntegrityError("cannot write replay transcript " + key);
}

Completion RecordingChatClient::complete(std::span<const ChatMessage> messages) {
  Completion completion = inner_->complete(messages);
  store_->put(request_key(inner_->model_name(), messages), inner_->model_name(), messages, completion);
  return completion;
}

Completion ReplayChatClient::complete(std::span<const ChatMessage> messages) {
  const std::string key = request_key(model_, messages);
  auto found = store_->find(key);
  if (!found) throw NotFoundError("no recorded transcript for request " + key);
  return *found;
}

Completion TranscriptingChatClient::complete(std::span<const ChatMessage> messages) {
  Completion completion = inner_.complete(messages);
  log_.push_back({std::vector<ChatMessage>(messages.begin(), messages.end()), completion.text});
  return completion;
}

}  // namespace threatrag
