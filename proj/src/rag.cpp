#include "threatrag/rag.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <set>

#include "threatrag/text.hpp"

namespace threatrag {
namespace {

std::string user_section(const PromptTemplate& tmpl, std::string_view query, std::span<const std::string> contexts) {
  if (contexts.size() > tmpl.context_slot_count) {
    throw InvalidArgument("prompt has " + std::to_string(tmpl.context_slot_count) + " context slots, got " +
                          std::to_string(contexts.size()));
  }
  std::string out = "[User Query]\n";
  out += query;
  if (contexts.empty()) {
    out += "\n\n[context]\n";
    out += kNoContextMarker;
    return out;
  }
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    out += "\n\n[context " + std::to_string(i + 1) + "]\n";
    out += contexts[i];
  }
  return out;
}

std::string trim(std::string_view s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  auto end = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(begin, end - begin + 1));
}

}  // namespace

std::string render_prompt(const PromptTemplate& tmpl, std::string_view query, std::span<const std::string> contexts) {
  return "[System]\n" + tmpl.system_instruction + "\n\n" + user_section(tmpl, query, contexts);
}

std::vector<ChatMessage> build_messages(const PromptTemplate& tmpl, std::string_view query,
                                        std::span<const std::string> contexts) {
  return {{"system", tmpl.system_instruction}, {"user", user_section(tmpl, query, contexts)}};
}

std::vector<std::string> source_names(std::span<const RetrievalHit> contexts) {
  std::vector<std::string> names;
  std::set<std::string> seen;
  for (const auto& hit : contexts) {
    auto it = hit.metadata.find("source");
    if (it == hit.metadata.end() || it->second.empty()) continue;
    if (seen.insert(it->second).second) names.push_back(it->second);
  }
  return names;
}

ChatAnswer answer_query(std::string_view query, std::span<const VectorStore* const> stores,
                        const RetrievalConfig& retrieval, EmbeddingProvider& embedder, ChatClient& llm,
                        const PromptTemplate& tmpl) {
  const auto started = std::chrono::steady_clock::now();
  const std::string query_text = normalize(query);
  if (query_text.empty()) throw InvalidArgument("query is empty");
  if (stores.empty()) throw InvalidArgument("answer_query needs at least one store");

  EmbeddingVector query_vector = embed_text(embedder, query_text);
  std::vector<RetrievalHit> hits = ensemble_retrieve(stores, query_vector.values, retrieval);
  if (hits.size() > tmpl.context_slot_count) hits.resize(tmpl.context_slot_count);

  std::vector<std::string> contexts;
  contexts.reserve(hits.size());
  for (const auto& hit : hits) contexts.push_back(hit.text);

  ChatAnswer answer;
  try {
    auto messages = build_messages(tmpl, query_text, contexts);
    Completion completion = chat_completion(llm, messages);
    answer.answer_text = std::move(completion.text);
    answer.token_usage = completion.usage;
  } catch (const Error& e) {
    std::string message =
        "retrieval returned " + std::to_string(hits.size()) + " contexts; generation failed: " + e.what();
    throw OrchestrationError(message, std::move(hits));
  }
  answer.source_names = source_names(hits);
  answer.ungrounded = hits.empty();
  answer.contexts_used = std::move(hits);
  answer.model_name = llm.model_name();
  answer.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
  return answer;
}

std::vector<std::string> parse_list_items(std::string_view text) {
  std::vector<std::string> items;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    std::string line = trim(text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    if (line.empty()) continue;

    std::size_t i = 0;
    if (std::isdigit(static_cast<unsigned char>(line[0]))) {
      while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
      if (i >= line.size() || (line[i] != '.' && line[i] != ')')) continue;
      ++i;
    } else if (line[0] == '-' || line[0] == '*') {
      i = 1;
    } else {
      continue;
    }
    if (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) continue;
    std::string item = trim(std::string_view(line).substr(i));
    if (!item.empty()) items.push_back(std::move(item));
  }
  return items;
}

std::string question_generation_prompt(std::string_view answer_text, std::size_t n) {
  return "Generate exactly " + std::to_string(n) +
         " distinct questions that the following answer would correctly answer. Number them 1-" + std::to_string(n) +
         ".\n\nAnswer:\n" + std::string(answer_text);
}

GeneratedQuestionSet generate_questions(std::string_view answer_text, ChatClient& llm, std::size_t n) {
  if (normalize(answer_text).empty()) throw InvalidArgument("cannot generate questions from an empty answer");
  if (n == 0) throw InvalidArgument("question count must be positive");

  GeneratedQuestionSet out{std::string(answer_text), {}};
  std::set<std::string> seen;
  bool any_list = false;
  const std::vector<ChatMessage> messages{{"user", question_generation_prompt(answer_text, n)}};
  constexpr int kAttempts = 3;  // first ask plus two re-asks
  for (int attempt = 0; attempt < kAttempts && out.questions.size() < n; ++attempt) {
    Completion completion = chat_completion(llm, messages);
    auto items = parse_list_items(completion.text);
    any_list = any_list || !items.empty();
    for (auto& item : items) {
      if (item.back() != '?') continue;
      if (!seen.insert(to_lower(item)).second) continue;
      out.questions.push_back(std::move(item));
      if (out.questions.size() == n) break;
    }
  }
  if (out.questions.size() < n) {
    if (!any_list) throw ParseError("question generation returned no numbered list");
    throw GenerationError("only " + std::to_string(out.questions.size()) + " of " + std::to_string(n) +
                          " questions generated after retries");
  }
  return out;
}

}  // namespace threatrag
