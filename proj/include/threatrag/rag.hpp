#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "threatrag/embed.hpp"
#include "threatrag/error.hpp"
#include "threatrag/index.hpp"
#include "threatrag/llm.hpp"

namespace threatrag {

inline constexpr std::string_view kDefaultSystemInstruction =
    "You are a cyber security expert. Provide the responses for the question considering the context below. "
    "Your responses should consider factors such as the relevance, accuracy, depth, creativity, and level of "
    "detail of their responses.";

inline constexpr std::string_view kNoContextMarker = "no context available";

struct PromptTemplate {
  std::string system_instruction{kDefaultSystemInstruction};
  std::size_t context_slot_count = 3;
};

/// Full prompt: [System], [User Query], then [context 1..n] in the given order.
/// Throws InvalidArgument when there are more contexts than slots.
std::string render_prompt(const PromptTemplate& tmpl, std::string_view query, std::span<const std::string> contexts);

/// The same prompt split into a system message and a user message.
std::vector<ChatMessage> build_messages(const PromptTemplate& tmpl, std::string_view query,
                                        std::span<const std::string> contexts);

struct ChatAnswer {
  std::string answer_text;
  std::vector<RetrievalHit> contexts_used;
  std::vector<std::string> source_names;
  std::string model_name;
  std::int64_t latency_ms = 0;
  std::optional<TokenUsage> token_usage;
  bool ungrounded = false;
};

/// Generation failed after retrieval succeeded; carries what was retrieved.
class OrchestrationError : public Error {
 public:
  OrchestrationError(const std::string& message, std::vector<RetrievalHit> contexts)
      : Error(ErrorCode::orchestration, message), contexts_(std::move(contexts)) {}

  const std::vector<RetrievalHit>& contexts() const noexcept { return contexts_; }

 private:
  std::vector<RetrievalHit> contexts_;
};

ChatAnswer answer_query(std::string_view query, std::span<const VectorStore* const> stores,
                        const RetrievalConfig& retrieval, EmbeddingProvider& embedder, ChatClient& llm,
                        const PromptTemplate& tmpl = {});

/// Distinct metadata["source"] values in context order.
std::vector<std::string> source_names(std::span<const RetrievalHit> contexts);

/// Items of a "1." / "1)" / "-" / "*" marked list, one per line, markers stripped.
std::vector<std::string> parse_list_items(std::string_view text);

std::string question_generation_prompt(std::string_view answer_text, std::size_t n);

struct GeneratedQuestionSet {
  std::string source_answer_text;
  std::vector<std::string> questions;
};

/// Asks for n questions, re-asking up to twice to fill the set. Items not
/// ending in '?' are rejected. Throws ParseError if no attempt produced a
/// list, GenerationError if fewer than n questions were collected.
GeneratedQuestionSet generate_questions(std::string_view answer_text, ChatClient& llm, std::size_t n = 5);

}  // namespace threatrag
