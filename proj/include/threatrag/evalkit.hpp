#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "threatrag/embed.hpp"
#include "threatrag/llm.hpp"
#include "threatrag/preprocess.hpp"

namespace threatrag {

enum class SourceTag { vulnerability, apt_report, security_blog, virustotal_report };

inline constexpr SourceTag kAllSourceTags[] = {SourceTag::vulnerability, SourceTag::apt_report,
                                               SourceTag::security_blog, SourceTag::virustotal_report};

std::string_view to_string(SourceTag tag) noexcept;
SourceTag parse_source_tag(std::string_view name);

struct EvalCase {
  std::string id;
  std::string query;
  std::string bot_answer;
  std::optional<std::string> human_answer;
  std::optional<std::string> ground_truth;
  std::vector<std::string> contexts;
  SourceTag source_kind = SourceTag::vulnerability;
};

/// Parses one case object. Throws ParseError on missing/invalid fields.
EvalCase parse_eval_case(const nlohmann::json& j, std::string id);

struct CaseParseError {
  std::size_t line = 0;
  std::string message;
};

struct CaseFile {
  std::vector<EvalCase> cases;
  std::vector<CaseParseError> errors;
};

/// JSON Lines case file. Bad lines are reported and skipped; a file without
/// any non-blank line throws InvalidArgument.
CaseFile load_eval_cases(const std::filesystem::path& path);
CaseFile parse_eval_cases(std::string_view content);

// ---------------------------------------------------------------------------
// BERT-score

struct BertScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// 2PR/(P+R), or 0 when P+R == 0.
double harmonic_f1(double precision, double recall) noexcept;

/// Greedy matching over token vectors. Cosines are clamped to [0,1]; recall
/// averages the best match of each reference token, precision of each
/// candidate token. Throws InvalidArgument on an empty side.
BertScore bert_score_vectors(std::span<const std::vector<float>> candidate,
                             std::span<const std::vector<float>> reference);

/// One vector per token of a text.
class TokenEmbedder {
 public:
  virtual ~TokenEmbedder() = default;
  virtual std::vector<std::vector<float>> embed_tokens(std::string_view text) = 0;
};

/// Tokens are preprocessed without stopword removal; each token vector hashes
/// the token and its padded character trigrams into `dim` buckets.
class HashingTokenEmbedder final : public TokenEmbedder {
 public:
  explicit HashingTokenEmbedder(std::size_t dim = 128);
  std::vector<std::vector<float>> embed_tokens(std::string_view text) override;

 private:
  std::size_t dim_;
};

/// Embeds each token separately through an EmbeddingProvider.
class ProviderTokenEmbedder final : public TokenEmbedder {
 public:
  explicit ProviderTokenEmbedder(EmbeddingProvider& provider) : provider_(provider) {}
  std::vector<std::vector<float>> embed_tokens(std::string_view text) override;

 private:
  EmbeddingProvider& provider_;
};

BertScore bert_score(std::string_view candidate, std::string_view reference, TokenEmbedder& embedder);

// ---------------------------------------------------------------------------
// Indirect evaluation

struct IndirectEvalResult {
  std::vector<std::string> questions;
  std::vector<double> per_question_scores;
  double average_score = 0.0;
  double threshold = 0.8;
  bool passed = false;
};

IndirectEvalResult summarize_indirect(std::vector<std::string> questions, std::vector<double> scores,
                                      double threshold = 0.8);

/// Generates five questions from the bot answer and scores each against the
/// original query with BERT-score F1.
IndirectEvalResult indirect_eval(const EvalCase& ecase, ChatClient& llm, TokenEmbedder& embedder,
                                 double threshold = 0.8);

// ---------------------------------------------------------------------------
// Cosine comparison with a human answer

struct EmbedderSet {
  const WordVectorTable* word2vec_style = nullptr;  // S1
  const WordVectorTable* glove_style = nullptr;     // S2
  EmbeddingProvider* contextual = nullptr;          // S3
  const StopwordSet* stopwords = nullptr;           // defaults to the shipped list
};

struct CosineEvalResult {
  std::optional<double> s1_word2vec_style;
  std::optional<double> s2_glove_style;
  std::optional<double> s3_contextual;
  std::map<std::string, std::string> absent_reasons;  // "s1"/"s2"/"s3" -> why
};

/// Requires human_answer (InvalidArgument otherwise). Per-embedder failures
/// leave that score absent with a reason.
CosineEvalResult cosine_eval(const EvalCase& ecase, const EmbedderSet& embedders);

// ---------------------------------------------------------------------------
// Retrieval and generation metrics

struct StatementVerdict {
  std::string statement;
  bool supported = false;
  std::string rationale;
};

/// numerator / denominator with the verdicts behind them.
struct RatioMetric {
  double value = 0.0;
  std::size_t numerator = 0;
  std::size_t denominator = 0;
  std::vector<StatementVerdict> verdicts;
};

RatioMetric ratio_from_verdicts(std::vector<StatementVerdict> verdicts);

struct AnswerRelevancy {
  double value = 0.0;  // may be negative; not clamped
  std::vector<std::string> questions;
  std::vector<double> similarities;
};

double mean(std::span<const double> values);

struct JudgePrompts {
  static std::string statement_extraction(std::string_view text);
  static std::string support_verdict(std::string_view context, std::string_view statement);
  static std::string recall_verdict(std::string_view context, std::string_view statement);
  static std::string relevance_verdict(std::string_view ground_truth, std::string_view statement);
  static nlohmann::ordered_json templates();
};

std::vector<std::string> extract_statements(std::string_view text, ChatClient& judge);

/// "Yes"/"No" on the first line, rationale after. Throws ParseError otherwise.
StatementVerdict parse_verdict(std::string statement, std::string_view completion);

RatioMetric faithfulness(std::string_view answer, std::span<const std::string> contexts, ChatClient& judge);
AnswerRelevancy answer_relevancy(std::string_view query, std::string_view answer, ChatClient& llm,
                                 EmbeddingProvider& embedder, std::size_t m = 5);
RatioMetric context_recall(std::string_view ground_truth, std::span<const std::string> contexts, ChatClient& judge);
RatioMetric context_precision(std::string_view ground_truth, std::span<const std::string> contexts,
                              ChatClient& judge);

// ---------------------------------------------------------------------------
// Suite

struct EvalSuiteConfig {
  bool run_cosine = true;
  bool run_indirect = true;
  bool run_ragas = true;
  double indirect_threshold = 0.8;
  std::size_t relevancy_questions = 5;
  std::size_t max_concurrency = 4;

  EmbedderSet embedders;
  TokenEmbedder* token_embedder = nullptr;       // indirect BERT-score
  EmbeddingProvider* relevancy_embedder = nullptr;  // AR similarity
  ChatClient* llm = nullptr;    // question generation
  ChatClient* judge = nullptr;  // statement extraction and verdicts; defaults to llm
};

struct CaseReport {
  EvalCase ecase;
  std::optional<CosineEvalResult> cosine;
  std::optional<IndirectEvalResult> indirect;
  std::optional<RatioMetric> faithfulness;
  std::optional<AnswerRelevancy> answer_relevancy;
  std::optional<RatioMetric> context_recall;
  std::optional<RatioMetric> context_precision;
  std::map<std::string, std::string> errors;  // metric -> message
  std::vector<Exchange> transcript;

  /// Scalar by report column name (s1, s2, s3, indirect_avg, F, AR, CR, CP).
  std::optional<double> metric(std::string_view name) const;
};

inline constexpr std::string_view kMetricColumns[] = {"s1", "s2", "s3", "indirect_avg", "F", "AR", "CR", "CP"};

struct MetricMean {
  double mean = 0.0;
  std::size_t count = 0;
};

struct MetricReport {
  std::vector<CaseReport> cases;
  std::vector<CaseParseError> parse_errors;
  std::map<std::string, std::map<std::string, MetricMean>> groups;  // source kind -> metric -> mean
  std::map<std::string, MetricMean> overall;

  /// Cases that could not be evaluated at all (unparseable lines).
  std::size_t hard_errors() const noexcept { return parse_errors.size(); }
};

/// Evaluates every case (up to max_concurrency at once); per-metric failures
/// are recorded on the case and excluded from that metric's means.
MetricReport run_eval_suite(std::span<const EvalCase> cases, const EvalSuiteConfig& config);

nlohmann::ordered_json to_json(const MetricReport& report, const EvalSuiteConfig& config);
std::string to_csv(const MetricReport& report);

struct ReportPaths {
  std::filesystem::path json;
  std::filesystem::path csv;
};

ReportPaths write_report(const MetricReport& report, const EvalSuiteConfig& config,
                         const std::filesystem::path& directory);

}  // namespace threatrag
