#include "threatrag/evalkit.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "threatrag/error.hpp"
#include "threatrag/index.hpp"
#include "threatrag/rag.hpp"
#include "threatrag/text.hpp"

namespace threatrag {

namespace detail {
const std::vector<std::string_view>& builtin_stopwords();
}

const StopwordSet& default_stopwords() {
  static const StopwordSet words = [] {
    StopwordSet set;
    for (auto w : detail::builtin_stopwords()) set.emplace(w);
    return set;
  }();
  return words;
}

std::vector<std::string> preprocess(std::string_view text, const StopwordSet& stopwords) {
  const std::u32string lowered = to_u32(to_lower(text));
  std::vector<std::string> tokens;
  std::u32string current;
  auto flush = [&] {
    if (current.empty()) return;
    std::string token = to_utf8(current);
    current.clear();
    if (!stopwords.contains(token)) tokens.push_back(std::move(token));
  };
  for (char32_t cp : lowered) {
    if (is_alnum(cp)) {
      current.push_back(cp);
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

std::string_view to_string(SourceTag tag) noexcept {
  switch (tag) {
    case SourceTag::vulnerability: return "vulnerability";
    case SourceTag::apt_report: return "apt_report";
    case SourceTag::security_blog: return "security_blog";
    case SourceTag::virustotal_report: return "virustotal_report";
  }
  return "vulnerability";
}

SourceTag parse_source_tag(std::string_view name) {
  for (SourceTag tag : kAllSourceTags) {
    if (to_string(tag) == name) return tag;
  }
  throw ParseError("unknown source_kind '" + std::string(name) + "'");
}

EvalCase parse_eval_case(const nlohmann::json& j, std::string id) {
  if (!j.is_object()) throw ParseError("case must be a JSON object");
  auto required = [&](const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) throw ParseError(std::string("missing string field '") + key + "'");
    std::string value = it->get<std::string>();
    if (normalize(value).empty()) throw ParseError(std::string("field '") + key + "' is empty");
    return value;
  };
  auto optional = [&](const char* key) -> std::optional<std::string> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw ParseError(std::string("field '") + key + "' must be a string");
    std::string value = it->get<std::string>();
    if (normalize(value).empty()) return std::nullopt;
    return value;
  };
  EvalCase c;
  c.id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : std::move(id);
  c.query = required("query");
  c.bot_answer = required("bot_answer");
  c.human_answer = optional("human_answer");
  c.ground_truth = optional("ground_truth");
  if (auto it = j.find("contexts"); it != j.end()) {
    if (!it->is_array()) throw ParseError("field 'contexts' must be an array of strings");
    for (const auto& ctx : *it) {
      if (!ctx.is_string()) throw ParseError("field 'contexts' must be an array of strings");
      c.contexts.push_back(ctx.get<std::string>());
    }
  }
  c.source_kind = parse_source_tag(required("source_kind"));
  return c;
}

CaseFile parse_eval_cases(std::string_view content) {
  CaseFile file;
  std::size_t line_no = 0;
  std::size_t non_blank = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    std::string_view line = content.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? content.size() : end + 1;
    ++line_no;
    if (normalize(line).empty()) continue;
    ++non_blank;
    char id[32];
    std::snprintf(id, sizeof id, "line-%04zu", line_no);
    try {
      file.cases.push_back(parse_eval_case(nlohmann::json::parse(line), id));
    } catch (const nlohmann::json::exception& e) {
      file.errors.push_back({line_no, e.what()});
    } catch (const ParseError& e) {
      file.errors.push_back({line_no, e.what()});
    }
  }
  if (non_blank == 0) throw InvalidArgument("case file is empty");
  return file;
}

CaseFile load_eval_cases(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open case file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_eval_cases(buf.str());
}

// ---------------------------------------------------------------------------

double harmonic_f1(double precision, double recall) noexcept {
  const double sum = precision + recall;
  return sum == 0.0 ? 0.0 : 2.0 * precision * recall / sum;
}

BertScore bert_score_vectors(std::span<const std::vector<float>> candidate,
                             std::span<const std::vector<float>> reference) {
  if (candidate.empty() || reference.empty()) throw InvalidArgument("bert_score needs at least one token per side");
  std::vector<double> best_for_candidate(candidate.size(), 0.0);
  std::vector<double> best_for_reference(reference.size(), 0.0);
  for (std::size_t r = 0; r < reference.size(); ++r) {
    for (std::size_t c = 0; c < candidate.size(); ++c) {
      double sim = std::clamp(cosine(candidate[c], reference[r]), 0.0, 1.0);
      best_for_reference[r] = std::max(best_for_reference[r], sim);
      best_for_candidate[c] = std::max(best_for_candidate[c], sim);
    }
  }
  BertScore score;
  score.precision = mean(best_for_candidate);
  score.recall = mean(best_for_reference);
  score.f1 = harmonic_f1(score.precision, score.recall);
  return score;
}

HashingTokenEmbedder::HashingTokenEmbedder(std::size_t dim) : dim_(dim) {
  if (dim_ == 0) throw ConfigError("token embedder dim must be positive");
}

std::vector<std::vector<float>> HashingTokenEmbedder::embed_tokens(std::string_view text) {
  static const StopwordSet kNoStopwords;
  std::vector<std::vector<float>> out;
  for (const auto& token : preprocess(text, kNoStopwords)) {
    std::vector<float> v(dim_, 0.0f);
    v[fnv1a64("w:" + token) % dim_] += 1.0f;
    const std::u32string padded = U"<" + to_u32(token) + U">";
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
      v[fnv1a64("g:" + to_utf8(std::u32string_view(padded).substr(i, 3))) % dim_] += 1.0f;
    }
    l2_normalize(v);
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<std::vector<float>> ProviderTokenEmbedder::embed_tokens(std::string_view text) {
  static const StopwordSet kNoStopwords;
  auto tokens = preprocess(text, kNoStopwords);
  std::vector<std::vector<float>> out;
  if (tokens.empty()) return out;
  for (auto& v : embed_texts(provider_, tokens)) out.push_back(std::move(v.values));
  return out;
}

BertScore bert_score(std::string_view candidate, std::string_view reference, TokenEmbedder& embedder) {
  auto cand = embedder.embed_tokens(candidate);
  auto ref = embedder.embed_tokens(reference);
  if (cand.empty()) throw InvalidArgument("candidate text has no tokens");
  if (ref.empty()) throw InvalidArgument("reference text has no tokens");
  return bert_score_vectors(cand, ref);
}

// ---------------------------------------------------------------------------

double mean(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("mean of an empty list");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

IndirectEvalResult summarize_indirect(std::vector<std::string> questions, std::vector<double> scores,
                                      double threshold) {
  IndirectEvalResult result;
  result.average_score = mean(scores);
  result.threshold = threshold;
  result.passed = result.average_score >= threshold;
  result.questions = std::move(questions);
  result.per_question_scores = std::move(scores);
  return result;
}

IndirectEvalResult indirect_eval(const EvalCase& ecase, ChatClient& llm, TokenEmbedder& embedder, double threshold) {
  GeneratedQuestionSet generated = generate_questions(ecase.bot_answer, llm, 5);
  std::vector<double> scores;
  scores.reserve(generated.questions.size());
  for (const auto& q : generated.questions) scores.push_back(bert_score(q, ecase.query, embedder).f1);
  return summarize_indirect(std::move(generated.questions), std::move(scores), threshold);
}

// ---------------------------------------------------------------------------

CosineEvalResult cosine_eval(const EvalCase& ecase, const EmbedderSet& embedders) {
  if (!ecase.human_answer) throw InvalidArgument("cosine_eval needs a human answer");
  const StopwordSet& stopwords = embedders.stopwords ? *embedders.stopwords : default_stopwords();
  const auto bot_tokens = preprocess(ecase.bot_answer, stopwords);
  const auto human_tokens = preprocess(*ecase.human_answer, stopwords);

  CosineEvalResult result;
  auto word_score = [&](const WordVectorTable* table, std::optional<double>& slot, const char* name) {
    if (table == nullptr) return;
    try {
      EmbeddingVector bot = sentence_vector(*table, bot_tokens);
      EmbeddingVector human = sentence_vector(*table, human_tokens);
      slot = cosine(bot.values, human.values);
    } catch (const Error& e) {
      result.absent_reasons[name] = e.what();
    }
  };
  word_score(embedders.word2vec_style, result.s1_word2vec_style, "s1");
  word_score(embedders.glove_style, result.s2_glove_style, "s2");
  if (embedders.contextual != nullptr) {
    try {
      const std::vector<std::string> texts{ecase.bot_answer, *ecase.human_answer};
      auto vectors = embed_texts(*embedders.contextual, texts);
      result.s3_contextual = cosine(vectors[0].values, vectors[1].values);
    } catch (const Error& e) {
      result.absent_reasons["s3"] = e.what();
    }
  }
  return result;
}

// ---------------------------------------------------------------------------

std::string JudgePrompts::statement_extraction(std::string_view text) {
  return "Break the following text into short, self-contained factual statements. Return them as a numbered "
         "list, one statement per line.\n\nText:\n" +
         std::string(text);
}

std::string JudgePrompts::support_verdict(std::string_view context, std::string_view statement) {
  return "Context:\n" + std::string(context) + "\n\nStatement: " + std::string(statement) +
         "\n\nCan the statement be directly inferred from the context? Answer Yes or No on the first line, then "
         "give a one-sentence reason.";
}

std::string JudgePrompts::recall_verdict(std::string_view context, std::string_view statement) {
  return "Context:\n" + std::string(context) + "\n\nStatement: " + std::string(statement) +
         "\n\nIs the information in the statement present in the context? Answer Yes or No on the first line, "
         "then give a one-sentence reason.";
}

std::string JudgePrompts::relevance_verdict(std::string_view ground_truth, std::string_view statement) {
  return "Ground truth answer:\n" + std::string(ground_truth) + "\n\nStatement: " + std::string(statement) +
         "\n\nIs the statement relevant to the ground truth answer? Answer Yes or No on the first line, then "
         "give a one-sentence reason.";
}

nlohmann::ordered_json JudgePrompts::templates() {
  return {
      {"statement_extraction", statement_extraction("{text}")},
      {"support_verdict", support_verdict("{context}", "{statement}")},
      {"recall_verdict", recall_verdict("{context}", "{statement}")},
      {"relevance_verdict", relevance_verdict("{ground_truth}", "{statement}")},
      {"question_generation", question_generation_prompt("{answer}", 5)},
  };
}

namespace {

Completion ask(ChatClient& client, std::string prompt) {
  const std::vector<ChatMessage> messages{{"user", std::move(prompt)}};
  return chat_completion(client, messages);
}

std::string join_contexts(std::span<const std::string> contexts) {
  std::string out;
  for (const auto& c : contexts) {
    if (!out.empty()) out += "\n\n";
    out += c;
  }
  return out;
}

}  // namespace

std::vector<std::string> extract_statements(std::string_view text, ChatClient& judge) {
  return parse_list_items(ask(judge, JudgePrompts::statement_extraction(text)).text);
}

StatementVerdict parse_verdict(std::string statement, std::string_view completion) {
  std::string_view rest = completion;
  while (!rest.empty() && std::isspace(static_cast<unsigned char>(rest.front()))) rest.remove_prefix(1);
  std::size_t word_end = 0;
  while (word_end < rest.size() && std::isalpha(static_cast<unsigned char>(rest[word_end]))) ++word_end;
  std::string word = to_lower(rest.substr(0, word_end));
  StatementVerdict verdict{std::move(statement), false, {}};
  if (word == "yes") {
    verdict.supported = true;
  } else if (word != "no") {
    throw ParseError("judge verdict must start with Yes or No: '" + std::string(completion.substr(0, 80)) + "'");
  }
  rest.remove_prefix(word_end);
  while (!rest.empty() && (std::isspace(static_cast<unsigned char>(rest.front())) || rest.front() == '.' ||
                           rest.front() == ',' || rest.front() == ':' || rest.front() == '-')) {
    rest.remove_prefix(1);
  }
  verdict.rationale = normalize(rest);
  return verdict;
}

RatioMetric ratio_from_verdicts(std::vector<StatementVerdict> verdicts) {
  RatioMetric metric;
  metric.denominator = verdicts.size();
  metric.numerator = static_cast<std::size_t>(
      std::count_if(verdicts.begin(), verdicts.end(), [](const StatementVerdict& v) { return v.supported; }));
  if (metric.denominator == 0) throw GenerationError("no statements");
  metric.value = static_cast<double>(metric.numerator) / static_cast<double>(metric.denominator);
  metric.verdicts = std::move(verdicts);
  return metric;
}

RatioMetric faithfulness(std::string_view answer, std::span<const std::string> contexts, ChatClient& judge) {
  if (normalize(answer).empty()) throw InvalidArgument("faithfulness needs a non-empty answer");
  if (contexts.empty()) throw InvalidArgument("faithfulness needs at least one context");
  auto statements = extract_statements(answer, judge);
  if (statements.empty()) throw GenerationError("no statements extracted from the answer");
  const std::string context = join_contexts(contexts);
  std::vector<StatementVerdict> verdicts;
  for (auto& s : statements) {
    auto prompt = JudgePrompts::support_verdict(context, s);
    verdicts.push_back(parse_verdict(std::move(s), ask(judge, std::move(prompt)).text));
  }
  return ratio_from_verdicts(std::move(verdicts));
}

AnswerRelevancy answer_relevancy(std::string_view query, std::string_view answer, ChatClient& llm,
                                 EmbeddingProvider& embedder, std::size_t m) {
  if (m == 0) throw InvalidArgument("answer relevancy needs m >= 1");
  AnswerRelevancy result;
  result.questions = generate_questions(answer, llm, m).questions;
  std::vector<std::string> texts{std::string(query)};
  texts.insert(texts.end(), result.questions.begin(), result.questions.end());
  auto vectors = embed_texts(embedder, texts);
  for (std::size_t i = 1; i < vectors.size(); ++i) {
    result.similarities.push_back(cosine(vectors[0].values, vectors[i].values));
  }
  result.value = mean(result.similarities);
  return result;
}

RatioMetric context_recall(std::string_view ground_truth, std::span<const std::string> contexts, ChatClient& judge) {
  if (normalize(ground_truth).empty()) throw InvalidArgument("context recall needs a ground truth");
  auto statements = extract_statements(ground_truth, judge);
  if (statements.empty()) throw GenerationError("no statements extracted from the ground truth");
  std::vector<StatementVerdict> verdicts;
  if (contexts.empty()) {
    for (auto& s : statements) verdicts.push_back({std::move(s), false, "no retrieved context"});
    return ratio_from_verdicts(std::move(verdicts));
  }
  const std::string context = join_contexts(contexts);
  for (auto& s : statements) {
    auto prompt = JudgePrompts::recall_verdict(context, s);
    verdicts.push_back(parse_verdict(std::move(s), ask(judge, std::move(prompt)).text));
  }
  return ratio_from_verdicts(std::move(verdicts));
}

RatioMetric context_precision(std::string_view ground_truth, std::span<const std::string> contexts,
                              ChatClient& judge) {
  if (normalize(ground_truth).empty()) throw InvalidArgument("context precision needs a ground truth");
  if (contexts.empty()) throw InvalidArgument("context precision needs at least one context");
  std::vector<std::string> statements;
  for (const auto& ctx : contexts) {
    auto extracted = extract_statements(ctx, judge);
    statements.insert(statements.end(), extracted.begin(), extracted.end());
  }
  if (statements.empty()) throw GenerationError("no statements extracted from the contexts");
  std::vector<StatementVerdict> verdicts;
  for (auto& s : statements) {
    auto prompt = JudgePrompts::relevance_verdict(ground_truth, s);
    verdicts.push_back(parse_verdict(std::move(s), ask(judge, std::move(prompt)).text));
  }
  return ratio_from_verdicts(std::move(verdicts));
}

// ---------------------------------------------------------------------------

std::optional<double> CaseReport::metric(std::string_view name) const {
  if (name == "s1") return cosine ? cosine->s1_word2vec_style : std::nullopt;
  if (name == "s2") return cosine ? cosine->s2_glove_style : std::nullopt;
  if (name == "s3") return cosine ? cosine->s3_contextual : std::nullopt;
  if (name == "indirect_avg" && indirect) return indirect->average_score;
  if (name == "F" && faithfulness) return faithfulness->value;
  if (name == "AR" && answer_relevancy) return answer_relevancy->value;
  if (name == "CR" && context_recall) return context_recall->value;
  if (name == "CP" && context_precision) return context_precision->value;
  return std::nullopt;
}

namespace {

CaseReport evaluate_case(const EvalCase& ecase, const EvalSuiteConfig& config) {
  CaseReport report;
  report.ecase = ecase;
  std::optional<TranscriptingChatClient> llm;
  std::optional<TranscriptingChatClient> judge;
  if (config.llm) llm.emplace(*config.llm, report.transcript);
  if (ChatClient* j = config.judge ? config.judge : config.llm) judge.emplace(*j, report.transcript);

  auto attempt = [&](const char* metric, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      report.errors[metric] = e.what();
    }
  };

  const EmbedderSet& e = config.embedders;
  if (config.run_cosine && ecase.human_answer && (e.word2vec_style || e.glove_style || e.contextual)) {
    attempt("cosine", [&] {
      report.cosine = cosine_eval(ecase, e);
      for (const auto& [name, reason] : report.cosine->absent_reasons) report.errors[name] = reason;
    });
  }
  if (config.run_indirect && llm && config.token_embedder) {
    attempt("indirect_avg", [&] {
      report.indirect = indirect_eval(ecase, *llm, *config.token_embedder, config.indirect_threshold);
    });
  }
  if (config.run_ragas && judge) {
    if (!ecase.contexts.empty()) {
      attempt("F", [&] { report.faithfulness = faithfulness(ecase.bot_answer, ecase.contexts, *judge); });
    }
    if (llm && config.relevancy_embedder) {
      attempt("AR", [&] {
        report.answer_relevancy =
            answer_relevancy(ecase.query, ecase.bot_answer, *llm, *config.relevancy_embedder, config.relevancy_questions);
      });
    }
    if (ecase.ground_truth) {
      attempt("CR", [&] { report.context_recall = context_recall(*ecase.ground_truth, ecase.contexts, *judge); });
      if (!ecase.contexts.empty()) {
        attempt("CP", [&] { report.context_precision = context_precision(*ecase.ground_truth, ecase.contexts, *judge); });
      }
    }
  }
  return report;
}

void accumulate(std::map<std::string, MetricMean>& means, std::string_view metric, double value) {
  MetricMean& m = means[std::string(metric)];
  // Running sums are kept in `mean` until finalization.
  m.mean += value;
  ++m.count;
}

void finalize(std::map<std::string, MetricMean>& means) {
  for (auto& [name, m] : means) m.mean /= static_cast<double>(m.count);
}

}  // namespace

MetricReport run_eval_suite(std::span<const EvalCase> cases, const EvalSuiteConfig& config) {
  if (cases.empty()) throw InvalidArgument("evaluation needs at least one case");
  MetricReport report;
  report.cases.resize(cases.size());

  const std::size_t workers = std::clamp<std::size_t>(config.max_concurrency, 1, cases.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < cases.size(); i = next++) report.cases[i] = evaluate_case(cases[i], config);
  };
  std::vector<std::jthread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  pool.clear();

  for (const auto& c : report.cases) {
    auto& group = report.groups[std::string(to_string(c.ecase.source_kind))];
    for (auto metric : kMetricColumns) {
      if (auto value = c.metric(metric)) {
        accumulate(group, metric, *value);
        accumulate(report.overall, metric, *value);
      }
    }
  }
  for (auto& [kind, group] : report.groups) finalize(group);
  finalize(report.overall);
  return report;
}

namespace {

nlohmann::ordered_json optional_number(std::optional<double> v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json ratio_json(const RatioMetric& m) {
  auto verdicts = nlohmann::ordered_json::array();
  for (const auto& v : m.verdicts) {
    verdicts.push_back({{"statement", v.statement}, {"supported", v.supported}, {"rationale", v.rationale}});
  }
  return {{"value", m.value}, {"numerator", m.numerator}, {"denominator", m.denominator}, {"verdicts", verdicts}};
}

nlohmann::ordered_json means_json(const std::map<std::string, MetricMean>& means) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (auto metric : kMetricColumns) {
    auto it = means.find(std::string(metric));
    if (it == means.end()) continue;
    out[std::string(metric)] = {{"mean", it->second.mean}, {"count", it->second.count}};
  }
  return out;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

nlohmann::ordered_json to_json(const MetricReport& report, const EvalSuiteConfig& config) {
  nlohmann::ordered_json out;
  out["report_version"] = 1;
  out["notes"] = {
      {"indirect_avg", "BERT-score F1 from greedy token matching, cosines clamped to [0,1], no baseline rescaling"},
      {"AR", "mean raw cosine between the query and generated questions; not clamped"},
      {"CP", "ground-truth-relevant context statements over all context statements; not rank-weighted"},
  };
  out["config"] = {
      {"indirect_threshold", config.indirect_threshold},
      {"relevancy_questions", config.relevancy_questions},
      {"llm_model", config.llm ? config.llm->model_name() : std::string{}},
      {"judge_model", config.judge ? config.judge->model_name()
                                   : (config.llm ? config.llm->model_name() : std::string{})},
  };
  out["judge_prompts"] = JudgePrompts::templates();

  auto cases = nlohmann::ordered_json::array();
  for (const auto& c : report.cases) {
    nlohmann::ordered_json j;
    j["case_id"] = c.ecase.id;
    j["source_kind"] = to_string(c.ecase.source_kind);
    j["query"] = c.ecase.query;
    j["bot_answer"] = c.ecase.bot_answer;
    j["human_answer"] = c.ecase.human_answer ? nlohmann::ordered_json(*c.ecase.human_answer) : nlohmann::ordered_json(nullptr);
    j["ground_truth"] = c.ecase.ground_truth ? nlohmann::ordered_json(*c.ecase.ground_truth) : nlohmann::ordered_json(nullptr);
    j["contexts"] = c.ecase.contexts;
    nlohmann::ordered_json metrics;
    for (auto metric : kMetricColumns) metrics[std::string(metric)] = optional_number(c.metric(metric));
    j["metrics"] = metrics;
    if (c.indirect) {
      j["indirect"] = {{"questions", c.indirect->questions},
                       {"per_question_scores", c.indirect->per_question_scores},
                       {"average_score", c.indirect->average_score},
                       {"threshold", c.indirect->threshold},
                       {"passed", c.indirect->passed}};
    }
    if (c.faithfulness) j["faithfulness"] = ratio_json(*c.faithfulness);
    if (c.answer_relevancy) {
      j["answer_relevancy"] = {{"value", c.answer_relevancy->value},
                               {"m", c.answer_relevancy->questions.size()},
                               {"questions", c.answer_relevancy->questions},
                               {"similarities", c.answer_relevancy->similarities}};
    }
    if (c.context_recall) j["context_recall"] = ratio_json(*c.context_recall);
    if (c.context_precision) j["context_precision"] = ratio_json(*c.context_precision);
    j["errors"] = c.errors;
    auto transcript = nlohmann::ordered_json::array();
    for (const auto& ex : c.transcript) transcript.push_back({{"request", to_json(ex.request)}, {"response", ex.response}});
    j["transcript"] = transcript;
    cases.push_back(std::move(j));
  }
  out["cases"] = std::move(cases);

  auto parse_errors = nlohmann::ordered_json::array();
  for (const auto& e : report.parse_errors) parse_errors.push_back({{"line", e.line}, {"message", e.message}});
  out["parse_errors"] = parse_errors;

  nlohmann::ordered_json groups = nlohmann::ordered_json::object();
  for (SourceTag tag : kAllSourceTags) {
    auto it = report.groups.find(std::string(to_string(tag)));
    if (it != report.groups.end()) groups[std::string(to_string(tag))] = means_json(it->second);
  }
  out["groups"] = groups;
  out["overall"] = means_json(report.overall);
  out["hard_errors"] = report.hard_errors();
  return out;
}

std::string to_csv(const MetricReport& report) {
  std::string out = "case_id,source_kind";
  for (auto metric : kMetricColumns) {
    out += ",";
    out += metric;
  }
  out += ",errors\n";
  for (const auto& c : report.cases) {
    out += csv_escape(c.ecase.id) + "," + std::string(to_string(c.ecase.source_kind));
    for (auto metric : kMetricColumns) {
      out += ",";
      if (auto v = c.metric(metric)) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", *v);
        out += buf;
      }
    }
    std::string errors;
    for (const auto& [metric, message] : c.errors) {
      if (!errors.empty()) errors += "; ";
      errors += metric + ": " + message;
    }
    out += "," + csv_escape(errors) + "\n";
  }
  return out;
}

ReportPaths write_report(const MetricReport& report, const EvalSuiteConfig& config,
                         const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  ReportPaths paths{directory / "report.json", directory / "report.csv"};
  {
    std::ofstream json_out(paths.json, std::ios::binary | std::ios::trunc);
    json_out << to_json(report, config).dump(2) << '\n';
    if (!json_out) throw IntegrityError("cannot write " + paths.json.string());
  }
  {
    std::ofstream csv_out(paths.csv, std::ios::binary | std::ios::trunc);
    csv_out << to_csv(report);
    if (!csv_out) throw IntegrityError("cannot write " + paths.csv.string());
  }
  return paths;
}

}  // namespace threatrag
