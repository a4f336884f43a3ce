#include "threatrag/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "threatrag/error.hpp"

namespace threatrag {

namespace {

using nlohmann::json;

void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  return p.is_absolute() ? p : base / p;
}

std::vector<std::string> string_list(const json& j, const char* key, const std::string& where) {
  return get_or<std::vector<std::string>>(j, key, {}, where);
}

HttpClientOptions http_options(const json& j, const std::string& where) {
  HttpClientOptions http;
  http.timeout = std::chrono::milliseconds(get_or<long>(j, "timeout_ms", 60'000, where));
  http.max_in_flight = get_or<std::size_t>(j, "max_in_flight", 4, where);
  http.retry.max_attempts = get_or<int>(j, "max_attempts", 3, where);
  http.retry.initial_backoff = std::chrono::milliseconds(get_or<long>(j, "initial_backoff_ms", 250, where));
  return http;
}

SourceConfig parse_source(const json& j, const std::filesystem::path& base, std::size_t index) {
  const std::string where = "sources[" + std::to_string(index) + "]";
  allow_keys(j, where,
             {"name", "kind", "path", "url", "text_columns", "metadata_columns", "source_name", "record_selector",
              "text_fields", "max_depth", "same_host_only", "delay_ms", "user_agent", "max_redirects"});
  SourceConfig s;
  s.name = get_or<std::string>(j, "name", "", where);
  if (s.name.empty()) throw ConfigError(where + ".name is required");
  s.kind = parse_source_kind(get_or<std::string>(j, "kind", "", where));
  if (s.kind == SourceKind::html) {
    s.url = get_or<std::string>(j, "url", "", where);
    if (s.url.empty()) throw ConfigError(where + ": html sources need a url");
  } else {
    const auto path = get_or<std::string>(j, "path", "", where);
    if (path.empty()) throw ConfigError(where + ": " + std::string(to_string(s.kind)) + " sources need a path");
    s.path = resolve(base, path);
  }
  auto source_name = j.contains("source_name") ? std::optional(get_or<std::string>(j, "source_name", "", where))
                                               : std::nullopt;
  s.csv.text_columns = string_list(j, "text_columns", where);
  s.csv.metadata_columns = string_list(j, "metadata_columns", where);
  s.csv.source_name = source_name;
  s.json.record_selector = get_or<std::string>(j, "record_selector", ".", where);
  s.json.text_fields = string_list(j, "text_fields", where);
  s.json.source_name = source_name;
  s.crawl.max_depth = get_or<std::size_t>(j, "max_depth", 0, where);
  s.crawl.same_host_only = get_or<bool>(j, "same_host_only", true, where);
  s.crawl.delay = std::chrono::milliseconds(get_or<long>(j, "delay_ms", 500, where));
  s.crawl.user_agent = get_or<std::string>(j, "user_agent", s.crawl.user_agent, where);
  s.crawl.max_redirects = get_or<int>(j, "max_redirects", 5, where);
  return s;
}

LlmKind parse_llm_kind(const std::string& name) {
  if (name == "http") return LlmKind::http;
  if (name == "echo") return LlmKind::echo;
  if (name == "scripted") return LlmKind::scripted;
  throw ConfigError("llm.kind must be http, echo or scripted, not '" + name + "'");
}

}  // namespace

EngineConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  allow_keys(j, "config",
             {"sources", "chunker", "embedding", "llm", "retrieval", "prompt", "store_root", "server", "eval"});
  EngineConfig c;

  if (auto it = j.find("sources"); it != j.end()) {
    if (!it->is_array()) throw ConfigError("sources must be an array");
    for (std::size_t i = 0; i < it->size(); ++i) c.sources.push_back(parse_source((*it)[i], base_dir, i));
  }

  if (auto it = j.find("chunker"); it != j.end()) {
    allow_keys(*it, "chunker", {"chunk_size", "chunk_overlap", "separators"});
    c.chunker.chunk_size = get_or<std::size_t>(*it, "chunk_size", c.chunker.chunk_size, "chunker");
    c.chunker.chunk_overlap = get_or<std::size_t>(*it, "chunk_overlap", c.chunker.chunk_overlap, "chunker");
    c.chunker.separators = get_or(*it, "separators", c.chunker.separators, "chunker");
  }

  if (auto it = j.find("embedding"); it != j.end()) {
    allow_keys(*it, "embedding",
               {"kind", "base_url", "model", "table_path", "dim", "unit_normalize", "batch_size", "timeout_ms",
                "max_in_flight", "max_attempts", "initial_backoff_ms"});
    auto& e = c.embedding;
    e.kind = parse_provider_kind(get_or<std::string>(*it, "kind", "deterministic_test", "embedding"));
    e.base_url = get_or<std::string>(*it, "base_url", "", "embedding");
    e.model = get_or<std::string>(*it, "model", "", "embedding");
    if (auto table = get_or<std::string>(*it, "table_path", "", "embedding"); !table.empty()) {
      e.table_path = resolve(base_dir, table);
    }
    e.dim = get_or<std::size_t>(*it, "dim", e.dim, "embedding");
    e.unit_normalize = get_or<bool>(*it, "unit_normalize", e.unit_normalize, "embedding");
    e.batch_size = get_or<std::size_t>(*it, "batch_size", e.batch_size, "embedding");
    e.http = http_options(*it, "embedding");
  }
  c.embedding.http.bearer_token = env_value("EMBED_API_KEY");

  if (auto it = j.find("llm"); it != j.end()) {
    allow_keys(*it, "llm",
               {"kind", "base_url", "model", "temperature", "script", "timeout_ms", "max_in_flight", "max_attempts",
                "initial_backoff_ms"});
    c.llm.kind = parse_llm_kind(get_or<std::string>(*it, "kind", "echo", "llm"));
    c.llm.base_url = get_or<std::string>(*it, "base_url", "", "llm");
    c.llm.model = get_or<std::string>(*it, "model", "", "llm");
    c.llm.temperature = get_or<double>(*it, "temperature", 0.0, "llm");
    if (auto script = get_or<std::string>(*it, "script", "", "llm"); !script.empty()) {
      c.llm.script = resolve(base_dir, script);
    }
    c.llm.http = http_options(*it, "llm");
  }
  c.llm.http.bearer_token = env_value("LLM_API_KEY");

  if (auto it = j.find("retrieval"); it != j.end()) {
    allow_keys(*it, "retrieval", {"top_k", "rrf_k", "per_store_k"});
    c.retrieval.top_k = get_or<std::size_t>(*it, "top_k", c.retrieval.top_k, "retrieval");
    c.retrieval.rrf_k = get_or<std::size_t>(*it, "rrf_k", c.retrieval.rrf_k, "retrieval");
    if (it->contains("per_store_k") && !(*it)["per_store_k"].is_null()) {
      c.retrieval.per_store_k = get_or<std::size_t>(*it, "per_store_k", 0, "retrieval");
    }
  }

  if (auto it = j.find("prompt"); it != j.end()) {
    allow_keys(*it, "prompt", {"system_instruction", "context_slot_count"});
    c.prompt.system_instruction = get_or<std::string>(*it, "system_instruction", c.prompt.system_instruction, "prompt");
    c.prompt.context_slot_count = get_or<std::size_t>(*it, "context_slot_count", c.prompt.context_slot_count, "prompt");
  }

  c.store_root = resolve(base_dir, get_or<std::string>(j, "store_root", "stores", "config"));

  if (auto it = j.find("server"); it != j.end()) {
    allow_keys(*it, "server", {"host", "port", "admin_token", "cors_origin"});
    c.server.host = get_or<std::string>(*it, "host", c.server.host, "server");
    c.server.port = get_or<int>(*it, "port", c.server.port, "server");
    if (auto token = get_or<std::string>(*it, "admin_token", "", "server"); !token.empty()) c.server.admin_token = token;
    c.server.cors_origin = get_or<std::string>(*it, "cors_origin", c.server.cors_origin, "server");
  }
  if (auto token = env_value("ADMIN_TOKEN")) c.server.admin_token = token;

  if (auto it = j.find("eval"); it != j.end()) {
    allow_keys(*it, "eval",
               {"word2vec_table", "glove_table", "contextual", "token_embedder", "token_dim", "indirect_threshold",
                "relevancy_questions", "max_concurrency", "replay_dir", "output_dir"});
    auto& e = c.eval;
    if (auto p = get_or<std::string>(*it, "word2vec_table", "", "eval"); !p.empty()) e.word2vec_table = resolve(base_dir, p);
    if (auto p = get_or<std::string>(*it, "glove_table", "", "eval"); !p.empty()) e.glove_table = resolve(base_dir, p);
    e.contextual = get_or<bool>(*it, "contextual", e.contextual, "eval");
    e.token_embedder = get_or<std::string>(*it, "token_embedder", e.token_embedder, "eval");
    e.token_dim = get_or<std::size_t>(*it, "token_dim", e.token_dim, "eval");
    e.indirect_threshold = get_or<double>(*it, "indirect_threshold", e.indirect_threshold, "eval");
    e.relevancy_questions = get_or<std::size_t>(*it, "relevancy_questions", e.relevancy_questions, "eval");
    e.max_concurrency = get_or<std::size_t>(*it, "max_concurrency", e.max_concurrency, "eval");
    e.replay_dir = resolve(base_dir, get_or<std::string>(*it, "replay_dir", "transcripts", "eval"));
    e.output_dir = resolve(base_dir, get_or<std::string>(*it, "output_dir", "eval", "eval"));
  } else {
    c.eval.replay_dir = base_dir / c.eval.replay_dir;
    c.eval.output_dir = base_dir / c.eval.output_dir;
  }

  c.validate();
  return c;
}

EngineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j, std::filesystem::absolute(path).parent_path());
}

void EngineConfig::validate() const {
  std::set<std::string> names;
  for (const auto& s : sources) {
    if (!names.insert(s.name).second) throw ConfigError("duplicate source name '" + s.name + "'");
    if (s.kind == SourceKind::html) {
      if (s.crawl.max_redirects < 0) throw ConfigError("source '" + s.name + "': max_redirects must be >= 0");
      continue;
    }
    if (!std::filesystem::exists(s.path)) {
      throw ConfigError("source '" + s.name + "': path does not exist: " + s.path.string());
    }
    if (s.kind != SourceKind::text && std::filesystem::is_directory(s.path)) {
      throw ConfigError("source '" + s.name + "': " + std::string(to_string(s.kind)) + " sources need a file");
    }
    if (s.kind == SourceKind::json) parse_selector(s.json.record_selector);
  }
  chunker.validate();
  embedding.validate();
  if (embedding.kind == ProviderKind::word_table && !std::filesystem::exists(embedding.table_path)) {
    throw ConfigError("embedding.table_path does not exist: " + embedding.table_path.string());
  }
  retrieval.validate();
  if (prompt.context_slot_count == 0) throw ConfigError("prompt.context_slot_count must be positive");
  switch (llm.kind) {
    case LlmKind::http:
      if (llm.base_url.empty() || llm.model.empty()) throw ConfigError("llm: http needs base_url and model");
      break;
    case LlmKind::scripted:
      if (llm.script.empty() || !std::filesystem::exists(llm.script)) {
        throw ConfigError("llm.script does not exist: " + llm.script.string());
      }
      break;
    case LlmKind::echo:
      break;
  }
  if (server.port < 0 || server.port > 65535) throw ConfigError("server.port out of range");
  for (const auto& table : {eval.word2vec_table, eval.glove_table}) {
    if (table && !std::filesystem::exists(*table)) throw ConfigError("eval table does not exist: " + table->string());
  }
  if (eval.token_embedder != "hashing" && eval.token_embedder != "provider") {
    throw ConfigError("eval.token_embedder must be hashing or provider");
  }
  if (eval.token_dim == 0) throw ConfigError("eval.token_dim must be positive");
  if (eval.relevancy_questions == 0) throw ConfigError("eval.relevancy_questions must be positive");
  if (eval.max_concurrency == 0) throw ConfigError("eval.max_concurrency must be positive");
}

}  // namespace threatrag
