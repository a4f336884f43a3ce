#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "threatrag/chunker.hpp"
#include "threatrag/embed.hpp"
#include "threatrag/index.hpp"
#include "threatrag/ingest.hpp"
#include "threatrag/rag.hpp"

namespace threatrag {

struct SourceConfig {
  std::string name;
  SourceKind kind = SourceKind::text;
  std::filesystem::path path;  // text/csv/json: a file, or a directory of files for text
  std::string url;             // html
  CsvOptions csv;
  JsonOptions json;
  CrawlOptions crawl;
};

enum class LlmKind { http, echo, scripted };

struct LlmConfig {
  LlmKind kind = LlmKind::echo;
  std::string base_url;
  std::string model;
  double temperature = 0.0;
  std::filesystem::path script;  // scripted
  HttpClientOptions http;
};

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::string> admin_token;
  std::string cors_origin = "*";
};

struct EvalConfig {
  std::optional<std::filesystem::path> word2vec_table;  // S1
  std::optional<std::filesystem::path> glove_table;     // S2
  bool contextual = true;                               // S3 through the main embedding provider
  std::string token_embedder = "hashing";               // hashing | provider
  std::size_t token_dim = 128;
  double indirect_threshold = 0.8;
  std::size_t relevancy_questions = 5;
  std::size_t max_concurrency = 4;
  std::filesystem::path replay_dir = "transcripts";
  std::filesystem::path output_dir = "eval";
};

struct EngineConfig {
  std::vector<SourceConfig> sources;
  ChunkerConfig chunker;
  EmbeddingProviderSpec embedding;
  LlmConfig llm;
  RetrievalConfig retrieval;
  PromptTemplate prompt;
  std::filesystem::path store_root = "stores";
  ServerConfig server;
  EvalConfig eval;

  /// Throws ConfigError on a broken value or a referenced path that does
  /// not exist.
  void validate() const;
};

/// Parses a JSON config. Relative paths resolve against `base_dir`; API keys
/// come from LLM_API_KEY and EMBED_API_KEY when set.
EngineConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
EngineConfig load_config(const std::filesystem::path& path);

}  // namespace threatrag
