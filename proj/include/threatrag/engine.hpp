#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "threatrag/config.hpp"
#include "threatrag/evalkit.hpp"
#include "threatrag/index.hpp"
#include "threatrag/llm.hpp"
#include "threatrag/rag.hpp"

namespace threatrag {

struct StoreIngestSummary {
  std::string store_id;
  std::size_t documents = 0;
  std::size_t chunks = 0;
  std::size_t vectors_added = 0;
  std::size_t total_vectors = 0;
};

struct IngestSummary {
  std::vector<StoreIngestSummary> stores;
  IngestReport report;  // merged over all sources
  std::vector<std::string> failed_sources;
};

nlohmann::ordered_json to_json(const IngestSummary& summary);

/// Wire form of a ChatAnswer. With include_timing false latency_ms is 0.
nlohmann::ordered_json to_json(const ChatAnswer& answer, bool include_timing = true);

enum class EvalMode { live, replay };
EvalMode parse_eval_mode(std::string_view name);

struct EvalOutcome {
  ReportPaths paths;
  std::size_t cases = 0;
  std::size_t parse_errors = 0;
  std::size_t hard_errors = 0;
};

nlohmann::ordered_json to_json(const EvalOutcome& outcome);

/// Binds configuration to the pipeline: one persisted store per source kind,
/// one embedding provider for indexing and querying, one chat client.
class Engine {
 public:
  /// Providers default to the ones described by `config`.
  explicit Engine(EngineConfig config, std::shared_ptr<EmbeddingProvider> embedder = nullptr,
                  std::shared_ptr<ChatClient> llm = nullptr, std::shared_ptr<PageFetcher> fetcher = nullptr);

  const EngineConfig& config() const noexcept { return config_; }

  /// Loads, chunks and embeds the named sources (all when empty), then
  /// appends to the stores and persists them. Nothing is written when
  /// embedding fails. A source that fails to load is recorded and skipped.
  IngestSummary ingest(std::span<const std::string> source_names = {});

  /// Chunks of the named sources as ingest would produce them, without
  /// dedup against existing stores and without embedding.
  std::vector<Chunk> chunk_sources(std::span<const std::string> source_names = {});

  /// Throws NotFoundError when no store has been built yet.
  ChatAnswer query(std::string_view text, std::optional<std::size_t> top_k = std::nullopt);

  nlohmann::ordered_json health() const;
  nlohmann::ordered_json store_manifests() const;

  EvalOutcome evaluate(const std::filesystem::path& case_file, EvalMode mode,
                       std::optional<std::filesystem::path> out_dir = std::nullopt);

  std::shared_ptr<const VectorStore> store(SourceKind kind) const;

 private:
  void load_existing_stores();
  std::vector<const SourceConfig*> select_sources(std::span<const std::string> names) const;
  std::vector<Document> load_source(const SourceConfig& source, Ingestor& ingestor);
  void check_embedding_marker() const;
  void write_embedding_marker() const;

  EngineConfig config_;
  std::shared_ptr<EmbeddingProvider> embedder_;
  std::shared_ptr<ChatClient> llm_;
  std::shared_ptr<PageFetcher> fetcher_;

  mutable std::shared_mutex registry_mutex_;
  std::map<SourceKind, std::shared_ptr<VectorStore>> stores_;
  std::mutex ingest_mutex_;  // one ingest at a time
};

/// Builds the chat client a config describes.
std::shared_ptr<ChatClient> make_chat_client(const LlmConfig& config);

}  // namespace threatrag
