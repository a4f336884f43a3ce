#include "threatrag/engine.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "threatrag/error.hpp"
#include "threatrag/text.hpp"

namespace threatrag {

namespace {

constexpr const char* kEmbeddingMarker = "embedding.json";

std::filesystem::path store_dir(const EngineConfig& config, SourceKind kind) {
  return config.store_root / std::string(to_string(kind));
}

std::vector<std::filesystem::path> text_files(const std::filesystem::path& path) {
  if (!std::filesystem::is_directory(path)) return {path};
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(path)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

void merge_report(IngestReport& into, IngestReport from) {
  into.loaded_count += from.loaded_count;
  into.deduped_count += from.deduped_count;
  into.skipped_count += from.skipped_count;
  into.replacement_count += from.replacement_count;
  std::move(from.skipped.begin(), from.skipped.end(), std::back_inserter(into.skipped));
  std::move(from.warnings.begin(), from.warnings.end(), std::back_inserter(into.warnings));
  std::move(from.document_ids.begin(), from.document_ids.end(), std::back_inserter(into.document_ids));
}

}  // namespace

nlohmann::ordered_json to_json(const IngestSummary& summary) {
  nlohmann::ordered_json stores = nlohmann::ordered_json::array();
  for (const auto& s : summary.stores) {
    stores.push_back({{"store_id", s.store_id},
                      {"documents", s.documents},
                      {"chunks", s.chunks},
                      {"vectors_added", s.vectors_added},
                      {"total_vectors", s.total_vectors}});
  }
  nlohmann::ordered_json skipped = nlohmann::ordered_json::array();
  for (const auto& item : summary.report.skipped) skipped.push_back({{"item", item.item}, {"reason", item.reason}});
  return {{"stores", stores},
          {"documents_loaded", summary.report.loaded_count},
          {"documents_deduped", summary.report.deduped_count},
          {"documents_skipped", summary.report.skipped_count},
          {"replacement_chars", summary.report.replacement_count},
          {"skipped", skipped},
          {"warnings", summary.report.warnings},
          {"failed_sources", summary.failed_sources}};
}

nlohmann::ordered_json to_json(const ChatAnswer& answer, bool include_timing) {
  nlohmann::ordered_json contexts = nlohmann::ordered_json::array();
  for (const auto& hit : answer.contexts_used) {
    contexts.push_back({{"text", hit.text}, {"score", hit.score}, {"store_id", hit.store_id}});
  }
  return {{"answer", answer.answer_text},
          {"sources", answer.source_names},
          {"contexts", contexts},
          {"model", answer.model_name},
          {"latency_ms", include_timing ? answer.latency_ms : 0}};
}

EvalMode parse_eval_mode(std::string_view name) {
  if (name == "live") return EvalMode::live;
  if (name == "replay") return EvalMode::replay;
  throw InvalidArgument("mode must be live or replay, not '" + std::string(name) + "'");
}

nlohmann::ordered_json to_json(const EvalOutcome& outcome) {
  return {{"report_json", outcome.paths.json.string()},
          {"report_csv", outcome.paths.csv.string()},
          {"cases", outcome.cases},
          {"parse_errors", outcome.parse_errors},
          {"hard_errors", outcome.hard_errors}};
}

std::shared_ptr<ChatClient> make_chat_client(const LlmConfig& config) {
  switch (config.kind) {
    case LlmKind::http:
      return std::make_shared<HttpChatClient>(config.base_url, config.model, config.temperature, config.http);
    case LlmKind::scripted:
      return ScriptedChatClient::from_file(config.script);
    case LlmKind::echo:
      break;
  }
  return std::make_shared<EchoContextChatClient>();
}

Engine::Engine(EngineConfig config, std::shared_ptr<EmbeddingProvider> embedder, std::shared_ptr<ChatClient> llm,
               std::shared_ptr<PageFetcher> fetcher)
    : config_(std::move(config)),
      embedder_(std::move(embedder)),
      llm_(std::move(llm)),
      fetcher_(std::move(fetcher)) {
  if (!embedder_) embedder_ = make_embedding_provider(config_.embedding);
  if (!llm_) llm_ = make_chat_client(config_.llm);
  load_existing_stores();
}

void Engine::load_existing_stores() {
  for (SourceKind kind : kAllSourceKinds) {
    const auto dir = store_dir(config_, kind);
    if (!std::filesystem::exists(dir / "manifest.json")) continue;
    auto store = std::make_shared<VectorStore>(VectorStore::load(dir));
    if (store->source_kind() != kind) {
      throw CorruptionError(dir.string() + ": manifest source_kind is " + std::string(to_string(store->source_kind())));
    }
    stores_[kind] = std::move(store);
  }
}

void Engine::check_embedding_marker() const {
  const auto path = config_.store_root / kEmbeddingMarker;
  if (!std::filesystem::exists(path)) return;
  nlohmann::json marker;
  try {
    std::ifstream in(path, std::ios::binary);
    marker = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(path.string() + ": " + e.what());
  }
  const std::string recorded = marker.value("provider_id", "");
  if (recorded != embedder_->id()) {
    throw ConfigError("stores were built with embedding provider '" + recorded + "' but the config selects '" +
                      embedder_->id() + "'; re-ingest into a fresh store_root");
  }
}

void Engine::write_embedding_marker() const {
  std::filesystem::create_directories(config_.store_root);
  const auto path = config_.store_root / kEmbeddingMarker;
  nlohmann::ordered_json marker{{"provider_id", embedder_->id()}, {"dim", embedder_->dim()}};
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << marker.dump(2) << '\n';
    if (!out) throw IntegrityError("cannot write " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::vector<Document> Engine::load_source(const SourceConfig& source, Ingestor& ingestor) {
  switch (source.kind) {
    case SourceKind::text: {
      std::vector<Document> docs;
      for (const auto& file : text_files(source.path)) {
        auto loaded = ingestor.load_text_file(file);
        std::move(loaded.begin(), loaded.end(), std::back_inserter(docs));
      }
      return docs;
    }
    case SourceKind::csv:
      return ingestor.load_csv_file(source.path, source.csv);
    case SourceKind::json:
      return ingestor.load_json_file(source.path, source.json);
    case SourceKind::html: {
      if (fetcher_) return ingestor.fetch_and_extract_html(source.url, source.crawl, *fetcher_);
      HttpPageFetcher fetcher(source.crawl);
      return ingestor.fetch_and_extract_html(source.url, source.crawl, fetcher);
    }
  }
  return {};
}

std::vector<const SourceConfig*> Engine::select_sources(std::span<const std::string> names) const {
  std::vector<const SourceConfig*> selected;
  if (names.empty()) {
    for (const auto& s : config_.sources) selected.push_back(&s);
  } else {
    for (const auto& name : names) {
      auto it = std::find_if(config_.sources.begin(), config_.sources.end(),
                             [&](const SourceConfig& s) { return s.name == name; });
      if (it == config_.sources.end()) throw ConfigError("unknown source '" + name + "'");
      selected.push_back(&*it);
    }
  }
  if (selected.empty()) throw ConfigError("no sources configured");
  return selected;
}

std::vector<Chunk> Engine::chunk_sources(std::span<const std::string> source_names) {
  Ingestor ingestor;
  std::vector<Document> docs;
  for (const SourceConfig* source : select_sources(source_names)) {
    auto loaded = load_source(*source, ingestor);
    std::move(loaded.begin(), loaded.end(), std::back_inserter(docs));
  }
  return split_batch(docs, config_.chunker);
}

IngestSummary Engine::ingest(std::span<const std::string> source_names) {
  std::lock_guard ingest_lock(ingest_mutex_);
  check_embedding_marker();

  const auto selected = select_sources(source_names);

  Ingestor ingestor;
  {
    std::shared_lock lock(registry_mutex_);
    for (const auto& [kind, store] : stores_) {
      for (auto& id : store->metadata_values("doc_id")) ingestor.mark_seen(std::move(id));
    }
  }

  IngestSummary summary;
  std::map<SourceKind, std::vector<Document>> by_kind;
  for (const SourceConfig* source : selected) {
    try {
      auto docs = load_source(*source, ingestor);
      auto& bucket = by_kind[source->kind];
      std::move(docs.begin(), docs.end(), std::back_inserter(bucket));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      summary.failed_sources.push_back(source->name + ": " + e.what());
    }
    merge_report(summary.report, ingestor.take_report());
  }

  // Embed everything first so a provider failure leaves every store untouched.
  struct Pending {
    SourceKind kind;
    std::size_t documents;
    std::vector<Chunk> chunks;
    std::vector<StoreItem> items;
  };
  std::vector<Pending> pending;
  for (auto& [kind, docs] : by_kind) {
    Pending p{kind, docs.size(), split_batch(docs, config_.chunker), {}};
    if (!p.chunks.empty()) {
      std::vector<std::string> texts;
      texts.reserve(p.chunks.size());
      for (const auto& c : p.chunks) texts.push_back(c.text);
      auto vectors = embed_texts(*embedder_, texts);
      p.items = make_store_items(vectors, p.chunks);
    }
    pending.push_back(std::move(p));
  }

  for (auto& p : pending) {
    std::shared_ptr<VectorStore> store;
    {
      std::unique_lock lock(registry_mutex_);
      auto& slot = stores_[p.kind];
      if (!slot) slot = std::make_shared<VectorStore>(std::string(to_string(p.kind)), p.kind, embedder_->dim());
      store = slot;
    }
    if (store->dim() != embedder_->dim()) {
      throw ConfigError("store '" + store->store_id() + "' has dim " + std::to_string(store->dim()) +
                        " but the embedding provider produces " + std::to_string(embedder_->dim()));
    }
    StoreIngestSummary s;
    s.store_id = store->store_id();
    s.documents = p.documents;
    s.chunks = p.chunks.size();
    s.vectors_added = p.items.empty() ? 0 : store->upsert(p.items);
    s.total_vectors = store->size();
    store->save(store_dir(config_, p.kind));
    summary.stores.push_back(std::move(s));
  }
  write_embedding_marker();
  return summary;
}

ChatAnswer Engine::query(std::string_view text, std::optional<std::size_t> top_k) {
  if (normalize(text).empty()) throw InvalidArgument("query is empty");
  std::vector<std::shared_ptr<VectorStore>> held;
  {
    std::shared_lock lock(registry_mutex_);
    for (const auto& [kind, store] : stores_) held.push_back(store);
  }
  if (held.empty()) {
    throw NotFoundError("no vector stores under " + config_.store_root.string() + "; run ingest first");
  }
  check_embedding_marker();
  std::vector<const VectorStore*> stores;
  for (const auto& s : held) stores.push_back(s.get());
  RetrievalConfig retrieval = config_.retrieval;
  if (top_k) {
    retrieval.top_k = *top_k;
    retrieval.validate();
  }
  return answer_query(text, stores, retrieval, *embedder_, *llm_, config_.prompt);
}

nlohmann::ordered_json Engine::health() const {
  nlohmann::ordered_json stores = nlohmann::ordered_json::array();
  std::shared_lock lock(registry_mutex_);
  for (const auto& [kind, store] : stores_) {
    stores.push_back({{"store_id", store->store_id()}, {"count", store->size()}});
  }
  return {{"status", "ok"}, {"stores", stores}};
}

nlohmann::ordered_json Engine::store_manifests() const {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  std::shared_lock lock(registry_mutex_);
  for (const auto& [kind, store] : stores_) {
    out.push_back({{"store_id", store->store_id()},
                   {"source_kind", to_string(store->source_kind())},
                   {"dim", store->dim()},
                   {"count", store->size()},
                   {"format_version", kStoreFormatVersion},
                   {"next_id", store->next_id()},
                   {"embedding_provider", embedder_->id()}});
  }
  return out;
}

std::shared_ptr<const VectorStore> Engine::store(SourceKind kind) const {
  std::shared_lock lock(registry_mutex_);
  auto it = stores_.find(kind);
  return it == stores_.end() ? nullptr : it->second;
}

EvalOutcome Engine::evaluate(const std::filesystem::path& case_file, EvalMode mode,
                             std::optional<std::filesystem::path> out_dir) {
  CaseFile cases = load_eval_cases(case_file);
  const EvalConfig& ec = config_.eval;

  std::optional<WordVectorTable> w2v;
  std::optional<WordVectorTable> glove;
  if (ec.word2vec_table) w2v = load_word_table(*ec.word2vec_table);
  if (ec.glove_table) glove = load_word_table(*ec.glove_table);

  std::unique_ptr<TokenEmbedder> token_embedder;
  if (ec.token_embedder == "provider") {
    token_embedder = std::make_unique<ProviderTokenEmbedder>(*embedder_);
  } else {
    token_embedder = std::make_unique<HashingTokenEmbedder>(ec.token_dim);
  }

  auto replay_store = std::make_shared<ReplayStore>(ec.replay_dir);
  std::shared_ptr<ChatClient> llm;
  if (mode == EvalMode::live) {
    llm = std::make_shared<RecordingChatClient>(llm_, replay_store);
  } else {
    llm = std::make_shared<ReplayChatClient>(replay_store, llm_->model_name());
  }

  EvalSuiteConfig suite;
  suite.indirect_threshold = ec.indirect_threshold;
  suite.relevancy_questions = ec.relevancy_questions;
  suite.max_concurrency = ec.max_concurrency;
  suite.embedders.word2vec_style = w2v ? &*w2v : nullptr;
  suite.embedders.glove_style = glove ? &*glove : nullptr;
  suite.embedders.contextual = ec.contextual ? embedder_.get() : nullptr;
  suite.token_embedder = token_embedder.get();
  suite.relevancy_embedder = embedder_.get();
  suite.llm = llm.get();
  suite.judge = llm.get();

  MetricReport report;
  if (!cases.cases.empty()) report = run_eval_suite(cases.cases, suite);
  report.parse_errors = std::move(cases.errors);

  EvalOutcome outcome;
  outcome.paths = write_report(report, suite, out_dir.value_or(ec.output_dir));
  outcome.cases = report.cases.size();
  outcome.parse_errors = report.parse_errors.size();
  outcome.hard_errors = report.hard_errors();
  return outcome;
}

}  // namespace threatrag
