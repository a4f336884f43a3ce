#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "threatrag/chunker.hpp"
#include "threatrag/embed.hpp"
#include "threatrag/ingest.hpp"

namespace threatrag {

/// Cosine similarity, accumulated in double. Throws InvalidArgument on a
/// dimension mismatch or a zero-norm input.
double cosine(std::span<const float> a, std::span<const float> b);
double cosine(std::span<const double> a, std::span<const double> b);

struct RetrievalConfig {
  std::size_t top_k = 3;
  std::size_t rrf_k = 60;
  std::optional<std::size_t> per_store_k;  // defaults to top_k

  std::size_t effective_per_store_k() const noexcept { return per_store_k.value_or(top_k); }
  void validate() const;
};

struct RetrievalHit {
  std::uint64_t record_id = 0;
  std::string text;
  Metadata metadata;
  double score = 0.0;       // cosine for a single store, fused RRF score after fusion
  double similarity = 0.0;  // raw cosine to the query
  std::size_t rank = 0;     // 1-based
  std::string store_id;
};

struct StoreItem {
  std::vector<float> vector;
  std::string text;
  Metadata metadata;  // must carry a non-empty "source"
};

/// Pairs embeddings with their chunks; chunk and document ids go into metadata.
std::vector<StoreItem> make_store_items(std::span<const EmbeddingVector> vectors, std::span<const Chunk> chunks);

struct VectorRecord {
  std::uint64_t id = 0;
  std::string text;
  Metadata metadata;
};

/// Append-only flat store with exact cosine search. Readers and writers
/// synchronize on an internal shared mutex: many concurrent searches or one
/// upsert at a time.
class VectorStore {
 public:
  VectorStore(std::string store_id, SourceKind kind, std::size_t dim);
  VectorStore(VectorStore&& other) noexcept;
  VectorStore& operator=(VectorStore&& other) noexcept;
  VectorStore(const VectorStore&) = delete;
  VectorStore& operator=(const VectorStore&) = delete;

  const std::string& store_id() const noexcept { return store_id_; }
  SourceKind source_kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const;
  std::uint64_t next_id() const;

  /// All-or-nothing: any dimension, finiteness, zero-norm or metadata problem
  /// throws IntegrityError and leaves the store unchanged. Returns the number
  /// of records added.
  std::size_t upsert(std::span<const StoreItem> items);

  /// Top-k by cosine, ties broken by smaller record id.
  std::vector<RetrievalHit> search(std::span<const float> query, std::size_t k) const;

  std::vector<VectorRecord> records() const;
  std::vector<float> vector(std::size_t row) const;
  /// Distinct values of a metadata key across records.
  std::vector<std::string> metadata_values(const std::string& key) const;

  void save(const std::filesystem::path& directory) const;
  static VectorStore load(const std::filesystem::path& directory);

 private:
  std::string store_id_;
  SourceKind kind_;
  std::size_t dim_;
  std::uint64_t next_id_ = 1;
  std::vector<VectorRecord> records_;
  std::vector<float> vectors_;  // row-major, records_.size() x dim_
  std::vector<double> norms_;
  mutable std::shared_mutex mutex_;
  mutable std::mutex write_gate_;

  std::shared_lock<std::shared_mutex> read_lock() const;
};

inline void save_store(const VectorStore& store, const std::filesystem::path& directory) { store.save(directory); }
inline VectorStore load_store(const std::filesystem::path& directory) { return VectorStore::load(directory); }

inline constexpr int kStoreFormatVersion = 1;

/// Reciprocal rank fusion: each item scores sum(1 / (rrf_k + rank)) over the
/// lists containing it. Items are identified by chunk text. Ties go to the
/// better best rank, then the earlier list, then the smaller record id.
/// Output ranks are 1..n with n <= top_k.
std::vector<RetrievalHit> rrf_fuse(std::span<const std::vector<RetrievalHit>> lists, std::size_t rrf_k,
                                   std::size_t top_k);

/// Searches every store concurrently (per_store_k each) and fuses with RRF.
std::vector<RetrievalHit> ensemble_retrieve(std::span<const VectorStore* const> stores, std::span<const float> query,
                                            const RetrievalConfig& config);

}  // namespace threatrag
