#include "threatrag/index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <future>
#include <map>
#include <mutex>
#include <set>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "threatrag/error.hpp"

namespace threatrag {
namespace {

template <typename T>
double cosine_impl(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) {
    throw InvalidArgument("cosine: dimension mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i];
    const double y = b[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) throw InvalidArgument("cosine: zero-norm vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double squared_norm(std::span<const float> v) {
  double sum = 0.0;
  for (float x : v) sum += static_cast<double>(x) * static_cast<double>(x);
  return sum;
}

}  // namespace

double cosine(std::span<const float> a, std::span<const float> b) { return cosine_impl(a, b); }
double cosine(std::span<const double> a, std::span<const double> b) { return cosine_impl(a, b); }

void RetrievalConfig::validate() const {
  if (top_k == 0) throw ConfigError("retrieval top_k must be at least 1");
  if (rrf_k == 0) throw ConfigError("retrieval rrf_k must be positive");
  if (per_store_k && *per_store_k == 0) throw ConfigError("retrieval per_store_k must be positive");
}

std::vector<StoreItem> make_store_items(std::span<const EmbeddingVector> vectors, std::span<const Chunk> chunks) {
  if (vectors.size() != chunks.size()) {
    throw IntegrityError("got " + std::to_string(vectors.size()) + " vectors for " + std::to_string(chunks.size()) +
                         " chunks");
  }
  std::vector<StoreItem> items;
  items.reserve(chunks.size());
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    StoreItem item{vectors[i].values, chunks[i].text, chunks[i].metadata};
    item.metadata["chunk_id"] = chunks[i].id;
    item.metadata["doc_id"] = chunks[i].parent_document_id;
    items.push_back(std::move(item));
  }
  return items;
}

VectorStore::VectorStore(std::string store_id, SourceKind kind, std::size_t dim)
    : store_id_(std::move(store_id)), kind_(kind), dim_(dim) {
  if (dim_ == 0) throw InvalidArgument("store dim must be positive");
}

VectorStore::VectorStore(VectorStore&& other) noexcept : kind_(other.kind_), dim_(other.dim_) {
  std::unique_lock lock(other.mutex_);
  store_id_ = std::move(other.store_id_);
  next_id_ = other.next_id_;
  records_ = std::move(other.records_);
  vectors_ = std::move(other.vectors_);
  norms_ = std::move(other.norms_);
}

VectorStore& VectorStore::operator=(VectorStore&& other) noexcept {
  if (this == &other) return *this;
  std::scoped_lock lock(mutex_, other.mutex_);
  store_id_ = std::move(other.store_id_);
  kind_ = other.kind_;
  dim_ = other.dim_;
  next_id_ = other.next_id_;
  records_ = std::move(other.records_);
  vectors_ = std::move(other.vectors_);
  norms_ = std::move(other.norms_);
  return *this;
}

std::shared_lock<std::shared_mutex> VectorStore::read_lock() const {
  std::lock_guard gate(write_gate_);
  return std::shared_lock(mutex_);
}

std::size_t VectorStore::size() const {
  auto lock = read_lock();
  return records_.size();
}

std::uint64_t VectorStore::next_id() const {
  auto lock = read_lock();
  return next_id_;
}

std::size_t VectorStore::upsert(std::span<const StoreItem> items) {
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    const std::string where = store_id_ + ": item " + std::to_string(i);
    if (item.vector.size() != dim_) {
      throw IntegrityError(where + " has dim " + std::to_string(item.vector.size()) + ", store dim is " +
                           std::to_string(dim_));
    }
    if (!std::all_of(item.vector.begin(), item.vector.end(), [](float x) { return std::isfinite(x); })) {
      throw IntegrityError(where + " has a non-finite component");
    }
    if (squared_norm(item.vector) == 0.0) throw IntegrityError(where + " is a zero vector");
    auto source = item.metadata.find("source");
    if (source == item.metadata.end() || source->second.empty()) {
      throw IntegrityError(where + " has no source name in metadata");
    }
  }
  // Holding the gate while waiting keeps new readers from starving the writer.
  std::lock_guard gate(write_gate_);
  std::unique_lock lock(mutex_);
  records_.reserve(records_.size() + items.size());
  vectors_.reserve(vectors_.size() + items.size() * dim_);
  for (const auto& item : items) {
    records_.push_back({next_id_++, item.text, item.metadata});
    vectors_.insert(vectors_.end(), item.vector.begin(), item.vector.end());
    norms_.push_back(std::sqrt(squared_norm(item.vector)));
  }
  return items.size();
}

std::vector<RetrievalHit> VectorStore::search(std::span<const float> query, std::size_t k) const {
  if (query.size() != dim_) {
    throw IntegrityError(store_id_ + ": query dim " + std::to_string(query.size()) + ", store dim " +
                         std::to_string(dim_));
  }
  if (k == 0) throw InvalidArgument("search: k must be at least 1");
  const double query_sq = squared_norm(query);
  if (query_sq == 0.0) throw InvalidArgument("search: zero-norm query");
  const double query_norm = std::sqrt(query_sq);

  auto lock = read_lock();
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(records_.size());
  for (std::size_t row = 0; row < records_.size(); ++row) {
    const float* v = vectors_.data() + row * dim_;
    double dot = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) dot += static_cast<double>(query[d]) * static_cast<double>(v[d]);
    scored.emplace_back(dot / (query_norm * norms_[row]), row);
  }
  const std::size_t n = std::min(k, scored.size());
  // Rows are in id order, so the smaller row is the smaller id.
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });

  std::vector<RetrievalHit> hits;
  hits.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const VectorRecord& rec = records_[scored[i].second];
    hits.push_back({rec.id, rec.text, rec.metadata, scored[i].first, scored[i].first, i + 1, store_id_});
  }
  return hits;
}

std::vector<VectorRecord> VectorStore::records() const {
  auto lock = read_lock();
  return records_;
}

std::vector<float> VectorStore::vector(std::size_t row) const {
  auto lock = read_lock();
  if (row >= records_.size()) throw InvalidArgument("row out of range");
  auto begin = vectors_.begin() + static_cast<std::ptrdiff_t>(row * dim_);
  return {begin, begin + static_cast<std::ptrdiff_t>(dim_)};
}

std::vector<std::string> VectorStore::metadata_values(const std::string& key) const {
  auto lock = read_lock();
  std::set<std::string> values;
  for (const auto& rec : records_) {
    if (auto it = rec.metadata.find(key); it != rec.metadata.end()) values.insert(it->second);
  }
  return {values.begin(), values.end()};
}

namespace {

void write_atomically(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IntegrityError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IntegrityError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptionError("missing " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void VectorStore::save(const std::filesystem::path& directory) const {
  auto lock = read_lock();
  std::filesystem::create_directories(directory);

  std::string vector_bytes;
  vector_bytes.reserve(vectors_.size() * 4);
  for (float f : vectors_) {
    auto bits = std::bit_cast<std::uint32_t>(f);
    for (int shift = 0; shift < 32; shift += 8) vector_bytes.push_back(static_cast<char>((bits >> shift) & 0xFF));
  }
  std::string record_lines;
  for (const auto& rec : records_) {
    nlohmann::ordered_json line{{"id", rec.id}, {"text", rec.text}, {"metadata", rec.metadata}};
    record_lines += line.dump();
    record_lines.push_back('\n');
  }
  nlohmann::ordered_json manifest{
      {"store_id", store_id_},      {"source_kind", to_string(kind_)}, {"dim", dim_},
      {"count", records_.size()},   {"format_version", kStoreFormatVersion}, {"next_id", next_id_},
  };
  write_atomically(directory / "vectors.bin", vector_bytes);
  write_atomically(directory / "records.jsonl", record_lines);
  write_atomically(directory / "manifest.json", manifest.dump(2) + "\n");
}

VectorStore VectorStore::load(const std::filesystem::path& directory) {
  const auto manifest_path = directory / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw NotFoundError("no store manifest in " + directory.string());

  nlohmann::json manifest;
  std::size_t dim = 0, count = 0;
  std::string store_id;
  SourceKind kind{};
  std::uint64_t next_id = 0;
  try {
    manifest = nlohmann::json::parse(read_all(manifest_path));
    if (manifest.at("format_version").get<int>() != kStoreFormatVersion) {
      throw CorruptionError(manifest_path.string() + ": unsupported format_version " +
                            manifest.at("format_version").dump());
    }
    store_id = manifest.at("store_id").get<std::string>();
    kind = parse_source_kind(manifest.at("source_kind").get<std::string>());
    dim = manifest.at("dim").get<std::size_t>();
    count = manifest.at("count").get<std::size_t>();
    next_id = manifest.value("next_id", static_cast<std::uint64_t>(count + 1));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(manifest_path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw CorruptionError(manifest_path.string() + ": " + e.what());
  }
  if (dim == 0) throw CorruptionError(manifest_path.string() + ": dim must be positive");

  const std::string vector_bytes = read_all(directory / "vectors.bin");
  const std::size_t expected = count * dim * 4;
  if (vector_bytes.size() != expected) {
    throw CorruptionError("vectors.bin: expected " + std::to_string(expected) + " bytes, found " +
                          std::to_string(vector_bytes.size()));
  }

  VectorStore store(store_id, kind, dim);
  store.vectors_.resize(count * dim);
  for (std::size_t i = 0; i < store.vectors_.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(vector_bytes[i * 4 + b])) << (8 * b);
    store.vectors_[i] = std::bit_cast<float>(bits);
  }

  std::ifstream records_in(directory / "records.jsonl");
  if (!records_in) throw CorruptionError("missing records.jsonl in " + directory.string());
  std::string line;
  std::size_t line_no = 0;
  std::uint64_t last_id = 0;
  while (std::getline(records_in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      VectorRecord rec{j.at("id").get<std::uint64_t>(), j.at("text").get<std::string>(),
                       j.at("metadata").get<Metadata>()};
      if (rec.id <= last_id) throw CorruptionError("records.jsonl line " + std::to_string(line_no) + ": ids not increasing");
      last_id = rec.id;
      store.records_.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw CorruptionError("records.jsonl line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (store.records_.size() != count) {
    throw CorruptionError("records.jsonl: expected " + std::to_string(count) + " records, found " +
                          std::to_string(store.records_.size()));
  }
  store.next_id_ = std::max<std::uint64_t>(next_id, last_id + 1);
  store.norms_.reserve(count);
  for (std::size_t row = 0; row < count; ++row) {
    double sq = squared_norm(std::span<const float>(store.vectors_).subspan(row * dim, dim));
    if (!(sq > 0.0) || !std::isfinite(sq)) throw CorruptionError("vectors.bin: row " + std::to_string(row) + " is not a valid vector");
    store.norms_.push_back(std::sqrt(sq));
  }
  return store;
}

std::vector<RetrievalHit> rrf_fuse(std::span<const std::vector<RetrievalHit>> lists, std::size_t rrf_k,
                                   std::size_t top_k) {
  struct Entry {
    RetrievalHit hit;
    double fused = 0.0;
    std::size_t best_rank = 0;
    std::size_t best_list = 0;
  };
  std::vector<Entry> entries;
  std::unordered_map<std::string, std::size_t> by_text;
  for (std::size_t l = 0; l < lists.size(); ++l) {
    for (std::size_t pos = 0; pos < lists[l].size(); ++pos) {
      const RetrievalHit& hit = lists[l][pos];
      const std::size_t rank = hit.rank == 0 ? pos + 1 : hit.rank;
      const double contribution = 1.0 / static_cast<double>(rrf_k + rank);
      auto [it, inserted] = by_text.try_emplace(hit.text, entries.size());
      if (inserted) {
        entries.push_back({hit, contribution, rank, l});
        continue;
      }
      Entry& e = entries[it->second];
      e.fused += contribution;
      if (rank < e.best_rank) {
        e.best_rank = rank;
        e.best_list = l;
        e.hit = hit;
      }
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.fused != b.fused) return a.fused > b.fused;
    if (a.best_rank != b.best_rank) return a.best_rank < b.best_rank;
    if (a.best_list != b.best_list) return a.best_list < b.best_list;
    return a.hit.record_id < b.hit.record_id;
  });
  if (entries.size() > top_k) entries.resize(top_k);
  std::vector<RetrievalHit> fused;
  fused.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    RetrievalHit hit = std::move(entries[i].hit);
    hit.score = entries[i].fused;
    hit.rank = i + 1;
    fused.push_back(std::move(hit));
  }
  return fused;
}

std::vector<RetrievalHit> ensemble_retrieve(std::span<const VectorStore* const> stores, std::span<const float> query,
                                            const RetrievalConfig& config) {
  config.validate();
  if (stores.empty()) throw InvalidArgument("ensemble_retrieve needs at least one store");
  for (const VectorStore* store : stores) {
    if (store->dim() != query.size()) {
      throw IntegrityError("query dim " + std::to_string(query.size()) + " incompatible with store " +
                           store->store_id() + " (dim " + std::to_string(store->dim()) + ")");
    }
  }
  const std::size_t per_store = config.effective_per_store_k();
  std::vector<std::future<std::vector<RetrievalHit>>> pending;
  pending.reserve(stores.size());
  for (const VectorStore* store : stores) {
    pending.push_back(std::async(std::launch::async, [store, query, per_store] { return store->search(query, per_store); }));
  }
  std::vector<std::vector<RetrievalHit>> lists;
  lists.reserve(pending.size());
  for (auto& f : pending) lists.push_back(f.get());
  return rrf_fuse(lists, config.rrf_k, config.top_k);
}

}  // namespace threatrag
