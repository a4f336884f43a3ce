#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "threatrag/http_client.hpp"

namespace threatrag {

struct EmbeddingVector {
  std::vector<float> values;
  std::string provider_id;

  std::size_t dim() const noexcept { return values.size(); }
};

enum class ProviderKind { remote, word_table, deterministic_test };

std::string_view to_string(ProviderKind kind) noexcept;
ProviderKind parse_provider_kind(std::string_view name);

struct EmbeddingProviderSpec {
  ProviderKind kind = ProviderKind::deterministic_test;
  std::string base_url;  // remote
  std::string model;     // remote
  std::filesystem::path table_path;  // word_table
  std::size_t dim = 256;
  bool unit_normalize = true;
  std::size_t batch_size = 64;
  HttpClientOptions http;

  /// Throws ConfigError when dim is zero or a remote spec lacks endpoint/model.
  void validate() const;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual const std::string& id() const noexcept = 0;
  virtual std::size_t dim() const noexcept = 0;
  /// One vector per text, same order.
  virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) = 0;
};

/// Validates inputs (non-empty after normalization) and outputs (count, dim,
/// finiteness) around provider.embed().
std::vector<EmbeddingVector> embed_texts(EmbeddingProvider& provider, std::span<const std::string> texts);
EmbeddingVector embed_text(EmbeddingProvider& provider, const std::string& text);

/// Offline embedder: word unigrams and bigrams hashed (FNV-1a) into dim
/// buckets, optionally L2-normalized. A pure function of the text.
class DeterministicEmbedder final : public EmbeddingProvider {
 public:
  explicit DeterministicEmbedder(std::size_t dim = 256, bool unit_normalize = true);

  const std::string& id() const noexcept override { return id_; }
  std::size_t dim() const noexcept override { return dim_; }
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;

  EmbeddingVector embed_one(std::string_view text) const;

 private:
  std::size_t dim_;
  bool unit_normalize_;
  std::string id_;
};

/// Word vectors in the plain text format: "word f1 f2 ... fd" per line.
/// Lookups are case-insensitive; the first occurrence of a word wins.
class WordVectorTable {
 public:
  WordVectorTable() = default;

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return index_.size(); }
  const std::string& name() const noexcept { return name_; }

  /// Empty span when the word is out of vocabulary.
  std::span<const float> lookup(std::string_view word) const;

  static WordVectorTable parse(std::istream& in, std::string name);

 private:
  std::string name_;
  std::size_t dim_ = 0;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;  // word -> row
};

/// Throws ParseError (with line number) on inconsistent dimensions or an
/// empty file, NotFoundError when the file cannot be opened.
WordVectorTable load_word_table(const std::filesystem::path& path);

/// Mean of the in-vocabulary token vectors. Throws EmptyEmbeddingError when
/// no token is in the vocabulary.
EmbeddingVector sentence_vector(const WordVectorTable& table, std::span<const std::string> tokens);

/// Sentence embeddings from a word table over preprocessed text.
class WordTableEmbedder final : public EmbeddingProvider {
 public:
  WordTableEmbedder(std::shared_ptr<const WordVectorTable> table, bool unit_normalize);

  const std::string& id() const noexcept override { return id_; }
  std::size_t dim() const noexcept override { return table_->dim(); }
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;

 private:
  std::shared_ptr<const WordVectorTable> table_;
  bool unit_normalize_;
  std::string id_;
};

/// POST {base_url}/v1/embeddings, batched.
class RemoteEmbedder final : public EmbeddingProvider {
 public:
  explicit RemoteEmbedder(const EmbeddingProviderSpec& spec);

  const std::string& id() const noexcept override { return id_; }
  std::size_t dim() const noexcept override { return dim_; }
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;

 private:
  JsonHttpClient client_;
  std::string model_;
  std::size_t dim_;
  std::size_t batch_size_;
  bool unit_normalize_;
  std::string id_;
};

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingProviderSpec& spec);

/// Scales to unit L2 norm in place; leaves zero vectors untouched.
void l2_normalize(std::span<float> values);

}  // namespace threatrag
