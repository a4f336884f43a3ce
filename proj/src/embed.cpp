#include "threatrag/embed.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "threatrag/error.hpp"
#include "threatrag/preprocess.hpp"
#include "threatrag/text.hpp"

namespace threatrag {

std::string_view to_string(ProviderKind kind) noexcept {
  switch (kind) {
    case ProviderKind::remote: return "remote";
    case ProviderKind::word_table: return "word_table";
    case ProviderKind::deterministic_test: return "deterministic_test";
  }
  return "deterministic_test";
}

ProviderKind parse_provider_kind(std::string_view name) {
  for (auto kind : {ProviderKind::remote, ProviderKind::word_table, ProviderKind::deterministic_test}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown embedding provider kind '" + std::string(name) + "'");
}

void EmbeddingProviderSpec::validate() const {
  if (kind == ProviderKind::remote) {
    if (base_url.empty() || model.empty()) throw ConfigError("remote embedding provider needs base_url and model");
    if (dim == 0) throw ConfigError("embedding dim must be positive");
  } else if (kind == ProviderKind::word_table) {
    if (table_path.empty()) throw ConfigError("word_table embedding provider needs a table path");
  } else if (dim == 0) {
    throw ConfigError("embedding dim must be positive");
  }
  if (batch_size == 0) throw ConfigError("embedding batch_size must be positive");
}

void l2_normalize(std::span<float> values) {
  double sum = 0.0;
  for (float v : values) sum += static_cast<double>(v) * v;
  if (sum <= 0.0) return;
  const double norm = std::sqrt(sum);
  for (float& v : values) v = static_cast<float>(v / norm);
}

std::vector<EmbeddingVector> embed_texts(EmbeddingProvider& provider, std::span<const std::string> texts) {
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (normalize(texts[i]).empty()) {
      throw InvalidArgument("text " + std::to_string(i) + " is empty after normalization");
    }
  }
  if (texts.empty()) return {};
  auto vectors = provider.embed(texts);
  if (vectors.size() != texts.size()) {
    throw IntegrityError(provider.id() + " returned " + std::to_string(vectors.size()) + " vectors for " +
                         std::to_string(texts.size()) + " texts");
  }
  for (const auto& v : vectors) {
    if (v.dim() != provider.dim()) {
      throw IntegrityError(provider.id() + " returned dim " + std::to_string(v.dim()) + ", expected " +
                           std::to_string(provider.dim()));
    }
    if (!std::all_of(v.values.begin(), v.values.end(), [](float x) { return std::isfinite(x); })) {
      throw IntegrityError(provider.id() + " returned a non-finite value");
    }
  }
  return vectors;
}

EmbeddingVector embed_text(EmbeddingProvider& provider, const std::string& text) {
  return std::move(embed_texts(provider, std::span<const std::string>(&text, 1)).front());
}

DeterministicEmbedder::DeterministicEmbedder(std::size_t dim, bool unit_normalize)
    : dim_(dim), unit_normalize_(unit_normalize), id_("deterministic_test-" + std::to_string(dim)) {
  if (dim_ == 0) throw ConfigError("embedding dim must be positive");
}

EmbeddingVector DeterministicEmbedder::embed_one(std::string_view text) const {
  static const StopwordSet kNoStopwords;
  EmbeddingVector out{std::vector<float>(dim_, 0.0f), id_};
  auto bump = [&](const std::string& feature) { out.values[fnv1a64(feature) % dim_] += 1.0f; };

  std::vector<std::string> tokens = preprocess(text, kNoStopwords);
  if (tokens.empty()) {
    bump("t:" + normalize(text));
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    bump("u:" + tokens[i]);
    if (i + 1 < tokens.size()) bump("b:" + tokens[i] + " " + tokens[i + 1]);
  }
  if (unit_normalize_) l2_normalize(out.values);
  return out;
}

std::vector<EmbeddingVector> DeterministicEmbedder::embed(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& text : texts) out.push_back(embed_one(text));
  return out;
}

std::span<const float> WordVectorTable::lookup(std::string_view word) const {
  auto it = index_.find(to_lower(word));
  if (it == index_.end()) return {};
  return std::span<const float>(data_).subspan(it->second * dim_, dim_);
}

WordVectorTable WordVectorTable::parse(std::istream& in, std::string name) {
  WordVectorTable table;
  table.name_ = std::move(name);
  std::string line;
  std::size_t line_no = 0;
  std::vector<float> row;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::string word;
    if (!(fields >> word)) continue;
    row.clear();
    std::string token;
    std::vector<std::string> raw;
    while (fields >> token) raw.push_back(token);
    // word2vec-style "<count> <dim>" header line
    if (line_no == 1 && raw.size() == 1 && std::all_of(word.begin(), word.end(), ::isdigit) &&
        std::all_of(raw[0].begin(), raw[0].end(), ::isdigit)) {
      continue;
    }
    for (const auto& t : raw) {
      float value = 0.0f;
      auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
      if (ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(value)) {
        throw ParseError(table.name_ + ": line " + std::to_string(line_no) + ": invalid number '" + t + "'");
      }
      row.push_back(value);
    }
    if (row.empty()) throw ParseError(table.name_ + ": line " + std::to_string(line_no) + ": no vector values");
    if (table.dim_ == 0) {
      table.dim_ = row.size();
    } else if (row.size() != table.dim_) {
      throw ParseError(table.name_ + ": line " + std::to_string(line_no) + ": expected " +
                       std::to_string(table.dim_) + " values, found " + std::to_string(row.size()));
    }
    std::string key = to_lower(word);
    if (table.index_.contains(key)) continue;
    table.index_.emplace(std::move(key), table.data_.size() / table.dim_);
    table.data_.insert(table.data_.end(), row.begin(), row.end());
  }
  if (table.index_.empty()) throw ParseError(table.name_ + ": word table is empty");
  return table;
}

WordVectorTable load_word_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open word table " + path.string());
  return WordVectorTable::parse(in, path.filename().string());
}

EmbeddingVector sentence_vector(const WordVectorTable& table, std::span<const std::string> tokens) {
  std::vector<double> sum(table.dim(), 0.0);
  std::size_t hits = 0;
  for (const auto& token : tokens) {
    auto row = table.lookup(token);
    if (row.empty()) continue;
    ++hits;
    for (std::size_t d = 0; d < row.size(); ++d) sum[d] += row[d];
  }
  if (hits == 0) throw EmptyEmbeddingError("no in-vocabulary tokens for " + table.name());
  EmbeddingVector out{std::vector<float>(table.dim()), "word_table:" + table.name()};
  for (std::size_t d = 0; d < sum.size(); ++d) out.values[d] = static_cast<float>(sum[d] / static_cast<double>(hits));
  return out;
}

WordTableEmbedder::WordTableEmbedder(std::shared_ptr<const WordVectorTable> table, bool unit_normalize)
    : table_(std::move(table)), unit_normalize_(unit_normalize), id_("word_table:" + table_->name()) {}

std::vector<EmbeddingVector> WordTableEmbedder::embed(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    auto tokens = preprocess(text);
    EmbeddingVector v = sentence_vector(*table_, tokens);
    if (unit_normalize_) l2_normalize(v.values);
    v.provider_id = id_;
    out.push_back(std::move(v));
  }
  return out;
}

namespace {

HttpClientOptions with_embed_key(HttpClientOptions options) {
  if (!options.bearer_token) options.bearer_token = env_value("EMBED_API_KEY");
  return options;
}

}  // namespace

RemoteEmbedder::RemoteEmbedder(const EmbeddingProviderSpec& spec)
    : client_(spec.base_url, with_embed_key(spec.http)),
      model_(spec.model),
      dim_(spec.dim),
      batch_size_(spec.batch_size),
      unit_normalize_(spec.unit_normalize),
      id_("remote:" + spec.model) {
  spec.validate();
}

std::vector<EmbeddingVector> RemoteEmbedder::embed(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (std::size_t begin = 0; begin < texts.size(); begin += batch_size_) {
    auto batch = texts.subspan(begin, std::min(batch_size_, texts.size() - begin));
    nlohmann::json request{{"model", model_}, {"input", std::vector<std::string>(batch.begin(), batch.end())}};
    nlohmann::json response = client_.post("/v1/embeddings", request);
    if (!response.contains("data") || !response["data"].is_array()) {
      throw ProviderError(id_ + ": response has no data array", 200, false);
    }
    std::vector<EmbeddingVector> slots(batch.size());
    std::vector<bool> filled(batch.size(), false);
    std::size_t position = 0;
    for (const auto& item : response["data"]) {
      std::size_t index = item.value("index", position);
      ++position;
      if (index >= batch.size() || filled[index]) {
        throw IntegrityError(id_ + ": unexpected embedding index " + std::to_string(index));
      }
      EmbeddingVector v{item.at("embedding").get<std::vector<float>>(), id_};
      if (v.dim() != dim_) {
        throw IntegrityError(id_ + ": embedding dim " + std::to_string(v.dim()) + " does not match configured " +
                             std::to_string(dim_));
      }
      if (unit_normalize_) l2_normalize(v.values);
      slots[index] = std::move(v);
      filled[index] = true;
    }
    if (std::count(filled.begin(), filled.end(), true) != static_cast<long>(batch.size())) {
      throw IntegrityError(id_ + ": response is missing embeddings");
    }
    for (auto& v : slots) out.push_back(std::move(v));
  }
  return out;
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingProviderSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case ProviderKind::remote:
      return std::make_unique<RemoteEmbedder>(spec);
    case ProviderKind::word_table:
      return std::make_unique<WordTableEmbedder>(
          std::make_shared<const WordVectorTable>(load_word_table(spec.table_path)), spec.unit_normalize);
    case ProviderKind::deterministic_test:
      return std::make_unique<DeterministicEmbedder>(spec.dim, spec.unit_normalize);
  }
  throw ConfigError("unknown embedding provider kind");
}

}  // namespace threatrag
