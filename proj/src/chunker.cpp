#include "threatrag/chunker.hpp"

#include <algorithm>
#include <map>
#include <ostream>

#include <nlohmann/json.hpp>

#include "threatrag/error.hpp"
#include "threatrag/text.hpp"

namespace threatrag {

void ChunkerConfig::validate() const {
  if (chunk_size == 0) throw ConfigError("chunk_size must be positive");
  if (chunk_overlap >= chunk_size) throw ConfigError("chunk_overlap must be smaller than chunk_size");
  if (separators.empty() || !separators.back().empty()) {
    throw ConfigError("separator list must end with the empty separator");
  }
}

namespace {

class Splitter {
 public:
  Splitter(std::u32string_view text, const ChunkerConfig& config) : text_(text), config_(config) {
    for (const auto& sep : config.separators) separators_.push_back(to_u32(sep));
  }

  std::vector<CharSpan> run() {
    if (!text_.empty()) split({0, text_.size()}, 0);
    return std::move(out_);
  }

 private:
  void split(CharSpan range, std::size_t sep_level) {
    std::size_t level = sep_level;
    while (level + 1 < separators_.size() && !contains(range, separators_[level])) ++level;
    if (separators_[level].empty()) {
      slide(range);
      return;
    }
    merge(pieces(range, separators_[level]), level);
  }

  bool contains(CharSpan range, const std::u32string& sep) const {
    if (sep.empty()) return true;
    return text_.substr(range.start, range.size()).find(sep) != std::u32string_view::npos;
  }

  // Separators stay attached to the end of the preceding piece.
  std::vector<CharSpan> pieces(CharSpan range, const std::u32string& sep) const {
    std::vector<CharSpan> result;
    std::size_t start = range.start;
    while (start < range.end) {
      std::size_t hit = text_.substr(0, range.end).find(sep, start);
      std::size_t end = hit == std::u32string_view::npos ? range.end : hit + sep.size();
      result.push_back({start, end});
      start = end;
    }
    return result;
  }

  void slide(CharSpan range) {
    const std::size_t step = config_.chunk_size - config_.chunk_overlap;
    for (std::size_t start = range.start;; start += step) {
      std::size_t end = std::min(start + config_.chunk_size, range.end);
      out_.push_back({start, end});
      if (end == range.end) break;
    }
  }

  // Start offset for a window that begins with `piece`, extended backwards
  // by up to chunk_overlap characters of the previous chunk.
  std::size_t window_start(CharSpan piece) const {
    if (out_.empty() || out_.back().end != piece.start) return piece.start;
    const CharSpan& prev = out_.back();
    std::size_t carry = std::min({config_.chunk_overlap, config_.chunk_size - piece.size(), prev.size() - 1});
    return piece.start - carry;
  }

  void merge(const std::vector<CharSpan>& parts, std::size_t level) {
    bool open = false;
    CharSpan window;
    for (const CharSpan& piece : parts) {
      if (piece.size() > config_.chunk_size) {
        if (open) out_.push_back(window);
        open = false;
        split(piece, level + 1);
        continue;
      }
      if (open && piece.end - window.start <= config_.chunk_size) {
        window.end = piece.end;
        continue;
      }
      if (open) out_.push_back(window);
      window = {window_start(piece), piece.end};
      open = true;
    }
    if (open) out_.push_back(window);
  }

  std::u32string_view text_;
  const ChunkerConfig& config_;
  std::vector<std::u32string> separators_;
  std::vector<CharSpan> out_;
};

}  // namespace

std::vector<CharSpan> split_spans(std::u32string_view text, const ChunkerConfig& config) {
  config.validate();
  return Splitter(text, config).run();
}

std::vector<Chunk> split_document(const Document& document, const ChunkerConfig& config) {
  const std::u32string text = to_u32(document.text);
  std::vector<Chunk> chunks;
  for (const CharSpan& span : split_spans(text, config)) {
    Chunk chunk;
    chunk.seq_index = chunks.size();
    chunk.parent_document_id = document.id;
    chunk.id = document.id + ":" + std::to_string(chunk.seq_index);
    chunk.text = to_utf8(std::u32string_view(text).substr(span.start, span.size()));
    chunk.span = span;
    chunk.metadata = document.metadata;
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

std::vector<Chunk> split_batch(std::span<const Document> documents, const ChunkerConfig& config) {
  std::vector<Chunk> all;
  std::map<std::string, std::size_t> occurrences;
  for (const Document& doc : documents) {
    auto chunks = split_document(doc, config);
    std::size_t seen = occurrences[doc.id]++;
    for (auto& chunk : chunks) {
      if (seen > 0) chunk.id += "~" + std::to_string(seen);
      all.push_back(std::move(chunk));
    }
  }
  return all;
}

void write_chunks_jsonl(std::ostream& out, std::span<const Chunk> chunks) {
  for (const Chunk& chunk : chunks) {
    nlohmann::ordered_json line{
        {"id", chunk.id},
        {"parent_document_id", chunk.parent_document_id},
        {"seq_index", chunk.seq_index},
        {"char_span", {chunk.span.start, chunk.span.end}},
        {"text", chunk.text},
        {"metadata", chunk.metadata},
    };
    out << line.dump() << '\n';
  }
}

}  // namespace threatrag
