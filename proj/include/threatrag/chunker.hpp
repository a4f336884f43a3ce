#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "threatrag/ingest.hpp"

namespace threatrag {

struct ChunkerConfig {
  std::size_t chunk_size = 1000;  // unicode scalar values
  std::size_t chunk_overlap = 50;
  std::vector<std::string> separators{"\n\n", "\n", ". ", " ", ""};

  /// Throws ConfigError unless chunk_overlap < chunk_size, chunk_size > 0 and
  /// the last separator is "".
  void validate() const;
};

/// Half-open range of code point offsets into the parent text.
struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - start; }
  friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

struct Chunk {
  std::string id;
  std::string parent_document_id;
  std::size_t seq_index = 0;
  std::string text;
  CharSpan span;
  Metadata metadata;
};

/// Recursive separator descent. Spans only; `text` is a code point sequence.
std::vector<CharSpan> split_spans(std::u32string_view text, const ChunkerConfig& config);

std::vector<Chunk> split_document(const Document& document, const ChunkerConfig& config);

/// Concatenation of split_document over `documents`. Chunk ids stay unique
/// even if the same document appears twice.
std::vector<Chunk> split_batch(std::span<const Document> documents, const ChunkerConfig& config);

/// One JSON object per line.
void write_chunks_jsonl(std::ostream& out, std::span<const Chunk> chunks);

}  // namespace threatrag
