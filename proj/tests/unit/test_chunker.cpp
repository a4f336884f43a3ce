#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "chunk_oracle.hpp"
#include "threatrag/chunker.hpp"
#include "threatrag/error.hpp"
#include "threatrag/text.hpp"

using namespace threatrag;

namespace {

ChunkerConfig config(std::size_t size, std::size_t overlap, std::vector<std::string> seps = {"\n\n", "\n", ". ", " ", ""}) {
  ChunkerConfig c;
  c.chunk_size = size;
  c.chunk_overlap = overlap;
  c.separators = std::move(seps);
  return c;
}

Document doc(std::string text, std::string id = "doc") {
  Document d;
  d.id = std::move(id);
  d.text = std::move(text);
  d.metadata["source"] = "s.txt";
  return d;
}

std::vector<std::string> texts(const std::vector<Chunk>& chunks) {
  std::vector<std::string> out;
  for (const auto& c : chunks) out.push_back(c.text);
  return out;
}

std::u32string random_text(std::mt19937& rng, std::size_t max_len) {
  static const std::u32string alphabet = U"abcdefghij      ..\n\n\né中";
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::u32string s(len(rng), U'a');
  for (auto& c : s) c = alphabet[pick(rng)];
  return s;
}

}  // namespace

TEST(Chunker, ShortTextIsOneChunk) {
  const std::string text(500, 'x');
  auto chunks = split_document(doc(text), ChunkerConfig{});
  ASSERT_EQ(chunks.size(), 1u);
  EXPECT_EQ(chunks[0].text, text);
  EXPECT_EQ(chunks[0].span, (CharSpan{0, 500}));
  EXPECT_EQ(chunks[0].id, "doc:0");
  EXPECT_EQ(chunks[0].parent_document_id, "doc");
  EXPECT_EQ(chunks[0].metadata.at("source"), "s.txt");
}

TEST(Chunker, SlidingWindowExample) {
  auto chunks = split_document(doc("abcdefghij"), config(4, 2, {""}));
  EXPECT_EQ(texts(chunks), (std::vector<std::string>{"abcd", "cdef", "efgh", "ghij"}));
}

TEST(Chunker, EmptyText) {
  EXPECT_TRUE(split_document(doc(""), ChunkerConfig{}).empty());
  EXPECT_TRUE(split_batch({}, ChunkerConfig{}).empty());
}

TEST(Chunker, ParagraphsMergeUnderBudget) {
  auto chunks = split_document(doc("para1\n\npara2"), config(12, 0));
  EXPECT_EQ(texts(chunks), (std::vector<std::string>{"para1\n\npara2"}));
}

TEST(Chunker, SeparatorStaysWithPrecedingPiece) {
  auto chunks = split_document(doc("aaaa. bbbb. cccc."), config(7, 0));
  EXPECT_EQ(texts(chunks), (std::vector<std::string>{"aaaa. ", "bbbb. ", "cccc."}));
}

TEST(Chunker, CountsCodePointsNotBytes) {
  // 6 code points, 12 bytes
  auto chunks = split_document(doc("éééééé"), config(3, 0, {""}));
  ASSERT_EQ(chunks.size(), 2u);
  EXPECT_EQ(chunks[0].text, "ééé");
  EXPECT_EQ(chunks[1].span, (CharSpan{3, 6}));
}

TEST(Chunker, ConfigValidation) {
  EXPECT_NO_THROW(ChunkerConfig{}.validate());
  EXPECT_THROW(config(4, 4).validate(), ConfigError);
  EXPECT_THROW(config(0, 0).validate(), ConfigError);
  EXPECT_THROW(config(4, 1, {" "}).validate(), ConfigError);
  EXPECT_THROW(config(4, 1, {}).validate(), ConfigError);
  EXPECT_THROW(split_document(doc("abc"), config(4, 4)), ConfigError);
}

TEST(Chunker, CharacterFallbackMatchesSlidingWindowOracle) {
  std::mt19937 rng(11);
  std::uniform_int_distribution<std::size_t> size_dist(8, 64);
  for (int i = 0; i < 300; ++i) {
    const std::u32string text = random_text(rng, 2000);
    const std::size_t size = size_dist(rng);
    const std::size_t overlap = std::uniform_int_distribution<std::size_t>(0, size - 1)(rng);
    auto spans = split_spans(text, config(size, overlap, {""}));
    auto expected = oracle::sliding_windows(text, size, overlap);
    ASSERT_EQ(spans.size(), expected.size()) << "case " << i;
    for (std::size_t k = 0; k < spans.size(); ++k) {
      ASSERT_EQ(text.substr(spans[k].start, spans[k].size()), expected[k]) << "case " << i << " chunk " << k;
    }
  }
}

TEST(Chunker, DefaultSeparatorInvariants) {
  std::mt19937 rng(12);
  std::uniform_int_distribution<std::size_t> size_dist(8, 64);
  for (int i = 0; i < 300; ++i) {
    const std::u32string text = random_text(rng, 3000);
    const std::size_t size = size_dist(rng);
    const std::size_t overlap = std::uniform_int_distribution<std::size_t>(0, size - 1)(rng);
    auto spans = split_spans(text, config(size, overlap));
    std::size_t covered = 0;
    for (std::size_t k = 0; k < spans.size(); ++k) {
      const auto& s = spans[k];
      ASSERT_LT(s.start, s.end);
      ASSERT_LE(s.end, text.size());
      ASSERT_LE(s.size(), size);
      ASSERT_LE(s.start, covered) << "gap before chunk " << k;
      if (k > 0) {
        ASSERT_GT(s.start, spans[k - 1].start);
        const std::size_t shared = spans[k - 1].end > s.start ? spans[k - 1].end - s.start : 0;
        ASSERT_LE(shared, overlap);
      }
      covered = std::max(covered, s.end);
    }
    ASSERT_EQ(covered, text.size());
  }
}

TEST(Chunker, ChunkTextMatchesSpan) {
  const std::string text =
      "FIN8 is a financially motivated group.\n\nIt used Sardonic. Later it deployed White Rabbit ransomware, "
      "which is based on Sardonic.\nOther notes follow here with many words to force a split.";
  auto chunks = split_document(doc(text), config(40, 10));
  const std::u32string u = to_u32(text);
  for (std::size_t k = 0; k < chunks.size(); ++k) {
    EXPECT_EQ(chunks[k].seq_index, k);
    EXPECT_EQ(chunks[k].text, to_utf8(u.substr(chunks[k].span.start, chunks[k].span.size())));
  }
  EXPECT_EQ(texts(split_document(doc(text), config(40, 10))), texts(chunks));
}

TEST(ChunkBatch, IdsAreUniqueAndCountsAdd) {
  std::mt19937 rng(13);
  std::vector<Document> docs;
  std::size_t expected = 0;
  const auto cfg = config(50, 5);
  for (int i = 0; i < 100; ++i) {
    docs.push_back(doc(to_utf8(random_text(rng, 400)), "d" + std::to_string(i)));
    expected += split_document(docs.back(), cfg).size();
  }
  docs.push_back(docs.front());  // same parent twice
  expected += split_document(docs.front(), cfg).size();
  auto chunks = split_batch(docs, cfg);
  EXPECT_EQ(chunks.size(), expected);
  std::set<std::string> ids;
  for (const auto& c : chunks) EXPECT_TRUE(ids.insert(c.id).second) << c.id;
}

TEST(ChunkBatch, TwoSingleChunkDocs) {
  std::vector<Document> docs{doc("one", "p1"), doc("two", "p2")};
  auto chunks = split_batch(docs, ChunkerConfig{});
  ASSERT_EQ(chunks.size(), 2u);
  EXPECT_NE(chunks[0].parent_document_id, chunks[1].parent_document_id);
}

TEST(ChunkBatch, JsonLinesExport) {
  std::vector<Document> docs{doc("alpha\nbeta", "p1")};
  auto chunks = split_batch(docs, ChunkerConfig{});
  std::ostringstream out;
  write_chunks_jsonl(out, chunks);
  auto line = out.str();
  ASSERT_EQ(std::count(line.begin(), line.end(), '\n'), 1);
  auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j["id"], "p1:0");
  EXPECT_EQ(j["text"], "alpha\nbeta");
  EXPECT_EQ(j["char_span"], nlohmann::json::array({0, 10}));
}
