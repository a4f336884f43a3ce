#include <gtest/gtest.h>

#include <cstdlib>

#include <nlohmann/json.hpp>

#include "test_support.hpp"
#include "threatrag/config.hpp"
#include "threatrag/error.hpp"

using namespace threatrag;
using nlohmann::json;

namespace {

struct EnvGuard {
  explicit EnvGuard(const char* name) : name_(name) {
    if (const char* v = std::getenv(name)) saved_ = v;
  }
  ~EnvGuard() {
    if (saved_) setenv(name_, saved_->c_str(), 1);
    else unsetenv(name_);
  }
  const char* name_;
  std::optional<std::string> saved_;
};

}  // namespace

TEST(Config, FixtureLoads) {
  auto c = load_config(testsupport::fixture_dir() / "e2e/config.json");
  ASSERT_EQ(c.sources.size(), 3u);
  EXPECT_EQ(c.sources[0].kind, SourceKind::text);
  EXPECT_TRUE(c.sources[0].path.is_absolute());
  EXPECT_EQ(c.sources[1].csv.text_columns, (std::vector<std::string>{"cve_id", "description"}));
  EXPECT_EQ(c.sources[2].json.record_selector, ".data[]");
  EXPECT_EQ(c.chunker.chunk_size, 300u);
  EXPECT_EQ(c.chunker.chunk_overlap, 30u);
  EXPECT_EQ(c.embedding.dim, 256u);
  EXPECT_EQ(c.llm.kind, LlmKind::scripted);
  EXPECT_EQ(c.retrieval.top_k, 3u);
  EXPECT_EQ(c.retrieval.rrf_k, 60u);
  EXPECT_EQ(c.store_root, testsupport::fixture_dir() / "e2e/stores");
  EXPECT_EQ(c.eval.output_dir, testsupport::fixture_dir() / "e2e/eval_out");
}

TEST(Config, Defaults) {
  testsupport::TempDir dir;
  auto c = parse_config(json::object(), dir.path());
  EXPECT_TRUE(c.sources.empty());
  EXPECT_EQ(c.chunker.chunk_size, 1000u);
  EXPECT_EQ(c.chunker.chunk_overlap, 50u);
  EXPECT_EQ(c.retrieval.top_k, 3u);
  EXPECT_EQ(c.retrieval.rrf_k, 60u);
  EXPECT_EQ(c.llm.kind, LlmKind::echo);
  EXPECT_EQ(c.llm.temperature, 0.0);
  EXPECT_EQ(c.llm.http.retry.max_attempts, 3);
  EXPECT_EQ(c.llm.http.timeout, std::chrono::milliseconds(60'000));
  EXPECT_EQ(c.prompt.context_slot_count, 3u);
  EXPECT_EQ(c.server.port, 8080);
  EXPECT_EQ(c.store_root, dir.path() / "stores");
  EXPECT_DOUBLE_EQ(c.eval.indirect_threshold, 0.8);
}

TEST(Config, RejectsBadInput) {
  testsupport::TempDir dir;
  auto bad = [&](const char* text) {
    EXPECT_THROW(parse_config(json::parse(text), dir.path()), ConfigError) << text;
  };
  bad(R"({"surprise": 1})");
  bad(R"({"chunker": {"chunk_size": 10, "chunk_overlap": 10}})");
  bad(R"({"chunker": {"chunk_size": "big"}})");
  bad(R"({"retrieval": {"top_k": 0}})");
  bad(R"({"sources": [{"name": "a", "kind": "text", "path": "missing"}]})");
  bad(R"({"sources": [{"name": "a", "kind": "pdf", "path": "x"}]})");
  bad(R"({"sources": [{"kind": "text", "path": "x"}]})");
  bad(R"({"sources": [{"name": "h", "kind": "html"}]})");
  bad(R"({"llm": {"kind": "http"}})");
  bad(R"({"llm": {"kind": "gpt"}})");
  bad(R"({"embedding": {"kind": "remote"}})");
  bad(R"({"embedding": {"dim": 0}})");
  bad(R"({"server": {"port": 70000}})");
  bad(R"({"eval": {"token_embedder": "bert"}})");

  testsupport::write_file(dir / "a.txt", "x");
  bad(R"({"sources": [{"name": "a", "kind": "text", "path": "a.txt"}, {"name": "a", "kind": "text", "path": "a.txt"}]})");
  bad(R"({"sources": [{"name": "c", "kind": "csv", "path": "."}]})");

  EXPECT_THROW(load_config(dir / "nope.json"), ConfigError);
  testsupport::write_file(dir / "broken.json", "{");
  EXPECT_THROW(load_config(dir / "broken.json"), ConfigError);
}

TEST(Config, RelativePathsFollowTheConfigFile) {
  testsupport::TempDir dir;
  testsupport::write_file(dir / "sub/data/a.txt", "hello");
  testsupport::write_file(dir / "sub/c.json",
                          R"({"sources": [{"name": "a", "kind": "text", "path": "data/a.txt"}], "store_root": "out"})");
  auto c = load_config(dir / "sub/c.json");
  EXPECT_EQ(c.sources[0].path, dir.path() / "sub/data/a.txt");
  EXPECT_EQ(c.store_root, dir.path() / "sub/out");
}

TEST(Config, SecretsComeFromEnvironment) {
  EnvGuard llm("LLM_API_KEY"), embed("EMBED_API_KEY"), admin("ADMIN_TOKEN");
  setenv("LLM_API_KEY", "llm-secret", 1);
  setenv("EMBED_API_KEY", "embed-secret", 1);
  setenv("ADMIN_TOKEN", "admin-secret", 1);
  testsupport::TempDir dir;
  auto c = parse_config(json::parse(R"({"server": {"admin_token": "from-file"}})"), dir.path());
  EXPECT_EQ(c.llm.http.bearer_token, "llm-secret");
  EXPECT_EQ(c.embedding.http.bearer_token, "embed-secret");
  EXPECT_EQ(c.server.admin_token, "admin-secret");

  unsetenv("ADMIN_TOKEN");
  unsetenv("LLM_API_KEY");
  auto d = parse_config(json::parse(R"({"server": {"admin_token": "from-file"}})"), dir.path());
  EXPECT_EQ(d.server.admin_token, "from-file");
  EXPECT_FALSE(d.llm.http.bearer_token);
}
