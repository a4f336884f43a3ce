#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace threatrag {

enum class SourceKind { text, csv, json, html };

inline constexpr SourceKind kAllSourceKinds[] = {SourceKind::text, SourceKind::csv,
                                                 SourceKind::json, SourceKind::html};

std::string_view to_string(SourceKind kind) noexcept;
/// Throws ConfigError on an unknown name.
SourceKind parse_source_kind(std::string_view name);

using Metadata = std::map<std::string, std::string>;

/// One ingested source unit. `metadata["source"]` always names the origin
/// (file name or URL).
struct Document {
  std::string id;
  SourceKind kind = SourceKind::text;
  std::string text;
  Metadata metadata;
};

/// Deterministic id: SHA-256 over (kind, source name, normalized text).
std::string document_id(SourceKind kind, std::string_view source_name, std::string_view text);

struct SkippedItem {
  std::string item;
  std::string reason;
};

struct IngestReport {
  std::size_t loaded_count = 0;
  std::size_t deduped_count = 0;
  std::size_t skipped_count = 0;
  std::size_t replacement_count = 0;  // lossy UTF-8 substitutions
  std::vector<SkippedItem> skipped;
  std::vector<std::string> warnings;
  /// Ids of every candidate that resolved to a document (loaded or deduped),
  /// in encounter order.
  std::vector<std::string> document_ids;

  std::size_t candidate_count() const noexcept {
    return loaded_count + deduped_count + skipped_count;
  }
};

struct CsvOptions {
  std::vector<std::string> text_columns;
  std::vector<std::string> metadata_columns;
  std::optional<std::string> source_name;  // defaults to the file name
};

struct JsonOptions {
  std::string record_selector = ".";
  std::vector<std::string> text_fields;  // empty: all scalar leaves
  std::optional<std::string> source_name;
};

struct CrawlOptions {
  std::size_t max_depth = 0;
  bool same_host_only = true;
  std::chrono::milliseconds delay{500};
  std::string user_agent = "threatrag-crawler/0.1";
  int max_redirects = 5;
};

struct FetchedPage {
  int status = 0;
  std::string content_type;
  std::string body;
  std::string final_url;
};

/// Source of web pages for the crawler. Implementations throw FetchError on
/// transport failure; HTTP error statuses are returned, not thrown.
class PageFetcher {
 public:
  virtual ~PageFetcher() = default;
  virtual FetchedPage fetch(const std::string& url) = 0;
};

/// Fetches over HTTP(S), following up to max_redirects redirects and keeping
/// requests to one host at least `delay` apart.
class HttpPageFetcher final : public PageFetcher {
 public:
  explicit HttpPageFetcher(CrawlOptions options = {});
  FetchedPage fetch(const std::string& url) override;

 private:
  CrawlOptions options_;
  std::map<std::string, std::chrono::steady_clock::time_point> last_request_;
};

/// Loads sources into Documents. One Ingestor carries a dedup set across
/// calls, so the same content is only admitted once per Ingestor lifetime.
class Ingestor {
 public:
  /// Seeds the dedup set, e.g. with ids already present in a vector store.
  void mark_seen(std::string id);

  std::vector<Document> load_text(std::string_view bytes, std::string_view source_name);
  std::vector<Document> load_text_file(const std::filesystem::path& path);

  std::vector<Document> load_csv(std::string_view content, const CsvOptions& options);
  std::vector<Document> load_csv_file(const std::filesystem::path& path, CsvOptions options);

  std::vector<Document> load_json(std::string_view content, const JsonOptions& options);
  std::vector<Document> load_json_file(const std::filesystem::path& path, JsonOptions options);

  std::vector<Document> fetch_and_extract_html(const std::string& root_url,
                                               const CrawlOptions& options,
                                               PageFetcher& fetcher);

  const IngestReport& report() const noexcept { return report_; }
  /// Returns the accumulated report and starts a fresh one. The dedup set is kept.
  IngestReport take_report();

 private:
  void admit(Document doc, std::vector<Document>& out);
  void skip(std::string item, std::string reason);

  std::unordered_set<std::string> seen_;
  IngestReport report_;
};

// JSON record selector: `.`, `.field`, `[]`, chained (`.data.attributes`, `.results[]`).
struct SelectorStep {
  enum class Kind { field, iterate } kind;
  std::string name;
};

/// Throws ConfigError on invalid syntax.
std::vector<SelectorStep> parse_selector(std::string_view selector);

}  // namespace threatrag
