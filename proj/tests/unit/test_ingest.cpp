#include <gtest/gtest.h>

#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "test_support.hpp"
#include "threatrag/error.hpp"
#include "threatrag/html.hpp"
#include "threatrag/ingest.hpp"

using namespace threatrag;
using testsupport::TempDir;
using testsupport::write_file;

TEST(LoadText, NormalizesIntoOneDocument) {
  TempDir dir;
  write_file(dir / "a.txt", "hello\tworld\n\nbye");
  Ingestor ingestor;
  auto docs = ingestor.load_text_file(dir / "a.txt");
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_EQ(docs[0].text, "hello world bye");
  EXPECT_EQ(docs[0].kind, SourceKind::text);
  EXPECT_EQ(docs[0].metadata.at("source"), "a.txt");
  EXPECT_EQ(docs[0].id, document_id(SourceKind::text, "a.txt", "hello world bye"));
  EXPECT_EQ(ingestor.report().loaded_count, 1u);
}

TEST(LoadText, EmptyFileIsSkipped) {
  TempDir dir;
  write_file(dir / "empty.txt", " \n\t ");
  Ingestor ingestor;
  EXPECT_TRUE(ingestor.load_text_file(dir / "empty.txt").empty());
  EXPECT_EQ(ingestor.report().skipped_count, 1u);
  ASSERT_EQ(ingestor.report().skipped.size(), 1u);
  EXPECT_EQ(ingestor.report().skipped[0].reason, "empty after normalization");
}

TEST(LoadText, IdenticalFilesAreDeduped) {
  TempDir dir;
  write_file(dir / "x" / "report.txt", "FIN8 deploys Sardonic");
  write_file(dir / "y" / "report.txt", "FIN8 deploys Sardonic");
  Ingestor ingestor;
  auto first = ingestor.load_text_file(dir / "x" / "report.txt");
  auto second = ingestor.load_text_file(dir / "y" / "report.txt");
  EXPECT_EQ(first.size(), 1u);
  EXPECT_TRUE(second.empty());
  EXPECT_EQ(ingestor.report().deduped_count, 1u);
  EXPECT_EQ(ingestor.report().document_ids.size(), 2u);
}

TEST(LoadText, SourceNameIsPartOfTheDedupKey) {
  Ingestor ingestor;
  EXPECT_EQ(ingestor.load_text("same body", "one.txt").size(), 1u);
  EXPECT_EQ(ingestor.load_text("same body", "two.txt").size(), 1u);
  EXPECT_EQ(ingestor.report().deduped_count, 0u);
}

TEST(LoadText, LossyDecodingIsCounted) {
  Ingestor ingestor;
  auto docs = ingestor.load_text("bad \xff byte", "b.txt");
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_EQ(ingestor.report().replacement_count, 1u);
  EXPECT_NE(docs[0].text.find("\xef\xbf\xbd"), std::string::npos);
}

TEST(Ingest, SecondPassDedupsEverything) {
  Ingestor ingestor;
  std::set<std::string> first_ids;
  for (const char* body : {"alpha", "beta", "gamma"}) {
    for (auto& d : ingestor.load_text(body, std::string(body) + ".txt")) first_ids.insert(d.id);
  }
  auto first = ingestor.take_report();
  for (const char* body : {"alpha", "beta", "gamma"}) ingestor.load_text(body, std::string(body) + ".txt");
  auto second = ingestor.take_report();
  EXPECT_EQ(second.deduped_count, first.loaded_count);
  EXPECT_EQ(second.loaded_count, 0u);
  EXPECT_EQ(std::set<std::string>(second.document_ids.begin(), second.document_ids.end()), first_ids);
}

TEST(Ingest, MarkSeenSeedsDedup) {
  Ingestor ingestor;
  ingestor.mark_seen(document_id(SourceKind::text, "k.txt", "known"));
  EXPECT_TRUE(ingestor.load_text("known", "k.txt").empty());
  EXPECT_EQ(ingestor.report().deduped_count, 1u);
}

TEST(LoadCsv, RendersNamedColumns) {
  Ingestor ingestor;
  auto docs = ingestor.load_csv("TITLE,CONTENT\nFIN7 report,\"Cl0p  ransomware\ncampaign\"\n",
                                {.text_columns = {}, .metadata_columns = {}, .source_name = "blog.csv"});
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_EQ(docs[0].text, "TITLE: FIN7 report\nCONTENT: Cl0p ransomware campaign");
  EXPECT_EQ(docs[0].metadata.at("row"), "0");
  EXPECT_EQ(docs[0].metadata.at("source"), "blog.csv");
}

TEST(LoadCsv, DeclaredColumnOrderAndMetadata) {
  Ingestor ingestor;
  CsvOptions options{.text_columns = {"description", "cve_id"}, .metadata_columns = {"severity"}, .source_name = "nvd.csv"};
  auto docs = ingestor.load_csv("cve_id,severity,description\nCVE-1,HIGH,desc one\nCVE-2,LOW,desc two\n", options);
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_EQ(docs[1].text, "description: desc two\ncve_id: CVE-2");
  EXPECT_EQ(docs[1].metadata.at("severity"), "LOW");
  EXPECT_EQ(docs[1].metadata.at("row"), "1");
}

TEST(LoadCsv, DuplicateRowIsDeduped) {
  Ingestor ingestor;
  auto docs = ingestor.load_csv("a,b\n1,2\n1,2\n", {.text_columns = {}, .metadata_columns = {}, .source_name = "d.csv"});
  EXPECT_EQ(docs.size(), 1u);
  EXPECT_EQ(ingestor.report().deduped_count, 1u);
}

TEST(LoadCsv, WrongFieldCountRowIsSkipped) {
  Ingestor ingestor;
  auto docs = ingestor.load_csv("a,b\n1,2\n3\n4,5\n", {.text_columns = {}, .metadata_columns = {}, .source_name = "s.csv"});
  EXPECT_EQ(docs.size(), 2u);
  const auto& report = ingestor.report();
  EXPECT_EQ(report.loaded_count, 2u);
  EXPECT_EQ(report.skipped_count, 1u);
  EXPECT_EQ(report.candidate_count(), 3u);
  EXPECT_EQ(report.skipped[0].item, "s.csv:row 1");
}

TEST(LoadCsv, MissingColumnFailsBeforeAnyRow) {
  Ingestor ingestor;
  EXPECT_THROW(ingestor.load_csv("a,b\n1,2\n", {.text_columns = {"nope"}, .metadata_columns = {}, .source_name = {}}),
               ConfigError);
  EXPECT_EQ(ingestor.report().candidate_count(), 0u);
  EXPECT_THROW(ingestor.load_csv("", {}), ConfigError);
}

TEST(LoadJson, FieldSelector) {
  Ingestor ingestor;
  auto docs = ingestor.load_json(R"({"a":{"b":"x"}})", {.record_selector = ".a", .text_fields = {}, .source_name = "j.json"});
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_EQ(docs[0].text, "b: x");
  EXPECT_EQ(docs[0].metadata.at("selector"), ".a");
  EXPECT_EQ(docs[0].metadata.at("json_path"), ".a");
}

TEST(LoadJson, ArrayIteration) {
  Ingestor ingestor;
  auto docs = ingestor.load_json(R"({"r":[{"v":1},{"v":2}]})", {.record_selector = ".r[]", .text_fields = {}, .source_name = {}});
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_EQ(docs[0].text, "v: 1");
  EXPECT_EQ(docs[1].metadata.at("json_path"), ".r[1]");
}

TEST(LoadJson, ArrayOfNRecordsYieldsNDocuments) {
  for (int n : {0, 1, 2, 7, 50}) {
    nlohmann::json j;
    j["r"] = nlohmann::json::array();
    for (int i = 0; i < n; ++i) j["r"].push_back({{"id", i}, {"name", "rec " + std::to_string(i)}});
    Ingestor ingestor;
    auto docs = ingestor.load_json(j.dump(), {.record_selector = ".r[]", .text_fields = {}, .source_name = {}});
    EXPECT_EQ(docs.size(), static_cast<std::size_t>(n)) << n;
  }
}

TEST(LoadJson, VirusTotalFixtureCarriesVersions) {
  Ingestor ingestor;
  auto docs = ingestor.load_json_file(testsupport::fixture_dir() / "e2e" / "sources" / "virustotal.json",
                                      {.record_selector = ".data[]", .text_fields = {"attributes"}, .source_name = {}});
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_NE(docs[0].text.find("PRIVATE LOADER"), std::string::npos);
  EXPECT_NE(docs[0].text.find("10.0.0.1040"), std::string::npos);
  EXPECT_NE(docs[0].text.find("11.0.0.1006"), std::string::npos);
  EXPECT_EQ(docs[0].text.find("c3f1a6e2"), std::string::npos);  // id is outside the text fields
  EXPECT_EQ(docs[0].metadata.at("source"), "virustotal.json");
}

TEST(LoadJson, NoMatchWarnsAndBadInputThrows) {
  Ingestor ingestor;
  EXPECT_TRUE(ingestor.load_json(R"({"a":1})", {.record_selector = ".missing", .text_fields = {}, .source_name = {}}).empty());
  EXPECT_EQ(ingestor.report().warnings.size(), 1u);
  EXPECT_THROW(ingestor.load_json("{not json", {}), ParseError);
  EXPECT_THROW(ingestor.load_json("{}", {.record_selector = "a..b", .text_fields = {}, .source_name = {}}), ConfigError);
}

TEST(Selector, Grammar) {
  auto steps = parse_selector(".data.attributes[]");
  ASSERT_EQ(steps.size(), 3u);
  EXPECT_EQ(steps[0].kind, SelectorStep::Kind::field);
  EXPECT_EQ(steps[1].name, "attributes");
  EXPECT_EQ(steps[2].kind, SelectorStep::Kind::iterate);
  EXPECT_TRUE(parse_selector(".").empty());
  EXPECT_EQ(parse_selector(".[]").size(), 1u);
  for (const char* bad : {"", "[]", "data", ".a[", ".a[0]", "..", ".a.", ".a b"}) {
    EXPECT_THROW(parse_selector(bad), ConfigError) << bad;
  }
}

TEST(Html, DropsScriptStyleAndChrome) {
  EXPECT_EQ(extract_html("<p>attack</p><script>x()</script>").text, "attack");
  auto page = extract_html(
      "<html><head><title>t</title><style>p{}</style></head><body><nav><a href='/n'>menu</a></nav>"
      "<h1>FIN8</h1><p>uses <b>Sardonic</b> &amp; White&nbsp;Rabbit</p><footer>(c)</footer></body></html>");
  EXPECT_EQ(page.text, "FIN8 uses Sardonic & White Rabbit");
  ASSERT_EQ(page.links.size(), 1u);
  EXPECT_EQ(page.links[0], "/n");
}

TEST(Html, Entities) {
  EXPECT_EQ(decode_entities("&lt;a&gt; &#65;&#x42; &quot;q&quot; &unknown;"), "<a> AB \"q\" &unknown;");
}

TEST(Url, ParseAndResolve) {
  auto base = parse_url("HTTPS://Example.com:443/a/b/c.html?x=1#frag");
  ASSERT_TRUE(base);
  EXPECT_EQ(base->host, "example.com");
  EXPECT_EQ(base->port, 0);
  EXPECT_EQ(base->path, "/a/b/c.html?x=1");
  EXPECT_EQ(base->str(), "https://example.com/a/b/c.html?x=1");
  EXPECT_FALSE(parse_url("ftp://x/"));

  auto r = [&](const char* href) {
    auto u = resolve_url(*base, href);
    return u ? u->str() : std::string("<none>");
  };
  EXPECT_EQ(r("d.html"), "https://example.com/a/b/d.html");
  EXPECT_EQ(r("../d.html"), "https://example.com/a/d.html");
  EXPECT_EQ(r("/root"), "https://example.com/root");
  EXPECT_EQ(r("//other.org/p"), "https://other.org/p");
  EXPECT_EQ(r("?y=2"), "https://example.com/a/b/c.html?y=2");
  EXPECT_EQ(r("#top"), "https://example.com/a/b/c.html?x=1");
  EXPECT_EQ(r("http://plain.net:8080/z"), "http://plain.net:8080/z");
  EXPECT_EQ(r("mailto:a@b"), "<none>");
  EXPECT_EQ(r("javascript:void(0)"), "<none>");
}

namespace {

class FakeFetcher final : public PageFetcher {
 public:
  std::map<std::string, FetchedPage> pages;
  std::vector<std::string> requested;

  FetchedPage fetch(const std::string& url) override {
    requested.push_back(url);
    auto it = pages.find(url);
    if (it == pages.end()) throw FetchError("connection refused: " + url);
    FetchedPage page = it->second;
    if (page.final_url.empty()) page.final_url = url;
    return page;
  }

  void html(const std::string& url, const std::string& body) { pages[url] = {200, "text/html; charset=utf-8", body, ""}; }
};

CrawlOptions depth(std::size_t d) {
  CrawlOptions o;
  o.max_depth = d;
  o.delay = std::chrono::milliseconds(0);
  return o;
}

}  // namespace

TEST(Crawl, DepthZeroFetchesOnlyTheRoot) {
  FakeFetcher f;
  f.html("http://site.test/", "<p>root</p><a href='/b'>b</a>");
  f.html("http://site.test/b", "<p>b</p>");
  Ingestor ingestor;
  auto docs = ingestor.fetch_and_extract_html("http://site.test/", depth(0), f);
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_EQ(docs[0].metadata.at("url"), "http://site.test/");
  EXPECT_EQ(docs[0].kind, SourceKind::html);
  EXPECT_EQ(f.requested.size(), 1u);
}

TEST(Crawl, ChainRespectsDepth) {
  FakeFetcher f;
  f.html("http://site.test/a", "<p>A</p><a href='b'>next</a>");
  f.html("http://site.test/b", "<p>B</p><a href='c'>next</a>");
  f.html("http://site.test/c", "<p>C</p>");
  Ingestor ingestor;
  auto docs = ingestor.fetch_and_extract_html("http://site.test/a", depth(1), f);
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_EQ(docs[0].text, "A next");
  EXPECT_EQ(docs[1].text, "B next");
  EXPECT_EQ(f.requested, (std::vector<std::string>{"http://site.test/a", "http://site.test/b"}));
}

TEST(Crawl, NoRevisitsAndUniqueUrls) {
  FakeFetcher f;
  f.html("http://site.test/", "<a href='/x'>x</a><a href='/y'>y</a><a href='/'>home</a>");
  f.html("http://site.test/x", "<p>x</p><a href='/y'>y</a><a href='/'>home</a>");
  f.html("http://site.test/y", "<p>y</p><a href='/x'>x</a>");
  Ingestor ingestor;
  auto docs = ingestor.fetch_and_extract_html("http://site.test/", depth(5), f);
  EXPECT_EQ(docs.size(), 3u);
  EXPECT_EQ(f.requested.size(), 3u);
  std::set<std::string> urls;
  for (const auto& d : docs) EXPECT_TRUE(urls.insert(d.metadata.at("url")).second);
}

TEST(Crawl, SameHostOnlyAndChildFailures) {
  FakeFetcher f;
  f.html("http://site.test/", "<p>r</p><a href='http://elsewhere.test/'>ext</a><a href='/broken'>b</a><a href='/pdf'>p</a>");
  f.pages["http://site.test/pdf"] = {200, "application/pdf", "%PDF", ""};
  f.html("http://elsewhere.test/", "<p>ext</p>");
  Ingestor ingestor;
  auto docs = ingestor.fetch_and_extract_html("http://site.test/", depth(1), f);
  ASSERT_EQ(docs.size(), 1u);
  const auto& report = ingestor.report();
  EXPECT_EQ(report.skipped_count, 2u);  // broken link and non-HTML page
  for (const auto& url : f.requested) EXPECT_EQ(url.find("elsewhere"), std::string::npos);

  CrawlOptions open = depth(1);
  open.same_host_only = false;
  Ingestor other;
  EXPECT_EQ(other.fetch_and_extract_html("http://site.test/", open, f).size(), 2u);
}

TEST(Crawl, RootFailureIsAnError) {
  FakeFetcher f;
  Ingestor ingestor;
  EXPECT_THROW(ingestor.fetch_and_extract_html("http://down.test/", depth(1), f), FetchError);
  EXPECT_THROW(ingestor.fetch_and_extract_html("ftp://x/", depth(1), f), InvalidArgument);
}

TEST(Crawl, HttpFetcherFollowsRedirects) {
  testsupport::LoopbackServer server;
  std::string seen_agent;
  server.server().Get("/", [](const httplib::Request&, httplib::Response& res) { res.set_redirect("/home"); });
  server.server().Get("/home", [&](const httplib::Request& req, httplib::Response& res) {
    seen_agent = req.get_header_value("User-Agent");
    res.set_content("<p>welcome</p><a href='/data.json'>d</a><a href='/loop'>l</a>", "text/html");
  });
  server.server().Get("/data.json", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("{}", "application/json");
  });
  server.server().Get("/loop", [](const httplib::Request&, httplib::Response& res) { res.set_redirect("/loop"); });
  server.start();

  CrawlOptions options = depth(1);
  options.user_agent = "fixture-agent/1";
  HttpPageFetcher fetcher(options);
  Ingestor ingestor;
  auto docs = ingestor.fetch_and_extract_html(server.url() + "/", options, fetcher);
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_EQ(docs[0].metadata.at("url"), server.url() + "/home");
  EXPECT_EQ(docs[0].text, "welcome d l");
  EXPECT_EQ(seen_agent, "fixture-agent/1");
  EXPECT_EQ(ingestor.report().skipped_count, 2u);  // JSON content type, redirect loop
}
