#include "threatrag/ingest.hpp"

#include <deque>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "threatrag/csv.hpp"
#include "threatrag/error.hpp"
#include "threatrag/html.hpp"
#include "threatrag/text.hpp"

namespace threatrag {

std::string_view to_string(SourceKind kind) noexcept {
  switch (kind) {
    case SourceKind::text: return "text";
    case SourceKind::csv: return "csv";
    case SourceKind::json: return "json";
    case SourceKind::html: return "html";
  }
  return "text";
}

SourceKind parse_source_kind(std::string_view name) {
  for (SourceKind kind : kAllSourceKinds) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown source kind '" + std::string(name) + "'");
}

std::string document_id(SourceKind kind, std::string_view source_name, std::string_view text) {
  std::string key;
  key.reserve(text.size() + source_name.size() + 8);
  key.append(to_string(kind));
  key.push_back('\0');
  key.append(source_name);
  key.push_back('\0');
  key.append(text);
  return sha256_hex(key);
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& line : lines) {
    if (!out.empty()) out.push_back('\n');
    out += line;
  }
  return out;
}

}  // namespace

void Ingestor::mark_seen(std::string id) { seen_.insert(std::move(id)); }

IngestReport Ingestor::take_report() {
  IngestReport out = std::move(report_);
  report_ = IngestReport{};
  return out;
}

void Ingestor::admit(Document doc, std::vector<Document>& out) {
  report_.document_ids.push_back(doc.id);
  if (!seen_.insert(doc.id).second) {
    ++report_.deduped_count;
    return;
  }
  ++report_.loaded_count;
  out.push_back(std::move(doc));
}

void Ingestor::skip(std::string item, std::string reason) {
  ++report_.skipped_count;
  report_.skipped.push_back({std::move(item), std::move(reason)});
}

std::vector<Document> Ingestor::load_text(std::string_view bytes, std::string_view source_name) {
  std::vector<Document> out;
  DecodedText decoded = decode_utf8_lossy(bytes);
  report_.replacement_count += decoded.replacements;
  std::string text = normalize(decoded.text);
  if (text.empty()) {
    skip(std::string(source_name), "empty after normalization");
    return out;
  }
  Document doc;
  doc.kind = SourceKind::text;
  doc.id = document_id(doc.kind, source_name, text);
  doc.text = std::move(text);
  doc.metadata["source"] = std::string(source_name);
  admit(std::move(doc), out);
  return out;
}

std::vector<Document> Ingestor::load_text_file(const std::filesystem::path& path) {
  auto docs = load_text(read_file(path), path.filename().string());
  for (auto& doc : docs) doc.metadata["path"] = path.string();
  return docs;
}

std::vector<Document> Ingestor::load_csv(std::string_view content, const CsvOptions& options) {
  const std::string source = options.source_name.value_or("inline.csv");
  DecodedText decoded = decode_utf8_lossy(content);
  report_.replacement_count += decoded.replacements;
  std::vector<CsvRecord> records = parse_csv(decoded.text);
  if (records.empty() || records.front().error) {
    throw ConfigError(source + ": missing or malformed CSV header row");
  }
  const std::vector<std::string>& header = records.front().fields;
  auto column_index = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw ConfigError(source + ": column '" + name + "' not found in header");
  };
  std::vector<std::size_t> text_idx;
  std::vector<std::string> text_names = options.text_columns.empty() ? header : options.text_columns;
  for (const auto& name : text_names) text_idx.push_back(column_index(name));
  std::vector<std::size_t> meta_idx;
  for (const auto& name : options.metadata_columns) meta_idx.push_back(column_index(name));

  std::vector<Document> out;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const CsvRecord& record = records[r];
    const std::string item = source + ":row " + std::to_string(r - 1);
    if (record.error) {
      skip(item, *record.error + " (line " + std::to_string(record.line) + ")");
      continue;
    }
    if (record.fields.size() != header.size()) {
      skip(item, "expected " + std::to_string(header.size()) + " fields, found " +
                     std::to_string(record.fields.size()) + " (line " + std::to_string(record.line) + ")");
      continue;
    }
    std::vector<std::string> lines;
    for (std::size_t i = 0; i < text_idx.size(); ++i) {
      std::string value = normalize(record.fields[text_idx[i]]);
      if (!value.empty()) lines.push_back(text_names[i] + ": " + value);
    }
    if (lines.empty()) {
      skip(item, "empty after normalization");
      continue;
    }
    Document doc;
    doc.kind = SourceKind::csv;
    doc.text = join_lines(lines);
    doc.id = document_id(doc.kind, source, doc.text);
    doc.metadata["source"] = source;
    doc.metadata["row"] = std::to_string(r - 1);
    for (std::size_t i = 0; i < meta_idx.size(); ++i) {
      doc.metadata[options.metadata_columns[i]] = record.fields[meta_idx[i]];
    }
    admit(std::move(doc), out);
  }
  return out;
}

std::vector<Document> Ingestor::load_csv_file(const std::filesystem::path& path, CsvOptions options) {
  if (!options.source_name) options.source_name = path.filename().string();
  auto docs = load_csv(read_file(path), options);
  for (auto& doc : docs) doc.metadata["path"] = path.string();
  return docs;
}

std::vector<SelectorStep> parse_selector(std::string_view selector) {
  auto fail = [&](const std::string& why) -> std::vector<SelectorStep> {
    throw ConfigError("invalid selector '" + std::string(selector) + "': " + why);
  };
  if (selector.empty() || selector[0] != '.') return fail("must start with '.'");
  std::vector<SelectorStep> steps;
  std::size_t i = 0;
  auto is_name = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '$' || c == '@';
  };
  while (i < selector.size()) {
    char c = selector[i];
    if (c == '.') {
      ++i;
      std::size_t start = i;
      while (i < selector.size() && is_name(selector[i])) ++i;
      if (i > start) {
        steps.push_back({SelectorStep::Kind::field, std::string(selector.substr(start, i - start))});
      } else if (!(i == selector.size() && start == 1) && !(i < selector.size() && selector[i] == '[')) {
        return fail("empty field name at offset " + std::to_string(start));
      }
    } else if (c == '[') {
      if (selector.substr(i, 2) != "[]") return fail("only '[]' iteration is supported");
      steps.push_back({SelectorStep::Kind::iterate, {}});
      i += 2;
    } else {
      return fail("unexpected '" + std::string(1, c) + "' at offset " + std::to_string(i));
    }
  }
  return steps;
}

namespace {

using ojson = nlohmann::ordered_json;

struct Selected {
  const ojson* node;
  std::string path;
};

std::vector<Selected> apply_selector(const ojson& root, const std::vector<SelectorStep>& steps) {
  std::vector<Selected> current{{&root, ""}};
  for (const auto& step : steps) {
    std::vector<Selected> next;
    for (const auto& sel : current) {
      if (step.kind == SelectorStep::Kind::field) {
        if (sel.node->is_object()) {
          auto it = sel.node->find(step.name);
          if (it != sel.node->end()) next.push_back({&*it, sel.path + "." + step.name});
        }
      } else if (sel.node->is_array()) {
        for (std::size_t i = 0; i < sel.node->size(); ++i) {
          next.push_back({&(*sel.node)[i], sel.path + "[" + std::to_string(i) + "]"});
        }
      }
    }
    current = std::move(next);
  }
  return current;
}

std::string scalar_text(const ojson& value) {
  if (value.is_string()) return value.get<std::string>();
  return value.dump();
}

void flatten(const ojson& node, const std::string& path, std::vector<std::pair<std::string, std::string>>& out) {
  if (node.is_object()) {
    for (auto it = node.begin(); it != node.end(); ++it) {
      flatten(it.value(), path.empty() ? it.key() : path + "." + it.key(), out);
    }
  } else if (node.is_array()) {
    for (std::size_t i = 0; i < node.size(); ++i) flatten(node[i], path + "[" + std::to_string(i) + "]", out);
  } else if (!node.is_null()) {
    out.emplace_back(path, scalar_text(node));
  }
}

bool field_selected(const std::string& path, const std::vector<std::string>& fields) {
  if (fields.empty()) return true;
  for (const auto& f : fields) {
    if (path == f) return true;
    if (path.size() > f.size() && path.compare(0, f.size(), f) == 0 &&
        (path[f.size()] == '.' || path[f.size()] == '[')) {
      return true;
    }
  }
  return false;
}

}  // namespace

std::vector<Document> Ingestor::load_json(std::string_view content, const JsonOptions& options) {
  const std::string source = options.source_name.value_or("inline.json");
  auto steps = parse_selector(options.record_selector);
  DecodedText decoded = decode_utf8_lossy(content);
  report_.replacement_count += decoded.replacements;
  ojson root;
  try {
    root = ojson::parse(decoded.text);
  } catch (const ojson::parse_error& e) {
    throw ParseError(source + ": " + e.what());
  }

  std::vector<Document> out;
  auto selected = apply_selector(root, steps);
  if (selected.empty()) {
    report_.warnings.push_back(source + ": selector '" + options.record_selector + "' matched nothing");
    return out;
  }
  for (const auto& sel : selected) {
    std::vector<std::pair<std::string, std::string>> leaves;
    flatten(*sel.node, "", leaves);
    std::vector<std::string> lines;
    for (const auto& [path, value] : leaves) {
      if (!field_selected(path, options.text_fields)) continue;
      std::string v = normalize(value);
      if (v.empty()) continue;
      lines.push_back(path.empty() ? v : path + ": " + v);
    }
    const std::string item = source + ":" + (sel.path.empty() ? "." : sel.path);
    if (lines.empty()) {
      skip(item, "no text fields in selected record");
      continue;
    }
    Document doc;
    doc.kind = SourceKind::json;
    doc.text = join_lines(lines);
    doc.id = document_id(doc.kind, source, doc.text);
    doc.metadata["source"] = source;
    doc.metadata["selector"] = options.record_selector;
    doc.metadata["json_path"] = sel.path.empty() ? "." : sel.path;
    admit(std::move(doc), out);
  }
  return out;
}

std::vector<Document> Ingestor::load_json_file(const std::filesystem::path& path, JsonOptions options) {
  if (!options.source_name) options.source_name = path.filename().string();
  auto docs = load_json(read_file(path), options);
  for (auto& doc : docs) doc.metadata["path"] = path.string();
  return docs;
}

namespace {

bool is_html_content_type(std::string_view content_type) {
  std::string lowered;
  for (char c : content_type) lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return lowered.empty() || lowered.find("text/html") != std::string::npos ||
         lowered.find("application/xhtml") != std::string::npos;
}

}  // namespace

std::vector<Document> Ingestor::fetch_and_extract_html(const std::string& root_url,
                                                       const CrawlOptions& options,
                                                       PageFetcher& fetcher) {
  auto root = parse_url(root_url);
  if (!root) throw InvalidArgument("root url must be http(s): " + root_url);

  std::vector<Document> out;
  std::unordered_set<std::string> visited{root->str()};
  std::unordered_set<std::string> emitted;
  std::deque<std::pair<Url, std::size_t>> queue{{*root, 0}};
  bool is_root = true;

  while (!queue.empty()) {
    auto [url, depth] = queue.front();
    queue.pop_front();
    const std::string url_text = url.str();

    FetchedPage page;
    try {
      page = fetcher.fetch(url_text);
    } catch (const FetchError& e) {
      if (is_root) throw;
      skip(url_text, e.what());
      continue;
    }
    if (page.status >= 400 || page.status == 0) {
      if (is_root) throw FetchError(url_text + ": HTTP status " + std::to_string(page.status));
      skip(url_text, "HTTP status " + std::to_string(page.status));
      continue;
    }
    is_root = false;
    if (!is_html_content_type(page.content_type)) {
      skip(url_text, "non-HTML content type '" + page.content_type + "'");
      continue;
    }
    auto final_url = parse_url(page.final_url.empty() ? url_text : page.final_url).value_or(url);
    const std::string final_text = final_url.str();
    if (!emitted.insert(final_text).second) {
      skip(url_text, "already fetched as " + final_text);
      continue;
    }
    visited.insert(final_text);

    HtmlContent content = extract_html(decode_utf8_lossy(page.body).text);
    if (depth < options.max_depth) {
      for (const auto& href : content.links) {
        auto target = resolve_url(final_url, href);
        if (!target) continue;
        if (options.same_host_only && target->host != root->host) continue;
        if (visited.insert(target->str()).second) queue.emplace_back(*target, depth + 1);
      }
    }
    if (content.text.empty()) {
      skip(final_text, "no visible text");
      continue;
    }
    Document doc;
    doc.kind = SourceKind::html;
    doc.text = std::move(content.text);
    doc.id = document_id(doc.kind, final_text, doc.text);
    doc.metadata["source"] = final_text;
    doc.metadata["url"] = final_text;
    doc.metadata["depth"] = std::to_string(depth);
    admit(std::move(doc), out);
  }
  return out;
}

HttpPageFetcher::HttpPageFetcher(CrawlOptions options) : options_(std::move(options)) {}

FetchedPage HttpPageFetcher::fetch(const std::string& url_text) {
  auto url = parse_url(url_text);
  if (!url) throw FetchError("unsupported url: " + url_text);

  for (int hop = 0; hop <= options_.max_redirects; ++hop) {
    auto now = std::chrono::steady_clock::now();
    if (auto it = last_request_.find(url->host); it != last_request_.end()) {
      auto ready = it->second + options_.delay;
      if (ready > now) std::this_thread::sleep_for(ready - now);
    }
    last_request_[url->host] = std::chrono::steady_clock::now();

    httplib::Client client(url->origin());
    client.set_connection_timeout(std::chrono::seconds(10));
    client.set_read_timeout(std::chrono::seconds(30));
    httplib::Headers headers{{"User-Agent", options_.user_agent}};
    auto res = client.Get(url->path, headers);
    if (!res) throw FetchError(url->str() + ": " + httplib::to_string(res.error()));

    if (res->status >= 300 && res->status < 400 && res->has_header("Location")) {
      auto next = resolve_url(*url, res->get_header_value("Location"));
      if (!next) throw FetchError(url->str() + ": unsupported redirect target");
      url = next;
      continue;
    }
    return FetchedPage{res->status, res->get_header_value("Content-Type"), res->body, url->str()};
  }
  throw FetchError(url_text + ": more than " + std::to_string(options_.max_redirects) + " redirects");
}

}  // namespace threatrag
