#include "threatrag/html.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <unordered_map>

#include "threatrag/text.hpp"

namespace threatrag {
namespace {

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool istarts_with(std::string_view s, std::size_t pos, std::string_view prefix) {
  if (s.size() - pos < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[pos + i])) != prefix[i]) return false;
  }
  return true;
}

std::size_t ifind(std::string_view s, std::string_view needle, std::size_t from) {
  for (std::size_t i = from; i + needle.size() <= s.size(); ++i) {
    if (istarts_with(s, i, needle)) return i;
  }
  return std::string_view::npos;
}

void append_codepoint(std::string& out, std::uint32_t cp) {
  if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
  out += to_utf8(std::u32string(1, static_cast<char32_t>(cp)));
}

const std::unordered_map<std::string_view, std::uint32_t>& named_entities() {
  static const std::unordered_map<std::string_view, std::uint32_t> table = {
      {"amp", '&'},      {"lt", '<'},       {"gt", '>'},       {"quot", '"'},
      {"apos", '\''},    {"nbsp", 0xA0},    {"copy", 0xA9},    {"reg", 0xAE},
      {"trade", 0x2122}, {"mdash", 0x2014}, {"ndash", 0x2013}, {"hellip", 0x2026},
      {"lsquo", 0x2018}, {"rsquo", 0x2019}, {"ldquo", 0x201C}, {"rdquo", 0x201D},
      {"laquo", 0xAB},   {"raquo", 0xBB},   {"middot", 0xB7},  {"bull", 0x2022},
  };
  return table;
}

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == ':';
}

struct Tag {
  std::string name;
  bool closing = false;
  bool self_closing = false;
  std::unordered_map<std::string, std::string> attrs;
  std::size_t end = 0;  // index one past '>'
};

// Parses a tag starting at html[pos] == '<'. Returns nullopt when the text
// at pos is not a tag (e.g. a bare '<' in running text).
std::optional<Tag> parse_tag(std::string_view html, std::size_t pos) {
  std::size_t i = pos + 1;
  Tag tag;
  if (i < html.size() && html[i] == '/') {
    tag.closing = true;
    ++i;
  }
  if (i >= html.size() || !std::isalpha(static_cast<unsigned char>(html[i]))) return std::nullopt;
  std::size_t name_start = i;
  while (i < html.size() && is_name_char(html[i])) ++i;
  tag.name = lower_ascii(html.substr(name_start, i - name_start));

  while (i < html.size() && html[i] != '>') {
    char c = html[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '/') {
      tag.self_closing = true;
      ++i;
      continue;
    }
    std::size_t attr_start = i;
    while (i < html.size() && html[i] != '=' && html[i] != '>' && html[i] != '/' &&
           !std::isspace(static_cast<unsigned char>(html[i]))) {
      ++i;
    }
    std::string attr = lower_ascii(html.substr(attr_start, i - attr_start));
    while (i < html.size() && std::isspace(static_cast<unsigned char>(html[i]))) ++i;
    std::string value;
    if (i < html.size() && html[i] == '=') {
      ++i;
      while (i < html.size() && std::isspace(static_cast<unsigned char>(html[i]))) ++i;
      if (i < html.size() && (html[i] == '"' || html[i] == '\'')) {
        char quote = html[i++];
        std::size_t v_start = i;
        while (i < html.size() && html[i] != quote) ++i;
        value = std::string(html.substr(v_start, i - v_start));
        if (i < html.size()) ++i;
      } else {
        std::size_t v_start = i;
        while (i < html.size() && html[i] != '>' && !std::isspace(static_cast<unsigned char>(html[i]))) ++i;
        value = std::string(html.substr(v_start, i - v_start));
      }
      tag.self_closing = false;
    }
    if (!attr.empty()) tag.attrs.emplace(std::move(attr), decode_entities(value));
  }
  tag.end = i < html.size() ? i + 1 : html.size();
  return tag;
}

bool is_dropped_container(std::string_view name) {
  return name == "head" || name == "nav" || name == "footer";
}

bool is_raw_text(std::string_view name) { return name == "script" || name == "style"; }

}  // namespace

std::string decode_entities(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    if (text[i] != '&') {
      out.push_back(text[i++]);
      continue;
    }
    std::size_t semi = text.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 12) {
      out.push_back(text[i++]);
      continue;
    }
    std::string_view body = text.substr(i + 1, semi - i - 1);
    if (!body.empty() && body[0] == '#') {
      std::uint32_t cp = 0;
      const char* first = body.data() + 1;
      const char* last = body.data() + body.size();
      int base = 10;
      if (first != last && (*first == 'x' || *first == 'X')) {
        ++first;
        base = 16;
      }
      auto [ptr, ec] = std::from_chars(first, last, cp, base);
      if (ec == std::errc{} && ptr == last && first != last) {
        append_codepoint(out, cp);
        i = semi + 1;
        continue;
      }
    } else if (auto it = named_entities().find(body); it != named_entities().end()) {
      append_codepoint(out, it->second);
      i = semi + 1;
      continue;
    }
    out.push_back(text[i++]);
  }
  return out;
}

HtmlContent extract_html(std::string_view html) {
  HtmlContent result;
  std::vector<std::string> pieces;
  std::string pending;
  std::vector<std::string> dropped;  // open dropped containers

  auto flush = [&] {
    if (!pending.empty()) {
      if (dropped.empty()) {
        std::string piece = decode_entities(pending);
        if (!normalize(piece).empty()) pieces.push_back(std::move(piece));
      }
      pending.clear();
    }
  };

  std::size_t i = 0;
  while (i < html.size()) {
    if (html[i] != '<') {
      pending.push_back(html[i++]);
      continue;
    }
    if (html.compare(i, 4, "<!--") == 0) {
      flush();
      std::size_t end = html.find("-->", i + 4);
      i = end == std::string_view::npos ? html.size() : end + 3;
      continue;
    }
    if (i + 1 < html.size() && (html[i + 1] == '!' || html[i + 1] == '?')) {
      flush();
      std::size_t end = html.find('>', i);
      i = end == std::string_view::npos ? html.size() : end + 1;
      continue;
    }
    auto tag = parse_tag(html, i);
    if (!tag) {
      pending.push_back(html[i++]);
      continue;
    }
    flush();
    i = tag->end;

    if (tag->closing) {
      if (!dropped.empty() && dropped.back() == tag->name) dropped.pop_back();
      continue;
    }
    if (tag->name == "a") {
      if (auto it = tag->attrs.find("href"); it != tag->attrs.end() && !it->second.empty()) {
        result.links.push_back(it->second);
      }
    }
    if (tag->name == "body") {
      // An unclosed <head> ends where the body starts.
      std::erase(dropped, std::string("head"));
    }
    if (is_raw_text(tag->name) && !tag->self_closing) {
      std::size_t close = ifind(html, "</" + tag->name, i);
      if (close == std::string_view::npos) {
        i = html.size();
      } else {
        std::size_t gt = html.find('>', close);
        i = gt == std::string_view::npos ? html.size() : gt + 1;
      }
      continue;
    }
    if (is_dropped_container(tag->name) && !tag->self_closing) dropped.push_back(tag->name);
  }
  flush();

  std::string joined;
  for (const auto& piece : pieces) {
    if (!joined.empty()) joined.push_back(' ');
    joined += piece;
  }
  result.text = normalize(joined);
  return result;
}

std::string Url::origin() const {
  std::string out = scheme + "://" + host;
  if (port != 0) out += ":" + std::to_string(port);
  return out;
}

std::string Url::str() const { return origin() + path; }

std::optional<Url> parse_url(std::string_view text) {
  auto scheme_end = text.find("://");
  if (scheme_end == std::string_view::npos) return std::nullopt;
  Url url;
  url.scheme = lower_ascii(text.substr(0, scheme_end));
  if (url.scheme != "http" && url.scheme != "https") return std::nullopt;
  std::string_view rest = text.substr(scheme_end + 3);
  std::size_t auth_end = rest.find_first_of("/?#");
  std::string_view authority = rest.substr(0, auth_end);
  if (auto at = authority.rfind('@'); at != std::string_view::npos) authority = authority.substr(at + 1);
  if (authority.empty()) return std::nullopt;
  if (auto colon = authority.rfind(':'); colon != std::string_view::npos && authority.find(']') == std::string_view::npos) {
    int port = 0;
    auto port_text = authority.substr(colon + 1);
    auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port <= 0 || port > 65535) {
      return std::nullopt;
    }
    int default_port = url.scheme == "https" ? 443 : 80;
    url.port = port == default_port ? 0 : port;
    authority = authority.substr(0, colon);
  }
  url.host = lower_ascii(authority);
  std::string_view tail = auth_end == std::string_view::npos ? std::string_view{} : rest.substr(auth_end);
  if (auto hash = tail.find('#'); hash != std::string_view::npos) tail = tail.substr(0, hash);
  url.path = tail.empty() || tail[0] != '/' ? "/" + std::string(tail) : std::string(tail);
  return url;
}

namespace {

std::string remove_dot_segments(std::string_view path) {
  std::string_view query;
  if (auto q = path.find('?'); q != std::string_view::npos) {
    query = path.substr(q);
    path = path.substr(0, q);
  }
  std::vector<std::string_view> segments;
  std::size_t start = 1;  // skip the leading '/'
  bool trailing_slash = false;
  while (start <= path.size()) {
    std::size_t slash = path.find('/', start);
    std::string_view seg = path.substr(start, slash == std::string_view::npos ? std::string_view::npos : slash - start);
    trailing_slash = false;
    if (seg == "..") {
      if (!segments.empty()) segments.pop_back();
      trailing_slash = true;
    } else if (seg == ".") {
      trailing_slash = true;
    } else {
      segments.push_back(seg);
    }
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  std::string out;
  for (auto seg : segments) {
    out.push_back('/');
    out += seg;
  }
  if (out.empty() || trailing_slash) out.push_back('/');
  out += query;
  return out;
}

}  // namespace

std::optional<Url> resolve_url(const Url& base, std::string_view href) {
  std::string trimmed = normalize(href);
  std::string_view ref = trimmed;
  if (auto hash = ref.find('#'); hash != std::string_view::npos) ref = ref.substr(0, hash);
  if (ref.empty()) return base;

  auto colon = ref.find(':');
  auto first_delim = ref.find_first_of("/?");
  if (colon != std::string_view::npos && (first_delim == std::string_view::npos || colon < first_delim)) {
    return parse_url(ref);  // absolute; non-http schemes yield nullopt
  }
  if (ref.starts_with("//")) return parse_url(base.scheme + ":" + std::string(ref));

  Url out = base;
  if (ref[0] == '/') {
    out.path = remove_dot_segments(ref);
  } else if (ref[0] == '?') {
    out.path = base.path.substr(0, base.path.find('?')) + std::string(ref);
  } else {
    std::string_view base_path = std::string_view(base.path).substr(0, base.path.find('?'));
    std::string dir(base_path.substr(0, base_path.rfind('/') + 1));
    out.path = remove_dot_segments(dir + std::string(ref));
  }
  return out;
}

}  // namespace threatrag
