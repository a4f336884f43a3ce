#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace threatrag {

struct HtmlContent {
  std::string text;                // normalized visible text
  std::vector<std::string> links;  // raw href values in document order
};

/// Extracts visible text from HTML. Contents of script, style, head, nav and
/// footer are dropped; remaining text nodes are joined with single spaces.
/// Anchors are collected everywhere, including dropped regions.
HtmlContent extract_html(std::string_view html);

std::string decode_entities(std::string_view text);

struct Url {
  std::string scheme;  // lowercase, "http" or "https"
  std::string host;    // lowercase
  int port = 0;        // 0 means the scheme default
  std::string path;    // begins with '/', includes the query, no fragment

  std::string origin() const;  // scheme://host[:port]
  std::string str() const;
};

std::optional<Url> parse_url(std::string_view text);

/// Resolves `href` against `base`. Returns nullopt for non-http(s) targets
/// (mailto:, javascript:, ...) and for unparseable input. Fragments are dropped.
std::optional<Url> resolve_url(const Url& base, std::string_view href);

}  // namespace threatrag
