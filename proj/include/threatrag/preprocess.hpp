#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace threatrag {

using StopwordSet = std::unordered_set<std::string>;

/// The shipped English stopword list (179 entries).
const StopwordSet& default_stopwords();

/// Lowercases, splits on runs of non-alphanumeric characters and drops
/// stopwords and empty tokens. Digits are kept; duplicates are kept.
std::vector<std::string> preprocess(std::string_view text, const StopwordSet& stopwords);

inline std::vector<std::string> preprocess(std::string_view text) {
  return preprocess(text, default_stopwords());
}

}  // namespace threatrag
