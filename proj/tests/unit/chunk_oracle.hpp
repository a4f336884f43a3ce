#pragma once

// Reference implementations used only by tests.

#include <cstddef>
#include <string>
#include <vector>

namespace oracle {

/// Fixed windows of `size` code points advancing by size - overlap; the last
/// window is the first one that reaches the end of the text.
inline std::vector<std::u32string> sliding_windows(const std::u32string& text, std::size_t size, std::size_t overlap) {
  std::vector<std::u32string> out;
  if (text.empty()) return out;
  const std::size_t step = size - overlap;
  for (std::size_t start = 0;; start += step) {
    out.push_back(text.substr(start, size));
    if (start + size >= text.size()) break;
  }
  return out;
}

}  // namespace oracle
