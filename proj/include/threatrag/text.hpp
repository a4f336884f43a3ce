#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace threatrag {

struct DecodedText {
  std::string text;          // valid UTF-8
  std::size_t replacements;  // invalid sequences replaced with U+FFFD
};

/// Decodes arbitrary bytes as UTF-8, substituting U+FFFD for malformed input.
DecodedText decode_utf8_lossy(std::string_view bytes);

/// Collapses every whitespace run (tabs, newlines, unicode spaces) to a single
/// space, trims both ends and applies NFC. Idempotent.
std::string normalize(std::string_view text);

std::u32string to_u32(std::string_view utf8);
std::string to_utf8(std::u32string_view text);

/// Unicode-aware lowercase of a UTF-8 string.
std::string to_lower(std::string_view utf8);

bool is_alnum(char32_t cp) noexcept;

std::string sha256_hex(std::string_view data);

/// 64-bit FNV-1a. Stable across platforms; used for feature hashing.
constexpr std::uint64_t fnv1a64(std::string_view data) noexcept {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace threatrag
