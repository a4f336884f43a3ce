#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace threatrag {

struct CsvRecord {
  std::vector<std::string> fields;
  std::size_t line = 0;              // 1-based line where the record starts
  std::optional<std::string> error;  // set when quoting is malformed
};

/// RFC 4180 reader: comma separated, CRLF or LF line ends, double-quote
/// quoting with "" escapes. Blank lines are ignored. A malformed record is
/// returned with `error` set and parsing resumes at the next line.
std::vector<CsvRecord> parse_csv(std::string_view content);

}  // namespace threatrag
