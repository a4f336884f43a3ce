#include "threatrag/csv.hpp"

namespace threatrag {

std::vector<CsvRecord> parse_csv(std::string_view content) {
  std::vector<CsvRecord> records;
  std::size_t pos = 0;
  std::size_t line = 1;
  const std::size_t n = content.size();

  auto at_line_end = [&](std::size_t i) {
    return i >= n || content[i] == '\n' || (content[i] == '\r' && i + 1 < n && content[i + 1] == '\n') ||
           content[i] == '\r';
  };
  auto consume_line_end = [&](std::size_t& i) {
    if (i < n && content[i] == '\r') ++i;
    if (i < n && content[i] == '\n') ++i;
    ++line;
  };

  while (pos < n) {
    if (at_line_end(pos)) {  // blank line
      consume_line_end(pos);
      continue;
    }
    CsvRecord record;
    record.line = line;
    std::string field;
    bool done = false;
    while (!done) {
      field.clear();
      if (pos < n && content[pos] == '"') {
        ++pos;
        bool closed = false;
        while (pos < n) {
          char c = content[pos];
          if (c == '"') {
            if (pos + 1 < n && content[pos + 1] == '"') {
              field.push_back('"');
              pos += 2;
              continue;
            }
            ++pos;
            closed = true;
            break;
          }
          if (c == '\n') ++line;
          field.push_back(c);
          ++pos;
        }
        if (!closed) {
          record.error = "unterminated quoted field";
          record.fields.push_back(field);
          records.push_back(std::move(record));
          return records;
        }
        if (pos < n && content[pos] != ',' && !at_line_end(pos)) {
          record.error = "unexpected character after closing quote";
          while (pos < n && !at_line_end(pos)) ++pos;
        }
      } else {
        while (pos < n && content[pos] != ',' && !at_line_end(pos)) {
          field.push_back(content[pos]);
          ++pos;
        }
      }
      record.fields.push_back(field);
      if (pos < n && content[pos] == ',') {
        ++pos;
      } else {
        if (pos < n) consume_line_end(pos);
        done = true;
      }
    }
    records.push_back(std::move(record));
  }
  return records;
}

}  // namespace threatrag
