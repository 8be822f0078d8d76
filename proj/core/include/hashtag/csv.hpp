#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace hashtag {

// Streaming RFC 4180 reader: comma separated, double-quoted fields may hold
// commas, newlines and doubled quotes. A UTF-8 BOM at the start is skipped.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in);

  struct Row {
    std::vector<std::string> fields;
    std::size_t line = 0;  // 1-based line where the row starts
    bool well_formed = true;
    std::string problem;
  };

  /// Returns the next row, or nullopt at end of input. Malformed rows (an
  /// unterminated quote, stray characters after a closing quote) are returned
  /// with well_formed = false rather than thrown.
  std::optional<Row> next();

 private:
  std::istream& in_;
  std::size_t line_ = 1;
  bool first_ = true;
};

}  // namespace hashtag
