#include "hashtag/csv.hpp"

namespace hashtag {

CsvReader::CsvReader(std::istream& in) : in_(in) {}

std::optional<CsvReader::Row> CsvReader::next() {
  if (first_) {
    first_ = false;
    if (in_.peek() == 0xEF) {
      char bom[3];
      in_.read(bom, 3);
      if (!(static_cast<unsigned char>(bom[1]) == 0xBB && static_cast<unsigned char>(bom[2]) == 0xBF)) {
        in_.clear();
        in_.seekg(0);
      }
    }
  }
  if (in_.peek() == std::char_traits<char>::eof()) return std::nullopt;

  Row row;
  row.line = line_;
  std::string field;
  bool in_quotes = false;
  bool after_quote = false;  // a quoted field just closed
  bool field_started = false;

  auto finish_field = [&] {
    row.fields.push_back(std::move(field));
    field.clear();
    after_quote = false;
    field_started = false;
  };

  int ch;
  while ((ch = in_.get()) != std::char_traits<char>::eof()) {
    const char c = static_cast<char>(ch);
    if (in_quotes) {
      if (c == '"') {
        if (in_.peek() == '"') {
          in_.get();
          field.push_back('"');
        } else {
          in_quotes = false;
          after_quote = true;
        }
      } else {
        if (c == '\n') ++line_;
        field.push_back(c);
      }
      continue;
    }
    if (c == ',') {
      finish_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && in_.peek() == '\n') in_.get();
      ++line_;
      finish_field();
      return row;
    } else if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else {
      if (after_quote && row.well_formed) {
        row.well_formed = false;
        row.problem = "characters after closing quote";
      }
      field_started = true;
      field.push_back(c);
    }
  }
  if (in_quotes) {
    row.well_formed = false;
    row.problem = "unterminated quoted field";
  }
  finish_field();
  return row;
}

}  // namespace hashtag
