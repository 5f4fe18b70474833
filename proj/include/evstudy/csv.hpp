#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace evstudy::csv {

// Minimal RFC 4180 reader: comma separated, optional double quotes with ""
// escapes, LF or CRLF line endings. Fields are returned unquoted.
class Reader {
public:
  // Reads and validates the header. Every name in `required` must be present;
  // throws DataError naming `source` otherwise.
  Reader(std::istream &in, std::string source,
         const std::vector<std::string> &required);

  // Advances to the next record; false at end of input.
  bool next();

  const std::string &field(std::size_t column) const { return fields_[column]; }
  const std::string &field(std::string_view name) const;
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;

  // 1-based line number of the current record (header is line 1).
  std::size_t line() const { return line_; }
  const std::string &source() const { return source_; }

  // Parsing helpers; each throws DataError with file:line context.
  double to_double(std::size_t column) const;
  long long to_int(std::size_t column) const;
  // Empty field -> NaN.
  double to_double_or_nan(std::size_t column) const;

private:
  bool read_record(std::vector<std::string> &out);

  std::istream &in_;
  std::string source_;
  std::vector<std::string> header_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> fields_;
  std::size_t line_ = 0;
};

// Shortest decimal representation that round-trips (locale independent).
std::string format_double(double value);

// Quotes the field only when it contains a comma, quote, or newline.
std::string escape(std::string_view field);

void write_row(std::ostream &out, const std::vector<std::string> &fields);

} // namespace evstudy::csv
