#include "evstudy/csv.hpp"

#include "evstudy/errors.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <system_error>

namespace evstudy::csv {

Reader::Reader(std::istream &in, std::string source,
               const std::vector<std::string> &required)
    : in_(in), source_(std::move(source)) {
  if (!read_record(header_)) {
    throw DataError(source_ + ": empty file, expected a header row");
  }
  line_ = 1;
  if (!header_.empty() && header_[0].rfind("\xEF\xBB\xBF", 0) == 0) {
    header_[0].erase(0, 3);
  }
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (!index_.emplace(header_[i], i).second) {
      throw DataError(source_ + ": duplicate column '" + header_[i] + "'");
    }
  }
  for (const auto &name : required) {
    if (!index_.count(name)) {
      throw DataError(source_ + ": missing required column '" + name + "'");
    }
  }
}

bool Reader::read_record(std::vector<std::string> &out) {
  out.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  std::streambuf *buf = in_.rdbuf();
  using traits = std::streambuf::traits_type;
  for (int ch = buf->sbumpc(); ch != traits::eof(); ch = buf->sbumpc()) {
    const char c = traits::to_char_type(ch);
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (buf->sgetc() == '"') {
          buf->sbumpc();
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      if (!field.empty() && field.back() == '\r') {
        field.pop_back();
      }
      out.push_back(std::move(field));
      return true;
    } else {
      field.push_back(c);
    }
  }
  if (in_quotes) {
    throw DataError(source_ + ": unterminated quoted field");
  }
  if (!any) {
    return false;
  }
  if (!field.empty() && field.back() == '\r') {
    field.pop_back();
  }
  out.push_back(std::move(field));
  return true;
}

bool Reader::next() {
  while (read_record(fields_)) {
    ++line_;
    if (fields_.size() == 1 && fields_[0].empty()) {
      continue; // blank line
    }
    if (fields_.size() != header_.size()) {
      throw DataError(source_ + ":" + std::to_string(line_) + ": expected " +
                      std::to_string(header_.size()) + " fields, found " +
                      std::to_string(fields_.size()));
    }
    return true;
  }
  return false;
}

std::size_t Reader::column(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) {
    throw DataError(source_ + ": no column '" + std::string(name) + "'");
  }
  return it->second;
}

bool Reader::has_column(std::string_view name) const {
  return index_.count(std::string(name)) > 0;
}

const std::string &Reader::field(std::string_view name) const {
  return fields_[column(name)];
}

double Reader::to_double(std::size_t column) const {
  const std::string &s = fields_[column];
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError(source_ + ":" + std::to_string(line_) + ": column '" +
                    header_[column] + "' is not a number: '" + s + "'");
  }
  return value;
}

double Reader::to_double_or_nan(std::size_t column) const {
  if (fields_[column].empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return to_double(column);
}

long long Reader::to_int(std::size_t column) const {
  const std::string &s = fields_[column];
  long long value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError(source_ + ":" + std::to_string(line_) + ": column '" +
                    header_[column] + "' is not an integer: '" + s + "'");
  }
  return value;
}

std::string format_double(double value) {
  if (std::isnan(value)) {
    return "NaN";
  }
  if (value == 0.0) {
    return "0"; // folds -0
  }
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') {
      out.push_back('"');
    }
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream &out, const std::vector<std::string> &fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) {
      out.put(',');
    }
    out << escape(fields[i]);
  }
  out.put('\n');
}

} // namespace evstudy::csv
