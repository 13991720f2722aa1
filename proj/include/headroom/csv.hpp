#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace headroom::csv {

// RFC 4180 reader: quoted fields may contain separators, doubled quotes and
// newlines. Tracks the physical line on which each record starts.
class Reader {
 public:
  explicit Reader(std::istream& in, char separator = ',') : in_(in), separator_(separator) {}

  // Returns nullopt at end of input. Blank lines are skipped.
  std::optional<std::vector<std::string>> next();

  // 1-based line of the last record returned by next().
  std::size_t record_line() const { return record_line_; }

 private:
  std::istream& in_;
  char separator_;
  std::size_t line_ = 0;
  std::size_t record_line_ = 0;
};

// Quotes the field when it contains a separator, quote, CR or LF.
std::string escape(std::string_view field, char separator = ',');

std::string join_row(const std::vector<std::string>& fields, char separator = ',');

}  // namespace headroom::csv
