#include "headroom/csv.hpp"

#include "headroom/error.hpp"

namespace headroom::csv {

std::optional<std::vector<std::string>> Reader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    record_line_ = line_;
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    std::size_t i = 0;
    while (true) {
      if (i == line.size()) {
        if (!in_quotes) break;
        // Quoted field continues on the next physical line.
        if (!std::getline(in_, line)) throw ParseError("csv", record_line_, "unterminated quoted field");
        ++line_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        field.push_back('\n');
        i = 0;
        continue;
      }
      char c = line[i++];
      if (in_quotes) {
        if (c == '"') {
          if (i < line.size() && line[i] == '"') {
            field.push_back('"');
            ++i;
          } else {
            in_quotes = false;
          }
        } else {
          field.push_back(c);
        }
      } else if (c == '"' && field.empty()) {
        in_quotes = true;
      } else if (c == separator_) {
        fields.push_back(std::move(field));
        field.clear();
      } else {
        field.push_back(c);
      }
    }
    fields.push_back(std::move(field));
    return fields;
  }
  return std::nullopt;
}

std::string escape(std::string_view field, char separator) {
  if (field.find_first_of(std::string{separator, '"', '\r', '\n'}) == std::string_view::npos)
    return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string join_row(const std::vector<std::string>& fields, char separator) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(separator);
    out += escape(fields[i], separator);
  }
  return out;
}

}  // namespace headroom::csv
