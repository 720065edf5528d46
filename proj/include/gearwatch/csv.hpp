/**
 * @file csv.hpp
 * @brief Minimal RFC-4180 reader and writer helpers.
 */
#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace gearwatch::csv {

/// Streams records out of an RFC-4180 document: quoted fields, doubled quotes,
/// embedded separators/newlines inside quotes, LF or CRLF line endings.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  /// Reads the next record into `fields`. Returns false at end of input.
  bool next(std::vector<std::string>& fields) {
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    int c;
    while ((c = in_.get()) != std::char_traits<char>::eof()) {
      any = true;
      const char ch = static_cast<char>(c);
      if (in_quotes) {
        if (ch == '"') {
          if (in_.peek() == '"') {
            in_.get();
            field.push_back('"');
          } else {
            in_quotes = false;
          }
        } else {
          field.push_back(ch);
        }
        continue;
      }
      if (ch == '"') {
        in_quotes = true;
      } else if (ch == ',') {
        fields.push_back(std::move(field));
        field.clear();
      } else if (ch == '\n') {
        if (!field.empty() && field.back() == '\r') field.pop_back();
        fields.push_back(std::move(field));
        ++line_;
        return true;
      } else {
        field.push_back(ch);
      }
    }
    if (!any) {
      return false;
    }
    if (!field.empty() && field.back() == '\r') field.pop_back();
    fields.push_back(std::move(field));
    ++line_;
    return true;
  }

  /// Number of records consumed so far.
  [[nodiscard]] std::size_t records_read() const noexcept { return line_; }

 private:
  std::istream& in_;
  std::size_t line_{0};
};

inline std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

/// Header cells may carry a unit suffix, e.g. `power_avg[kW]`; the bare name is the key.
inline std::string_view strip_unit(std::string_view header_cell) {
  while (!header_cell.empty() && header_cell.back() == ' ') header_cell.remove_suffix(1);
  while (!header_cell.empty() && header_cell.front() == ' ') header_cell.remove_prefix(1);
  if (!header_cell.empty() && header_cell.back() == ']') {
    if (auto open = header_cell.rfind('['); open != std::string_view::npos && open > 0) {
      header_cell = header_cell.substr(0, open);
      while (!header_cell.empty() && header_cell.back() == ' ') header_cell.remove_suffix(1);
    }
  }
  return header_cell;
}

}  // namespace gearwatch::csv
