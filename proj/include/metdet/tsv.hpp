#ifndef METDET_TSV_HPP
#define METDET_TSV_HPP

#include <string>
#include <string_view>
#include <vector>

namespace metdet::tsv {

// Field escaping for tab-separated files. Tabs, newlines, carriage returns
// and backslashes inside a field are escaped so that a raw tab is always a
// column separator and a raw newline always ends a record.
inline std::string escape(std::string_view field) {
  std::string out;
  out.reserve(field.size());
  for (char c : field) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string unescape(std::string_view field) {
  std::string out;
  out.reserve(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) {
    char c = field[i];
    if (c == '\\' && i + 1 < field.size()) {
      char n = field[i + 1];
      switch (n) {
        case '\\': out += '\\'; ++i; continue;
        case 't': out += '\t'; ++i; continue;
        case 'n': out += '\n'; ++i; continue;
        case 'r': out += '\r'; ++i; continue;
        default: break;  // unknown escape, keep the backslash literally
      }
    }
    out += c;
  }
  return out;
}

// Splits a raw line on tab separators. Fields are returned still escaped.
inline std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == '\t') {
      fields.emplace_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return fields;
}

inline std::string join(const std::vector<std::string>& escaped_fields) {
  std::string out;
  for (std::size_t i = 0; i < escaped_fields.size(); ++i) {
    if (i) out += '\t';
    out += escaped_fields[i];
  }
  return out;
}

}  // namespace metdet::tsv

#endif
