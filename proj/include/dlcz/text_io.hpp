#pragma once

// Small helpers shared by the delimited-text readers.

#include <charconv>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "dlcz/errors.hpp"

namespace dlcz {

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

inline std::vector<std::string_view> split_fields(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_field(std::string_view text, std::size_t line_no, std::string_view name) {
  text = trim(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw FormatError(line_no, "cannot parse " + std::string(name) + " from '" + std::string(text) + "'");
  }
  return value;
}

inline bool parse_flag(std::string_view text, std::size_t line_no, std::string_view name) {
  text = trim(text);
  if (text == "0") return false;
  if (text == "1") return true;
  throw FormatError(line_no, std::string(name) + " must be 0 or 1, got '" + std::string(text) + "'");
}

}  // namespace dlcz
