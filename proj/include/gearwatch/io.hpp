/**
 * @file io.hpp
 * @brief Number formatting and atomic file output.
 */
#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>

#include "gearwatch/error.hpp"

namespace gearwatch::io {

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) {
    return "nan";
  }
  return {buf.data(), p};
}

/// Fixed significant-digit formatting (`%.*g`).
inline std::string format_number(double v, int significant_digits) {
  std::array<char, 64> buf{};
  auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general,
                               significant_digits);
  if (ec != std::errc{}) {
    return "nan";
  }
  return {buf.data(), p};
}

/// Parses a finite double; surrounding blanks are allowed, anything else is not.
inline std::optional<double> parse_number(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) {
    return std::nullopt;
  }
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

/// Writes `content` to a sibling temp file then renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(Stage::Config, "cannot write output file: " + tmp.string());
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
      throw Error(Stage::Config, "write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    throw Error(Stage::Config, "cannot rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
  }
}

inline std::string read_file(const std::filesystem::path& path, Stage stage) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(stage, "cannot open file: " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace gearwatch::io
