#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

namespace twist::cli {

/// Provenance stamped on every output file.
struct RunStamp {
  std::string config_hash;
  std::uint64_t seed = 0;
};

std::string format_double(double v);

template <class T>
std::string format_cell(const T& v) {
  if constexpr (std::is_floating_point_v<T>) {
    return format_double(static_cast<double>(v));
  } else if constexpr (std::is_integral_v<T>) {
    return fmt::format("{}", v);
  } else {
    return std::string(v);
  }
}

/// Buffers a CSV file in memory and writes it in one go on close(). The first
/// line is "# config_hash=<hex> seed=<u64>", the second the column names.
class CsvWriter {
 public:
  CsvWriter(std::filesystem::path path, const RunStamp& stamp, std::vector<std::string> columns);

  template <class... Ts>
  void row(const Ts&... cells) {
    if (sizeof...(Ts) != columns_) throw std::logic_error("CSV row width mismatch");
    std::string line;
    bool first = true;
    ((line += (first ? "" : ","), line += format_cell(cells), first = false), ...);
    buffer_ += line;
    buffer_ += '\n';
  }

  void close();

 private:
  std::filesystem::path path_;
  std::size_t columns_;
  std::string buffer_;
};

void ensure_directory(const std::filesystem::path& dir);
void write_text(const std::filesystem::path& path, std::string_view text);

/// Writes `body` with "config_hash" and "seed" fields added, pretty-printed.
void write_json(const std::filesystem::path& path, const RunStamp& stamp, nlohmann::json body);

/// JSON number, or null for non-finite values (JSON has no inf/nan).
nlohmann::json json_number(double v);

}  // namespace twist::cli
