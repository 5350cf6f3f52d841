#include "output.hpp"

#include <cmath>
#include <fstream>
#include <system_error>

#include "twist/errors.hpp"

namespace twist::cli {

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

CsvWriter::CsvWriter(std::filesystem::path path, const RunStamp& stamp,
                     std::vector<std::string> columns)
    : path_(std::move(path)), columns_(columns.size()) {
  buffer_ = fmt::format("# config_hash={} seed={}\n", stamp.config_hash, stamp.seed);
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) buffer_ += ',';
    buffer_ += columns[i];
  }
  buffer_ += '\n';
}

void CsvWriter::close() { write_text(path_, buffer_); }

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string() +
                  (ec ? ": " + ec.message() : std::string()));
  }
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

void write_json(const std::filesystem::path& path, const RunStamp& stamp, nlohmann::json body) {
  body["config_hash"] = stamp.config_hash;
  body["seed"] = stamp.seed;
  write_text(path, body.dump(2) + "\n");
}

nlohmann::json json_number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

}  // namespace twist::cli
