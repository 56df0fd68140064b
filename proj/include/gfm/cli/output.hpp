#pragma once

// Byte-stable CSV/JSON emission with atomic file replacement.

#include <array>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <system_error>

#include <json.hpp>

#include "gfm/core_model.hpp"
#include "gfm/cubic_factor.hpp"

namespace gfm::cli {

using json = nlohmann::ordered_json;

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v) {
  if (v == 0.0) return "0";  // folds -0
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) return "nan";
  return {buf.data(), ptr};
}

/// JSON number, or null when not finite.
inline json json_number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v == 0.0 ? 0.0 : v;
}

class Csv {
 public:
  explicit Csv(std::initializer_list<std::string_view> header) { row_strings(header); }

  Csv& cell(std::string_view s) {
    sep();
    out_ += s;
    return *this;
  }
  Csv& cell(double v) { return cell(format_double(v)); }
  Csv& cell(std::size_t v) { return cell(std::to_string(v)); }
  Csv& end() {
    out_ += '\n';
    fresh_ = true;
    return *this;
  }
  Csv& poles(const PoleSet& p) {
    for (cplx z : p.as_array()) cell(z.real()).cell(z.imag());
    return *this;
  }

  const std::string& str() const { return out_; }
  std::size_t rows() const { return rows_; }

 private:
  void sep() {
    if (!fresh_) out_ += ',';
    else ++rows_;
    fresh_ = false;
  }
  void row_strings(std::initializer_list<std::string_view> cells) {
    for (auto c : cells) cell(c);
    end();
    rows_ = 0;
  }

  std::string out_;
  bool fresh_ = true;
  std::size_t rows_ = 0;
};

/// Writes `content` to `path` via a temporary sibling and rename.
inline void write_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  write_atomic(path, j.dump(2) + "\n");
}

}  // namespace gfm::cli
