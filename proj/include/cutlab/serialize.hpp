#pragma once
// Low-level output plumbing shared by the experiment harness and the data
// exporters: shortest-round-trip number formatting, a minimal JSON object
// assembler, CSV row helpers, and atomic whole-file writes.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

namespace cutlab {
namespace detail {

// Shortest decimal that reparses to exactly the same double, so files are
// byte-stable across runs and lossless for downstream tools.
inline std::string fmt_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline void json_escape_into(std::string& out, const std::string& s) {
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if ((unsigned char)c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", (unsigned)c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
}

// Minimal JSON object assembler; keys appear in call order.
class JsonObject {
 public:
  void raw(const std::string& key, const std::string& json_value) {
    sep();
    body_ += '"';
    json_escape_into(body_, key);
    body_ += "\":";
    body_ += json_value;
  }
  void str(const std::string& key, const std::string& value) {
    std::string v = "\"";
    json_escape_into(v, value);
    v += '"';
    raw(key, v);
  }
  void num(const std::string& key, double value) { raw(key, fmt_double(value)); }
  void num(const std::string& key, uint64_t value) { raw(key, std::to_string(value)); }
  void num(const std::string& key, int value) { raw(key, std::to_string(value)); }
  void boolean(const std::string& key, bool value) { raw(key, value ? "true" : "false"); }
  template <class T, class F>
  void list(const std::string& key, const std::vector<T>& xs, F&& one) {
    std::string v = "[";
    for (size_t i = 0; i < xs.size(); ++i) {
      if (i) v += ',';
      v += one(xs[i]);
    }
    v += ']';
    raw(key, v);
  }
  std::string build() const { return "{" + body_ + "}"; }

 private:
  void sep() {
    if (!body_.empty()) body_ += ',';
  }
  std::string body_;
};

// CSV cell shorthands.
inline std::string fd(double v) { return fmt_double(v); }
inline std::string fu(uint64_t v) { return std::to_string(v); }
inline std::string fi(int64_t v) { return std::to_string(v); }
inline std::string fb(bool v) { return v ? "1" : "0"; }

inline void csv_row(std::string& out, std::initializer_list<std::string> cells) {
  bool first = true;
  for (const auto& c : cells) {
    if (!first) out += ',';
    out += c;
    first = false;
  }
  out += '\n';
}

inline void csv_cells(std::string& out, const std::vector<std::string>& cells) {
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  out += '\n';
}

// Writes the whole content under a temporary name, then renames into place,
// creating parent directories as needed. Either the complete file appears at
// `path` or nothing does.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    f.write(content.data(), (std::streamsize)content.size());
    f.flush();
    if (!f) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw std::runtime_error("failed writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ec2;
    fs::remove(tmp, ec2);
    throw std::runtime_error("failed renaming '" + tmp.string() + "' to '" + path.string() +
                             "': " + ec.message());
  }
}

}  // namespace detail
}  // namespace cutlab
