#pragma once
// Binary dump / load for lattice paths and small CSV helpers.
//
// Format (little endian): magic "CUTP", u16 version (= 1), u8 dimension,
// then per path a varint step count, zigzag-varint start coordinates, and one
// byte per step encoding (axis, sign) as 2*axis + (sign > 0). Multiple paths
// may be concatenated; load functions read until EOF.

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cutlab/path.hpp"

namespace cutlab {
namespace detail {

inline void put_varint(std::string& out, uint64_t v) {
  while (v >= 0x80) {
    out.push_back((char)(uint8_t)(v | 0x80));
    v >>= 7;
  }
  out.push_back((char)(uint8_t)v);
}

inline uint64_t get_varint(std::istream& in) {
  uint64_t v = 0;
  int shift = 0;
  while (true) {
    int c = in.get();
    if (c == EOF) throw std::runtime_error("path stream: truncated varint");
    v |= (uint64_t)(c & 0x7f) << shift;
    if (!(c & 0x80)) return v;
    shift += 7;
    if (shift > 63) throw std::runtime_error("path stream: varint overflow");
  }
}

inline uint64_t zigzag(int64_t v) { return ((uint64_t)v << 1) ^ (uint64_t)(v >> 63); }
inline int64_t unzigzag(uint64_t v) { return (int64_t)(v >> 1) ^ -(int64_t)(v & 1); }

}  // namespace detail

inline constexpr char kPathMagic[4] = {'C', 'U', 'T', 'P'};
inline constexpr uint16_t kPathVersion = 1;

class PathWriter {
 public:
  explicit PathWriter(const std::string& file, int dimension)
      : out_(file, std::ios::binary), dim_(dimension) {
    if (!out_) throw std::runtime_error("cannot open for write: " + file);
    std::string header(kPathMagic, 4);
    header.push_back((char)(kPathVersion & 0xff));
    header.push_back((char)(kPathVersion >> 8));
    header.push_back((char)(uint8_t)dimension);
    out_.write(header.data(), (std::streamsize)header.size());
  }

  template <int D>
  void append(const LatticePath<D>& path) {
    if (D != dim_) throw std::invalid_argument("PathWriter: dimension mismatch");
    if (!path.is_nearest_neighbor()) throw std::invalid_argument("PathWriter: not a lattice path");
    buf_.clear();
    detail::put_varint(buf_, path.num_steps());
    for (int i = 0; i < D; ++i) detail::put_varint(buf_, detail::zigzag(path.start()[i]));
    for (size_t k = 1; k < path.sites.size(); ++k) {
      for (int i = 0; i < D; ++i) {
        int64_t d = path.sites[k][i] - path.sites[k - 1][i];
        if (d != 0) {
          buf_.push_back((char)(uint8_t)(2 * i + (d > 0 ? 1 : 0)));
          break;
        }
      }
    }
    out_.write(buf_.data(), (std::streamsize)buf_.size());
  }

  void close() { out_.close(); }

 private:
  std::ofstream out_;
  int dim_;
  std::string buf_;
};

template <int D>
inline std::vector<LatticePath<D>> load_paths(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for read: " + file);
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string(magic, 4) != std::string(kPathMagic, 4))
    throw std::runtime_error("path stream: bad magic");
  uint16_t version = (uint16_t)in.get();
  version |= (uint16_t)(in.get() << 8);
  if (version != kPathVersion) throw std::runtime_error("path stream: unsupported version");
  int dim = in.get();
  if (dim != D) throw std::runtime_error("path stream: dimension mismatch");

  std::vector<LatticePath<D>> paths;
  while (true) {
    int peek = in.peek();
    if (peek == EOF) break;
    uint64_t steps = detail::get_varint(in);
    LatticePath<D> p;
    p.sites.reserve(steps + 1);
    LatticePoint<D> cur{};
    for (int i = 0; i < D; ++i) cur[i] = detail::unzigzag(detail::get_varint(in));
    p.sites.push_back(cur);
    for (uint64_t k = 0; k < steps; ++k) {
      int c = in.get();
      if (c == EOF) throw std::runtime_error("path stream: truncated steps");
      int axis = c >> 1;
      if (axis >= D) throw std::runtime_error("path stream: bad step byte");
      cur[axis] += (c & 1) ? 1 : -1;
      p.sites.push_back(cur);
    }
    paths.push_back(std::move(p));
  }
  return paths;
}

// Minimal CSV writer: caller supplies a header row once and then data rows.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& file) : out_(file) {
    if (!out_) throw std::runtime_error("cannot open for write: " + file);
    out_.precision(17);
  }

  void header(const std::vector<std::string>& cols) {
    for (size_t i = 0; i < cols.size(); ++i) out_ << (i ? "," : "") << cols[i];
    out_ << '\n';
  }

  template <class... Ts>
  void row(const Ts&... vals) {
    bool first = true;
    ((out_ << (first ? (first = false, "") : ",") << vals), ...);
    out_ << '\n';
  }

  void close() { out_.close(); }

 private:
  std::ofstream out_;
};

}  // namespace cutlab
