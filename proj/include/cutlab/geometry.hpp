#pragma once
// Lattice and continuum geometry primitives shared by the walk and Brownian
// samplers. Dimension is a compile-time parameter restricted to 2 and 3.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cutlab/rng.hpp"

namespace cutlab {

template <int D>
struct LatticePoint {
  static_assert(D == 2 || D == 3, "supported dimensions are 2 and 3");
  std::array<int64_t, D> c{};

  int64_t& operator[](int i) { return c[i]; }
  int64_t operator[](int i) const { return c[i]; }
  bool operator==(const LatticePoint&) const = default;

  int64_t sq_norm() const {
    int64_t s = 0;
    for (int i = 0; i < D; ++i) s += c[i] * c[i];
    return s;
  }
};

template <int D>
using RealPoint = std::array<double, D>;

template <int D>
inline double sq_norm(const RealPoint<D>& p) {
  double s = 0;
  for (int i = 0; i < D; ++i) s += p[i] * p[i];
  return s;
}

template <int D>
inline double sq_dist(const RealPoint<D>& a, const RealPoint<D>& b) {
  double s = 0;
  for (int i = 0; i < D; ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

template <int D>
inline RealPoint<D> to_real(const LatticePoint<D>& p) {
  RealPoint<D> r{};
  for (int i = 0; i < D; ++i) r[i] = (double)p.c[i];
  return r;
}

// Site z_n = floor(e^n z) componentwise; the lattice anchor of a continuum
// point at exponential scale n.
template <int D>
inline LatticePoint<D> lattice_anchor(const RealPoint<D>& z, double n) {
  LatticePoint<D> p;
  double s = std::exp(n);
  for (int i = 0; i < D; ++i) p.c[i] = (int64_t)std::floor(s * z[i]);
  return p;
}

// Ball given by a (possibly off-lattice) center and log-radius; the radius is
// e^{log_radius}. "Inside" is the strict inequality |x - center| < radius.
template <int D>
struct BallSpec {
  RealPoint<D> center{};
  double log_radius = 0;

  double radius() const { return std::exp(log_radius); }
  double sq_radius() const {
    double r = radius();
    return r * r;
  }
  bool contains(const RealPoint<D>& p) const { return sq_dist<D>(p, center) < sq_radius(); }
  bool contains(const LatticePoint<D>& p) const { return contains(to_real<D>(p)); }

  static BallSpec origin(double log_radius) { return BallSpec{RealPoint<D>{}, log_radius}; }
  static BallSpec at(const LatticePoint<D>& c, double log_radius) {
    return BallSpec{to_real<D>(c), log_radius};
  }
};

// Dense packing of small lattice points into one 64-bit key, for hash tables.
// Coordinates must fit in a signed 21-bit range, which covers every scale this
// laboratory works at (|x| < 2^20 ~ 1.05e6).
namespace detail {
inline constexpr int64_t kPackBias = 1 << 20;
inline constexpr int64_t kPackMask = (1 << 21) - 1;
}  // namespace detail

template <int D>
inline uint64_t pack_site(const LatticePoint<D>& p) {
  uint64_t k = 0;
  for (int i = 0; i < D; ++i) {
    int64_t b = p.c[i] + detail::kPackBias;
    k = (k << 21) | (uint64_t)(b & detail::kPackMask);
  }
  return k + 1;  // never zero, so zero can act as an empty-slot sentinel
}

template <int D>
inline LatticePoint<D> unpack_site(uint64_t k) {
  k -= 1;
  LatticePoint<D> p;
  for (int i = D - 1; i >= 0; --i) {
    p.c[i] = (int64_t)(k & detail::kPackMask) - detail::kPackBias;
    k >>= 21;
  }
  return p;
}

// Open-addressing hash set of packed sites. Clearing is O(capacity), so reuse
// one instance across trials of comparable size.
class SiteSet {
 public:
  explicit SiteSet(size_t expected = 1024) { rehash(capacity_for(expected)); }

  void clear() {
    if (count_ == 0) return;
    std::fill(slots_.begin(), slots_.end(), 0ULL);
    count_ = 0;
  }

  size_t size() const { return count_; }

  // Returns true when the key was newly inserted.
  bool insert(uint64_t key) {
    if (count_ >= limit_) grow();
    size_t i = mix64(key) & mask_;
    while (true) {
      uint64_t s = slots_[i];
      if (s == key) return false;
      if (s == 0) {
        slots_[i] = key;
        ++count_;
        return true;
      }
      i = (i + 1) & mask_;
    }
  }

  bool contains(uint64_t key) const {
    size_t i = mix64(key) & mask_;
    while (true) {
      uint64_t s = slots_[i];
      if (s == key) return true;
      if (s == 0) return false;
      i = (i + 1) & mask_;
    }
  }

 private:
  static size_t capacity_for(size_t expected) {
    size_t cap = 16;
    while (cap * 3 / 4 < expected) cap <<= 1;
    return cap;
  }
  void rehash(size_t cap) {
    slots_.assign(cap, 0ULL);
    mask_ = cap - 1;
    limit_ = cap * 3 / 4;
    count_ = 0;
  }
  void grow() {
    std::vector<uint64_t> old;
    old.swap(slots_);
    size_t cap = (mask_ + 1) * 2;
    rehash(cap);
    for (uint64_t k : old)
      if (k) insert(k);
  }

  std::vector<uint64_t> slots_;
  size_t mask_ = 0, count_ = 0, limit_ = 0;
};

}  // namespace cutlab
