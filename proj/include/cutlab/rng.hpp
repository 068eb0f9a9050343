#pragma once
// Counter-based random streams.
//
// A stream is identified by (seed, stream_id) and produces a deterministic
// sequence regardless of how many other streams exist or which thread draws
// from it. Draw k of stream (s, i) is a pure function of (s, i, k), so
// jump-ahead is O(1) and per-trial streams can be handed to workers without
// any shared state.

#include <array>
#include <cmath>
#include <cstdint>

namespace cutlab {

// SplitMix64 finalizer. Weyl increment + this mixer is the standard
// counter-mode construction.
inline constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

inline uint64_t mix64(uint64_t x) {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace detail {

// Ziggurat tables for the standard normal (256 layers, Marsaglia-Tsang).
struct ZigguratTables {
  std::array<double, 257> x;   // layer abscissae, x[0] innermost edge of tail box
  std::array<double, 256> y;   // f(x[i])
  ZigguratTables() {
    const double r = 3.6541528853610088;  // rightmost abscissa
    const double v = 0.00492867323399;    // area of each layer
    auto f = [](double t) { return std::exp(-0.5 * t * t); };
    x[256] = v / f(r);  // pseudo-abscissa so layer 255 has area v as well
    x[255] = r;
    y[255] = f(r);
    for (int i = 254; i >= 1; --i) {
      double xi = std::sqrt(-2.0 * std::log(v / x[i + 1] + f(x[i + 1])));
      x[i] = xi;
      y[i] = f(xi);
    }
    x[0] = 0.0;
    y[0] = 1.0;
  }
};

inline const ZigguratTables& ziggurat() {
  static const ZigguratTables t;
  return t;
}

}  // namespace detail

class RngStream {
 public:
  RngStream(uint64_t seed, uint64_t stream_id)
      : key_(mix64(seed + kGolden) ^ (mix64(stream_id + 0x94d049bb133111ebULL) | 1ULL)) {}

  uint64_t seed_key() const { return key_; }
  uint64_t counter() const { return ctr_; }

  // O(1) jump over the next n raw draws.
  void skip(uint64_t n) { ctr_ += n; }

  uint64_t next_u64() { return mix64(key_ + (++ctr_) * kGolden); }

  // Uniform double in [0, 1), 53-bit resolution.
  double next_unit() { return (next_u64() >> 11) * 0x1.0p-53; }

  // Uniform double in (0, 1); safe as a log/division argument.
  double next_unit_open() { return ((next_u64() >> 12) + 0.5) * 0x1.0p-52; }

  // Unbiased uniform integer in [0, n). Power-of-two n never rejects.
  uint32_t next_below(uint32_t n) {
    if ((n & (n - 1)) == 0) return (uint32_t)(next_u64() & (n - 1));
    // Lemire multiply-shift with rejection.
    uint64_t x = next_u64() & 0xffffffffULL;
    uint64_t m = x * n;
    uint32_t l = (uint32_t)m;
    if (l < n) {
      uint32_t t = (uint32_t)(-(int32_t)n) % n;
      while (l < t) {
        x = next_u64() & 0xffffffffULL;
        m = x * n;
        l = (uint32_t)m;
      }
    }
    return (uint32_t)(m >> 32);
  }

  // Standard normal via 256-layer ziggurat; exact tail by Marsaglia's trick.
  double next_normal() {
    const auto& z = detail::ziggurat();
    while (true) {
      uint64_t bits = next_u64();
      int i = (int)(bits & 255);
      double sign = (bits & 256) ? -1.0 : 1.0;
      double u = (bits >> 11) * 0x1.0p-53;
      double t = u * z.x[i + 1];
      if (t < z.x[i]) return sign * t;  // inside rectangle, the common case
      if (i == 255) {
        // tail beyond r
        const double r = z.x[255];
        while (true) {
          double e1 = -std::log(next_unit_open()) / r;
          double e2 = -std::log(next_unit_open());
          if (2.0 * e2 > e1 * e1) return sign * (r + e1);
        }
      }
      double fy = z.y[i + 1] + next_unit() * (z.y[i] - z.y[i + 1]);
      if (fy < std::exp(-0.5 * t * t)) return sign * t;
    }
  }

  // Two independent standard normals (convenience for coordinate pairs).
  void next_normal2(double& a, double& b) {
    a = next_normal();
    b = next_normal();
  }

 private:
  uint64_t key_;
  uint64_t ctr_ = 0;
};

// Fixed mixing of experiment coordinates into a stream id. Documented
// bit-exactly: stream_id = mix64(mix64(kind_tag) ^ (scale_index * kGolden)
//                                ^ (trial_index + 0x632be59bd9b4e019)).
inline uint64_t stream_id_for(uint64_t kind_tag, uint64_t scale_index, uint64_t trial_index) {
  return mix64(mix64(kind_tag) ^ (scale_index * kGolden) ^ (trial_index + 0x632be59bd9b4e019ULL));
}

}  // namespace cutlab
