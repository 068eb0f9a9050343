#pragma once
// Cut-ball detection for Brownian sample paths.
//
// A ball is a cut ball for a stopped path when the path meets it, the stretch
// between first entry and last exit stays inside a concentric envelope, and
// the legs before first entry / after last exit are disjoint. Two sampled
// polylines almost surely do not share a point, so literal disjointness is
// useless here; instead the legs count as disjoint when every pair of their
// segments keeps distance greater than rho * inner_radius. The margin makes
// the predicate stable under grid refinement and errs conservatively.
//
// The pair test is accelerated by a uniform spatial hash. Cells are at least
// as large as the margin, so any two points within the margin sit in cells
// that differ by at most one index per axis; scanning the one-ring of every
// query cell therefore yields a candidate superset, and an exact
// segment-segment distance decides each candidate.
//
// Every comparison in the detector is homogeneous in the spatial scale, so
// scaling samples, center and radii by a common power of two (and dt by its
// square) reproduces the identical decision bit for bit. That is the sampled
// form of the scale invariance relating detection at radius e^{-s} inside the
// unit ball to detection at radius e^{3n/4} inside the ball of radius e^n.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cutlab/path.hpp"

namespace cutlab {

// Reject paths whose grid is too coarse to resolve the inner ball: a single
// step then moves a substantial fraction of the ball radius and first entry /
// last exit indices become meaningless.
inline constexpr double kCutBallMaxDtFactor = 1.0 / 16.0;

// Default sampling resolution for detection at scale s (inner radius e^{-s}):
// an order below the smallest geometric feature.
inline double cut_ball_dt(double s) { return std::min(1e-4, std::exp(-2.0 * s) / 100.0); }

template <int D>
struct ContinuousCutBallEvent {
  bool occurred = false;
  bool hit_inner = false;
  bool legs_disjoint = false;
  bool envelope_ok = false;
  size_t a1 = 0, a2 = 0;  // first / last sample index in the closed inner ball
  RealPoint<D> center{};
  double inner_radius = 0;
  double envelope_radius = 0;
  double rho = 0;
};

namespace detail {

// Squared distance between segments [p0,p1] and [q0,q1]; the standard
// clamped closest-point parametrization, with degenerate segments allowed.
template <int D>
inline double seg_seg_sq_dist(const RealPoint<D>& p0, const RealPoint<D>& p1,
                              const RealPoint<D>& q0, const RealPoint<D>& q1) {
  RealPoint<D> d1, d2, r;
  for (int i = 0; i < D; ++i) {
    d1[i] = p1[i] - p0[i];
    d2[i] = q1[i] - q0[i];
    r[i] = p0[i] - q0[i];
  }
  double a = 0, e = 0, f = 0, c = 0, b = 0;
  for (int i = 0; i < D; ++i) {
    a += d1[i] * d1[i];
    e += d2[i] * d2[i];
    f += d2[i] * r[i];
    c += d1[i] * r[i];
    b += d1[i] * d2[i];
  }
  auto clamp01 = [](double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); };
  double s = 0, t = 0;
  if (a == 0 && e == 0) {
    // two points
  } else if (a == 0) {
    t = clamp01(f / e);
  } else if (e == 0) {
    s = clamp01(-c / a);
  } else {
    double denom = a * e - b * b;
    if (denom > 0) s = clamp01((b * f - c * e) / denom);
    double te = b * s + f;  // t scaled by e
    if (te < 0) {
      s = clamp01(-c / a);
    } else if (te > e) {
      t = 1;
      s = clamp01((b - c) / a);
    } else {
      t = te / e;
    }
  }
  double sq = 0;
  for (int i = 0; i < D; ++i) {
    double diff = (p0[i] + s * d1[i]) - (q0[i] + t * d2[i]);
    sq += diff * diff;
  }
  return sq;
}

// Open-addressing map from a hashed cell key to the head of a linked list of
// registered segments. Key collisions between distinct cells only merge
// candidate lists, which keeps the superset guarantee.
class SegmentCellTable {
 public:
  static constexpr uint32_t kNil = 0xffffffffu;

  void reset(size_t expected_entries) {
    size_t cap = 16;
    while (cap * 3 / 4 < expected_entries) cap <<= 1;
    keys_.assign(cap, 0);
    heads_.assign(cap, kNil);
    mask_ = cap - 1;
    limit_ = cap * 3 / 4;
    count_ = 0;
    entry_seg_.clear();
    entry_next_.clear();
  }

  void insert(uint64_t key, uint32_t seg) {
    if (count_ >= limit_) grow();
    size_t i = probe(key, true);
    entry_seg_.push_back(seg);
    entry_next_.push_back(heads_[i]);
    heads_[i] = (uint32_t)(entry_seg_.size() - 1);
  }

  // Calls f(seg_index) for every segment registered under the key; returns
  // false from f to stop early (propagated).
  template <class F>
  bool scan(uint64_t key, F&& f) const {
    size_t i = mix64(key) & mask_;
    while (true) {
      if (keys_[i] == key) {
        for (uint32_t e = heads_[i]; e != kNil; e = entry_next_[e])
          if (!f(entry_seg_[e])) return false;
        return true;
      }
      if (keys_[i] == 0) return true;
      i = (i + 1) & mask_;
    }
  }

 private:
  size_t probe(uint64_t key, bool create) {
    size_t i = mix64(key) & mask_;
    while (true) {
      if (keys_[i] == key) return i;
      if (keys_[i] == 0) {
        if (create) {
          keys_[i] = key;
          ++count_;
        }
        return i;
      }
      i = (i + 1) & mask_;
    }
  }
  void grow() {
    std::vector<uint64_t> old_keys;
    std::vector<uint32_t> old_heads;
    old_keys.swap(keys_);
    old_heads.swap(heads_);
    size_t cap = (mask_ + 1) * 2;
    keys_.assign(cap, 0);
    heads_.assign(cap, kNil);
    mask_ = cap - 1;
    limit_ = cap * 3 / 4;
    count_ = 0;
    for (size_t i = 0; i < old_keys.size(); ++i)
      if (old_keys[i]) heads_[probe(old_keys[i], true)] = old_heads[i];
  }

  std::vector<uint64_t> keys_;
  std::vector<uint32_t> heads_;
  std::vector<uint32_t> entry_seg_;   // registered segment index per entry
  std::vector<uint32_t> entry_next_;  // next entry under the same key, or kNil
  size_t mask_ = 0, count_ = 0, limit_ = 0;
};

template <int D>
inline uint64_t cell_key(const std::array<int64_t, D>& c) {
  uint64_t h = 0x2545f4914f6cdd1dULL;
  for (int i = 0; i < D; ++i) h = mix64(h ^ (uint64_t)c[i]);
  return h ? h : 1;
}

template <int D>
inline std::array<int64_t, D> cell_of(const RealPoint<D>& p, double cell) {
  std::array<int64_t, D> c;
  for (int i = 0; i < D; ++i) c[i] = (int64_t)std::floor(p[i] / cell);
  return c;
}

// Minimum distance between the polylines samples[0..a1] and samples[a2..last]
// exceeds `margin`? Registers the first leg in the hash, then queries the
// second leg front to back: when the legs do meet, they usually do so near
// the ball, where the first leg ends and the second begins, so the scan order
// favors an early exit.
template <int D>
inline bool legs_separated(const std::vector<RealPoint<D>>& samples, size_t a1, size_t a2,
                           double margin, double dt) {
  const size_t last = samples.size() - 1;
  // Cells no smaller than the margin (correctness) or the typical segment
  // length (so a segment rarely spans more than a couple of cells).
  const double cell = std::max(margin, 2.0 * std::sqrt((double)D * dt));
  const double margin_sq = margin * margin;

  const size_t n1 = a1 > 0 ? a1 : 1;  // degenerate single-point leg becomes one segment
  static thread_local SegmentCellTable table;
  table.reset(n1 * 2);

  auto seg1 = [&](uint32_t s) -> std::pair<RealPoint<D>, RealPoint<D>> {
    if (a1 == 0) return {samples[0], samples[0]};
    return {samples[s], samples[s + 1]};
  };
  auto seg2_lo = [&](uint32_t s) { return samples[a2 + s]; };
  auto seg2_hi = [&](uint32_t s) { return a2 == last ? samples[last] : samples[a2 + s + 1]; };

  for (uint32_t s = 0; s < (uint32_t)n1; ++s) {
    auto [p0, p1] = seg1(s);
    std::array<int64_t, D> lo, hi;
    for (int i = 0; i < D; ++i) {
      lo[i] = (int64_t)std::floor(std::min(p0[i], p1[i]) / cell);
      hi[i] = (int64_t)std::floor(std::max(p0[i], p1[i]) / cell);
    }
    std::array<int64_t, D> c = lo;
    while (true) {
      table.insert(cell_key<D>(c), s);
      int axis = 0;
      while (axis < D) {
        if (++c[axis] <= hi[axis]) break;
        c[axis] = lo[axis];
        ++axis;
      }
      if (axis == D) break;
    }
  }

  const size_t n2 = a2 < last ? last - a2 : 1;
  for (uint32_t s = 0; s < (uint32_t)n2; ++s) {
    RealPoint<D> q0 = seg2_lo(s), q1 = seg2_hi(s);
    std::array<int64_t, D> lo, hi;
    for (int i = 0; i < D; ++i) {
      lo[i] = (int64_t)std::floor(std::min(q0[i], q1[i]) / cell) - 1;
      hi[i] = (int64_t)std::floor(std::max(q0[i], q1[i]) / cell) + 1;
    }
    std::array<int64_t, D> c = lo;
    while (true) {
      bool ok = table.scan(cell_key<D>(c), [&](uint32_t cand) {
        auto [p0, p1] = seg1(cand);
        return seg_seg_sq_dist<D>(p0, p1, q0, q1) > margin_sq;
      });
      if (!ok) return false;
      int axis = 0;
      while (axis < D) {
        if (++c[axis] <= hi[axis]) break;
        c[axis] = lo[axis];
        ++axis;
      }
      if (axis == D) break;
    }
  }
  return true;
}

}  // namespace detail

// Core detector with explicit radii: inner ball of radius `inner_radius` and
// concentric envelope of radius `envelope_radius` around `center`. The path
// decomposes at the first and last sample inside the closed inner ball; the
// event requires the middle stretch inside the open envelope and the legs
// separated by more than rho * inner_radius.
template <int D>
inline ContinuousCutBallEvent<D> is_cut_ball_continuous_r(const BrownianPath<D>& path,
                                                          const RealPoint<D>& center,
                                                          double inner_radius,
                                                          double envelope_radius, double rho) {
  if (path.samples.size() < 2)
    throw std::invalid_argument("is_cut_ball_continuous: degenerate path");
  if (path.dt <= 0) throw std::invalid_argument("is_cut_ball_continuous: dt must be positive");
  if (!(inner_radius > 0) || !(envelope_radius >= inner_radius))
    throw std::invalid_argument("is_cut_ball_continuous: need 0 < inner_radius <= envelope_radius");
  if (!(rho > 0) || !(rho < 0.25))
    throw std::invalid_argument("is_cut_ball_continuous: rho must lie in (0, 1/4)");
  if (path.dt > kCutBallMaxDtFactor * inner_radius * inner_radius)
    throw std::runtime_error("is_cut_ball_continuous: grid under-resolved for the inner ball");

  ContinuousCutBallEvent<D> ev;
  ev.center = center;
  ev.inner_radius = inner_radius;
  ev.envelope_radius = envelope_radius;
  ev.rho = rho;

  const double r_in_sq = inner_radius * inner_radius;
  const size_t last = path.samples.size() - 1;
  constexpr size_t npos = (size_t)-1;
  size_t a1 = npos, a2 = npos;
  for (size_t k = 0; k <= last; ++k) {
    if (sq_dist<D>(path.samples[k], center) <= r_in_sq) {
      if (a1 == npos) a1 = k;
      a2 = k;
    }
  }
  if (a1 == npos) return ev;  // never meets the ball
  ev.hit_inner = true;
  ev.a1 = a1;
  ev.a2 = a2;

  // Both endpoints of every middle segment lie inside the envelope ball, and
  // balls are convex, so checking samples decides containment of the whole
  // middle polyline exactly.
  const double r_env_sq = envelope_radius * envelope_radius;
  ev.envelope_ok = true;
  for (size_t k = a1; k <= a2; ++k) {
    if (!(sq_dist<D>(path.samples[k], center) < r_env_sq)) {
      ev.envelope_ok = false;
      break;
    }
  }

  ev.legs_disjoint = detail::legs_separated<D>(path.samples, a1, a2, rho * inner_radius, path.dt);
  ev.occurred = ev.hit_inner && ev.legs_disjoint && ev.envelope_ok;
  return ev;
}

// Detection at scale s inside the unit ball: inner radius e^{-s}, envelope
// e^{-2s/3}. The path must be stopped at its exit from the unit ball, the
// inner ball must fit inside the domain, and the origin must stay outside it.
template <int D>
inline ContinuousCutBallEvent<D> is_cut_ball_continuous(const BrownianPath<D>& path,
                                                        const RealPoint<D>& z, double s,
                                                        double rho = 0.05) {
  if (!(s > 0)) throw std::invalid_argument("is_cut_ball_continuous: scale must be positive");
  const double r_in = std::exp(-s);
  const double r_env = std::exp(-2.0 * s / 3.0);
  const double z_norm = std::sqrt(sq_norm<D>(z));
  if (!(z_norm > r_in))
    throw std::invalid_argument("is_cut_ball_continuous: origin inside the inner ball");
  if (!(z_norm + r_in <= 1.0))
    throw std::invalid_argument("is_cut_ball_continuous: inner ball not inside the unit ball");
  if (path.samples.size() < 2 || sq_norm<D>(path.samples.back()) < 1.0)
    throw std::invalid_argument("is_cut_ball_continuous: path not stopped at unit-sphere exit");
  return is_cut_ball_continuous_r<D>(path, z, r_in, r_env, rho);
}

// Blown-up detection inside the ball of radius e^n: inner radius e^{3n/4},
// envelope e^{5n/6}, center e^n z. This is the lattice-scale twin of the
// scale-(n/4) event above; for a Brownian path, rescaling space by e^{-n} and
// time by e^{-2n} maps one detection onto the other.
template <int D>
inline ContinuousCutBallEvent<D> is_cut_ball_continuous_upscaled(const BrownianPath<D>& path,
                                                                 const RealPoint<D>& z, double n,
                                                                 double rho = 0.05) {
  if (!(n > 0)) throw std::invalid_argument("is_cut_ball_continuous: scale must be positive");
  const double r_dom = std::exp(n);
  const double r_in = std::exp(0.75 * n);
  const double r_env = std::exp(n * 5.0 / 6.0);
  RealPoint<D> center;
  for (int i = 0; i < D; ++i) center[i] = r_dom * z[i];
  const double c_norm = std::sqrt(sq_norm<D>(center));
  if (!(c_norm > r_in))
    throw std::invalid_argument("is_cut_ball_continuous: origin inside the inner ball");
  if (!(c_norm + r_in <= r_dom))
    throw std::invalid_argument("is_cut_ball_continuous: inner ball not inside the domain ball");
  if (path.samples.size() < 2 || sq_norm<D>(path.samples.back()) < r_dom * r_dom)
    throw std::invalid_argument("is_cut_ball_continuous: path not stopped at domain exit");
  return is_cut_ball_continuous_r<D>(path, center, r_in, r_env, rho);
}

}  // namespace cutlab
