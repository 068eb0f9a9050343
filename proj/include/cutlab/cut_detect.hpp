#pragma once
// Cut-point and cut-ball detection for lattice paths.
//
// A time index t of a path is a cut time when its site is visited exactly
// once and the strict past and strict future of the path share no site; the
// path endpoints never count. Two independent implementations are kept: a
// quadratic reference that tests the definition literally, and a linear-time
// sweep over visit intervals. Their outputs must agree exactly and the test
// suite enforces that.

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "cutlab/path.hpp"

namespace cutlab {

template <int D>
struct CutPointSet {
  std::vector<uint32_t> times;           // strictly increasing, endpoints excluded
  std::vector<LatticePoint<D>> sites;    // sites[k] = path site at times[k]

  size_t size() const { return times.size(); }
  bool operator==(const CutPointSet&) const = default;
};

// Site -> sorted visit indices. Reference index structure; handy for
// diagnostics and for tests of the compact sweep used internally.
template <int D>
class VisitIndex {
 public:
  explicit VisitIndex(const LatticePath<D>& path) {
    map_.reserve(path.sites.size() * 2);
    for (size_t k = 0; k < path.sites.size(); ++k)
      map_[pack_site<D>(path.sites[k])].push_back((uint32_t)k);
  }

  const std::vector<uint32_t>* visits(const LatticePoint<D>& site) const {
    auto it = map_.find(pack_site<D>(site));
    return it == map_.end() ? nullptr : &it->second;
  }

  size_t distinct_sites() const { return map_.size(); }

  template <class F>
  void for_each(F&& f) const {
    for (const auto& [k, v] : map_) f(unpack_site<D>(k), v);
  }

 private:
  std::unordered_map<uint64_t, std::vector<uint32_t>> map_;
};

namespace detail {

// Open-addressing map site -> (first, last, count); the workhorse behind the
// linear-time detector. Reuse one instance across paths to avoid allocation.
class SiteStatMap {
 public:
  struct Slot {
    uint64_t key = 0;
    uint32_t first = 0, last = 0, count = 0;
  };

  explicit SiteStatMap(size_t expected = 1024) { rehash(capacity_for(expected)); }

  void clear() {
    if (count_) std::fill(slots_.begin(), slots_.end(), Slot{});
    count_ = 0;
  }

  void record(uint64_t key, uint32_t t) {
    if (count_ >= limit_) grow();
    size_t i = mix64(key) & mask_;
    while (true) {
      Slot& s = slots_[i];
      if (s.key == key) {
        s.last = t;
        ++s.count;
        return;
      }
      if (s.key == 0) {
        s = Slot{key, t, t, 1};
        ++count_;
        return;
      }
      i = (i + 1) & mask_;
    }
  }

  const Slot* find(uint64_t key) const {
    size_t i = mix64(key) & mask_;
    while (true) {
      const Slot& s = slots_[i];
      if (s.key == key) return &s;
      if (s.key == 0) return nullptr;
      i = (i + 1) & mask_;
    }
  }

  template <class F>
  void for_each(F&& f) const {
    for (const Slot& s : slots_)
      if (s.key) f(s);
  }

 private:
  static size_t capacity_for(size_t expected) {
    size_t cap = 16;
    while (cap * 3 / 4 < expected) cap <<= 1;
    return cap;
  }
  void rehash(size_t cap) {
    slots_.assign(cap, Slot{});
    mask_ = cap - 1;
    limit_ = cap * 3 / 4;
    count_ = 0;
  }
  void grow() {
    std::vector<Slot> old;
    old.swap(slots_);
    rehash((mask_ + 1) * 2);
    for (const Slot& s : old)
      if (s.key) {
        size_t i = mix64(s.key) & mask_;
        while (slots_[i].key) i = (i + 1) & mask_;
        slots_[i] = s;
        ++count_;
      }
  }

  std::vector<Slot> slots_;
  size_t mask_ = 0, count_ = 0, limit_ = 0;
};

struct CutScratch {
  SiteStatMap stats;
  std::vector<int32_t> cover;
};

}  // namespace detail

// Quadratic-time reference: for every interior t, rebuild the visited-before
// set incrementally and scan the future for a shared site.
template <int D>
inline CutPointSet<D> cut_points_naive(const LatticePath<D>& path) {
  CutPointSet<D> out;
  size_t L = path.num_steps();
  if (L < 2) return out;

  std::unordered_map<uint64_t, uint32_t> counts;
  counts.reserve(2 * L);
  for (const auto& s : path.sites) ++counts[pack_site<D>(s)];

  SiteSet prefix(2 * L);
  for (size_t t = 1; t < L; ++t) {
    prefix.insert(pack_site<D>(path.sites[t - 1]));
    if (counts[pack_site<D>(path.sites[t])] != 1) continue;
    bool disjoint = true;
    for (size_t u = t + 1; u <= L; ++u) {
      if (prefix.contains(pack_site<D>(path.sites[u]))) {
        disjoint = false;
        break;
      }
    }
    if (disjoint) {
      out.times.push_back((uint32_t)t);
      out.sites.push_back(path.sites[t]);
    }
  }
  return out;
}

// Linear-time detector: t is a cut time iff its site is single-visit and t is
// not strictly inside the (first, last) visit interval of any site. Interval
// coverage is accumulated with a difference array over time indices.
template <int D>
inline void cut_points_fast(const LatticePath<D>& path, CutPointSet<D>& out,
                            detail::CutScratch& scratch) {
  out.times.clear();
  out.sites.clear();
  size_t L = path.num_steps();
  if (L < 2) return;

  auto& stats = scratch.stats;
  stats.clear();
  for (size_t k = 0; k <= L; ++k) stats.record(pack_site<D>(path.sites[k]), (uint32_t)k);

  auto& cover = scratch.cover;
  cover.assign(L + 2, 0);
  stats.for_each([&](const detail::SiteStatMap::Slot& s) {
    if (s.count >= 2) {
      ++cover[s.first + 1];
      --cover[s.last];
    }
  });

  int32_t running = 0;
  for (size_t t = 1; t < L; ++t) {
    running += cover[t];
    if (running != 0) continue;
    const auto* slot = stats.find(pack_site<D>(path.sites[t]));
    if (slot->count != 1) continue;
    out.times.push_back((uint32_t)t);
    out.sites.push_back(path.sites[t]);
  }
}

template <int D>
inline CutPointSet<D> cut_points_fast(const LatticePath<D>& path) {
  CutPointSet<D> out;
  detail::CutScratch scratch;
  cut_points_fast<D>(path, out, scratch);
  return out;
}

// Targeted test of a single interior time index, sharing the definition with
// the naive detector but aborting early. `scratch` is cleared internally.
template <int D>
inline bool is_cut_time(const LatticePath<D>& path, size_t t, SiteSet& scratch) {
  size_t L = path.num_steps();
  if (t == 0 || t >= L) return false;
  uint64_t target = pack_site<D>(path.sites[t]);
  scratch.clear();
  for (size_t k = 0; k < t; ++k) {
    uint64_t key = pack_site<D>(path.sites[k]);
    if (key == target) return false;  // earlier visit of the site
    scratch.insert(key);
  }
  for (size_t u = t + 1; u <= L; ++u) {
    uint64_t key = pack_site<D>(path.sites[u]);
    if (key == target) return false;  // later visit of the site
    if (scratch.contains(key)) return false;
  }
  return true;
}

// Both paths must share their start site; the event holds when the two traces
// meet only at the shared start and each path visits the start exactly once.
template <int D>
inline bool nonintersection_occurred(const LatticePath<D>& p1, const LatticePath<D>& p2) {
  if (p1.sites.empty() || p2.sites.empty() || !(p1.start() == p2.start()))
    throw std::invalid_argument("nonintersection_occurred: paths must share a start site");
  uint64_t start = pack_site<D>(p1.start());

  SiteSet trace1(2 * p1.sites.size());
  size_t start_visits1 = 0;
  for (const auto& s : p1.sites) {
    uint64_t k = pack_site<D>(s);
    if (k == start) ++start_visits1;
    trace1.insert(k);
  }
  if (start_visits1 != 1) return false;

  size_t start_visits2 = 0;
  for (const auto& s : p2.sites) {
    uint64_t k = pack_site<D>(s);
    if (k == start) {
      if (++start_visits2 > 1) return false;
      continue;
    }
    if (trace1.contains(k)) return false;
  }
  return true;
}

// Distance from a point to the polyline interpolation of a lattice path.
template <int D>
inline double dist_to_trace(const RealPoint<D>& p, const LatticePath<D>& path) {
  double best = std::numeric_limits<double>::infinity();
  size_t L = path.num_steps();
  if (L == 0) return std::sqrt(sq_dist<D>(p, to_real<D>(path.sites[0])));
  for (size_t k = 0; k < L; ++k) {
    RealPoint<D> a = to_real<D>(path.sites[k]);
    RealPoint<D> b = to_real<D>(path.sites[k + 1]);
    double ab2 = 0, ap_ab = 0;
    for (int i = 0; i < D; ++i) {
      double e = b[i] - a[i];
      ab2 += e * e;
      ap_ab += (p[i] - a[i]) * e;
    }
    double s = ab2 > 0 ? ap_ab / ab2 : 0.0;
    if (s < 0) s = 0;
    if (s > 1) s = 1;
    double d2 = 0;
    for (int i = 0; i < D; ++i) {
      double q = a[i] + s * (b[i] - a[i]) - p[i];
      d2 += q * q;
    }
    if (d2 < best) best = d2;
  }
  return std::sqrt(best);
}

struct SeparationQuality {
  double delta = 0;        // e^{-m} * min(endpoint-to-other-trace distances)
  double dist_1_to_2 = 0;  // distance from p1's endpoint to p2's trace
  double dist_2_to_1 = 0;
};

// How well separated two walks stopped at the log-radius-m sphere are, on the
// unit scale of that sphere.
template <int D>
inline SeparationQuality separation_quality(const LatticePath<D>& p1, const LatticePath<D>& p2,
                                            double m) {
  if (p1.sites.empty() || p2.sites.empty())
    throw std::invalid_argument("separation_quality: empty path");
  SeparationQuality q;
  q.dist_1_to_2 = dist_to_trace<D>(to_real<D>(p1.end()), p2);
  q.dist_2_to_1 = dist_to_trace<D>(to_real<D>(p2.end()), p1);
  q.delta = std::exp(-m) * std::min(q.dist_1_to_2, q.dist_2_to_1);
  return q;
}

// ---------------------------------------------------------------------------
// Discrete cut balls.
//
// For a walk run to the exit of the log-radius-n origin ball and a continuum
// point z, anchor the ball at floor(e^n z). The event asks that the walk meet
// the open inner ball (log-radius 3n/4 by default), that the legs before the
// first entry to the closed inner ball and after the last exit be site
// disjoint, and that the middle stretch stay in the open envelope ball
// (log-radius 5n/6 by default).

template <int D>
struct CutBallEvent {
  bool occurred = false;
  bool hit_inner = false;
  bool legs_disjoint = false;
  bool envelope_ok = false;
  size_t a1 = 0, a2 = 0;  // first entry into / last exit from the closed inner ball
  LatticePoint<D> anchor{};
  double scale_n = 0;
  double inner_log_radius = 0;
  double envelope_log_radius = 0;
};

struct CutBallOptions {
  double inner_log_radius = -1;     // default 3n/4
  double envelope_log_radius = -1;  // default 5n/6
};

namespace detail {

// Membership in the closed lattice ball: the open ball plus its outer site
// boundary (sites adjacent to the open ball).
template <int D>
inline bool in_closed_ball(const LatticePoint<D>& x, const LatticePoint<D>& c, double r) {
  double sq = 0;
  for (int i = 0; i < D; ++i) {
    double d = (double)(x[i] - c[i]);
    sq += d * d;
  }
  if (sq < r * r) return true;
  double rp = r + 1;
  if (sq >= rp * rp) return false;
  for (int i = 0; i < D; ++i) {
    for (int64_t s : {(int64_t)-1, (int64_t)1}) {
      double q = 0;
      for (int j = 0; j < D; ++j) {
        double d = (double)(x[j] - c[j]) + (i == j ? (double)s : 0.0);
        q += d * d;
      }
      if (q < r * r) return true;
    }
  }
  return false;
}

}  // namespace detail

template <int D>
inline CutBallEvent<D> is_cut_ball_discrete(const LatticePath<D>& path, const RealPoint<D>& z,
                                            double n, CutBallOptions opts, SiteSet& scratch) {
  if (path.sites.size() < 2) throw std::invalid_argument("is_cut_ball_discrete: degenerate path");
  CutBallEvent<D> ev;
  ev.scale_n = n;
  ev.inner_log_radius = opts.inner_log_radius >= 0 ? opts.inner_log_radius : 0.75 * n;
  ev.envelope_log_radius = opts.envelope_log_radius >= 0 ? opts.envelope_log_radius : n * 5.0 / 6.0;
  ev.anchor = lattice_anchor<D>(z, n);

  const double r_inner = std::exp(ev.inner_log_radius);
  const double r_dom = std::exp(n);
  double anchor_norm = std::sqrt((double)ev.anchor.sq_norm());
  if (anchor_norm <= r_inner + 1.0)
    throw std::invalid_argument("is_cut_ball_discrete: origin inside closed inner ball");
  if (anchor_norm + r_inner + 1.0 > r_dom)
    throw std::invalid_argument("is_cut_ball_discrete: inner ball not inside the domain ball");

  const BallSpec<D> inner = BallSpec<D>::at(ev.anchor, ev.inner_log_radius);
  const BallSpec<D> envelope = BallSpec<D>::at(ev.anchor, ev.envelope_log_radius);

  size_t last = path.sites.size() - 1;
  constexpr size_t npos = std::numeric_limits<size_t>::max();
  size_t a1 = npos, a2 = npos;
  bool hit = false;
  for (size_t k = 0; k <= last; ++k) {
    const auto& s = path.sites[k];
    if (detail::in_closed_ball<D>(s, ev.anchor, r_inner)) {
      if (a1 == npos) a1 = k;
      a2 = k;
      if (!hit && inner.contains(s)) hit = true;
    }
  }
  ev.hit_inner = hit;
  if (a1 == npos) return ev;  // never near the ball: no event
  ev.a1 = a1;
  ev.a2 = a2;

  scratch.clear();
  for (size_t k = 0; k <= a1; ++k) scratch.insert(pack_site<D>(path.sites[k]));
  ev.legs_disjoint = true;
  for (size_t k = a2; k <= last; ++k) {
    if (scratch.contains(pack_site<D>(path.sites[k]))) {
      ev.legs_disjoint = false;
      break;
    }
  }

  ev.envelope_ok = true;
  for (size_t k = a1; k <= a2; ++k) {
    if (!envelope.contains(path.sites[k])) {
      ev.envelope_ok = false;
      break;
    }
  }

  ev.occurred = ev.hit_inner && ev.legs_disjoint && ev.envelope_ok;
  return ev;
}

template <int D>
inline CutBallEvent<D> is_cut_ball_discrete(const LatticePath<D>& path, const RealPoint<D>& z,
                                            double n, CutBallOptions opts = {}) {
  SiteSet scratch(path.sites.size() * 2);
  return is_cut_ball_discrete<D>(path, z, n, opts, scratch);
}

}  // namespace cutlab
