#pragma once
// Monte Carlo estimators for the scaling laws under study: non-intersection
// probabilities and their exponent, one- and two-point cut-site frequencies,
// cut-count moments, fine-grid ruin probabilities against the closed forms,
// half-line avoidance in the plane, and the ball/point transfer ratio.
//
// Every estimator derives per-trial randomness from (seed, kind, scale_index,
// trial_index) alone and writes per-trial results into preassigned slots, so
// outputs are identical for any worker count or schedule. Scratch state is
// thread-local and cleared per trial.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cutlab/brownian.hpp"
#include "cutlab/cut_detect.hpp"
#include "cutlab/fit.hpp"
#include "cutlab/parallel.hpp"
#include "cutlab/rng.hpp"
#include "cutlab/scan2d.hpp"
#include "cutlab/walk.hpp"

namespace cutlab {

// Stable stream-kind tags; renumbering rekeys every experiment.
enum StreamKind : uint64_t {
  kStreamNonintersection = 1,
  kStreamOnePoint = 2,
  kStreamTwoPoint = 3,
  kStreamMoments = 4,
  kStreamRuin = 5,
  kStreamBeurling = 6,
  kStreamTransfer = 7,
  kStreamCouple = 8,
  kStreamCutBall = 9,
  kStreamBoxL2 = 10,
  kStreamDimension = 11,
  kStreamTwoPointSweep = 12,
};

struct BinomialEstimate {
  uint64_t hits = 0;
  uint64_t trials = 0;
  double p_hat = 0;
  double stderr_value = 0;
  bool degenerate = false;  // all or none of the trials hit: stderr carries no information
};

inline BinomialEstimate binomial_estimate(uint64_t hits, uint64_t trials) {
  if (trials == 0) throw std::invalid_argument("binomial_estimate: zero trials");
  if (hits > trials) throw std::invalid_argument("binomial_estimate: hits exceed trials");
  BinomialEstimate e;
  e.hits = hits;
  e.trials = trials;
  e.p_hat = (double)hits / (double)trials;
  e.degenerate = hits == 0 || hits == trials;
  e.stderr_value = std::sqrt(e.p_hat * (1.0 - e.p_hat) / (double)trials);
  return e;
}

struct SampleStats {
  double mean = 0;
  double stderr_value = 0;
  uint64_t n = 0;
};

inline SampleStats sample_stats(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("sample_stats: empty sample");
  SampleStats s;
  s.n = xs.size();
  double sum = 0;
  for (double x : xs) sum += x;
  s.mean = sum / (double)s.n;
  if (s.n > 1) {
    double ss = 0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stderr_value = std::sqrt(ss / ((double)s.n - 1) / (double)s.n);
  }
  return s;
}

// Standard error of a difference of independent estimates.
inline double pooled_stderr(double a, double b) { return std::sqrt(a * a + b * b); }

namespace detail {

// Open-addressing site set with O(1) clearing via an epoch stamp. SiteSet
// zeroes its whole table on clear(), which is ruinous for a reused set whose
// capacity was grown once by a rare huge trial; here stale entries from past
// epochs act as empty slots instead.
class EpochSet {
 public:
  explicit EpochSet(size_t expected = 1024) { rehash(capacity_for(expected)); }

  void clear() {
    if (++epoch_ == 0) {  // stamp wrapped around: hard reset
      std::fill(slots_.begin(), slots_.end(), Slot{});
      epoch_ = 1;
    }
    count_ = 0;
  }

  size_t size() const { return count_; }

  bool insert(uint64_t key) {
    if (count_ >= limit_) grow();
    size_t i = mix64(key) & mask_;
    while (true) {
      Slot& s = slots_[i];
      bool live = s.epoch == epoch_ && s.key != 0;
      if (live && s.key == key) return false;
      if (!live) {
        s.key = key;
        s.epoch = epoch_;
        ++count_;
        return true;
      }
      i = (i + 1) & mask_;
    }
  }

  bool contains(uint64_t key) const {
    size_t i = mix64(key) & mask_;
    while (true) {
      const Slot& s = slots_[i];
      bool live = s.epoch == epoch_ && s.key != 0;
      if (live && s.key == key) return true;
      if (!live) return false;
      i = (i + 1) & mask_;
    }
  }

 private:
  struct Slot {
    uint64_t key = 0;
    uint32_t epoch = 0;
  };

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
    epoch_ = 1;
  }
  void grow() {
    std::vector<Slot> old;
    old.swap(slots_);
    uint32_t live_epoch = epoch_;
    rehash((mask_ + 1) * 2);
    for (const Slot& s : old)
      if (s.epoch == live_epoch && s.key != 0) insert(s.key);
  }

  std::vector<Slot> slots_;
  size_t mask_ = 0, limit_ = 0, count_ = 0;
  uint32_t epoch_ = 1;
};

// Single lattice step with the same direction convention as walk_until_exit.
template <int D>
inline void srw_step(LatticePoint<D>& x, RngStream& rng) {
  uint32_t dir = rng.next_below(2 * D);
  x[dir >> 1] += (dir & 1) ? 1 : -1;
}

inline bool bulk_ok(double norm, double floor_dist) {
  return norm >= floor_dist && 1.0 - norm >= floor_dist;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Non-intersection of two independent walks from the origin.

struct NonintersectionOptions {
  uint64_t trials = 100000;
  int workers = 1;
  uint32_t scale_index = 0;  // distinguishes sweep points under one seed
  // When nonzero both walks take exactly this many steps and m is ignored
  // (time-indexed variant; the default stops each walk on leaving radius e^m).
  uint64_t fixed_steps = 0;
};

// P{ two SRWs from 0, each stopped on exiting radius e^m, share only the
// origin and each visits it exactly once }.
template <int D>
inline BinomialEstimate estimate_nonintersection(double m, uint64_t seed,
                                                 NonintersectionOptions opt = {}) {
  if (m < 0) throw std::invalid_argument("estimate_nonintersection: m must be >= 0");
  if (opt.trials == 0) throw std::invalid_argument("estimate_nonintersection: zero trials");
  const double radius = std::exp(m);
  const int64_t thr = detail::int_sq_threshold(radius * radius);

  std::vector<uint8_t> outcome(opt.trials, 0);
  run_trials(opt.trials, opt.workers, [&](uint64_t t) {
    thread_local detail::EpochSet trace1(1 << 10), trace2(1 << 10);
    trace1.clear();
    trace2.clear();
    RngStream rng1(seed, stream_id_for(kStreamNonintersection, opt.scale_index, 2 * t));
    RngStream rng2(seed, stream_id_for(kStreamNonintersection, opt.scale_index, 2 * t + 1));

    const LatticePoint<D> origin{};
    const uint64_t origin_key = pack_site<D>(origin);
    LatticePoint<D> x1 = origin, x2 = origin;
    int64_t sq1 = 0, sq2 = 0;
    uint64_t steps1 = 0, steps2 = 0;
    bool alive1 = true, alive2 = true, fail = false;

    // Interleaved stepping detects any shared site as soon as the later of
    // the two visits happens, so a doomed pair aborts without finishing
    // either walk. Outcomes match scoring two fully sampled paths because
    // each walk's trajectory depends only on its own stream.
    auto advance = [&](LatticePoint<D>& x, int64_t& sq, uint64_t& steps, bool& alive,
                       detail::EpochSet& own, detail::EpochSet& other, RngStream& rng) {
      uint32_t dir = rng.next_below(2 * D);
      int j = (int)(dir >> 1);
      int64_t s = (dir & 1) ? 1 : -1;
      sq += 2 * s * x[j] + 1;
      x[j] += s;
      ++steps;
      uint64_t k = pack_site<D>(x);
      if (k == origin_key || other.contains(k)) {
        fail = true;
        return;
      }
      own.insert(k);
      if (opt.fixed_steps ? steps >= opt.fixed_steps : sq >= thr) alive = false;
    };

    while (!fail && (alive1 || alive2)) {
      if (alive1) advance(x1, sq1, steps1, alive1, trace1, trace2, rng1);
      if (!fail && alive2) advance(x2, sq2, steps2, alive2, trace2, trace1, rng2);
    }
    outcome[t] = fail ? 0 : 1;
  });

  uint64_t hits = 0;
  for (uint8_t o : outcome) hits += o;
  return binomial_estimate(hits, opt.trials);
}

template <int D>
struct XiSweepResult {
  std::vector<double> m_values;
  std::vector<BinomialEstimate> estimates;
  FitResult fit;  // log p_hat against m; slope estimates the negated exponent
};

// Runs the non-intersection estimator across scales and fits the decay rate.
template <int D>
inline XiSweepResult<D> xi_sweep(const std::vector<double>& m_values, uint64_t seed,
                                 NonintersectionOptions opt = {}) {
  if (m_values.size() < 3)
    throw std::invalid_argument("xi_sweep: need at least three scale points");
  XiSweepResult<D> out;
  out.m_values = m_values;
  std::vector<FitPoint> pts;
  for (size_t i = 0; i < m_values.size(); ++i) {
    NonintersectionOptions o = opt;
    o.scale_index = (uint32_t)i;
    auto est = estimate_nonintersection<D>(m_values[i], seed, o);
    if (est.hits == 0)
      throw std::runtime_error("xi_sweep: no surviving pairs at m = " +
                               std::to_string(m_values[i]));
    pts.push_back({m_values[i], std::log(est.p_hat)});
    out.estimates.push_back(est);
  }
  out.fit = fit_line(std::move(pts));
  return out;
}

// ---------------------------------------------------------------------------
// One-point cut-site frequency.

template <int D>
struct OnePointRow {
  RealPoint<D> z{};
  double n = 0;
  LatticePoint<D> site{};  // target lattice site, floor(e^n z)
  uint64_t trials = 0, hits = 0;
  double p_hat = 0, stderr_value = 0;
  bool degenerate = false;
};

struct OnePointOptions {
  uint64_t trials = 100000;
  int workers = 1;
  uint32_t scale_index = 0;
  // Minimum distance from the target point to both the origin and the unit
  // circle. Negative selects the default floor e^{-n/6}; small scales need an
  // explicit override because the default band is empty below n ~ 4.5.
  double bulk_floor = -1;
};

template <int D>
inline OnePointRow<D> estimate_one_point(const RealPoint<D>& z, double n, uint64_t seed,
                                         OnePointOptions opt = {}) {
  if (opt.trials == 0) throw std::invalid_argument("estimate_one_point: zero trials");
  const double floor_dist = opt.bulk_floor >= 0 ? opt.bulk_floor : std::exp(-n / 6.0);
  if (floor_dist <= 0) throw std::invalid_argument("estimate_one_point: bulk floor must be > 0");
  const double znorm = std::sqrt(sq_norm<D>(z));
  if (!detail::bulk_ok(znorm, floor_dist))
    throw std::invalid_argument("estimate_one_point: z outside the bulk band [" +
                                std::to_string(floor_dist) + ", " +
                                std::to_string(1.0 - floor_dist) + "] in radius");

  OnePointRow<D> row;
  row.z = z;
  row.n = n;
  row.site = lattice_anchor<D>(z, n);
  const uint64_t target_key = pack_site<D>(row.site);
  const BallSpec<D> domain = BallSpec<D>::origin(n);

  std::vector<uint8_t> outcome(opt.trials, 0);
  run_trials(opt.trials, opt.workers, [&](uint64_t t) {
    thread_local LatticePath<D> path;
    thread_local SiteSet scratch(1 << 12);
    path.sites.clear();
    RngStream rng(seed, stream_id_for(kStreamOnePoint, opt.scale_index, t));

    size_t visits = 0, visit_time = 0;
    walk_until_exit<D>(LatticePoint<D>{}, domain, rng, [&](const LatticePoint<D>& s) {
      if (pack_site<D>(s) == target_key) {
        ++visits;
        visit_time = path.sites.size();
      }
      path.sites.push_back(s);
    });
    // A cut point is visited exactly once; only those trials need the
    // disjointness pass.
    if (visits == 1 && is_cut_time<D>(path, visit_time, scratch)) outcome[t] = 1;
  });

  uint64_t hits = 0;
  for (uint8_t o : outcome) hits += o;
  auto est = binomial_estimate(hits, opt.trials);
  row.trials = est.trials;
  row.hits = est.hits;
  row.p_hat = est.p_hat;
  row.stderr_value = est.stderr_value;
  row.degenerate = est.degenerate;
  return row;
}

// ---------------------------------------------------------------------------
// Two-point joint cut-site frequency.

template <int D>
struct TwoPointRow {
  RealPoint<D> z{}, w{};
  double n = 0;
  uint64_t trials = 0, hits = 0;
  double p_hat = 0, stderr_value = 0;
  bool degenerate = false;
};

struct TwoPointOptions {
  uint64_t trials = 10000;
  int workers = 1;
  uint32_t scale_index = 0;
  double bulk_floor = -1;        // per-point band floor, as in OnePointOptions
  double separation_floor = -1;  // minimum |z-w|; negative selects e^{-n/6}
  bool require_dyadic_box = true;
};

namespace detail {

// Whether some dyadic cube contains both points while keeping distance at
// least twice its diameter from the origin and from the unit sphere.
template <int D>
inline bool common_dyadic_box_ok(const RealPoint<D>& z, const RealPoint<D>& w) {
  for (int level = 1; level <= 16; ++level) {
    const double h = std::ldexp(1.0, -level);
    bool same_cell = true;
    double near_sq = 0, far_sq = 0;
    for (int i = 0; i < D; ++i) {
      double ci = std::floor(z[i] / h);
      if (std::floor(w[i] / h) != ci) {
        same_cell = false;
        break;
      }
      double lo = ci * h, hi = lo + h;
      double nearest = lo > 0 ? lo : (hi < 0 ? -hi : 0.0);
      double farthest = std::max(std::abs(lo), std::abs(hi));
      near_sq += nearest * nearest;
      far_sq += farthest * farthest;
    }
    if (!same_cell) continue;
    const double diam = h * std::sqrt((double)D);
    if (std::sqrt(near_sq) >= 2 * diam && 1.0 - std::sqrt(far_sq) >= 2 * diam) return true;
  }
  return false;
}

}  // namespace detail

template <int D>
inline TwoPointRow<D> estimate_two_point(const RealPoint<D>& z, const RealPoint<D>& w, double n,
                                         uint64_t seed, TwoPointOptions opt = {}) {
  if (opt.trials == 0) throw std::invalid_argument("estimate_two_point: zero trials");
  const double floor_dist = opt.bulk_floor >= 0 ? opt.bulk_floor : std::exp(-n / 6.0);
  const double sep_floor = opt.separation_floor >= 0 ? opt.separation_floor : std::exp(-n / 6.0);
  if (floor_dist <= 0 || sep_floor <= 0)
    throw std::invalid_argument("estimate_two_point: floors must be > 0");
  if (!detail::bulk_ok(std::sqrt(sq_norm<D>(z)), floor_dist) ||
      !detail::bulk_ok(std::sqrt(sq_norm<D>(w)), floor_dist))
    throw std::invalid_argument("estimate_two_point: point outside the bulk band");
  if (std::sqrt(sq_dist<D>(z, w)) < sep_floor)
    throw std::invalid_argument("estimate_two_point: points closer than the separation floor");
  if (opt.require_dyadic_box && !detail::common_dyadic_box_ok<D>(z, w))
    throw std::invalid_argument(
        "estimate_two_point: no common dyadic box clear of the origin and the boundary");

  TwoPointRow<D> row;
  row.z = z;
  row.w = w;
  row.n = n;
  const uint64_t key_z = pack_site<D>(lattice_anchor<D>(z, n));
  const uint64_t key_w = pack_site<D>(lattice_anchor<D>(w, n));
  if (key_z == key_w)
    throw std::invalid_argument("estimate_two_point: points share a lattice site at this scale");
  const BallSpec<D> domain = BallSpec<D>::origin(n);

  std::vector<uint8_t> outcome(opt.trials, 0);
  run_trials(opt.trials, opt.workers, [&](uint64_t t) {
    thread_local LatticePath<D> path;
    thread_local SiteSet scratch(1 << 12);
    path.sites.clear();
    RngStream rng(seed, stream_id_for(kStreamTwoPoint, opt.scale_index, t));

    size_t visits_z = 0, visits_w = 0, time_z = 0, time_w = 0;
    walk_until_exit<D>(LatticePoint<D>{}, domain, rng, [&](const LatticePoint<D>& s) {
      uint64_t k = pack_site<D>(s);
      if (k == key_z) {
        ++visits_z;
        time_z = path.sites.size();
      } else if (k == key_w) {
        ++visits_w;
        time_w = path.sites.size();
      }
      path.sites.push_back(s);
    });
    if (visits_z == 1 && visits_w == 1 && is_cut_time<D>(path, time_z, scratch) &&
        is_cut_time<D>(path, time_w, scratch))
      outcome[t] = 1;
  });

  uint64_t hits = 0;
  for (uint8_t o : outcome) hits += o;
  auto est = binomial_estimate(hits, opt.trials);
  row.trials = est.trials;
  row.hits = est.hits;
  row.p_hat = est.p_hat;
  row.stderr_value = est.stderr_value;
  row.degenerate = est.degenerate;
  return row;
}

// ---------------------------------------------------------------------------
// Cut-count moments.

struct MomentRow {
  int64_t radius = 0;
  uint64_t trials = 0;
  double m1 = 0, m1_stderr = 0;  // E[M], M = number of cut points of the stopped walk
  double m2 = 0, m2_stderr = 0;  // E[M^2]
};

struct MomentOptions {
  uint64_t trials = 10000;
  int workers = 1;
  uint32_t scale_index = 0;
};

template <int D>
inline MomentRow estimate_cut_count_moments(int64_t radius, uint64_t seed,
                                            MomentOptions opt = {}) {
  if (radius < 1) throw std::invalid_argument("estimate_cut_count_moments: radius must be >= 1");
  if (opt.trials == 0) throw std::invalid_argument("estimate_cut_count_moments: zero trials");
  const BallSpec<D> domain = BallSpec<D>::origin(std::log((double)radius));

  std::vector<uint32_t> counts(opt.trials, 0);
  run_trials(opt.trials, opt.workers, [&](uint64_t t) {
    thread_local LatticePath<D> path;
    thread_local CutPointSet<D> cuts;
    thread_local detail::CutScratch scratch;
    RngStream rng(seed, stream_id_for(kStreamMoments, opt.scale_index, t));
    sample_srw_until_exit<D>(LatticePoint<D>{}, domain, rng, path);
    cut_points_fast<D>(path, cuts, scratch);
    counts[t] = (uint32_t)cuts.times.size();
  });

  std::vector<double> m(opt.trials), msq(opt.trials);
  for (uint64_t t = 0; t < opt.trials; ++t) {
    m[t] = (double)counts[t];
    msq[t] = m[t] * m[t];
  }
  auto s1 = sample_stats(m);
  auto s2 = sample_stats(msq);
  MomentRow row;
  row.radius = radius;
  row.trials = opt.trials;
  row.m1 = s1.mean;
  row.m1_stderr = s1.stderr_value;
  row.m2 = s2.mean;
  row.m2_stderr = s2.stderr_value;
  return row;
}

// ---------------------------------------------------------------------------
// Fine-grid ruin probabilities against the closed forms.

struct RuinRow {
  int dim = 0;
  double k = 0, l = 0;
  double dt = 0;
  uint64_t trials = 0, hits = 0;
  double p_hat = 0, stderr_value = 0;
  double p_formula = 0;
};

struct RuinOptions {
  uint64_t trials = 100000;
  int workers = 1;
  uint32_t scale_index = 0;
  double dt = 4e-4;
};

template <int D>
inline RuinRow gamblers_ruin_check(double k, double l, uint64_t seed, RuinOptions opt = {}) {
  if (k <= 0 || l <= 0) throw std::invalid_argument("gamblers_ruin_check: k, l must be > 0");
  if (opt.trials == 0) throw std::invalid_argument("gamblers_ruin_check: zero trials");
  RealPoint<D> start{};
  start[0] = 1.0;  // on the unit sphere, between radii e^{-l} and e^{k}

  std::vector<uint8_t> outcome(opt.trials, 0);
  run_trials(opt.trials, opt.workers, [&](uint64_t t) {
    RngStream rng(seed, stream_id_for(kStreamRuin, opt.scale_index, t));
    outcome[t] = annulus_first_exit<D>(start, -l, k, opt.dt, rng).hit_inner ? 1 : 0;
  });

  uint64_t hits = 0;
  for (uint8_t o : outcome) hits += o;
  auto est = binomial_estimate(hits, opt.trials);
  RuinRow row;
  row.dim = D;
  row.k = k;
  row.l = l;
  row.dt = opt.dt;
  row.trials = est.trials;
  row.hits = est.hits;
  row.p_hat = est.p_hat;
  row.stderr_value = est.stderr_value;
  row.p_formula = ruin_formula(D, k, l);
  return row;
}

// ---------------------------------------------------------------------------
// Plane walk escaping a straight lattice ray (half-line avoidance).

struct BeurlingRow {
  double x_dist = 0, r = 0;
  uint64_t trials = 0, hits = 0;
  double p_hat = 0, stderr_value = 0;
  bool degenerate = false;
};

struct BeurlingOptions {
  uint64_t trials = 10000;
  int workers = 1;
  uint32_t scale_index = 0;
};

// P{ SRW from (0, round(x_dist)) leaves radius e^r before touching the ray
// {(i,0) : 0 <= i <= e^r} }. Planar only: the ray is not a barrier in d=3.
inline BeurlingRow beurling_escape_estimate(double x_dist, double r, uint64_t seed,
                                            BeurlingOptions opt = {}) {
  if (x_dist < 0) throw std::invalid_argument("beurling_escape_estimate: x_dist must be >= 0");
  if (opt.trials == 0) throw std::invalid_argument("beurling_escape_estimate: zero trials");
  const double radius = std::exp(r);
  const int64_t y0 = (int64_t)std::llround(x_dist);
  if ((double)(y0 * y0) >= radius * radius)
    throw std::invalid_argument("beurling_escape_estimate: start outside radius e^r");
  const int64_t thr = detail::int_sq_threshold(radius * radius);
  const int64_t ray_end = (int64_t)std::floor(radius);
  auto on_ray = [&](const LatticePoint<2>& s) {
    return s[1] == 0 && s[0] >= 0 && s[0] <= ray_end;
  };

  BeurlingRow row;
  row.x_dist = x_dist;
  row.r = r;
  const LatticePoint<2> start{0, y0};
  if (on_ray(start)) {  // already absorbed: escape has probability zero
    auto est = binomial_estimate(0, opt.trials);
    row.trials = est.trials;
    row.p_hat = 0;
    row.stderr_value = 0;
    row.degenerate = true;
    return row;
  }

  std::vector<uint8_t> outcome(opt.trials, 0);
  run_trials(opt.trials, opt.workers, [&](uint64_t t) {
    RngStream rng(seed, stream_id_for(kStreamBeurling, opt.scale_index, t));
    LatticePoint<2> x = start;
    int64_t sq = x.sq_norm();
    while (true) {
      detail::srw_step<2>(x, rng);
      if (x[1] == 0 && x[0] >= 0 && x[0] <= ray_end) break;  // absorbed
      sq = x.sq_norm();
      if (sq >= thr) {
        outcome[t] = 1;  // escaped
        break;
      }
    }
  });

  uint64_t hits = 0;
  for (uint8_t o : outcome) hits += o;
  auto est = binomial_estimate(hits, opt.trials);
  row.trials = est.trials;
  row.hits = est.hits;
  row.p_hat = est.p_hat;
  row.stderr_value = est.stderr_value;
  row.degenerate = est.degenerate;
  return row;
}

// ---------------------------------------------------------------------------
// Cut-ball frequency at one bulk point.

template <int D>
struct CutBallProbRow {
  RealPoint<D> z{};
  double n = 0;
  uint64_t trials = 0, hits = 0;
  double p_hat = 0, stderr_value = 0;
  bool degenerate = false;
};

struct CutBallProbOptions {
  uint64_t trials = 10000;
  int workers = 1;
  uint32_t scale_index = 0;
  double bulk_floor = -1;  // negative selects e^{-n/6}
  CutBallOptions ball;
};

// P{ the walk stopped on leaving radius e^n has a cut ball at z }.
template <int D>
inline CutBallProbRow<D> estimate_cutball_probability(const RealPoint<D>& z, double n,
                                                      uint64_t seed,
                                                      CutBallProbOptions opt = {}) {
  if (opt.trials == 0) throw std::invalid_argument("estimate_cutball_probability: zero trials");
  const double floor_dist = opt.bulk_floor >= 0 ? opt.bulk_floor : std::exp(-n / 6.0);
  if (!detail::bulk_ok(std::sqrt(sq_norm<D>(z)), floor_dist))
    throw std::invalid_argument("estimate_cutball_probability: z outside the bulk band");
  {
    // Preflight the ball geometry on a stub path so bad anchors abort before
    // any sampling rather than inside a worker.
    LatticePath<D> stub;
    stub.sites.resize(2);
    stub.sites[1][0] = 1;
    SiteSet scratch(8);
    (void)is_cut_ball_discrete<D>(stub, z, n, opt.ball, scratch);
  }

  CutBallProbRow<D> row;
  row.z = z;
  row.n = n;
  const BallSpec<D> domain = BallSpec<D>::origin(n);
  std::vector<uint8_t> outcome(opt.trials, 0);
  run_trials(opt.trials, opt.workers, [&](uint64_t t) {
    thread_local LatticePath<D> path;
    thread_local SiteSet scratch(1 << 12);
    RngStream rng(seed, stream_id_for(kStreamCutBall, opt.scale_index, t));
    sample_srw_until_exit<D>(LatticePoint<D>{}, domain, rng, path);
    scratch.clear();
    outcome[t] = is_cut_ball_discrete<D>(path, z, n, opt.ball, scratch).occurred ? 1 : 0;
  });

  uint64_t hits = 0;
  for (uint8_t o : outcome) hits += o;
  auto est = binomial_estimate(hits, opt.trials);
  row.trials = est.trials;
  row.hits = est.hits;
  row.p_hat = est.p_hat;
  row.stderr_value = est.stderr_value;
  row.degenerate = est.degenerate;
  return row;
}

// ---------------------------------------------------------------------------
// Transfer ratio: cut-ball frequency over cut-point frequency, shared paths.

template <int D>
struct TransferRow {
  RealPoint<D> z{};
  double n = 0;
  uint64_t trials = 0, cut_hits = 0, ball_hits = 0;
  double f_hat = 0;         // P_hat(cut ball) / P_hat(cut site)
  double stderr_value = 0;  // cluster bootstrap over trials
  bool defined = false;     // false when the denominator has no hits
};

struct TransferOptions {
  uint64_t trials = 10000;
  int workers = 1;
  uint32_t scale_index = 0;
  double bulk_floor = -1;
  uint32_t bootstrap_rounds = 400;
  CutBallOptions ball;
};

template <int D>
inline TransferRow<D> estimate_transfer_ratio(const RealPoint<D>& z, double n, uint64_t seed,
                                              TransferOptions opt = {}) {
  if (opt.trials == 0) throw std::invalid_argument("estimate_transfer_ratio: zero trials");
  const double floor_dist = opt.bulk_floor >= 0 ? opt.bulk_floor : std::exp(-n / 6.0);
  if (!detail::bulk_ok(std::sqrt(sq_norm<D>(z)), floor_dist))
    throw std::invalid_argument("estimate_transfer_ratio: z outside the bulk band");

  TransferRow<D> row;
  row.z = z;
  row.n = n;
  const LatticePoint<D> site = lattice_anchor<D>(z, n);
  const uint64_t target_key = pack_site<D>(site);
  const BallSpec<D> domain = BallSpec<D>::origin(n);

  // Per-trial pair of indicators (bit 0: cut site, bit 1: cut ball); scoring
  // both events on one path cancels most of the MC noise in the ratio.
  std::vector<uint8_t> outcome(opt.trials, 0);
  run_trials(opt.trials, opt.workers, [&](uint64_t t) {
    thread_local LatticePath<D> path;
    thread_local SiteSet scratch(1 << 12);
    path.sites.clear();
    RngStream rng(seed, stream_id_for(kStreamTransfer, opt.scale_index, t));

    size_t visits = 0, visit_time = 0;
    walk_until_exit<D>(LatticePoint<D>{}, domain, rng, [&](const LatticePoint<D>& s) {
      if (pack_site<D>(s) == target_key) {
        ++visits;
        visit_time = path.sites.size();
      }
      path.sites.push_back(s);
    });
    uint8_t bits = 0;
    if (visits == 1 && is_cut_time<D>(path, visit_time, scratch)) bits |= 1;
    scratch.clear();
    if (is_cut_ball_discrete<D>(path, z, n, opt.ball, scratch).occurred) bits |= 2;
    outcome[t] = bits;
  });

  for (uint8_t o : outcome) {
    row.cut_hits += o & 1;
    row.ball_hits += (o >> 1) & 1;
  }
  row.trials = opt.trials;
  row.defined = row.cut_hits > 0;
  if (!row.defined) return row;
  row.f_hat = (double)row.ball_hits / (double)row.cut_hits;

  // Resample trials (not events): the two counts are stored per trial, so the
  // bootstrap preserves their correlation.
  RngStream boot(seed, stream_id_for(kStreamTransfer, opt.scale_index, ~uint64_t{0}));
  std::vector<double> ratios;
  ratios.reserve(opt.bootstrap_rounds);
  for (uint32_t b = 0; b < opt.bootstrap_rounds; ++b) {
    uint64_t cuts = 0, balls = 0;
    for (uint64_t i = 0; i < opt.trials; ++i) {
      uint8_t o = outcome[boot.next_below(opt.trials)];
      cuts += o & 1;
      balls += (o >> 1) & 1;
    }
    if (cuts > 0) ratios.push_back((double)balls / (double)cuts);
  }
  if (ratios.size() > 1) {
    double mean = 0;
    for (double v : ratios) mean += v;
    mean /= (double)ratios.size();
    double ss = 0;
    for (double v : ratios) ss += (v - mean) * (v - mean);
    row.stderr_value = std::sqrt(ss / ((double)ratios.size() - 1));
  }
  return row;
}

}  // namespace cutlab
