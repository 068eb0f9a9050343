#pragma once
// Planar bulk campaigns built on ScanEngine2D.
//
// Both campaigns here score every sampled walk against many targets at once:
// the two-point sweep scores axis-aligned site pairs at several separations
// inside one dyadic box, and the transfer-invariance run scores cut-site and
// cut-ball events at two base points. Targets are replicated across the eight
// lattice symmetries (the walk law is invariant under them), which multiplies
// the effective sample without extra walks; per-trial counts are therefore
// correlated, and all uncertainty comes from trial-level (cluster) statistics
// rather than per-target binomial formulas.

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cutlab/estimators.hpp"
#include "cutlab/scan2d.hpp"

namespace cutlab {

namespace detail {

// The eight symmetries of the square lattice fixing the origin.
inline RealPoint<2> dihedral_apply(int g, const RealPoint<2>& p) {
  double x = (g & 4) ? p[1] : p[0];
  double y = (g & 4) ? p[0] : p[1];
  if (g & 1) x = -x;
  if (g & 2) y = -y;
  return RealPoint<2>{x, y};
}

// Distinguishes engine configurations across campaign invocations so that
// thread-local engines reconfigure exactly once per campaign per thread.
inline uint64_t next_campaign_token() {
  static std::atomic<uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Two-point separation sweep.

struct TwoPointSweepRow {
  double delta = 0;          // separation between the paired points
  uint64_t pair_slots = 0;   // scored pairs per trial at this separation
  uint64_t trials = 0;
  uint64_t hits = 0;         // joint cut events summed over trials and slots
  double p_hat = 0;          // hits / (trials * pair_slots)
  double stderr_value = 0;   // cluster stderr over trials
};

struct TwoPointSweepResult {
  double n = 0;
  uint64_t trials = 0;
  std::vector<TwoPointSweepRow> rows;
  FitResult fit;  // log p_hat vs log delta; interval from the cluster bootstrap
};

struct TwoPointSweepOptions {
  uint64_t trials = 200000;
  int workers = 1;
  uint32_t scale_index = 0;
  uint32_t bootstrap_rounds = 400;
  int centers_per_axis = 3;
};

// Joint cut-site frequency as a function of separation, inside the dyadic box
// [3/8,1/2] x [1/4,3/8] (clear of the origin and the unit circle by at least
// twice its diameter). Separations may sit far below the single-pair
// bulk-separation default, which is the point: the sweep resolves the decay.
inline TwoPointSweepResult two_point_sweep_2d(double n, const std::vector<double>& deltas,
                                              uint64_t seed, TwoPointSweepOptions opt = {}) {
  constexpr double kLo0 = 3.0 / 8, kHi0 = 4.0 / 8, kLo1 = 2.0 / 8, kHi1 = 3.0 / 8;
  if (deltas.size() < 3)
    throw std::invalid_argument("two_point_sweep_2d: need at least three separations");
  if (opt.trials == 0 || opt.centers_per_axis < 1)
    throw std::invalid_argument("two_point_sweep_2d: bad trial or grid parameters");
  const double scale = std::exp(n);
  for (double d : deltas) {
    if (d <= 0 || d >= kHi0 - kLo0)
      throw std::invalid_argument("two_point_sweep_2d: separation outside the box");
    if (d * scale < 2.0)
      throw std::invalid_argument("two_point_sweep_2d: separation below two lattice units");
  }

  // Pair slots: per separation, a grid of pair centers, two pair axes, and
  // the eight symmetry images of each pair.
  const size_t nd = deltas.size();
  const int G = opt.centers_per_axis;
  std::vector<std::vector<std::array<LatticePoint<2>, 2>>> slots(nd);
  for (size_t di = 0; di < nd; ++di) {
    const double delta = deltas[di];
    for (int axis = 0; axis < 2; ++axis) {
      double lo[2] = {kLo0, kLo1}, hi[2] = {kHi0, kHi1};
      lo[axis] += delta / 2;
      hi[axis] -= delta / 2;
      for (int i = 0; i < G; ++i) {
        for (int j = 0; j < G; ++j) {
          RealPoint<2> c{lo[0] + (i + 0.5) * (hi[0] - lo[0]) / G,
                         lo[1] + (j + 0.5) * (hi[1] - lo[1]) / G};
          RealPoint<2> z = c, w = c;
          z[axis] -= delta / 2;
          w[axis] += delta / 2;
          for (int g = 0; g < 8; ++g) {
            auto az = lattice_anchor<2>(detail::dihedral_apply(g, z), n);
            auto aw = lattice_anchor<2>(detail::dihedral_apply(g, w), n);
            if (az == aw)
              throw std::logic_error("two_point_sweep_2d: pair collapsed to one site");
            slots[di].push_back({az, aw});
          }
        }
      }
    }
  }

  const BallSpec<2> domain = BallSpec<2>::origin(n);
  const uint64_t token = detail::next_campaign_token();
  std::vector<uint16_t> counts(opt.trials * nd, 0);
  run_trials(opt.trials, opt.workers, [&](uint64_t t) {
    thread_local ScanEngine2D eng;
    thread_local uint64_t have_token = 0;
    if (have_token != token) {
      eng.configure(n, {}, {});
      have_token = token;
    }
    RngStream rng(seed, stream_id_for(kStreamTwoPointSweep, opt.scale_index, t));
    eng.begin_trial();
    walk_until_exit<2>(LatticePoint<2>{}, domain, rng,
                       [&](const LatticePoint<2>& s) { eng.record(s); });
    eng.finalize();
    for (size_t di = 0; di < nd; ++di) {
      uint16_t c = 0;
      for (const auto& pr : slots[di])
        if (eng.is_cut_site(pr[0]) && eng.is_cut_site(pr[1])) ++c;
      counts[t * nd + di] = c;
    }
  });

  TwoPointSweepResult out;
  out.n = n;
  out.trials = opt.trials;
  std::vector<FitPoint> pts;
  for (size_t di = 0; di < nd; ++di) {
    TwoPointSweepRow row;
    row.delta = deltas[di];
    row.pair_slots = slots[di].size();
    row.trials = opt.trials;
    double sum = 0, sumsq = 0;
    for (uint64_t t = 0; t < opt.trials; ++t) {
      double c = counts[t * nd + di];
      sum += c;
      sumsq += c * c;
    }
    row.hits = (uint64_t)sum;
    const double T = (double)opt.trials, S = (double)row.pair_slots;
    row.p_hat = sum / (T * S);
    if (opt.trials > 1) {
      double var = (sumsq - sum * sum / T) / (T - 1);
      row.stderr_value = std::sqrt(var / T) / S;
    }
    out.rows.push_back(row);
    if (row.hits == 0)
      throw std::runtime_error("two_point_sweep_2d: no joint hits at separation " +
                               std::to_string(row.delta) + "; raise trials");
    pts.push_back({std::log(row.delta), std::log(row.p_hat)});
  }

  // Slope and r2 from the pooled points; the interval resamples whole trials
  // so the cross-slot correlation within a walk is respected.
  auto base = detail::ols(pts);
  out.fit.slope = base.slope;
  out.fit.intercept = base.intercept;
  out.fit.n_points = pts.size();
  double ss_res = 0, ss_tot = 0, my = 0;
  for (const auto& p : pts) my += p.y;
  my /= (double)pts.size();
  for (const auto& p : pts) {
    double e = p.y - (base.intercept + base.slope * p.x);
    ss_res += e * e;
    ss_tot += (p.y - my) * (p.y - my);
  }
  out.fit.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;

  RngStream boot(seed, stream_id_for(kStreamTwoPointSweep, opt.scale_index, ~uint64_t{0}));
  std::vector<double> slopes;
  slopes.reserve(opt.bootstrap_rounds);
  std::vector<double> bsum(nd);
  std::vector<FitPoint> bpts;
  for (uint32_t b = 0; b < opt.bootstrap_rounds; ++b) {
    bool ok = false;
    for (int attempt = 0; attempt < 8 && !ok; ++attempt) {
      std::fill(bsum.begin(), bsum.end(), 0.0);
      for (uint64_t i = 0; i < opt.trials; ++i) {
        uint64_t t = boot.next_below(opt.trials);
        for (size_t di = 0; di < nd; ++di) bsum[di] += counts[t * nd + di];
      }
      ok = true;
      for (double s : bsum)
        if (s <= 0) ok = false;
    }
    if (!ok) continue;  // vanishing resample; drop the round
    bpts.clear();
    for (size_t di = 0; di < nd; ++di)
      bpts.push_back({std::log(deltas[di]),
                      std::log(bsum[di] / ((double)opt.trials * (double)slots[di].size()))});
    slopes.push_back(detail::ols(bpts).slope);
  }
  if (slopes.size() < 50)
    throw std::runtime_error("two_point_sweep_2d: bootstrap starved; raise trials");
  std::sort(slopes.begin(), slopes.end());
  auto q = [&](double p) {
    double idx = p * (double)(slopes.size() - 1);
    size_t lo = (size_t)idx;
    size_t hi = std::min(lo + 1, slopes.size() - 1);
    double f = idx - (double)lo;
    return (1 - f) * slopes[lo] + f * slopes[hi];
  };
  out.fit.slope_lo = q(0.025);
  out.fit.slope_hi = q(0.975);
  return out;
}

// ---------------------------------------------------------------------------
// Transfer-ratio invariance across two bulk points.

struct TransferInvarianceResult {
  double n = 0;
  uint64_t trials = 0;
  std::array<TransferRow<2>, 2> points;  // each pooled over its 8 symmetry images
  double ratio = 0;                      // f_hat(point 0) / f_hat(point 1)
  double ratio_stderr = 0;               // cluster bootstrap
  double rel_stderr = 0;
  bool defined = false;
};

struct TransferInvarianceOptions {
  uint64_t trials = 350000;
  int workers = 1;
  uint32_t scale_index = 0;
  uint32_t bootstrap_rounds = 400;
  double bulk_floor = -1;
  CutBallOptions ball;
};

inline TransferInvarianceResult transfer_invariance_2d(const RealPoint<2>& z1,
                                                       const RealPoint<2>& z2, double n,
                                                       uint64_t seed,
                                                       TransferInvarianceOptions opt = {}) {
  if (opt.trials == 0) throw std::invalid_argument("transfer_invariance_2d: zero trials");
  const double floor_dist = opt.bulk_floor >= 0 ? opt.bulk_floor : std::exp(-n / 6.0);
  const double inner_log = opt.ball.inner_log_radius >= 0 ? opt.ball.inner_log_radius : 0.75 * n;
  const double env_log =
      opt.ball.envelope_log_radius >= 0 ? opt.ball.envelope_log_radius : n * 5.0 / 6.0;
  const std::array<RealPoint<2>, 2> base{z1, z2};
  for (const auto& z : base)
    if (!detail::bulk_ok(std::sqrt(sq_norm<2>(z)), floor_dist))
      throw std::invalid_argument("transfer_invariance_2d: point outside the bulk band");

  std::array<std::array<LatticePoint<2>, 8>, 2> anchors;
  std::vector<BallSpec<2>> inner, envelope;
  for (int q = 0; q < 2; ++q) {
    for (int g = 0; g < 8; ++g) {
      auto a = lattice_anchor<2>(detail::dihedral_apply(g, base[q]), n);
      anchors[q][g] = a;
      inner.push_back(BallSpec<2>::at(a, inner_log));
      envelope.push_back(BallSpec<2>::at(a, env_log));
    }
  }

  const BallSpec<2> domain = BallSpec<2>::origin(n);
  const uint64_t token = detail::next_campaign_token();
  // Configure once up front too, so invalid geometry throws before any work.
  {
    ScanEngine2D probe;
    probe.configure(n, inner, envelope);
  }

  std::vector<std::array<uint8_t, 4>> counts(opt.trials, {0, 0, 0, 0});
  run_trials(opt.trials, opt.workers, [&](uint64_t t) {
    thread_local ScanEngine2D eng;
    thread_local uint64_t have_token = 0;
    if (have_token != token) {
      eng.configure(n, inner, envelope);
      have_token = token;
    }
    RngStream rng(seed, stream_id_for(kStreamTransfer, opt.scale_index, t));
    eng.begin_trial();
    walk_until_exit<2>(LatticePoint<2>{}, domain, rng,
                       [&](const LatticePoint<2>& s) { eng.record(s); });
    eng.finalize();
    std::array<uint8_t, 4> c{0, 0, 0, 0};
    for (int q = 0; q < 2; ++q) {
      for (int g = 0; g < 8; ++g) {
        if (eng.is_cut_site(anchors[q][g])) ++c[2 * q];
        if (eng.ball_occurred((size_t)(q * 8 + g))) ++c[2 * q + 1];
      }
    }
    counts[t] = c;
  });

  TransferInvarianceResult out;
  out.n = n;
  out.trials = opt.trials;
  std::array<uint64_t, 4> sums{0, 0, 0, 0};
  for (const auto& c : counts)
    for (int i = 0; i < 4; ++i) sums[i] += c[i];
  for (int q = 0; q < 2; ++q) {
    auto& row = out.points[q];
    row.z = base[q];
    row.n = n;
    row.trials = opt.trials;
    row.cut_hits = sums[2 * q];
    row.ball_hits = sums[2 * q + 1];
    row.defined = row.cut_hits > 0;
    if (row.defined) row.f_hat = (double)row.ball_hits / (double)row.cut_hits;
  }
  out.defined = out.points[0].defined && out.points[1].defined && out.points[1].ball_hits > 0 &&
                out.points[0].ball_hits > 0;
  if (!out.defined) return out;
  out.ratio = out.points[0].f_hat / out.points[1].f_hat;

  RngStream boot(seed, stream_id_for(kStreamTransfer, opt.scale_index, ~uint64_t{0}));
  std::vector<double> ratios, f0s, f1s;
  ratios.reserve(opt.bootstrap_rounds);
  for (uint32_t b = 0; b < opt.bootstrap_rounds; ++b) {
    std::array<uint64_t, 4> s{0, 0, 0, 0};
    for (uint64_t i = 0; i < opt.trials; ++i) {
      const auto& c = counts[boot.next_below(opt.trials)];
      for (int k = 0; k < 4; ++k) s[k] += c[k];
    }
    if (s[0] == 0 || s[2] == 0 || s[3] == 0) continue;
    double f0 = (double)s[1] / (double)s[0], f1 = (double)s[3] / (double)s[2];
    f0s.push_back(f0);
    f1s.push_back(f1);
    ratios.push_back(f0 / f1);
  }
  auto sd = [](const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = 0;
    for (double x : v) m += x;
    m /= (double)v.size();
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / ((double)v.size() - 1));
  };
  out.points[0].stderr_value = sd(f0s);
  out.points[1].stderr_value = sd(f1s);
  out.ratio_stderr = sd(ratios);
  out.rel_stderr = out.ratio > 0 ? out.ratio_stderr / out.ratio : 0;
  return out;
}

}  // namespace cutlab
