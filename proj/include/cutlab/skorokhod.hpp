#pragma once
// Coupling of a simple random walk and a Brownian motion by embedding.
//
// d independent coordinate Brownian motions X^j run on a uniform dt grid.
// Coordinate j emits a unit crossing at each successive first passage one
// full unit away from its value at the previous crossing; measuring from the
// crossed value (not the walk's integer level) makes the crossing signs
// independent fair coins, so the embedded walk is a simple random walk in
// law despite the grid overshoot. An i.i.d. uniform coordinate-choice
// sequence Z assigns walk steps to coordinates: the m-th walk step moves
// coordinate Z_m by the sign of that coordinate's next unconsumed crossing.
// Walk time is normalized to 1/d per edge: S(t) = walk after floor(t*d)
// steps and W(t) = (X^1(t),...,X^d(t)) then have matching coordinate
// covariances and compare at equal times without rescaling.
//
// S(t) can depend on crossings the grid has not produced yet (a coordinate's
// crossing clock runs behind or ahead of real time), so deviations
// |S(t) - W(t)| go through a deferred queue: each grid time waits until every
// coordinate has completed the crossings S(t) needs. The deviation window is
// t <= max(tau, T), where tau is the walk's exit time from radius e^{n+1} (in
// walk time units) and T is the Brownian exit time from the same sphere; an
// entry whose window membership is still undecidable at drain time is always
// inside the window (a stopping time that is not yet known exceeds the
// current grid time).
//
// Construction consumes one RngStream in a fixed order (per grid step: d
// Gaussian increments, then any due coordinate choices), is single-threaded,
// and the finished pair is immutable.

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <vector>

#include "cutlab/cut_ball_continuous.hpp"
#include "cutlab/cut_detect.hpp"
#include "cutlab/path.hpp"
#include "cutlab/rng.hpp"

namespace cutlab {

struct SkorokhodOptions {
  double dt = 0.01;      // grid resolution; values above 0.01 are rejected
  bool keep_paths = true;       // store the walk and a downsampled Brownian polyline
  bool keep_crossings = false;  // store per-coordinate crossing times and grid values
  // Storage stride for the Brownian polyline, in time units; 0 picks the
  // coarsest stride that still resolves ball-scale detection at scale n/4.
  double store_dt = 0;
  // Keep simulating until this many walk steps have been embedded even after
  // both exits; lets tests read fixed-step marginals off the walk.
  uint64_t min_steps = 0;
};

template <int D>
struct CoupledPair {
  double n = 0;         // domain log-radius: events live at radius e^n, exits at e^{n+1}
  double dt = 0;        // simulation grid
  double store_dt = 0;  // stride of the stored Brownian polyline

  // Embedded walk through its first site outside radius e^{n+1} (empty unless
  // keep_paths). walk_exit_scale is the step index of the first site outside
  // radius e^n, so sites[0..walk_exit_scale] is the walk stopped at scale n.
  LatticePath<D> walk;
  size_t walk_exit_scale = 0;

  // Downsampled Brownian polyline (empty unless keep_paths). The exact grid
  // samples at the first exits of radius e^n and e^{n+1} are always stored,
  // even when they fall off the stride; bm_exit_scale indexes the former, so
  // samples[0..bm_exit_scale] is the Brownian path stopped at scale n.
  std::vector<RealPoint<D>> bm;
  size_t bm_exit_scale = 0;

  // Coordinate selections, one per embedded walk step (empty unless keep_paths).
  std::vector<uint8_t> coord_choices;

  // Per-coordinate crossing record (empty unless keep_crossings): detection
  // times and the grid value of X^j at detection.
  std::array<std::vector<double>, D> crossing_times;
  std::array<std::vector<double>, D> crossing_values;

  double max_grid_step = 0;   // largest single-coordinate grid increment seen
  double max_deviation = 0;   // max_t |S(t) - W(t)| over the deviation window
  double tau_time = 0;        // walk exit from e^{n+1} in time units (steps / d)
  double exit_time = 0;       // Brownian exit from e^{n+1} on the grid
  uint64_t steps_total = 0;   // walk steps through the exit from e^{n+1}

  // The walk stopped at its first exit from radius e^n.
  LatticePath<D> walk_prefix() const {
    if (walk.sites.empty()) throw std::logic_error("CoupledPair: paths were not kept");
    return LatticePath<D>{{walk.sites.begin(), walk.sites.begin() + (ptrdiff_t)walk_exit_scale + 1}};
  }
  // The Brownian polyline stopped at its first exit from radius e^n.
  BrownianPath<D> bm_prefix() const {
    if (bm.empty()) throw std::logic_error("CoupledPair: paths were not kept");
    return BrownianPath<D>{store_dt, {bm.begin(), bm.begin() + (ptrdiff_t)bm_exit_scale + 1}};
  }
};

// Storage stride fine enough for cut-ball detection at scale n/4 blown up to
// radius e^n: the microscopic rule min(1e-4, e^{-n/2}/100) with space scaled
// by e^n and time by e^{2n}.
inline double coupled_store_dt(double n) {
  return std::min(1e-4 * std::exp(2.0 * n), std::exp(1.5 * n) / 100.0);
}

template <int D>
inline CoupledPair<D> skorokhod_embed(double n, RngStream& rng, SkorokhodOptions opts = {}) {
  static_assert(D == 2 || D == 3);
  if (!(n >= 1)) throw std::invalid_argument("skorokhod_embed: need n >= 1");
  if (!(opts.dt > 0) || opts.dt > 0.01)
    throw std::invalid_argument("skorokhod_embed: dt must lie in (0, 0.01]");

  CoupledPair<D> pair;
  pair.n = n;
  pair.dt = opts.dt;
  const double dt = opts.dt;
  const double sd = std::sqrt(dt);

  const double r_scale = std::exp(n), r_outer = std::exp(n + 1.0);
  const double r_scale_sq = r_scale * r_scale, r_outer_sq = r_outer * r_outer;
  // Lattice exit thresholds as in the plain walk sampler: leave the ball at
  // the first site with |site|^2 >= ceil(r^2).
  const int64_t walk_thr_scale = (int64_t)std::ceil(r_scale_sq);
  const int64_t walk_thr_outer = (int64_t)std::ceil(r_outer_sq);

  size_t store_stride = 1;
  if (opts.keep_paths) {
    double target = opts.store_dt > 0 ? opts.store_dt : coupled_store_dt(n);
    store_stride = (size_t)std::max(1.0, std::floor(target / dt));
    pair.store_dt = (double)store_stride * dt;
    pair.walk.sites.reserve((size_t)(r_outer_sq * 1.3) + 16);
    pair.bm.reserve((size_t)(r_outer_sq / (double)D / pair.store_dt * 1.3) + 16);
    pair.walk.sites.push_back(LatticePoint<D>{});
    pair.bm.push_back(RealPoint<D>{});
  }

  // Coordinate state.
  std::array<double, D> x{};            // Brownian coordinate values
  std::array<double, D> anchor{};       // value at the previous crossing
  std::array<int64_t, D> level{};       // integer walk level after completed crossings
  std::array<std::vector<int32_t>, D> vals;  // level history: vals[j][k] after k crossings
  for (int j = 0; j < D; ++j) {
    vals[j].reserve((size_t)(r_outer_sq / D) + 16);
    vals[j].push_back(0);
  }
  std::array<uint64_t, D> consumed{};   // crossings used by executed walk steps
  std::array<uint32_t, D> assigned{};   // crossings assigned by drawn choices: N^j(m_drawn)

  std::deque<uint8_t> choice_queue;     // drawn but not yet executed walk steps
  std::array<int64_t, D> pos{};         // walk position
  int64_t pos_sq = 0;
  uint64_t m_drawn = 0, m_exec = 0;

  bool walk_scale_exited = false, walk_outer_exited = false;
  bool bm_scale_exited = false, bm_outer_exited = false;
  bool walk_store_done = !opts.keep_paths, bm_store_done = !opts.keep_paths;

  struct DevEntry {
    double t;
    std::array<double, D> w;
    std::array<uint32_t, D> k;
  };
  std::deque<DevEntry> pending;
  double max_dev_sq = 0;

  uint64_t i = 0;  // grid step index
  while (true) {
    ++i;
    const double t = (double)i * dt;

    // 1. Gaussian increments and crossing detection.
    for (int j = 0; j < D; ++j) {
      double inc = sd * rng.next_normal();
      double mag = std::abs(inc);
      if (mag > pair.max_grid_step) pair.max_grid_step = mag;
      x[j] += inc;
      double excess = x[j] - anchor[j];
      if (excess >= 1.0 || excess <= -1.0) {
        if (excess >= 2.0 || excess <= -2.0)
          throw std::runtime_error(
              "skorokhod_embed: grid too coarse, a crossing jumped two unit levels");
        level[j] += excess > 0 ? 1 : -1;
        anchor[j] = x[j];
        vals[j].push_back((int32_t)level[j]);
        if (opts.keep_crossings) {
          pair.crossing_times[j].push_back(t);
          pair.crossing_values[j].push_back(x[j]);
        }
      }
    }

    // 2. Coordinate choices due by time t: S(t) has floor(t*d) steps.
    const uint64_t m_target = (uint64_t)(t * (double)D);
    while (m_drawn < m_target) {
      ++m_drawn;
      uint8_t j = (uint8_t)rng.next_below(D);
      ++assigned[j];
      choice_queue.push_back(j);
      if (opts.keep_paths) pair.coord_choices.push_back(j);
    }

    // 3. Execute walk steps in order while their crossings are available.
    while (!choice_queue.empty()) {
      int j = choice_queue.front();
      if (consumed[j] + 1 >= vals[j].size()) break;  // crossing not produced yet
      choice_queue.pop_front();
      ++consumed[j];
      int64_t nj = vals[j][consumed[j]];
      pos_sq += nj * nj - pos[j] * pos[j];
      pos[j] = nj;
      ++m_exec;
      if (!walk_store_done) {
        LatticePoint<D> site;
        for (int a = 0; a < D; ++a) site[a] = pos[a];
        pair.walk.sites.push_back(site);
      }
      if (!walk_scale_exited && pos_sq >= walk_thr_scale) {
        walk_scale_exited = true;
        pair.walk_exit_scale = m_exec;
      }
      if (!walk_outer_exited && pos_sq >= walk_thr_outer) {
        walk_outer_exited = true;
        pair.steps_total = m_exec;
        pair.tau_time = (double)m_exec / (double)D;
      }
      if (walk_outer_exited && m_exec >= opts.min_steps) walk_store_done = true;
    }

    // 4. Brownian exit bookkeeping and polyline storage.
    double w_sq = 0;
    for (int j = 0; j < D; ++j) w_sq += x[j] * x[j];
    bool force_store = false;
    if (!bm_scale_exited && w_sq >= r_scale_sq) {
      bm_scale_exited = true;
      force_store = true;
    }
    bool outer_now = false;
    if (!bm_outer_exited && w_sq >= r_outer_sq) {
      bm_outer_exited = true;
      pair.exit_time = t;
      force_store = true;
      outer_now = true;
    }
    if (!bm_store_done && (force_store || i % store_stride == 0)) {
      RealPoint<D> w;
      for (int j = 0; j < D; ++j) w[j] = x[j];
      pair.bm.push_back(w);
      if (bm_scale_exited && force_store && !outer_now) pair.bm_exit_scale = pair.bm.size() - 1;
      if (outer_now) {
        if (pair.bm_exit_scale == 0) pair.bm_exit_scale = pair.bm.size() - 1;
        bm_store_done = true;
      }
    }

    // 5. Queue the deviation at time t unless it is provably past the window.
    bool window_known = walk_outer_exited && bm_outer_exited;
    if (!window_known || t <= std::max(pair.tau_time, pair.exit_time)) {
      DevEntry entry;
      entry.t = t;
      for (int j = 0; j < D; ++j) {
        entry.w[j] = x[j];
        entry.k[j] = assigned[j];
      }
      pending.push_back(entry);
    }

    // 6. Drain every queued time whose walk value is now determined.
    while (!pending.empty()) {
      const DevEntry& front = pending.front();
      bool ready = true;
      for (int j = 0; j < D; ++j)
        if ((size_t)front.k[j] + 1 > vals[j].size()) {
          ready = false;
          break;
        }
      if (!ready) break;
      bool in_window = (!walk_outer_exited || front.t <= pair.tau_time) ||
                       (!bm_outer_exited || front.t <= pair.exit_time);
      if (in_window) {
        double dev_sq = 0;
        for (int j = 0; j < D; ++j) {
          double diff = (double)vals[j][front.k[j]] - front.w[j];
          dev_sq += diff * diff;
        }
        if (dev_sq > max_dev_sq) max_dev_sq = dev_sq;
      }
      pending.pop_front();
    }

    if (walk_outer_exited && bm_outer_exited && m_exec >= opts.min_steps && pending.empty()) break;
  }

  pair.max_deviation = std::sqrt(max_dev_sq);
  if (opts.keep_paths && pair.coord_choices.size() > pair.walk.num_steps())
    pair.coord_choices.resize(pair.walk.num_steps());
  return pair;
}

// Scores the same realization against both cut-ball notions at scale n: the
// lattice event on the embedded walk stopped at radius e^n and the blown-up
// continuous event on the Brownian polyline stopped there.
struct CutBallAgreement {
  bool discrete = false;
  bool continuous = false;
};

template <int D>
inline CutBallAgreement coupled_cutball_agreement(const CoupledPair<D>& pair,
                                                  const RealPoint<D>& z, double rho = 0.05) {
  CutBallAgreement out;
  LatticePath<D> walk = pair.walk_prefix();
  BrownianPath<D> bm = pair.bm_prefix();
  out.discrete = is_cut_ball_discrete<D>(walk, z, pair.n).occurred;
  out.continuous = is_cut_ball_continuous_upscaled<D>(bm, z, pair.n, rho).occurred;
  return out;
}

}  // namespace cutlab
