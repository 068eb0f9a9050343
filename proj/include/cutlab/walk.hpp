#pragma once
// Simple-random-walk samplers. The exit sampler is the hot loop of the whole
// laboratory, so it is written around a visitor callback that the compiler
// can inline; the path-returning facades are thin wrappers.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <type_traits>

#include "cutlab/path.hpp"

namespace cutlab {

namespace detail {

template <int D>
inline bool integral_center(const BallSpec<D>& ball) {
  for (int i = 0; i < D; ++i)
    if (std::floor(ball.center[i]) != ball.center[i]) return false;
  return true;
}

// Smallest integer threshold T with { s >= T } == { s >= r2 } for integer s.
inline int64_t int_sq_threshold(double r2) { return (int64_t)std::ceil(r2); }

}  // namespace detail

// Walks from `start` until the first site with |site - center| >= radius.
// Calls visit(site) on every site in order, including the start and the final
// outside site. Returns the number of steps taken.
template <int D, class Visit>
inline uint64_t walk_until_exit(const LatticePoint<D>& start, const BallSpec<D>& ball,
                                RngStream& rng, Visit&& visit) {
  if (ball.radius() < 1.0) throw std::invalid_argument("walk_until_exit: radius < 1");
  if (!ball.contains(start)) throw std::invalid_argument("walk_until_exit: start not inside ball");

  LatticePoint<D> x = start;
  visit((const LatticePoint<D>&)x);
  uint64_t steps = 0;

  if (detail::integral_center(ball)) {
    // integer arithmetic throughout; exact and fastest
    LatticePoint<D> c;
    for (int i = 0; i < D; ++i) c[i] = (int64_t)ball.center[i];
    int64_t dx[D];
    int64_t sq = 0;
    for (int i = 0; i < D; ++i) {
      dx[i] = x[i] - c[i];
      sq += dx[i] * dx[i];
    }
    const int64_t thr = detail::int_sq_threshold(ball.sq_radius());
    while (sq < thr) {
      uint32_t dir = rng.next_below(2 * D);
      int j = (int)(dir >> 1);
      int64_t s = (dir & 1) ? 1 : -1;
      sq += 2 * s * dx[j] + 1;
      dx[j] += s;
      x[j] += s;
      ++steps;
      visit((const LatticePoint<D>&)x);
    }
    return steps;
  }

  double dx[D];
  for (int i = 0; i < D; ++i) dx[i] = (double)x[i] - ball.center[i];
  const double r2 = ball.sq_radius();
  while (true) {
    double sq = 0;
    for (int i = 0; i < D; ++i) sq += dx[i] * dx[i];
    if (sq >= r2) break;
    uint32_t dir = rng.next_below(2 * D);
    int j = (int)(dir >> 1);
    int64_t s = (dir & 1) ? 1 : -1;
    dx[j] += (double)s;  // exact: dx stays within integer offsets of start
    x[j] += s;
    ++steps;
    visit((const LatticePoint<D>&)x);
  }
  return steps;
}

template <int D>
inline void sample_srw_until_exit(const LatticePoint<D>& start, const BallSpec<D>& ball,
                                  RngStream& rng, LatticePath<D>& out) {
  out.sites.clear();
  walk_until_exit<D>(start, ball, rng, [&](const LatticePoint<D>& p) { out.sites.push_back(p); });
}

template <int D>
inline LatticePath<D> sample_srw_until_exit(const LatticePoint<D>& start, const BallSpec<D>& ball,
                                            RngStream& rng) {
  LatticePath<D> path;
  sample_srw_until_exit<D>(start, ball, rng, path);
  return path;
}

template <int D>
inline LatticePath<D> sample_srw_fixed_steps(const LatticePoint<D>& start, uint64_t n,
                                             RngStream& rng) {
  LatticePath<D> path;
  path.sites.reserve(n + 1);
  LatticePoint<D> x = start;
  path.sites.push_back(x);
  for (uint64_t k = 0; k < n; ++k) {
    uint32_t dir = rng.next_below(2 * D);
    int j = (int)(dir >> 1);
    x[j] += (dir & 1) ? 1 : -1;
    path.sites.push_back(x);
  }
  return path;
}

// First time index whose site satisfies the target predicate, if any.
template <int D, class Pred>
  requires std::is_invocable_r_v<bool, Pred, const LatticePoint<D>&>
inline std::optional<size_t> hitting_time(const LatticePath<D>& path, Pred&& inside) {
  for (size_t k = 0; k < path.sites.size(); ++k)
    if (inside(path.sites[k])) return k;
  return std::nullopt;
}

template <int D>
inline std::optional<size_t> hitting_time(const LatticePath<D>& path, const BallSpec<D>& target) {
  return hitting_time<D>(path, [&](const LatticePoint<D>& p) { return target.contains(p); });
}

template <int D>
inline std::optional<size_t> hitting_time(const LatticePath<D>& path,
                                          const LatticePoint<D>& site) {
  return hitting_time<D>(path, [&](const LatticePoint<D>& p) { return p == site; });
}

}  // namespace cutlab
