#pragma once
// Path containers. A lattice path stores the visited sites in order; time is
// measured so that each edge takes 1/d units, which matches the covariance of
// standard Brownian motion coordinate-by-coordinate. Positions at off-step
// times are linear interpolations along the current edge and are addressed by
// (edge index, fraction) to avoid accumulating rounding error.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cutlab/geometry.hpp"

namespace cutlab {

template <int D>
struct LatticePath {
  std::vector<LatticePoint<D>> sites;

  size_t num_steps() const { return sites.empty() ? 0 : sites.size() - 1; }
  // Total duration in time units (1/d per edge).
  double duration() const { return (double)num_steps() / (double)D; }

  const LatticePoint<D>& start() const { return sites.front(); }
  const LatticePoint<D>& end() const { return sites.back(); }

  bool is_nearest_neighbor() const {
    for (size_t k = 1; k < sites.size(); ++k) {
      int64_t l1 = 0;
      for (int i = 0; i < D; ++i) l1 += std::llabs(sites[k][i] - sites[k - 1][i]);
      if (l1 != 1) return false;
    }
    return true;
  }
};

// Exact time address on a lattice path: position = (1-fraction)*sites[edge] +
// fraction*sites[edge+1].
struct PathTime {
  size_t edge = 0;
  double fraction = 0;  // in [0, 1)
};

template <int D>
inline PathTime path_time(const LatticePath<D>& path, double t) {
  if (t < 0) throw std::invalid_argument("path_time: negative time");
  double steps = t * D;
  size_t e = (size_t)steps;
  size_t n = path.num_steps();
  if (e >= n) {
    if (steps > (double)n + 1e-9) throw std::invalid_argument("path_time: beyond path duration");
    return PathTime{n, 0.0};
  }
  return PathTime{e, steps - (double)e};
}

template <int D>
inline RealPoint<D> position_at(const LatticePath<D>& path, double t) {
  PathTime pt = path_time(path, t);
  if (pt.edge == path.num_steps()) return to_real<D>(path.sites[pt.edge]);
  RealPoint<D> p;
  const auto& a = path.sites[pt.edge];
  const auto& b = path.sites[pt.edge + 1];
  for (int i = 0; i < D; ++i) p[i] = (1.0 - pt.fraction) * (double)a[i] + pt.fraction * (double)b[i];
  return p;
}

// Brownian sample path on a uniform dt grid. samples[k] is the position at
// time k*dt; increments are independent N(0, dt) per coordinate.
template <int D>
struct BrownianPath {
  double dt = 0;
  std::vector<RealPoint<D>> samples;

  size_t num_steps() const { return samples.empty() ? 0 : samples.size() - 1; }
  double duration() const { return (double)num_steps() * dt; }
  const RealPoint<D>& start() const { return samples.front(); }
  const RealPoint<D>& end() const { return samples.back(); }
};

}  // namespace cutlab
