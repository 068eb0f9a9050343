#pragma once
// Least-squares line fits with bootstrap confidence intervals for the slope.
//
// Scaling-law checks reduce to fitting log(estimate) against the scale
// parameter and comparing the slope with a predicted exponent, so the slope
// interval is the quantity of interest. Intervals come from case-resampling
// percentile bootstrap with an internal fixed-seed generator; inputs are
// sorted first, which makes every result invariant under permutations of the
// input points.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cutlab/rng.hpp"

namespace cutlab {

struct FitPoint {
  double x = 0, y = 0;
};

struct FitResult {
  double slope = 0;
  double intercept = 0;
  double slope_lo = 0;  // 95% bootstrap percentile interval for the slope
  double slope_hi = 0;
  double r2 = 1;
  size_t n_points = 0;

  bool slope_covers(double target) const { return slope_lo <= target && target <= slope_hi; }
};

namespace detail {

struct LineCoef {
  double slope, intercept;
};

inline LineCoef ols(const std::vector<FitPoint>& pts) {
  double sx = 0, sy = 0;
  for (const auto& p : pts) {
    sx += p.x;
    sy += p.y;
  }
  double mx = sx / (double)pts.size(), my = sy / (double)pts.size();
  double sxx = 0, sxy = 0;
  for (const auto& p : pts) {
    sxx += (p.x - mx) * (p.x - mx);
    sxy += (p.x - mx) * (p.y - my);
  }
  if (sxx <= 0) throw std::invalid_argument("fit_line: all x values coincide");
  double slope = sxy / sxx;
  return LineCoef{slope, my - slope * mx};
}

}  // namespace detail

struct FitOptions {
  size_t bootstrap_rounds = 2000;
  uint64_t bootstrap_stream = 0x5eedf17;  // fixed: fits are deterministic functions of the points
};

inline FitResult fit_line(std::vector<FitPoint> pts, FitOptions opts = {}) {
  if (pts.size() < 2) throw std::invalid_argument("fit_line: need at least two points");
  std::sort(pts.begin(), pts.end(), [](const FitPoint& a, const FitPoint& b) {
    return a.x != b.x ? a.x < b.x : a.y < b.y;
  });

  auto base = detail::ols(pts);
  FitResult out;
  out.slope = base.slope;
  out.intercept = base.intercept;
  out.n_points = pts.size();

  double ss_res = 0, ss_tot = 0, my = 0;
  for (const auto& p : pts) my += p.y;
  my /= (double)pts.size();
  for (const auto& p : pts) {
    double e = p.y - (base.intercept + base.slope * p.x);
    ss_res += e * e;
    ss_tot += (p.y - my) * (p.y - my);
  }
  out.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;

  // Case-resampling bootstrap. Resamples whose x values all coincide carry no
  // slope information and are redrawn (their probability is tiny for n >= 3).
  RngStream rng(opts.bootstrap_stream, 1);
  std::vector<double> slopes;
  slopes.reserve(opts.bootstrap_rounds);
  std::vector<FitPoint> resample(pts.size());
  for (size_t b = 0; b < opts.bootstrap_rounds; ++b) {
    for (int attempt = 0;; ++attempt) {
      for (auto& q : resample) q = pts[rng.next_below((uint64_t)pts.size())];
      bool degenerate = true;
      for (const auto& q : resample)
        if (q.x != resample[0].x) {
          degenerate = false;
          break;
        }
      if (!degenerate) break;
      if (attempt > 64) throw std::runtime_error("fit_line: bootstrap stuck on degenerate resamples");
    }
    slopes.push_back(detail::ols(resample).slope);
  }
  std::sort(slopes.begin(), slopes.end());
  auto q = [&](double p) {
    double idx = p * (double)(slopes.size() - 1);
    size_t lo = (size_t)idx;
    size_t hi = std::min(lo + 1, slopes.size() - 1);
    double f = idx - (double)lo;
    return (1 - f) * slopes[lo] + f * slopes[hi];
  };
  out.slope_lo = q(0.025);
  out.slope_hi = q(0.975);
  return out;
}

}  // namespace cutlab
