#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "cutlab/fit.hpp"

using namespace cutlab;

TEST_SUITE("fit") {

TEST_CASE("an exact line is recovered with a collapsed interval") {
  std::vector<FitPoint> pts;
  for (int k = 0; k < 6; ++k) pts.push_back({(double)k, 2.5 - 1.25 * k});
  auto fit = fit_line(pts);
  CHECK(fit.slope == doctest::Approx(-1.25).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.slope_lo == doctest::Approx(-1.25).epsilon(1e-9));
  CHECK(fit.slope_hi == doctest::Approx(-1.25).epsilon(1e-9));
  CHECK(fit.slope_covers(-1.25));
  CHECK(!fit.slope_covers(-1.5));
}

TEST_CASE("results do not depend on the order of the points") {
  std::vector<FitPoint> pts = {{0, 1.1}, {1, 2.3}, {2, 2.9}, {3, 4.2}, {4, 4.8}};
  auto a = fit_line(pts);
  std::reverse(pts.begin(), pts.end());
  auto b = fit_line(pts);
  std::swap(pts[0], pts[3]);
  auto c = fit_line(pts);
  CHECK(a.slope == b.slope);
  CHECK(a.slope_lo == b.slope_lo);
  CHECK(a.slope_hi == b.slope_hi);
  CHECK(a.slope_lo == c.slope_lo);
  CHECK(a.slope_hi == c.slope_hi);
}

TEST_CASE("degenerate inputs are rejected") {
  CHECK_THROWS_AS(fit_line({{1, 2}}), std::invalid_argument);
  CHECK_THROWS_AS(fit_line({{1, 2}, {1, 3}, {1, 4}}), std::invalid_argument);
}

TEST_CASE("bootstrap interval covers a planted slope at roughly nominal rate") {
  // 200 replications of a 6-point fit with gaussian noise; the 95% interval
  // should cover the true slope almost always (bootstrap undercoverage at
  // n = 6 costs a few percent).
  std::mt19937_64 gen(987654);
  std::normal_distribution<double> noise(0.0, 0.3);
  int covered = 0;
  const int reps = 200;
  for (int rep = 0; rep < reps; ++rep) {
    std::vector<FitPoint> pts;
    for (int k = 0; k < 6; ++k) pts.push_back({(double)k, 1.0 - 0.58 * k + noise(gen)});
    if (fit_line(pts).slope_covers(-0.58)) ++covered;
  }
  CHECK(covered >= 176);  // ~88%; far below nominal signals a broken interval
  CHECK(covered <= 200);
}

TEST_CASE("interval width shrinks with noise") {
  std::mt19937_64 gen(13579);
  std::normal_distribution<double> small(0.0, 0.05), big(0.0, 0.8);
  std::vector<FitPoint> quiet, loud;
  for (int k = 0; k < 8; ++k) {
    quiet.push_back({(double)k, 3.0 + 0.7 * k + small(gen)});
    loud.push_back({(double)k, 3.0 + 0.7 * k + big(gen)});
  }
  auto fq = fit_line(quiet);
  auto fl = fit_line(loud);
  CHECK(fq.slope_hi - fq.slope_lo < fl.slope_hi - fl.slope_lo);
  CHECK(fq.slope_covers(0.7));
}

}  // TEST_SUITE
