#include <doctest.h>

#include <cmath>

#include "cutlab/brownian.hpp"
#include "cutlab/parallel.hpp"

using namespace cutlab;

TEST_SUITE("brownian") {

TEST_CASE("fixed-horizon moments: E|W_T|^2 = d T") {
  const double T = 1.0, dt = 0.01;
  const int N = 20000;
  double s2 = 0, s3 = 0;
  for (int t = 0; t < N; ++t) {
    RngStream r2(101, (uint64_t)t), r3(102, (uint64_t)t);
    s2 += sq_norm<2>(sample_bm_fixed<2>(RealPoint<2>{}, T, dt, r2).end());
    s3 += sq_norm<3>(sample_bm_fixed<3>(RealPoint<3>{}, T, dt, r3).end());
  }
  CHECK(s2 / N == doctest::Approx(2.0 * T).epsilon(0.05));
  CHECK(s3 / N == doctest::Approx(3.0 * T).epsilon(0.05));
}

TEST_CASE("exit sampler invariants and reproducibility") {
  BallSpec<2> ball = BallSpec<2>::origin(0.0);  // unit ball
  BrownianPath<2> p, q;
  for (int t = 0; t < 40; ++t) {
    RngStream r(103, (uint64_t)t), r2(103, (uint64_t)t);
    auto info = sample_bm_until_exit<2>(RealPoint<2>{}, ball, 1e-3, r, p);
    sample_bm_until_exit<2>(RealPoint<2>{}, ball, 1e-3, r2, q);
    REQUIRE(p.samples == q.samples);
    REQUIRE(p.samples.size() >= 2);
    for (size_t k = 0; k + 1 < p.samples.size(); ++k) REQUIRE(ball.contains(p.samples[k]));
    REQUIRE(!ball.contains(p.end()));
    REQUIRE(info.time == doctest::Approx(p.duration()));
  }
}

TEST_CASE("mean exit time from the unit ball matches (1 - |x|^2)/d") {
  const double dt = 1e-4;
  const int N = 2000;
  double sum = 0;
  for (int t = 0; t < N; ++t) {
    RngStream r(104, (uint64_t)t);
    BrownianPath<2> p;
    sum += sample_bm_until_exit<2>(RealPoint<2>{}, BallSpec<2>::origin(0.0), dt, r, p).time;
  }
  CHECK(sum / N == doctest::Approx(0.5).epsilon(0.06));
}

TEST_CASE("ruin formula closed forms") {
  CHECK(ruin_formula(2, 2, 2) == doctest::Approx(0.5));
  CHECK(ruin_formula(2, 1, 3) == doctest::Approx(0.25));
  CHECK(ruin_formula(3, 1, 1) == doctest::Approx(0.2689414).epsilon(1e-6));
  // transience: a distant inner sphere is almost never reached
  CHECK(ruin_formula(3, 1, 12) < 5e-6);
  CHECK_THROWS_AS(ruin_formula(1, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(ruin_formula(2, 0, 1), std::invalid_argument);
}

TEST_CASE("annulus exit matches the closed form and the mean exit time") {
  // d=2, barriers e^{-1} and e^{1} from |x|=1: P(inner first) = 1/2 and
  // E[exit time] = 1.381 (solve (1/2) Laplacian U = -1 radially).
  const double dt = 1e-3;
  const int N = 5000;
  int inner = 0;
  double time_sum = 0;
  for (int t = 0; t < N; ++t) {
    RngStream r(105, (uint64_t)t);
    auto out = annulus_first_exit<2>(RealPoint<2>{1.0, 0.0}, -1.0, 1.0, dt, r);
    inner += out.hit_inner;
    time_sum += out.time;
  }
  CHECK((double)inner / N == doctest::Approx(0.5).epsilon(0.05));
  CHECK(time_sum / N == doctest::Approx(1.381).epsilon(0.08));
}

TEST_CASE("bridge correction removes the coarse-grid first-passage bias") {
  const double dt = 0.02;  // deliberately coarse
  const int N = 20000;
  int with = 0, without = 0;
  BmOptions naive;
  naive.bridge_crossings = false;
  for (int t = 0; t < N; ++t) {
    RngStream ra(106, (uint64_t)t), rb(107, (uint64_t)t);
    with += annulus_first_exit<2>(RealPoint<2>{1.0, 0.0}, -1.0, 1.0, dt, ra).hit_inner;
    without += annulus_first_exit<2>(RealPoint<2>{1.0, 0.0}, -1.0, 1.0, dt, rb, naive).hit_inner;
  }
  double p_with = (double)with / N, p_without = (double)without / N;
  CHECK(std::abs(p_with - 0.5) < 0.02);
  CHECK(std::abs(p_without - 0.5) > 0.025);  // the sqrt(dt) barrier shift is visible
}

TEST_CASE("invalid grids and start positions throw") {
  RngStream r(108, 0);
  BrownianPath<2> p;
  CHECK_THROWS_AS(sample_bm_until_exit<2>(RealPoint<2>{}, BallSpec<2>::origin(0.0), 0.0, r, p),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      sample_bm_until_exit<2>(RealPoint<2>{2.0, 0.0}, BallSpec<2>::origin(0.0), 1e-3, r, p),
      std::invalid_argument);
  CHECK_THROWS_AS(annulus_first_exit<2>(RealPoint<2>{1.0, 0.0}, 1.0, -1.0, 1e-3, r),
                  std::invalid_argument);
  CHECK_THROWS_AS(annulus_first_exit<2>(RealPoint<2>{0.1, 0.0}, -1.0, 1.0, 1e-3, r),
                  std::invalid_argument);
}

TEST_CASE("trial pool reproduces the serial reduction for any worker count") {
  const size_t N = 500;
  std::vector<double> serial(N), pooled(N);
  for (size_t t = 0; t < N; ++t) {
    RngStream r(109, t);
    serial[t] = r.next_normal();
  }
  run_trials(N, 3, [&](size_t t) {
    RngStream r(109, t);
    pooled[t] = r.next_normal();
  });
  CHECK(serial == pooled);

  CHECK_THROWS_AS(run_trials(100, 4,
                             [&](size_t t) {
                               if (t == 37) throw std::runtime_error("boom");
                             }),
                  std::runtime_error);
  CHECK(resolve_workers(5) == 5);
}

}  // TEST_SUITE
