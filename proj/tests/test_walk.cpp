#include <doctest.h>

#include <cmath>
#include <vector>

#include "cutlab/walk.hpp"

using namespace cutlab;

TEST_SUITE("walk") {

TEST_CASE("fixed-step paths are nearest-neighbor and reproducible") {
  RngStream r1(11, 100), r2(11, 100);
  auto p = sample_srw_fixed_steps<3>(LatticePoint<3>{1, 2, 3}, 500, r1);
  auto q = sample_srw_fixed_steps<3>(LatticePoint<3>{1, 2, 3}, 500, r2);
  CHECK(p.sites == q.sites);
  CHECK(p.num_steps() == 500);
  CHECK(p.start() == LatticePoint<3>{1, 2, 3});
  CHECK(p.is_nearest_neighbor());
  CHECK(p.duration() == doctest::Approx(500.0 / 3.0));
}

TEST_CASE("mean squared displacement after k steps equals k") {
  const int k = 1000, N = 4000;
  double sum2 = 0, sum3 = 0;
  for (int t = 0; t < N; ++t) {
    RngStream r2(21, (uint64_t)t), r3(22, (uint64_t)t);
    sum2 += (double)sample_srw_fixed_steps<2>(LatticePoint<2>{}, k, r2).end().sq_norm();
    sum3 += (double)sample_srw_fixed_steps<3>(LatticePoint<3>{}, k, r3).end().sq_norm();
  }
  CHECK(sum2 / N == doctest::Approx((double)k).epsilon(0.05));
  CHECK(sum3 / N == doctest::Approx((double)k).epsilon(0.05));
}

TEST_CASE("coordinates are unbiased") {
  const int k = 900, N = 4000;
  double mean[3] = {0, 0, 0};
  for (int t = 0; t < N; ++t) {
    RngStream r(23, (uint64_t)t);
    auto p = sample_srw_fixed_steps<3>(LatticePoint<3>{}, k, r);
    for (int i = 0; i < 3; ++i) mean[i] += (double)p.end()[i];
  }
  // per-coordinate variance is k/3, so the mean has sd ~ 0.27 here
  for (int i = 0; i < 3; ++i) CHECK(std::abs(mean[i] / N) < 1.2);
}

TEST_CASE("exit walk visits start, stays inside, and exits exactly once") {
  BallSpec<2> ball = BallSpec<2>::origin(std::log(20.0));
  for (int t = 0; t < 50; ++t) {
    RngStream r(31, (uint64_t)t);
    auto p = sample_srw_until_exit<2>(LatticePoint<2>{}, ball, r);
    REQUIRE(p.sites.size() >= 2);
    CHECK(p.start() == LatticePoint<2>{});
    CHECK(p.is_nearest_neighbor());
    for (size_t k = 0; k + 1 < p.sites.size(); ++k) REQUIRE(ball.contains(p.sites[k]));
    CHECK(!ball.contains(p.end()));
  }
}

TEST_CASE("visitor sees every site and the return value counts steps") {
  BallSpec<3> ball = BallSpec<3>::origin(std::log(9.0));
  RngStream r(37, 5);
  std::vector<LatticePoint<3>> seen;
  uint64_t steps =
      walk_until_exit<3>(LatticePoint<3>{}, ball, r, [&](const LatticePoint<3>& p) { seen.push_back(p); });
  CHECK(seen.size() == steps + 1);
  RngStream r2(37, 5);
  auto p = sample_srw_until_exit<3>(LatticePoint<3>{}, ball, r2);
  CHECK(p.sites == seen);
}

TEST_CASE("integer-centre fast path agrees with the general-centre path") {
  // A 1e-12 nudge of the centre forces the general branch without moving any
  // site across the exit boundary, so the two walks must coincide exactly.
  double lr = std::log(7.3);
  BallSpec<2> exact = BallSpec<2>::at(LatticePoint<2>{3, 4}, lr);
  BallSpec<2> nudged = exact;
  nudged.center[0] += 1e-12;
  for (int t = 0; t < 200; ++t) {
    RngStream ra(41, (uint64_t)t), rb(41, (uint64_t)t);
    auto a = sample_srw_until_exit<2>(LatticePoint<2>{3, 4}, exact, ra);
    auto b = sample_srw_until_exit<2>(LatticePoint<2>{3, 4}, nudged, rb);
    REQUIRE(a.sites == b.sites);
  }
}

TEST_CASE("mean exit step count matches the stopped squared norm") {
  // |S_k|^2 - k is a martingale, so E[steps at exit] = E[|S_exit|^2]; both
  // averages come from the same trials, which makes the comparison tight.
  const double R = 32.0;
  BallSpec<2> ball = BallSpec<2>::origin(std::log(R));
  const int N = 10000;
  double mean_steps = 0, mean_sq = 0;
  LatticePath<2> path;
  for (int t = 0; t < N; ++t) {
    RngStream r(43, (uint64_t)t);
    sample_srw_until_exit<2>(LatticePoint<2>{}, ball, r, path);
    mean_steps += (double)path.num_steps();
    mean_sq += (double)path.end().sq_norm();
  }
  mean_steps /= N;
  mean_sq /= N;
  CHECK(mean_steps == doctest::Approx(mean_sq).epsilon(0.03));
  CHECK(mean_steps / (R * R) > 1.0);
  CHECK(mean_steps / (R * R) < 1.06);
}

TEST_CASE("invalid exit-walk arguments throw") {
  RngStream r(47, 0);
  CHECK_THROWS_AS(walk_until_exit<2>(LatticePoint<2>{}, BallSpec<2>::origin(std::log(0.5)), r,
                                     [](const LatticePoint<2>&) {}),
                  std::invalid_argument);
  CHECK_THROWS_AS(walk_until_exit<2>(LatticePoint<2>{9, 9}, BallSpec<2>::origin(std::log(5.0)), r,
                                     [](const LatticePoint<2>&) {}),
                  std::invalid_argument);
}

TEST_CASE("hitting times") {
  RngStream r(53, 2);
  auto p = sample_srw_fixed_steps<2>(LatticePoint<2>{}, 300, r);

  auto h = hitting_time<2>(p, p.sites[17]);
  REQUIRE(h.has_value());
  CHECK(*h <= 17);
  CHECK(p.sites[*h] == p.sites[17]);
  for (size_t k = 0; k < *h; ++k) REQUIRE(!(p.sites[k] == p.sites[17]));

  CHECK(!hitting_time<2>(p, LatticePoint<2>{500, 500}).has_value());

  BallSpec<2> target = BallSpec<2>::at(p.sites[40], std::log(1.5));
  auto hb = hitting_time<2>(p, target);
  REQUIRE(hb.has_value());
  CHECK(*hb <= 40);
  CHECK(target.contains(p.sites[*hb]));
}

}  // TEST_SUITE
