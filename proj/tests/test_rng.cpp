#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "cutlab/rng.hpp"

using namespace cutlab;

TEST_SUITE("rng") {

TEST_CASE("streams are deterministic and independent of construction order") {
  RngStream a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

  RngStream c(42, 8);
  RngStream a2(42, 7);
  bool any_diff = false;
  for (int i = 0; i < 64; ++i) any_diff |= (a2.next_u64() != c.next_u64());
  CHECK(any_diff);
}

TEST_CASE("skip matches drawing and discarding") {
  RngStream a(3, 11), b(3, 11);
  for (int i = 0; i < 57; ++i) (void)a.next_u64();
  b.skip(57);
  for (int i = 0; i < 16; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("next_below stays in range and is roughly uniform") {
  RngStream r(9, 1);
  std::vector<int> hist(6, 0);
  const int N = 60000;
  for (int i = 0; i < N; ++i) {
    uint64_t v = r.next_below(6);
    REQUIRE(v < 6);
    ++hist[v];
  }
  for (int h : hist) CHECK(std::abs(h - N / 6) < 5 * std::sqrt((double)N / 6));

  for (int i = 0; i < 1000; ++i) {
    CHECK(r.next_below(1) == 0);
    CHECK(r.next_below(4) < 4);
  }
}

TEST_CASE("next_unit lies in [0,1) and next_unit_open in (0,1)") {
  RngStream r(5, 2);
  double lo = 1, hi = 0;
  for (int i = 0; i < 100000; ++i) {
    double u = r.next_unit();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    double v = r.next_unit_open();
    REQUIRE(v > 0.0);
    REQUIRE(v < 1.0);
  }
  CHECK(lo < 0.001);
  CHECK(hi > 0.999);
}

TEST_CASE("normal moments match a standard gaussian") {
  RngStream r(1234, 3);
  const int N = 2000000;
  double s1 = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < N; ++i) {
    double x = r.next_normal();
    s1 += x;
    s2 += x * x;
    s4 += x * x * x * x;
  }
  CHECK(std::abs(s1 / N) < 5e-3);
  CHECK(std::abs(s2 / N - 1.0) < 1e-2);
  CHECK(std::abs(s4 / N - 3.0) < 5e-2);
}

TEST_CASE("normal tail mass beyond 3.5 matches erfc") {
  RngStream r(77, 4);
  const int N = 4000000;
  int hits = 0;
  for (int i = 0; i < N; ++i)
    if (r.next_normal() > 3.5) ++hits;
  double expected = 0.5 * std::erfc(3.5 / std::sqrt(2.0));  // 2.3263e-4
  double got = (double)hits / N;
  CHECK(got == doctest::Approx(expected).epsilon(0.15));
}

TEST_CASE("stream ids for distinct trial coordinates are distinct") {
  std::set<uint64_t> seen;
  for (uint64_t kind = 1; kind <= 4; ++kind)
    for (uint64_t scale = 0; scale < 8; ++scale)
      for (uint64_t trial = 0; trial < 64; ++trial)
        seen.insert(stream_id_for(kind, scale, trial));
  CHECK(seen.size() == 4u * 8u * 64u);
}

}  // TEST_SUITE
