#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "cutlab/path_io.hpp"
#include "cutlab/walk.hpp"

using namespace cutlab;
namespace fs = std::filesystem;

namespace {
std::string tmp_file(const char* name) { return (fs::temp_directory_path() / name).string(); }
}  // namespace

TEST_SUITE("path_io") {

TEST_CASE("paths round-trip exactly in both dimensions") {
  auto f2 = tmp_file("cutlab_test_d2.cutp");
  {
    PathWriter w(f2, 2);
    for (int t = 0; t < 20; ++t) {
      RngStream r(91, (uint64_t)t);
      w.append<2>(sample_srw_fixed_steps<2>(LatticePoint<2>{-5, 1000}, 137, r));
    }
    w.close();
  }
  auto back2 = load_paths<2>(f2);
  REQUIRE(back2.size() == 20);
  for (int t = 0; t < 20; ++t) {
    RngStream r(91, (uint64_t)t);
    REQUIRE(back2[t].sites == sample_srw_fixed_steps<2>(LatticePoint<2>{-5, 1000}, 137, r).sites);
  }

  auto f3 = tmp_file("cutlab_test_d3.cutp");
  {
    PathWriter w(f3, 3);
    RngStream r(92, 0);
    auto p = sample_srw_until_exit<3>(LatticePoint<3>{}, BallSpec<3>::origin(std::log(15.0)), r);
    w.append<3>(p);
    w.append<3>(LatticePath<3>{{LatticePoint<3>{7, -7, 7}}});  // zero-step path
    w.close();
    auto back3 = load_paths<3>(f3);
    REQUIRE(back3.size() == 2);
    CHECK(back3[0].sites == p.sites);
    CHECK(back3[1].num_steps() == 0);
    CHECK(back3[1].start() == LatticePoint<3>{7, -7, 7});
  }
  fs::remove(f2);
  fs::remove(f3);
}

TEST_CASE("dimension mismatches and corrupt headers are rejected") {
  auto f = tmp_file("cutlab_test_dim.cutp");
  {
    PathWriter w(f, 2);
    RngStream r(93, 0);
    w.append<2>(sample_srw_fixed_steps<2>(LatticePoint<2>{}, 10, r));
    CHECK_THROWS_AS(w.append<3>(sample_srw_fixed_steps<3>(LatticePoint<3>{}, 10, r)),
                    std::invalid_argument);
    w.close();
  }
  CHECK_THROWS_AS(load_paths<3>(f), std::runtime_error);

  auto bad = tmp_file("cutlab_test_bad.cutp");
  {
    std::ofstream out(bad, std::ios::binary);
    out << "NOPE";
  }
  CHECK_THROWS_AS(load_paths<2>(bad), std::runtime_error);
  fs::remove(f);
  fs::remove(bad);
}

TEST_CASE("non-lattice paths are rejected at write time") {
  auto f = tmp_file("cutlab_test_nn.cutp");
  PathWriter w(f, 2);
  LatticePath<2> jump;
  jump.sites = {LatticePoint<2>{0, 0}, LatticePoint<2>{2, 0}};
  CHECK_THROWS_AS(w.append<2>(jump), std::invalid_argument);
  w.close();
  fs::remove(f);
}

TEST_CASE("csv writer emits well-formed rows") {
  auto f = tmp_file("cutlab_test.csv");
  {
    CsvWriter csv(f);
    csv.header({"scale", "trials", "estimate"});
    csv.row(3, 1000, 0.125);
    csv.row(4, 1000, 0.0625);
    csv.close();
  }
  std::ifstream in(f);
  std::string line;
  std::getline(in, line);
  CHECK(line == "scale,trials,estimate");
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2);
  fs::remove(f);
}

}  // TEST_SUITE
