// Exporter formats: cut-point CSV, event/fit/measure JSON, float32 grid
// dumps. String-level oracles are tiny handmade inputs whose serialized form
// is written out by hand; JSON outputs are additionally reparsed with an
// independent parser and compared field by field, exploiting that shortest
// round-trip formatting reparses to the exact double.

#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cutlab/cut_detect.hpp"
#include "cutlab/exports.hpp"
#include "cutlab/measures.hpp"
#include "cutlab/rng.hpp"
#include "cutlab/skorokhod.hpp"

using namespace cutlab;
namespace fs = std::filesystem;

namespace {

template <int D>
LatticePath<D> straight_path(int64_t len) {
  LatticePath<D> p;
  for (int64_t x = 0; x <= len; ++x) {
    LatticePoint<D> s{};
    s[0] = x;
    p.sites.push_back(s);
  }
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE_BEGIN("exports");

TEST_CASE("cut point CSV lists step index and site per row") {
  auto cuts2 = cut_points_fast<2>(straight_path<2>(5));
  CHECK(cut_points_csv<2>(cuts2) ==
        "t_index,x,y\n"
        "1,1,0\n"
        "2,2,0\n"
        "3,3,0\n"
        "4,4,0\n");

  auto cuts3 = cut_points_fast<3>(straight_path<3>(3));
  CHECK(cut_points_csv<3>(cuts3) ==
        "t_index,x,y,z\n"
        "1,1,0,0\n"
        "2,2,0,0\n");

  CutPointSet<2> empty;
  CHECK(cut_points_csv<2>(empty) == "t_index,x,y\n");
}

TEST_CASE("cut ball event JSON round-trips through an independent parser") {
  CutBallEvent<2> ev;
  ev.occurred = true;
  ev.a1 = 17;
  ev.a2 = 240;
  ev.anchor = LatticePoint<2>{33, 14};
  ev.scale_n = 4.5;
  const RealPoint<2> z{0.37, 0.155};

  const std::string text = cutball_event_json<2>(z, ev);
  auto j = nlohmann::json::parse(text);
  CHECK(j["z"][0].get<double>() == 0.37);
  CHECK(j["z"][1].get<double>() == 0.155);
  CHECK(j["n"] == 4.5);
  CHECK(j["occurred"] == true);
  CHECK(j["a1"] == 17);
  CHECK(j["a2"] == 240);
  CHECK(j["anchor"][0] == 33);
  CHECK(j["anchor"][1] == 14);
}

TEST_CASE("fit JSON carries slope, intercept, ci, r2, n_points") {
  FitResult fit;
  fit.slope = -1.25;
  fit.intercept = 0.4;
  fit.slope_lo = -1.4;
  fit.slope_hi = -1.1;
  fit.r2 = 0.993;
  fit.n_points = 5;
  auto j = nlohmann::json::parse(fit_result_json(fit));
  CHECK(j["slope"] == -1.25);
  CHECK(j["intercept"] == 0.4);
  CHECK(j["ci"][0] == -1.4);
  CHECK(j["ci"][1] == -1.1);
  CHECK(j["r2"] == 0.993);
  CHECK(j["n_points"] == 5);
}

TEST_CASE("coupled pair summary JSON reports the run's key scalars") {
  RngStream rng(91, 7);
  SkorokhodOptions so;
  so.keep_paths = false;
  auto pair = skorokhod_embed<2>(2.0, rng, so);
  auto j = nlohmann::json::parse(coupled_pair_summary_json<2>(pair, 91));
  CHECK(j["n"] == 2.0);
  CHECK(j["dt"].get<double>() == pair.dt);
  CHECK(j["seed"] == 91);
  CHECK(j["max_deviation"].get<double>() == pair.max_deviation);
  CHECK(j["tau"].get<double>() == pair.tau_time);
  CHECK(j["T"].get<double>() == pair.exit_time);
  CHECK(pair.max_deviation > 0);
  CHECK(pair.tau_time > 0);
}

TEST_CASE("atomic measure JSON lists rescaled atoms with exact masses") {
  // Straight path through radius e^1: interior cut points at x = 1 and 2.
  LatticePath<2> path = straight_path<2>(3);
  AtomicMeasure<2> mu = occupation_measure<2>(path, 1.0, 2.0);

  auto j = nlohmann::json::parse(atomic_measure_json<2>(mu));
  CHECK(j["n"] == 1.0);
  CHECK(j["normalization"] == 2.0);
  CHECK(j["xi"] == 1.25);
  REQUIRE(j["atoms"].size() == 2);
  CHECK(j["atoms"][0]["x"].get<double>() == std::exp(-1.0) * 1.0);
  CHECK(j["atoms"][0]["y"].get<double>() == 0.0);
  CHECK(j["atoms"][1]["x"].get<double>() == std::exp(-1.0) * 2.0);
  const double mass = 2.0 * std::exp(-1.0 * (2.0 - 1.25));
  CHECK(j["atoms"][0]["mass"].get<double>() == mass);
  CHECK(j["atoms"][1]["mass"].get<double>() == mass);

  // d = 3 atoms carry a z coordinate.
  AtomicMeasure<3> mu3 = occupation_measure<3>(straight_path<3>(3), 1.0, 1.0, 0.58);
  auto j3 = nlohmann::json::parse(atomic_measure_json<3>(mu3));
  CHECK(j3["xi"] == 0.58);
  REQUIRE(j3["atoms"].size() == 2);
  CHECK(j3["atoms"][0].contains("z"));
}

TEST_CASE("grid dump writes float32 cells and a relocatable sidecar") {
  GridMeasure<2> nu;
  nu.h = 0.5;
  nu.s = 1.0;
  nu.origin = RealPoint<2>{-0.5, -0.5};
  nu.dims = {2, 2};
  nu.values = {0.0, 1.5, 2.5, 3.0};

  const fs::path dir = fs::temp_directory_path() / "cutlab_test_exports";
  fs::remove_all(dir);
  auto paths = write_grid_measure<2>(nu, (dir / "sub" / "grid").string());

  const std::string blob = slurp(paths.data_path);
  REQUIRE(blob.size() == 4 * sizeof(float));
  float vals[4];
  std::memcpy(vals, blob.data(), sizeof(vals));
  CHECK(vals[0] == 0.0f);
  CHECK(vals[1] == 1.5f);
  CHECK(vals[2] == 2.5f);
  CHECK(vals[3] == 3.0f);

  auto j = nlohmann::json::parse(slurp(paths.sidecar_path));
  CHECK(j["schema"] == "cutlab.grid.v1");
  CHECK(j["h"] == 0.5);
  CHECK(j["s"] == 1.0);
  CHECK(j["origin"] == nlohmann::json::array({-0.5, -0.5}));
  CHECK(j["dims"] == nlohmann::json::array({2, 2}));
  CHECK(j["count"] == 4);
  CHECK(j["dtype"] == "float32");
  CHECK(j["data"] == "grid.f32");  // file name only: the pair moves together

  fs::remove_all(dir);
}

TEST_CASE("atomic measure JSON file write is whole or absent") {
  const fs::path dir = fs::temp_directory_path() / "cutlab_test_exports_mu";
  fs::remove_all(dir);
  AtomicMeasure<2> mu = occupation_measure<2>(straight_path<2>(3), 1.0);
  const std::string path = (dir / "mu.json").string();
  write_atomic_measure_json<2>(mu, path);
  auto j = nlohmann::json::parse(slurp(path));
  CHECK(j["atoms"].size() == 2);
  CHECK(!fs::exists(path + ".tmp"));
  fs::remove_all(dir);
}

TEST_SUITE_END();
