#pragma once
// Standalone data exporters for external analysis tools: cut-point sets as
// CSV, detector events and fits as JSON records, rescaled point measures as
// JSON atom lists, and grid measures as raw float32 arrays with a JSON
// sidecar describing the geometry.
//
// All numeric output uses shortest round-trip formatting, so every exported
// value reparses to exactly the double that was computed.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>

#include "cutlab/cut_detect.hpp"
#include "cutlab/fit.hpp"
#include "cutlab/measures.hpp"
#include "cutlab/serialize.hpp"
#include "cutlab/skorokhod.hpp"

namespace cutlab {

// One row per cut point: its step index along the path and its lattice site.
template <int D>
inline std::string cut_points_csv(const CutPointSet<D>& cuts) {
  std::string out = D == 2 ? "t_index,x,y\n" : "t_index,x,y,z\n";
  for (size_t k = 0; k < cuts.times.size(); ++k) {
    out += std::to_string(cuts.times[k]);
    for (int i = 0; i < D; ++i) {
      out += ',';
      out += std::to_string(cuts.sites[k][i]);
    }
    out += '\n';
  }
  return out;
}

// Event record {z, n, occurred, a1, a2} plus the lattice anchor the query
// point mapped to. a1/a2 are the first-entry / last-exit indices of the
// closed inner ball; they are meaningful only when the ball was hit.
template <int D>
inline std::string cutball_event_json(const RealPoint<D>& z, const CutBallEvent<D>& ev) {
  detail::JsonObject o;
  std::string zs = "[";
  for (int i = 0; i < D; ++i) {
    if (i) zs += ',';
    zs += detail::fmt_double(z[(size_t)i]);
  }
  o.raw("z", zs + "]");
  o.num("n", ev.scale_n);
  o.boolean("occurred", ev.occurred);
  o.num("a1", (uint64_t)ev.a1);
  o.num("a2", (uint64_t)ev.a2);
  std::string as = "[";
  for (int i = 0; i < D; ++i) {
    if (i) as += ',';
    as += std::to_string(ev.anchor[i]);
  }
  o.raw("anchor", as + "]");
  return o.build();
}

// Coupled-pair summary {n, dt, seed, max_deviation, tau, T}: tau is the
// walk's exit time from radius e^{n+1} in matched time units, T the Brownian
// exit time on the grid.
template <int D>
inline std::string coupled_pair_summary_json(const CoupledPair<D>& pair, uint64_t seed) {
  detail::JsonObject o;
  o.num("n", pair.n);
  o.num("dt", pair.dt);
  o.num("seed", seed);
  o.num("max_deviation", pair.max_deviation);
  o.num("tau", pair.tau_time);
  o.num("T", pair.exit_time);
  return o.build();
}

// Fit record {slope, intercept, ci:[lo,hi], r2, n_points}.
inline std::string fit_result_json(const FitResult& fit) {
  detail::JsonObject o;
  o.num("slope", fit.slope);
  o.num("intercept", fit.intercept);
  o.raw("ci", "[" + detail::fmt_double(fit.slope_lo) + "," + detail::fmt_double(fit.slope_hi) +
                  "]");
  o.num("r2", fit.r2);
  o.num("n_points", (uint64_t)fit.n_points);
  return o.build();
}

// Point-measure dump {n, normalization, xi, atoms:[{x, y[, z], mass}]} with
// atom coordinates on the rescaled mesh e^{-n} Z^d. Atoms appear in packed-
// site key order, so the output is deterministic.
template <int D>
inline std::string atomic_measure_json(const AtomicMeasure<D>& mu) {
  detail::JsonObject o;
  o.num("n", mu.n);
  o.num("normalization", mu.normalization);
  o.num("xi", mu.xi);
  const double scale = std::exp(-mu.n);
  std::string atoms = "[";
  bool first = true;
  for (const auto& [key, mass] : mu.atoms) {
    if (!first) atoms += ',';
    first = false;
    const LatticePoint<D> site = unpack_site<D>(key);
    detail::JsonObject a;
    a.num("x", scale * (double)site[0]);
    a.num("y", scale * (double)site[1]);
    if constexpr (D == 3) a.num("z", scale * (double)site[2]);
    a.num("mass", mass);
    atoms += a.build();
  }
  o.raw("atoms", atoms + "]");
  return o.build();
}

template <int D>
inline void write_atomic_measure_json(const AtomicMeasure<D>& mu, const std::string& path) {
  detail::write_file_atomic(path, atomic_measure_json(mu) + "\n");
}

// Sidecar for a raw float32 grid dump: geometry plus the data file name.
template <int D>
inline std::string grid_sidecar_json(const GridMeasure<D>& nu, const std::string& data_file) {
  detail::JsonObject o;
  o.str("schema", "cutlab.grid.v1");
  o.num("h", nu.h);
  o.num("s", nu.s);
  std::string origin = "[";
  for (int i = 0; i < D; ++i) {
    if (i) origin += ',';
    origin += detail::fmt_double(nu.origin[(size_t)i]);
  }
  o.raw("origin", origin + "]");
  std::string dims = "[";
  for (int i = 0; i < D; ++i) {
    if (i) dims += ',';
    dims += std::to_string(nu.dims[(size_t)i]);
  }
  o.raw("dims", dims + "]");
  o.num("count", (uint64_t)nu.values.size());
  o.str("dtype", "float32");
  o.str("byte_order", "little");
  o.str("data", data_file);
  return o.build();
}

struct GridDumpPaths {
  std::string data_path;     // <base>.f32, raw float32 cell values in storage order
  std::string sidecar_path;  // <base>.json
};

// Writes the grid's cell values as a dense float32 array (row-major, last
// axis fastest, matching GridMeasure storage) plus the JSON sidecar. The
// sidecar references the data file by name, so the pair can be moved
// together between directories.
template <int D>
inline GridDumpPaths write_grid_measure(const GridMeasure<D>& nu, const std::string& path_base) {
  static_assert(std::endian::native == std::endian::little,
                "float32 grid dump assumes a little-endian host");
  GridDumpPaths paths{path_base + ".f32", path_base + ".json"};

  std::string blob;
  blob.resize(nu.values.size() * sizeof(float));
  for (size_t i = 0; i < nu.values.size(); ++i) {
    const float f = (float)nu.values[i];
    std::memcpy(blob.data() + i * sizeof(float), &f, sizeof(float));
  }
  const std::string data_name = std::filesystem::path(paths.data_path).filename().string();
  detail::write_file_atomic(paths.data_path, blob);
  try {
    detail::write_file_atomic(paths.sidecar_path, grid_sidecar_json(nu, data_name) + "\n");
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(paths.data_path, ec);
    throw;
  }
  return paths;
}

}  // namespace cutlab
