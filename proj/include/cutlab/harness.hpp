#pragma once
// Batch experiment harness: flat key=value configs, validated into
// ExperimentConfig; run_experiment dispatches to the estimator drivers with
// per-trial random streams and writes one CSV data file plus a JSON manifest.
//
// Reproducibility contract: (config, seed) fully determines the data file.
// Every trial draws from the stream (seed, kind tag, scale index, trial
// index), results land in trial-indexed slots, and reductions run in trial
// order on one thread, so the bytes written are identical for any worker
// count. The manifest records the configuration echo, tool version, wall
// time, per-scale row counts, and a SHA-256 digest of the data file; wall
// time varies between runs, the data file does not.
//
// Data files are CSV with self-tagged rows: each section starts with a
// header line naming the columns, and every data row carries its schema tag
// in the first column (e.g. "xi.v1"). Files are written whole via a
// temporary name and an atomic rename; a failed run leaves no output behind.

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cutlab/campaigns2d.hpp"
#include "cutlab/coupled_campaign.hpp"
#include "cutlab/digest.hpp"
#include "cutlab/estimators.hpp"
#include "cutlab/measures.hpp"
#include "cutlab/serialize.hpp"
#include "cutlab/skorokhod.hpp"

namespace cutlab {

inline constexpr const char* kToolVersion = "0.1.0";

enum class ExperimentKind {
  xi,
  one_point,
  two_point,
  moments,
  cutball,
  couple,
  l2box,
  dimension,
  ruin,
  beurling,
};

inline const char* kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::xi: return "xi";
    case ExperimentKind::one_point: return "one_point";
    case ExperimentKind::two_point: return "two_point";
    case ExperimentKind::moments: return "moments";
    case ExperimentKind::cutball: return "cutball";
    case ExperimentKind::couple: return "couple";
    case ExperimentKind::l2box: return "l2box";
    case ExperimentKind::dimension: return "dimension";
    case ExperimentKind::ruin: return "ruin";
    case ExperimentKind::beurling: return "beurling";
  }
  return "?";
}

inline std::optional<ExperimentKind> kind_from_name(const std::string& s) {
  for (ExperimentKind k :
       {ExperimentKind::xi, ExperimentKind::one_point, ExperimentKind::two_point,
        ExperimentKind::moments, ExperimentKind::cutball, ExperimentKind::couple,
        ExperimentKind::l2box, ExperimentKind::dimension, ExperimentKind::ruin,
        ExperimentKind::beurling})
    if (s == kind_name(k)) return k;
  return std::nullopt;
}

// One experiment: a kind, a dimension, scales, and trial counts, plus the
// kind-specific knobs. Negative scalar fields and empty list fields mean
// "not set"; drivers substitute their documented defaults.
struct ExperimentConfig {
  bool has_kind = false;
  ExperimentKind kind = ExperimentKind::xi;
  int d = 2;
  std::vector<double> scales;
  std::vector<uint64_t> trials{100000};
  uint64_t seed = 1;
  int workers = 0;  // 0 resolves via CUTLAB_WORKERS, then hardware concurrency
  std::string out;
  double xi_override = -1;

  std::vector<double> z, w;     // bulk points (length d)
  double bulk_floor = -1;       // distance floor to the origin and the sphere
  double separation_floor = -1; // minimum |z - w| for two_point
  double k = -1, l = -1;        // ruin log-radii
  double dt = -1;               // ruin / couple / l2box time grid
  double x_dist = -1, r = -1;   // beurling start height and domain log-radius
  std::vector<double> box_sizes;  // dimension; default 1/4 ... 1/128
  double rho = -1;              // l2box leg-separation margin
  double s = -1;                // l2box surrogate scale; default n/4
};

// All configuration violations at once, one message per issue.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> issues)
      : std::runtime_error(join(issues)), issues_(std::move(issues)) {}
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string s = "invalid configuration:";
    for (const auto& i : issues) {
      s += "\n  - ";
      s += i;
    }
    return s;
  }
  std::vector<std::string> issues_;
};

namespace detail {

// --------------------------------------------------------------------------
// Config text parsing.

struct KeyEntry {
  std::string value;
  int line = 0;
  bool used = false;
};

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

inline bool parse_double_str(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE || std::isnan(v)) return false;
  out = v;
  return true;
}

inline bool parse_u64_str(const std::string& s, uint64_t& out) {
  const std::string t = trim(s);
  if (t.empty() || t[0] == '-') return false;
  errno = 0;
  char* end = nullptr;
  unsigned long long v = std::strtoull(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size() || errno == ERANGE) return false;
  out = (uint64_t)v;
  return true;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

// Keys accepted for every kind, and per-kind vocabularies. Unknown keys are
// reported with their line; keys from another kind's vocabulary get a
// kind-specific message so typos and misplaced keys read differently.
inline const std::map<std::string, std::vector<ExperimentKind>>& kind_keys() {
  using K = ExperimentKind;
  static const std::map<std::string, std::vector<K>> m = {
      {"z", {K::one_point, K::two_point, K::cutball}},
      {"w", {K::two_point}},
      {"bulk_floor", {K::one_point, K::two_point, K::cutball, K::l2box}},
      {"separation_floor", {K::two_point}},
      {"k", {K::ruin}},
      {"l", {K::ruin}},
      {"dt", {K::ruin, K::couple, K::l2box}},
      {"x", {K::beurling}},
      {"r", {K::beurling}},
      {"box_sizes", {K::dimension}},
      {"rho", {K::l2box}},
      {"s", {K::l2box}},
  };
  return m;
}

inline bool kind_allows(ExperimentKind k, const std::string& key) {
  auto it = kind_keys().find(key);
  if (it == kind_keys().end()) return false;
  for (ExperimentKind allowed : it->second)
    if (allowed == k) return true;
  return false;
}

inline bool kind_takes_scales(ExperimentKind k) {
  return k != ExperimentKind::ruin && k != ExperimentKind::beurling;
}

// Semantic validation shared by the text parser and run_experiment. The
// locator maps a key to a message prefix ("line N: " when the key came from
// a file, empty for programmatic configs); skip() suppresses checks for keys
// whose values already failed to parse, so one typo yields one report.
template <class Loc, class Skip>
inline void semantic_issues(const ExperimentConfig& c, std::vector<std::string>& issues,
                            Loc&& where, Skip&& skip) {
  auto add = [&](const std::string& key, const std::string& msg) {
    if (!skip(key)) issues.push_back(where(key) + msg);
  };
  if (!c.has_kind) {
    issues.push_back(
        "missing required key 'kind' (one of: xi, one_point, two_point, moments, cutball, "
        "couple, l2box, dimension, ruin, beurling); kind-specific keys are checked once the "
        "kind is known");
    return;
  }
  const ExperimentKind k = c.kind;

  if (c.d != 2 && c.d != 3) add("d", "d must be 2 or 3");
  if ((k == ExperimentKind::l2box || k == ExperimentKind::beurling) && c.d == 3)
    add("d", std::string("kind '") + kind_name(k) + "' supports d = 2 only");

  // Scales.
  if (kind_takes_scales(k)) {
    if (c.scales.empty()) {
      add("scales", "missing required key 'scales'");
    } else {
      for (size_t i = 1; i < c.scales.size(); ++i)
        if (!(c.scales[i - 1] < c.scales[i])) {
          add("scales", "scales must be strictly ascending");
          break;
        }
      const double min_scale =
          (k == ExperimentKind::couple || k == ExperimentKind::l2box) ? 1.0 : 0.0;
      for (double v : c.scales)
        if (!(v > 0) || v < min_scale) {
          add("scales", min_scale > 0 ? "every scale must be at least 1 for this kind"
                                      : "every scale must be positive");
          break;
        }
      if (k == ExperimentKind::xi && c.scales.size() < 3)
        add("scales", "kind 'xi' needs at least three scales for the decay fit");
      if (k == ExperimentKind::moments) {
        for (double v : c.scales)
          if (std::abs(v - std::llround(v)) > 1e-9 || std::llround(v) < 1) {
            add("scales", "moments radii must be integers >= 1");
            break;
          }
      }
    }
  } else if (!c.scales.empty()) {
    add("scales", std::string("key 'scales' does not apply to kind '") + kind_name(k) + "'");
  }

  // Trials.
  if (c.trials.empty()) {
    add("trials", "trials must contain at least one count");
  } else {
    for (uint64_t t : c.trials)
      if (t < 1) {
        add("trials", "every trial count must be >= 1");
        break;
      }
    if (kind_takes_scales(k)) {
      if (c.trials.size() != 1 && c.trials.size() != c.scales.size())
        add("trials", "trials must be a single count or one count per scale");
    } else if (c.trials.size() != 1) {
      add("trials", std::string("kind '") + kind_name(k) + "' takes a single trial count");
    }
  }

  if (c.workers < 0) add("workers", "workers must be >= 0 (0 = auto)");
  if (c.xi_override != -1 && !(c.xi_override > 0 && c.xi_override < 2))
    add("xi_override", "xi_override must lie in (0, 2)");

  // Kind-specific keys: presence and ranges.
  auto require_point = [&](const char* key, const std::vector<double>& p) {
    if (p.empty())
      add(key, std::string("kind '") + kind_name(k) + "' requires key '" + key + "'");
    else if ((int)p.size() != c.d)
      add(key, std::string("'") + key + "' must list exactly d = " + std::to_string(c.d) +
                   " coordinates");
  };
  switch (k) {
    case ExperimentKind::one_point:
    case ExperimentKind::cutball:
      require_point("z", c.z);
      break;
    case ExperimentKind::two_point:
      require_point("z", c.z);
      require_point("w", c.w);
      break;
    case ExperimentKind::ruin:
      if (!(c.k > 0)) add("k", "kind 'ruin' requires key 'k' with a value > 0");
      if (!(c.l > 0)) add("l", "kind 'ruin' requires key 'l' with a value > 0");
      if (c.dt != -1 && !(c.dt > 0)) add("dt", "dt must be > 0");
      break;
    case ExperimentKind::beurling:
      if (c.x_dist == -1)
        add("x", "kind 'beurling' requires key 'x' (start distance, >= 0)");
      else if (!(c.x_dist >= 0))
        add("x", "'x' must be >= 0");
      if (!(c.r > 0)) add("r", "kind 'beurling' requires key 'r' with a value > 0");
      break;
    case ExperimentKind::couple:
    case ExperimentKind::l2box:
      if (c.dt != -1 && !(c.dt > 0 && c.dt <= 0.01))
        add("dt", "dt must lie in (0, 0.01] for the coupling grid");
      break;
    case ExperimentKind::dimension:
      if (!c.box_sizes.empty()) {
        try {
          check_box_dimension_sizes(c.box_sizes, "box_sizes");
        } catch (const std::invalid_argument& e) {
          add("box_sizes", e.what());
        }
      }
      break;
    default:
      break;
  }
  if (c.bulk_floor != -1 && !(c.bulk_floor > 0)) add("bulk_floor", "bulk_floor must be > 0");
  if (c.separation_floor != -1 && !(c.separation_floor > 0))
    add("separation_floor", "separation_floor must be > 0");
  if (c.rho != -1 && !(c.rho > 0 && c.rho < 0.25)) add("rho", "rho must lie in (0, 1/4)");
  if (c.s != -1 && !(c.s > 0)) add("s", "s must be > 0");
}

}  // namespace detail

// Parses and validates the flat key=value config format: one key per line,
// '#' starts a comment, lists are comma-separated. Reports every violation
// at once, each tagged with the line it came from.
inline ExperimentConfig parse_config_text(const std::string& text) {
  std::vector<std::string> issues;
  std::map<std::string, detail::KeyEntry> keys;

  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      issues.push_back("line " + std::to_string(line_no) + ": expected 'key = value'");
      continue;
    }
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) {
      issues.push_back("line " + std::to_string(line_no) + ": empty key");
      continue;
    }
    auto [it, inserted] = keys.emplace(key, detail::KeyEntry{value, line_no, false});
    if (!inserted)
      issues.push_back("line " + std::to_string(line_no) + ": duplicate key '" + key +
                       "' (first set on line " + std::to_string(it->second.line) + ")");
  }

  auto where = [&](const std::string& key) -> std::string {
    auto it = keys.find(key);
    if (it == keys.end()) return "";
    return "line " + std::to_string(it->second.line) + ": ";
  };
  auto take = [&](const char* key) -> detail::KeyEntry* {
    auto it = keys.find(key);
    if (it == keys.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  };
  std::set<std::string> malformed;
  auto bad = [&](const char* key, const detail::KeyEntry& e, const char* what) {
    issues.push_back("line " + std::to_string(e.line) + ": key '" + key + "': " + what);
    malformed.insert(key);
  };

  ExperimentConfig cfg;
  cfg.trials.clear();

  if (auto* e = take("kind")) {
    if (auto k = kind_from_name(e->value)) {
      cfg.kind = *k;
      cfg.has_kind = true;
    } else {
      bad("kind", *e,
          "unknown kind (expected one of: xi, one_point, two_point, moments, cutball, couple, "
          "l2box, dimension, ruin, beurling)");
    }
  }

  auto take_double = [&](const char* key, double& out) {
    if (auto* e = take(key)) {
      double v;
      if (detail::parse_double_str(e->value, v))
        out = v;
      else
        bad(key, *e, "expected a number");
    }
  };
  auto take_u64 = [&](const char* key, uint64_t& out) {
    if (auto* e = take(key)) {
      uint64_t v;
      if (detail::parse_u64_str(e->value, v))
        out = v;
      else
        bad(key, *e, "expected a nonnegative integer");
    }
  };
  auto take_double_list = [&](const char* key, std::vector<double>& out) {
    if (auto* e = take(key)) {
      std::vector<double> vs;
      bool ok = true;
      for (const auto& part : detail::split_list(e->value)) {
        double v;
        if (detail::parse_double_str(part, v))
          vs.push_back(v);
        else
          ok = false;
      }
      if (ok && !vs.empty())
        out = std::move(vs);
      else
        bad(key, *e, "expected a comma-separated list of numbers");
    }
  };

  if (auto* e = take("d")) {
    uint64_t v;
    if (detail::parse_u64_str(e->value, v) && (v == 2 || v == 3))
      cfg.d = (int)v;
    else
      bad("d", *e, "d must be 2 or 3");
  }
  take_double_list("scales", cfg.scales);
  if (auto* e = take("trials")) {
    std::vector<uint64_t> ts;
    bool ok = true;
    for (const auto& part : detail::split_list(e->value)) {
      uint64_t v;
      if (detail::parse_u64_str(part, v))
        ts.push_back(v);
      else
        ok = false;
    }
    if (ok && !ts.empty())
      cfg.trials = std::move(ts);
    else
      bad("trials", *e, "expected a comma-separated list of positive integers");
  }
  if (cfg.trials.empty()) cfg.trials = {100000};
  take_u64("seed", cfg.seed);
  if (auto* e = take("workers")) {
    uint64_t v;
    if (detail::parse_u64_str(e->value, v))
      cfg.workers = (int)v;
    else
      bad("workers", *e, "expected a nonnegative integer (0 = auto)");
  }
  if (auto* e = take("out")) {
    if (e->value.empty())
      bad("out", *e, "expected a file path");
    else
      cfg.out = e->value;
  }
  take_double("xi_override", cfg.xi_override);
  take_double_list("z", cfg.z);
  take_double_list("w", cfg.w);
  take_double("bulk_floor", cfg.bulk_floor);
  take_double("separation_floor", cfg.separation_floor);
  take_double("k", cfg.k);
  take_double("l", cfg.l);
  take_double("dt", cfg.dt);
  take_double("x", cfg.x_dist);
  take_double("r", cfg.r);
  take_double_list("box_sizes", cfg.box_sizes);
  take_double("rho", cfg.rho);
  take_double("s", cfg.s);

  for (const auto& [key, entry] : keys) {
    if (entry.used) {
      // A consumed kind-specific key may still be misplaced for this kind.
      if (cfg.has_kind && detail::kind_keys().count(key) && !detail::kind_allows(cfg.kind, key))
        issues.push_back("line " + std::to_string(entry.line) + ": key '" + key +
                         "' does not apply to kind '" + kind_name(cfg.kind) + "'");
      continue;
    }
    issues.push_back("line " + std::to_string(entry.line) + ": unknown key '" + key + "'");
  }

  // When 'kind' was present but unreadable, the parse error above already
  // covers it; skip the redundant missing-key report.
  if (cfg.has_kind || !keys.count("kind"))
    detail::semantic_issues(cfg, issues, where,
                            [&](const std::string& key) { return malformed.count(key) > 0; });
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError({"cannot open config file '" + path + "'"});
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

// Validates a programmatically built config the same way the parser does.
inline void validate_config(const ExperimentConfig& cfg) {
  std::vector<std::string> issues;
  detail::semantic_issues(
      cfg, issues, [](const std::string&) { return std::string(); },
      [](const std::string&) { return false; });
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

// --------------------------------------------------------------------------
// Experiment execution.

struct OutputRecord {
  std::string path;
  std::string sha256;
  uint64_t rows = 0;
};

struct RunManifest {
  ExperimentConfig config;
  std::string tool_version;
  int workers_resolved = 1;
  double wall_seconds = 0;
  std::vector<uint64_t> rows_per_scale;
  OutputRecord output;
  std::string manifest_path;
  std::string summary_json;  // kind-specific aggregate values, JSON object
};

namespace detail {

struct BuiltOutput {
  std::string csv;
  std::vector<uint64_t> rows_per_scale;
  uint64_t rows = 0;
  std::string summary_json = "{}";
};

inline uint64_t trials_at(const ExperimentConfig& c, size_t i) {
  return c.trials.size() == 1 ? c.trials[0] : c.trials[i];
}

template <int D>
inline RealPoint<D> point_from(const std::vector<double>& v) {
  RealPoint<D> p{};
  for (int i = 0; i < D; ++i) p[i] = v[(size_t)i];
  return p;
}

// Pads d=2 coordinate columns with zero third components so every row of a
// schema has the same column count in both dimensions.
template <int D>
inline void push_coords(std::vector<std::string>& cells, const RealPoint<D>& p) {
  for (int i = 0; i < 3; ++i) cells.push_back(fd(i < D ? p[(size_t)i] : 0.0));
}

template <int D>
inline BuiltOutput run_xi(const ExperimentConfig& cfg, int workers) {
  BuiltOutput b;
  b.csv += "schema,d,m,trials,hits,p_hat,stderr\n";
  std::vector<FitPoint> pts;
  for (size_t i = 0; i < cfg.scales.size(); ++i) {
    NonintersectionOptions o;
    o.trials = trials_at(cfg, i);
    o.workers = workers;
    o.scale_index = (uint32_t)i;
    auto est = estimate_nonintersection<D>(cfg.scales[i], cfg.seed, o);
    if (est.hits == 0)
      throw std::runtime_error("xi: no surviving pairs at m = " + fd(cfg.scales[i]) +
                               "; raise trials");
    csv_row(b.csv, {"xi.v1", fi(D), fd(cfg.scales[i]), fu(est.trials), fu(est.hits),
                    fd(est.p_hat), fd(est.stderr_value)});
    pts.push_back({cfg.scales[i], std::log(est.p_hat)});
    b.rows_per_scale.push_back(1);
    ++b.rows;
  }
  FitResult fit = fit_line(std::move(pts));
  b.csv += "schema,d,slope,slope_lo,slope_hi,intercept,r2\n";
  csv_row(b.csv, {"xi.fit.v1", fi(D), fd(fit.slope), fd(fit.slope_lo), fd(fit.slope_hi),
                  fd(fit.intercept), fd(fit.r2)});
  ++b.rows;
  JsonObject s;
  s.num("slope", fit.slope);
  s.num("slope_lo", fit.slope_lo);
  s.num("slope_hi", fit.slope_hi);
  s.num("intercept", fit.intercept);
  s.num("r2", fit.r2);
  b.summary_json = s.build();
  return b;
}

template <int D>
inline BuiltOutput run_one_point(const ExperimentConfig& cfg, int workers) {
  BuiltOutput b;
  b.csv += "schema,d,n,z0,z1,z2,site0,site1,site2,trials,hits,p_hat,stderr,degenerate\n";
  const RealPoint<D> z = point_from<D>(cfg.z);
  for (size_t i = 0; i < cfg.scales.size(); ++i) {
    OnePointOptions o;
    o.trials = trials_at(cfg, i);
    o.workers = workers;
    o.scale_index = (uint32_t)i;
    o.bulk_floor = cfg.bulk_floor;
    auto row = estimate_one_point<D>(z, cfg.scales[i], cfg.seed, o);
    std::vector<std::string> cells{"one_point.v1", fi(D), fd(row.n)};
    push_coords<D>(cells, row.z);
    for (int c = 0; c < 3; ++c) cells.push_back(fi(c < D ? row.site[(size_t)c] : 0));
    cells.push_back(fu(row.trials));
    cells.push_back(fu(row.hits));
    cells.push_back(fd(row.p_hat));
    cells.push_back(fd(row.stderr_value));
    cells.push_back(fb(row.degenerate));
    csv_cells(b.csv, cells);
    b.rows_per_scale.push_back(1);
    ++b.rows;
  }
  return b;
}

template <int D>
inline BuiltOutput run_two_point(const ExperimentConfig& cfg, int workers) {
  BuiltOutput b;
  b.csv += "schema,d,n,z0,z1,z2,w0,w1,w2,separation,trials,hits,p_hat,stderr,degenerate\n";
  const RealPoint<D> z = point_from<D>(cfg.z), w = point_from<D>(cfg.w);
  for (size_t i = 0; i < cfg.scales.size(); ++i) {
    TwoPointOptions o;
    o.trials = trials_at(cfg, i);
    o.workers = workers;
    o.scale_index = (uint32_t)i;
    o.bulk_floor = cfg.bulk_floor;
    o.separation_floor = cfg.separation_floor;
    auto row = estimate_two_point<D>(z, w, cfg.scales[i], cfg.seed, o);
    std::vector<std::string> cells{"two_point.v1", fi(D), fd(row.n)};
    push_coords<D>(cells, row.z);
    push_coords<D>(cells, row.w);
    cells.push_back(fd(std::sqrt(sq_dist<D>(row.z, row.w))));
    cells.push_back(fu(row.trials));
    cells.push_back(fu(row.hits));
    cells.push_back(fd(row.p_hat));
    cells.push_back(fd(row.stderr_value));
    cells.push_back(fb(row.degenerate));
    csv_cells(b.csv, cells);
    b.rows_per_scale.push_back(1);
    ++b.rows;
  }
  return b;
}

template <int D>
inline BuiltOutput run_moments(const ExperimentConfig& cfg, int workers) {
  BuiltOutput b;
  b.csv += "schema,d,radius,trials,m1,m1_stderr,m2,m2_stderr\n";
  for (size_t i = 0; i < cfg.scales.size(); ++i) {
    MomentOptions o;
    o.trials = trials_at(cfg, i);
    o.workers = workers;
    o.scale_index = (uint32_t)i;
    auto row = estimate_cut_count_moments<D>(std::llround(cfg.scales[i]), cfg.seed, o);
    csv_row(b.csv, {"moments.v1", fi(D), fi(row.radius), fu(row.trials), fd(row.m1),
                    fd(row.m1_stderr), fd(row.m2), fd(row.m2_stderr)});
    b.rows_per_scale.push_back(1);
    ++b.rows;
  }
  return b;
}

template <int D>
inline BuiltOutput run_cutball(const ExperimentConfig& cfg, int workers) {
  BuiltOutput b;
  b.csv += "schema,d,n,z0,z1,z2,trials,hits,p_hat,stderr,degenerate\n";
  const RealPoint<D> z = point_from<D>(cfg.z);
  for (size_t i = 0; i < cfg.scales.size(); ++i) {
    CutBallProbOptions o;
    o.trials = trials_at(cfg, i);
    o.workers = workers;
    o.scale_index = (uint32_t)i;
    o.bulk_floor = cfg.bulk_floor;
    auto row = estimate_cutball_probability<D>(z, cfg.scales[i], cfg.seed, o);
    std::vector<std::string> cells{"cutball.v1", fi(D), fd(row.n)};
    push_coords<D>(cells, row.z);
    cells.push_back(fu(row.trials));
    cells.push_back(fu(row.hits));
    cells.push_back(fd(row.p_hat));
    cells.push_back(fd(row.stderr_value));
    cells.push_back(fb(row.degenerate));
    csv_cells(b.csv, cells);
    b.rows_per_scale.push_back(1);
    ++b.rows;
  }
  return b;
}

template <int D>
inline BuiltOutput run_couple(const ExperimentConfig& cfg, int workers) {
  BuiltOutput b;
  b.csv += "schema,d,n,trial,max_deviation,tau_time,exit_time,steps_total\n";
  std::string scale_rows;
  JsonObject summary;
  std::string scale_summaries = "[";
  for (size_t i = 0; i < cfg.scales.size(); ++i) {
    const double n = cfg.scales[i];
    const uint64_t T = trials_at(cfg, i);
    std::vector<double> devs(T), taus(T), exits(T);
    std::vector<uint64_t> steps(T);
    run_trials(T, (size_t)workers, [&](uint64_t t) {
      RngStream rng(cfg.seed, stream_id_for(kStreamCouple, (uint32_t)i, t));
      SkorokhodOptions so;
      so.dt = cfg.dt > 0 ? cfg.dt : 0.01;
      so.keep_paths = false;
      auto pair = skorokhod_embed<D>(n, rng, so);
      devs[t] = pair.max_deviation;
      taus[t] = pair.tau_time;
      exits[t] = pair.exit_time;
      steps[t] = pair.steps_total;
    });
    for (uint64_t t = 0; t < T; ++t) {
      csv_row(b.csv, {"couple.v1", fi(D), fd(n), fu(t), fd(devs[t]), fd(taus[t]), fd(exits[t]),
                      fu(steps[t])});
      ++b.rows;
    }
    const double bound = std::exp(0.65 * n);
    uint64_t within = 0;
    double dev_sum = 0;
    for (double v : devs) {
      if (v <= bound) ++within;
      dev_sum += v;
    }
    std::vector<double> sorted = devs;
    std::sort(sorted.begin(), sorted.end());
    auto quant = [&](double q) {
      size_t idx = (size_t)std::ceil(q * (double)T);
      return sorted[idx > 0 ? idx - 1 : 0];
    };
    csv_row(scale_rows, {"couple.scale.v1", fi(D), fd(n), fu(T), fd(bound),
                         fd((double)within / (double)T), fd(dev_sum / (double)T), fd(quant(0.5)),
                         fd(quant(0.99)), fd(sorted.back())});
    b.rows_per_scale.push_back(T + 1);
    ++b.rows;
    if (i) scale_summaries += ',';
    JsonObject one;
    one.num("n", n);
    one.num("trials", T);
    one.num("deviation_bound", bound);
    one.num("frac_within", (double)within / (double)T);
    scale_summaries += one.build();
  }
  b.csv += "schema,d,n,trials,deviation_bound,frac_within,dev_mean,dev_q50,dev_q99,dev_max\n";
  b.csv += scale_rows;
  summary.raw("scales", scale_summaries + "]");
  b.summary_json = summary.build();
  return b;
}

inline BuiltOutput run_l2box(const ExperimentConfig& cfg, int workers) {
  BuiltOutput b;
  std::vector<CoupledCampaignResult> camps;
  for (size_t i = 0; i < cfg.scales.size(); ++i) {
    CoupledCampaignOptions o;
    o.trials = trials_at(cfg, i);
    o.workers = workers;
    o.scale_index = (uint32_t)i;
    if (cfg.dt > 0) o.dt = cfg.dt;
    if (cfg.rho > 0) o.rho = cfg.rho;
    if (cfg.s > 0) o.s = cfg.s;
    if (cfg.bulk_floor > 0) o.bulk_floor = cfg.bulk_floor;
    if (cfg.xi_override > 0) o.xi = cfg.xi_override;
    camps.push_back(coupled_campaign_2d(cfg.scales[i], cfg.seed, o));
  }
  const double c_hat = calibrate_c_hat(camps.back());
  b.csv +=
      "schema,n,trials,anchor_slots,c_hat,l2_mean,l2_stderr,walk_mean,walk_stderr,bm_mean,"
      "bm_stderr,mismatch_total,union_total,mismatch_ratio,mismatch_stderr\n";
  JsonObject summary;
  summary.num("c_hat", c_hat);
  std::string scale_summaries = "[";
  for (size_t i = 0; i < camps.size(); ++i) {
    const auto& c = camps[i];
    SampleStats l2 = coupled_l2_from_rows(c.rows, c_hat);
    csv_row(b.csv, {"l2box.v1", fd(c.n), fu(c.trials), fu((uint64_t)c.anchor_slots), fd(c_hat),
                    fd(l2.mean), fd(l2.stderr_value), fd(c.walk_mass.mean),
                    fd(c.walk_mass.stderr_value), fd(c.bm_mass.mean), fd(c.bm_mass.stderr_value),
                    fu(c.mismatch_total), fu(c.union_total), fd(c.mismatch_ratio),
                    fd(c.mismatch_stderr)});
    b.rows_per_scale.push_back(1);
    ++b.rows;
    if (i) scale_summaries += ',';
    JsonObject one;
    one.num("n", c.n);
    one.num("l2_mean", l2.mean);
    one.num("l2_stderr", l2.stderr_value);
    one.num("mismatch_ratio", c.mismatch_ratio);
    scale_summaries += one.build();
  }
  summary.raw("scales", scale_summaries + "]");
  b.summary_json = summary.build();
  return b;
}

template <int D>
inline BuiltOutput run_dimension(const ExperimentConfig& cfg, int workers) {
  BuiltOutput b;
  std::vector<double> sizes = cfg.box_sizes;
  if (sizes.empty())
    sizes = {1.0 / 4, 1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128};
  b.csv += "schema,d,n,box_size,mean_occupied\n";
  std::string fit_rows;
  JsonObject summary;
  std::string fits = "[";
  for (size_t i = 0; i < cfg.scales.size(); ++i) {
    BoxDimensionPooledOptions o;
    o.trials = trials_at(cfg, i);
    o.workers = workers;
    o.scale_index = (uint32_t)i;
    auto res = box_dimension_pooled<D>(cfg.scales[i], sizes, cfg.seed, o);
    for (size_t si = 0; si < sizes.size(); ++si) {
      csv_row(b.csv, {"dimension.v1", fi(D), fd(res.n), fd(res.box_sizes[si]),
                      fd(res.mean_occupied[si])});
      ++b.rows;
    }
    csv_row(fit_rows, {"dimension.fit.v1", fi(D), fd(res.n), fu(res.trials), fd(res.fit.slope),
                       fd(res.fit.slope_lo), fd(res.fit.slope_hi), fd(res.fit.r2)});
    b.rows_per_scale.push_back(sizes.size() + 1);
    ++b.rows;
    if (i) fits += ',';
    JsonObject one;
    one.num("n", res.n);
    one.num("slope", res.fit.slope);
    one.num("slope_lo", res.fit.slope_lo);
    one.num("slope_hi", res.fit.slope_hi);
    fits += one.build();
  }
  b.csv += "schema,d,n,trials,slope,slope_lo,slope_hi,r2\n";
  b.csv += fit_rows;
  summary.raw("fits", fits + "]");
  b.summary_json = summary.build();
  return b;
}

template <int D>
inline BuiltOutput run_ruin(const ExperimentConfig& cfg, int workers) {
  BuiltOutput b;
  b.csv += "schema,d,k,l,dt,trials,hits,p_hat,stderr,p_formula\n";
  RuinOptions o;
  o.trials = cfg.trials[0];
  o.workers = workers;
  if (cfg.dt > 0) o.dt = cfg.dt;
  auto row = gamblers_ruin_check<D>(cfg.k, cfg.l, cfg.seed, o);
  csv_row(b.csv, {"ruin.v1", fi(row.dim), fd(row.k), fd(row.l), fd(row.dt), fu(row.trials),
                  fu(row.hits), fd(row.p_hat), fd(row.stderr_value), fd(row.p_formula)});
  b.rows_per_scale.push_back(1);
  b.rows = 1;
  JsonObject s;
  s.num("p_hat", row.p_hat);
  s.num("p_formula", row.p_formula);
  s.num("abs_error", std::abs(row.p_hat - row.p_formula));
  if (row.stderr_value > 0)
    s.num("sigma_distance", std::abs(row.p_hat - row.p_formula) / row.stderr_value);
  b.summary_json = s.build();
  return b;
}

inline BuiltOutput run_beurling(const ExperimentConfig& cfg, int workers) {
  BuiltOutput b;
  b.csv += "schema,x,r,trials,hits,p_hat,stderr,degenerate\n";
  BeurlingOptions o;
  o.trials = cfg.trials[0];
  o.workers = workers;
  auto row = beurling_escape_estimate(cfg.x_dist, cfg.r, cfg.seed, o);
  csv_row(b.csv, {"beurling.v1", fd(row.x_dist), fd(row.r), fu(row.trials), fu(row.hits),
                  fd(row.p_hat), fd(row.stderr_value), fb(row.degenerate)});
  b.rows_per_scale.push_back(1);
  b.rows = 1;
  return b;
}

inline BuiltOutput dispatch(const ExperimentConfig& cfg, int workers) {
  const bool d2 = cfg.d == 2;
  switch (cfg.kind) {
    case ExperimentKind::xi: return d2 ? run_xi<2>(cfg, workers) : run_xi<3>(cfg, workers);
    case ExperimentKind::one_point:
      return d2 ? run_one_point<2>(cfg, workers) : run_one_point<3>(cfg, workers);
    case ExperimentKind::two_point:
      return d2 ? run_two_point<2>(cfg, workers) : run_two_point<3>(cfg, workers);
    case ExperimentKind::moments:
      return d2 ? run_moments<2>(cfg, workers) : run_moments<3>(cfg, workers);
    case ExperimentKind::cutball:
      return d2 ? run_cutball<2>(cfg, workers) : run_cutball<3>(cfg, workers);
    case ExperimentKind::couple:
      return d2 ? run_couple<2>(cfg, workers) : run_couple<3>(cfg, workers);
    case ExperimentKind::l2box: return run_l2box(cfg, workers);
    case ExperimentKind::dimension:
      return d2 ? run_dimension<2>(cfg, workers) : run_dimension<3>(cfg, workers);
    case ExperimentKind::ruin: return d2 ? run_ruin<2>(cfg, workers) : run_ruin<3>(cfg, workers);
    case ExperimentKind::beurling: return run_beurling(cfg, workers);
  }
  throw std::logic_error("dispatch: unhandled experiment kind");
}

inline std::string config_echo_json(const ExperimentConfig& c, int workers_resolved) {
  JsonObject o;
  o.str("kind", kind_name(c.kind));
  o.num("d", c.d);
  if (!c.scales.empty()) o.list("scales", c.scales, [](double v) { return fmt_double(v); });
  o.list("trials", c.trials, [](uint64_t v) { return std::to_string(v); });
  o.num("seed", c.seed);
  o.num("workers", c.workers);
  o.num("workers_resolved", workers_resolved);
  o.str("out", c.out);
  if (c.xi_override != -1) o.num("xi_override", c.xi_override);
  if (!c.z.empty()) o.list("z", c.z, [](double v) { return fmt_double(v); });
  if (!c.w.empty()) o.list("w", c.w, [](double v) { return fmt_double(v); });
  if (c.bulk_floor != -1) o.num("bulk_floor", c.bulk_floor);
  if (c.separation_floor != -1) o.num("separation_floor", c.separation_floor);
  if (c.k != -1) o.num("k", c.k);
  if (c.l != -1) o.num("l", c.l);
  if (c.dt != -1) o.num("dt", c.dt);
  if (c.x_dist != -1) o.num("x", c.x_dist);
  if (c.r != -1) o.num("r", c.r);
  if (!c.box_sizes.empty())
    o.list("box_sizes", c.box_sizes, [](double v) { return fmt_double(v); });
  if (c.rho != -1) o.num("rho", c.rho);
  if (c.s != -1) o.num("s", c.s);
  return o.build();
}

}  // namespace detail

// Runs the configured experiment and writes `out` (CSV) and `out`.manifest.json.
// Throws ConfigError for invalid configs; any failure during execution or
// writing removes whatever outputs were already in place.
inline RunManifest run_experiment(const ExperimentConfig& cfg) {
  {
    std::vector<std::string> issues;
    detail::semantic_issues(
        cfg, issues, [](const std::string&) { return std::string(); },
        [](const std::string&) { return false; });
    if (cfg.out.empty()) issues.push_back("missing output path 'out'");
    if (!issues.empty()) throw ConfigError(std::move(issues));
  }
  const int workers = (int)resolve_workers((size_t)cfg.workers);

  const auto t0 = std::chrono::steady_clock::now();
  detail::BuiltOutput built = detail::dispatch(cfg, workers);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  RunManifest man;
  man.config = cfg;
  man.tool_version = kToolVersion;
  man.workers_resolved = workers;
  man.wall_seconds = wall;
  man.rows_per_scale = built.rows_per_scale;
  man.output.path = cfg.out;
  man.output.sha256 = sha256_hex(built.csv);
  man.output.rows = built.rows;
  man.manifest_path = cfg.out + ".manifest.json";
  man.summary_json = built.summary_json;

  detail::JsonObject j;
  j.str("schema", "cutlab.manifest.v1");
  j.str("tool_version", kToolVersion);
  j.str("kind", kind_name(cfg.kind));
  j.raw("config", detail::config_echo_json(cfg, workers));
  j.num("wall_seconds", wall);
  j.list("rows_per_scale", man.rows_per_scale, [](uint64_t v) { return std::to_string(v); });
  {
    detail::JsonObject rec;
    rec.str("path", man.output.path);
    rec.str("sha256", man.output.sha256);
    rec.num("rows", man.output.rows);
    j.raw("outputs", "[" + rec.build() + "]");
  }
  j.raw("summary", built.summary_json);
  const std::string manifest_text = j.build() + "\n";

  try {
    detail::write_file_atomic(cfg.out, built.csv);
    detail::write_file_atomic(man.manifest_path, manifest_text);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(cfg.out, ec);
    std::filesystem::remove(man.manifest_path, ec);
    throw;
  }
  return man;
}

}  // namespace cutlab
