#pragma once
// One-scale coupled campaign over embedded walk/Brownian pairs.
//
// Each trial builds one pair by the Skorokhod embedding and scores it, inside
// the worker that built it, against two kinds of queries sharing that single
// expensive realization: (a) the lattice and continuous cut-ball events at a
// family of bulk anchors, each pooled over its eight lattice-symmetry images
// (the coupled law is invariant under them), and (b) the box masses feeding
// the L2 comparison of the walk's cut-point occupation measure against the
// Brownian surrogate measure. Pairs are discarded right after scoring, so
// peak memory is one pair per worker; per-trial rows land in trial-indexed
// slots and aggregates reduce in trial order on one thread, so results are
// byte-identical for any worker count.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cutlab/campaigns2d.hpp"
#include "cutlab/estimators.hpp"
#include "cutlab/measures.hpp"
#include "cutlab/scan2d.hpp"
#include "cutlab/skorokhod.hpp"

namespace cutlab {

struct CoupledTrialRow {
  uint16_t discrete_hits = 0;    // lattice cut-ball events over the anchor images
  uint16_t continuous_hits = 0;  // continuous events over the same images
  uint16_t mismatch = 0;         // images where exactly one of the two occurred
  uint16_t either = 0;           // images where at least one occurred
  double walk_mass = 0;          // occupation mass of the box (zero unless score_box)
  double bm_mass = 0;            // surrogate mass of the box at compensator 1
  double max_deviation = 0;      // coupling deviation of this pair
  uint64_t steps_total = 0;      // embedded walk steps through the outer exit
};

struct CoupledCampaignOptions {
  uint64_t trials = 1000;
  int workers = 1;
  uint32_t scale_index = 0;
  double dt = 0.01;        // simulation grid of the embedding
  double rho = 0.05;       // leg-separation margin of the continuous detector
  double s = 0;            // surrogate scale; 0 picks n/4
  double bulk_floor = -1;  // anchor/box distance floor; negative picks e^{-n/6}
  std::vector<RealPoint<2>> anchors{{0.44, 0.19}, {0.31, 0.37}, {0.13, 0.46}};
  bool score_box = true;
  NiceBox<2> box{{3, 2}, 3};
  double xi = kXiDefault<2>;
};

struct CoupledCampaignResult {
  double n = 0;
  uint64_t trials = 0;
  size_t anchor_slots = 0;  // anchors x 8 symmetry images
  std::vector<CoupledTrialRow> rows;

  uint64_t discrete_total = 0;
  uint64_t continuous_total = 0;
  uint64_t mismatch_total = 0;
  uint64_t union_total = 0;
  bool defined = false;        // union_total > 0
  double mismatch_ratio = 0;   // mismatch_total / union_total
  double mismatch_stderr = 0;  // per-trial cluster stderr of the ratio (delta method)

  SampleStats walk_mass;  // over trials; n = 0 unless score_box
  SampleStats bm_mass;
};

// Compensator constant matching the surrogate's mean box mass to the walk's
// over one campaign: mean(walk mass) / mean(surrogate mass).
inline double calibrate_c_hat(const CoupledCampaignResult& r) {
  if (r.rows.empty()) throw std::invalid_argument("calibrate_c_hat: no rows");
  double w = 0, b = 0;
  for (const auto& row : r.rows) {
    w += row.walk_mass;
    b += row.bm_mass;
  }
  if (!(b > 0))
    throw std::runtime_error("calibrate_c_hat: no surrogate mass at the calibration scale");
  return w / b;
}

// Monte Carlo stats of (walk mass - c_hat * surrogate mass)^2 over the rows.
// Terms are sorted before averaging, so the value is independent of row order.
inline SampleStats coupled_l2_from_rows(const std::vector<CoupledTrialRow>& rows, double c_hat) {
  if (rows.empty()) throw std::invalid_argument("coupled_l2_from_rows: no rows");
  std::vector<double> terms;
  terms.reserve(rows.size());
  for (const auto& row : rows) {
    double diff = row.walk_mass - c_hat * row.bm_mass;
    terms.push_back(diff * diff);
  }
  std::sort(terms.begin(), terms.end());
  return sample_stats(terms);
}

// Pooled mismatch frequency relative to the pooled union frequency. The ratio
// of per-trial means comes with a delta-method variance clustered at the
// trial level, since image counts within one trial share a realization.
struct MismatchRatio {
  uint64_t mismatch_total = 0;
  uint64_t union_total = 0;
  bool defined = false;  // union_total > 0
  double ratio = 0;
  double stderr_value = 0;
};

inline MismatchRatio mismatch_ratio_stats(const std::vector<CoupledTrialRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("mismatch_ratio_stats: no rows");
  MismatchRatio out;
  for (const auto& row : rows) {
    out.mismatch_total += row.mismatch;
    out.union_total += row.either;
  }
  out.defined = out.union_total > 0;
  if (!out.defined) return out;
  const double T = (double)rows.size();
  const double mb = (double)out.mismatch_total / T;
  const double ub = (double)out.union_total / T;
  out.ratio = mb / ub;
  if (rows.size() > 1) {
    double smm = 0, smu = 0, suu = 0;
    for (const auto& row : rows) {
      double dm = (double)row.mismatch - mb;
      double du = (double)row.either - ub;
      smm += dm * dm;
      smu += dm * du;
      suu += du * du;
    }
    const double dof = T - 1;
    smm /= dof;
    smu /= dof;
    suu /= dof;
    const double r = out.ratio;
    double var = (smm - 2.0 * r * smu + r * r * suu) / (ub * ub * T);
    out.stderr_value = var > 0 ? std::sqrt(var) : 0;
  }
  return out;
}

inline CoupledCampaignResult coupled_campaign_2d(double n, uint64_t seed,
                                                 CoupledCampaignOptions opt = {}) {
  if (opt.trials == 0) throw std::invalid_argument("coupled_campaign_2d: zero trials");
  if (!(n >= 1)) throw std::invalid_argument("coupled_campaign_2d: need n >= 1");
  if (opt.anchors.empty()) throw std::invalid_argument("coupled_campaign_2d: no anchors");
  if (!(opt.rho > 0) || !(opt.rho < 0.25))
    throw std::invalid_argument("coupled_campaign_2d: rho must lie in (0, 1/4)");
  const double floor_dist = opt.bulk_floor >= 0 ? opt.bulk_floor : std::exp(-n / 6.0);
  const double s_eff = opt.s > 0 ? opt.s : n / 4.0;
  const double r_dom = std::exp(n), r_in = std::exp(0.75 * n);
  for (const auto& z : opt.anchors) {
    const double z_norm = std::sqrt(sq_norm<2>(z));
    if (!detail::bulk_ok(z_norm, floor_dist))
      throw std::invalid_argument("coupled_campaign_2d: anchor outside the bulk band");
    const double c_norm = r_dom * z_norm;
    if (!(c_norm > r_in) || !(c_norm + r_in <= r_dom))
      throw std::invalid_argument("coupled_campaign_2d: anchor ball does not fit the domain");
  }
  if (opt.score_box &&
      (!(opt.box.dist_origin() >= floor_dist) || !(opt.box.dist_boundary() >= floor_dist)))
    throw std::invalid_argument("coupled_campaign_2d: box violates the bulk distance floor");

  // Anchor images and their lattice ball specs, slot q*8+g.
  std::vector<RealPoint<2>> images;
  std::vector<BallSpec<2>> inner, envelope;
  for (const auto& z : opt.anchors) {
    for (int g = 0; g < 8; ++g) {
      RealPoint<2> img = detail::dihedral_apply(g, z);
      images.push_back(img);
      auto a = lattice_anchor<2>(img, n);
      inner.push_back(BallSpec<2>::at(a, 0.75 * n));
      envelope.push_back(BallSpec<2>::at(a, n * 5.0 / 6.0));
    }
  }
  {
    ScanEngine2D probe;  // validates the lattice ball geometry before any work
    probe.configure(n, inner, envelope);
  }

  const uint64_t token = detail::next_campaign_token();
  std::vector<CoupledTrialRow> rows(opt.trials);
  run_trials(opt.trials, (size_t)opt.workers, [&](uint64_t t) {
    thread_local ScanEngine2D eng;
    thread_local uint64_t have_token = 0;
    if (have_token != token) {
      eng.configure(n, inner, envelope);
      have_token = token;
    }
    RngStream rng(seed, stream_id_for(kStreamCouple, opt.scale_index, t));
    SkorokhodOptions sopt;
    sopt.dt = opt.dt;
    CoupledPair<2> pair = skorokhod_embed<2>(n, rng, sopt);

    CoupledTrialRow row;
    row.max_deviation = pair.max_deviation;
    row.steps_total = pair.steps_total;

    LatticePath<2> walk = pair.walk_prefix();
    eng.begin_trial();
    for (const auto& site : walk.sites) eng.record(site);
    eng.finalize();

    BrownianPath<2> bmp = pair.bm_prefix();
    for (size_t a = 0; a < images.size(); ++a) {
      bool d = eng.ball_occurred(a);
      bool c = is_cut_ball_continuous_upscaled<2>(bmp, images[a], n, opt.rho).occurred;
      row.discrete_hits = (uint16_t)(row.discrete_hits + (d ? 1 : 0));
      row.continuous_hits = (uint16_t)(row.continuous_hits + (c ? 1 : 0));
      row.mismatch = (uint16_t)(row.mismatch + (d != c ? 1 : 0));
      row.either = (uint16_t)(row.either + ((d || c) ? 1 : 0));
    }

    if (opt.score_box) {
      CoupledBoxTerms terms = coupled_box_terms<2>(pair, opt.box, s_eff, opt.rho, opt.xi);
      row.walk_mass = terms.walk_mass;
      row.bm_mass = terms.bm_mass;
    }
    rows[t] = row;
  });

  CoupledCampaignResult out;
  out.n = n;
  out.trials = opt.trials;
  out.anchor_slots = images.size();
  out.rows = std::move(rows);
  for (const auto& row : out.rows) {
    out.discrete_total += row.discrete_hits;
    out.continuous_total += row.continuous_hits;
  }
  MismatchRatio ratio = mismatch_ratio_stats(out.rows);
  out.mismatch_total = ratio.mismatch_total;
  out.union_total = ratio.union_total;
  out.defined = ratio.defined;
  out.mismatch_ratio = ratio.ratio;
  out.mismatch_stderr = ratio.stderr_value;

  if (opt.score_box) {
    std::vector<double> w, b;
    w.reserve(out.rows.size());
    b.reserve(out.rows.size());
    for (const auto& row : out.rows) {
      w.push_back(row.walk_mass);
      b.push_back(row.bm_mass);
    }
    out.walk_mass = sample_stats(w);
    out.bm_mass = sample_stats(b);
  }
  return out;
}

}  // namespace cutlab
