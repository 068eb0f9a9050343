// Coupled campaign: determinism across workers, agreement with the direct
// detectors replayed on the same pairs, exact behavior of the calibration and
// L2 helpers on hand-built rows, and upfront validation.

#include <cmath>
#include <vector>

#include "cutlab/coupled_campaign.hpp"
#include "doctest.h"

using namespace cutlab;

namespace {

CoupledTrialRow mass_row(double w, double b) {
  CoupledTrialRow r;
  r.walk_mass = w;
  r.bm_mass = b;
  return r;
}

CoupledTrialRow count_row(uint16_t m, uint16_t u) {
  CoupledTrialRow r;
  r.mismatch = m;
  r.either = u;
  return r;
}

}  // namespace

TEST_SUITE("coupled_campaign") {
  TEST_CASE("calibration and the L2 statistic are exact on hand-built rows") {
    CoupledCampaignResult r;
    r.rows = {mass_row(2.0, 1.0), mass_row(4.0, 2.0)};
    CHECK(calibrate_c_hat(r) == 2.0);
    SampleStats zero = coupled_l2_from_rows(r.rows, 2.0);
    CHECK(zero.mean == 0.0);
    CHECK(zero.stderr_value == 0.0);
    CHECK(zero.n == 2);

    r.rows = {mass_row(3.0, 1.0), mass_row(1.0, 1.0)};
    CHECK(calibrate_c_hat(r) == 2.0);
    SampleStats one = coupled_l2_from_rows(r.rows, 2.0);
    CHECK(one.mean == 1.0);  // terms (3-2)^2 and (1-2)^2
    CHECK(one.stderr_value == 0.0);

    CoupledCampaignResult no_mass;
    no_mass.rows = {mass_row(1.0, 0.0), mass_row(2.0, 0.0)};
    CHECK_THROWS_AS((void)calibrate_c_hat(no_mass), std::runtime_error);
    CoupledCampaignResult empty;
    CHECK_THROWS_AS((void)calibrate_c_hat(empty), std::invalid_argument);
    CHECK_THROWS_AS((void)coupled_l2_from_rows(empty.rows, 1.0), std::invalid_argument);
  }

  TEST_CASE("L2 helper is invariant under row order") {
    std::vector<CoupledTrialRow> rows = {mass_row(0.3, 0.1), mass_row(1.7, 0.4),
                                         mass_row(0.0, 0.9), mass_row(2.2, 0.0)};
    std::vector<CoupledTrialRow> rev(rows.rbegin(), rows.rend());
    SampleStats a = coupled_l2_from_rows(rows, 1.3);
    SampleStats b = coupled_l2_from_rows(rev, 1.3);
    CHECK(a.mean == b.mean);
    CHECK(a.stderr_value == b.stderr_value);
  }

  TEST_CASE("validation rejects bad parameters and geometry before any work") {
    CoupledCampaignOptions opt;
    opt.trials = 0;
    CHECK_THROWS_AS((void)coupled_campaign_2d(4.0, 1, opt), std::invalid_argument);

    opt = {};
    opt.trials = 1;
    CHECK_THROWS_AS((void)coupled_campaign_2d(0.5, 1, opt), std::invalid_argument);

    opt = {};
    opt.trials = 1;
    opt.anchors.clear();
    CHECK_THROWS_AS((void)coupled_campaign_2d(4.0, 1, opt), std::invalid_argument);

    opt = {};
    opt.trials = 1;
    opt.bulk_floor = 0.35;
    opt.rho = 0.3;
    CHECK_THROWS_AS((void)coupled_campaign_2d(4.0, 1, opt), std::invalid_argument);

    // Default floor e^{-n/6} at n = 4 is 0.513, above the default anchor norms.
    opt = {};
    opt.trials = 1;
    CHECK_THROWS_AS((void)coupled_campaign_2d(4.0, 1, opt), std::invalid_argument);

    // Floor 0.4 passes the anchors but the default box only clears 0.375.
    opt = {};
    opt.trials = 1;
    opt.bulk_floor = 0.4;
    CHECK_THROWS_AS((void)coupled_campaign_2d(4.0, 1, opt), std::invalid_argument);

    // At n = 1 the inner ball radius e^{3/4} exceeds the anchor distance.
    opt = {};
    opt.trials = 1;
    opt.bulk_floor = 0.05;
    CHECK_THROWS_AS((void)coupled_campaign_2d(1.0, 1, opt), std::invalid_argument);
  }

  TEST_CASE("small campaign is worker-count invariant and internally consistent") {
    const double n = 4.0;
    const uint64_t seed = 10401;
    CoupledCampaignOptions opt;
    opt.trials = 32;
    opt.bulk_floor = 0.35;

    opt.workers = 1;
    CoupledCampaignResult r1 = coupled_campaign_2d(n, seed, opt);
    opt.workers = 3;
    CoupledCampaignResult r3 = coupled_campaign_2d(n, seed, opt);

    REQUIRE(r1.rows.size() == 32);
    REQUIRE(r3.rows.size() == 32);
    CHECK(r1.anchor_slots == 24);
    for (size_t t = 0; t < r1.rows.size(); ++t) {
      const auto& a = r1.rows[t];
      const auto& b = r3.rows[t];
      CHECK(a.discrete_hits == b.discrete_hits);
      CHECK(a.continuous_hits == b.continuous_hits);
      CHECK(a.mismatch == b.mismatch);
      CHECK(a.either == b.either);
      CHECK(a.walk_mass == b.walk_mass);
      CHECK(a.bm_mass == b.bm_mass);
      CHECK(a.max_deviation == b.max_deviation);
      CHECK(a.steps_total == b.steps_total);
    }
    CHECK(r1.mismatch_ratio == r3.mismatch_ratio);
    CHECK(r1.mismatch_stderr == r3.mismatch_stderr);
    CHECK(r1.walk_mass.mean == r3.walk_mass.mean);
    CHECK(r1.bm_mass.mean == r3.bm_mass.mean);

    // Per-row set identities and bounds.
    for (const auto& row : r1.rows) {
      CHECK(row.discrete_hits <= 24);
      CHECK(row.continuous_hits <= 24);
      CHECK(row.either <= 24);
      CHECK(row.mismatch <= row.either);
      // |symdiff| = 2|union| - |D| - |C|
      CHECK((int)row.mismatch == 2 * (int)row.either - (int)row.discrete_hits -
                                     (int)row.continuous_hits);
      CHECK(row.walk_mass >= 0);
      CHECK(row.bm_mass >= 0);
      CHECK(row.steps_total > (uint64_t)std::exp(2.0 * n));
      CHECK(row.max_deviation > 0);
    }

    CHECK(r1.defined);
    CHECK(r1.union_total > 0);
    CHECK(r1.mismatch_total > 0);  // the coupling is loose at this small scale
    CHECK(r1.mismatch_ratio > 0);
    CHECK(r1.mismatch_ratio <= 1);
    CHECK(r1.mismatch_stderr > 0);
    CHECK(r1.walk_mass.n == 32);
    CHECK(r1.bm_mass.n == 32);

    // The helpers run end to end on real rows.
    if (r1.bm_mass.mean > 0) {
      double c = calibrate_c_hat(r1);
      CHECK(c >= 0);
      SampleStats l2 = coupled_l2_from_rows(r1.rows, c);
      CHECK(l2.mean >= 0);
    }
  }

  TEST_CASE("campaign counts match the direct detectors on the same pairs") {
    const double n = 4.0;
    const uint64_t seed = 10402;
    CoupledCampaignOptions opt;
    opt.trials = 8;
    opt.workers = 2;
    opt.bulk_floor = 0.35;
    CoupledCampaignResult r = coupled_campaign_2d(n, seed, opt);
    REQUIRE(r.rows.size() == 8);

    std::vector<RealPoint<2>> images;
    for (const auto& z : opt.anchors)
      for (int g = 0; g < 8; ++g) images.push_back(detail::dihedral_apply(g, z));

    for (uint64_t t = 0; t < 8; ++t) {
      RngStream rng(seed, stream_id_for(kStreamCouple, 0, t));
      CoupledPair<2> pair = skorokhod_embed<2>(n, rng);
      LatticePath<2> walk = pair.walk_prefix();
      BrownianPath<2> bmp = pair.bm_prefix();

      int d_hits = 0, c_hits = 0, mism = 0, uni = 0;
      for (const auto& img : images) {
        bool d = is_cut_ball_discrete<2>(walk, img, n).occurred;
        bool c = is_cut_ball_continuous_upscaled<2>(bmp, img, n, opt.rho).occurred;
        d_hits += d;
        c_hits += c;
        mism += d != c;
        uni += d || c;
      }
      CHECK(r.rows[t].discrete_hits == d_hits);
      CHECK(r.rows[t].continuous_hits == c_hits);
      CHECK(r.rows[t].mismatch == mism);
      CHECK(r.rows[t].either == uni);

      CoupledBoxTerms terms = coupled_box_terms<2>(pair, opt.box, n / 4.0, opt.rho);
      CHECK(r.rows[t].walk_mass == terms.walk_mass);
      CHECK(r.rows[t].bm_mass == terms.bm_mass);
      CHECK(r.rows[t].max_deviation == pair.max_deviation);
      CHECK(r.rows[t].steps_total == pair.steps_total);
    }
  }

  TEST_CASE("box scoring can be disabled, skipping the box floor check") {
    CoupledCampaignOptions opt;
    opt.trials = 2;
    opt.score_box = false;
    opt.bulk_floor = 0.4;  // would reject the default box if it were scored
    CoupledCampaignResult r = coupled_campaign_2d(4.0, 10403, opt);
    REQUIRE(r.rows.size() == 2);
    for (const auto& row : r.rows) {
      CHECK(row.walk_mass == 0);
      CHECK(row.bm_mass == 0);
    }
    CHECK(r.walk_mass.n == 0);
    CHECK_THROWS_AS((void)calibrate_c_hat(r), std::runtime_error);
  }

  TEST_CASE("ratio stats match hand-computed values on fabricated rows") {
    // Trials (mismatch, union): (1,2), (0,2), (1,1), (0,1). The ratio of means
    // is (1/2)/(3/2) = 1/3; the sample variances of the counts are both 1/3
    // with zero covariance, so the delta-method variance is
    // (1/3 + (1/3)^2 * 1/3) / ((3/2)^2 * 4) = 10/243.
    std::vector<CoupledTrialRow> rows = {count_row(1, 2), count_row(0, 2), count_row(1, 1),
                                         count_row(0, 1)};
    MismatchRatio r = mismatch_ratio_stats(rows);
    CHECK(r.defined);
    CHECK(r.mismatch_total == 2);
    CHECK(r.union_total == 6);
    CHECK(r.ratio == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(r.stderr_value == doctest::Approx(std::sqrt(10.0 / 243.0)).epsilon(1e-12));
    CHECK(r.stderr_value == doctest::Approx(0.2028602065).epsilon(1e-8));

    // Constant rows: positive ratio, zero spread.
    std::vector<CoupledTrialRow> flat(5, count_row(1, 2));
    MismatchRatio f = mismatch_ratio_stats(flat);
    CHECK(f.ratio == 0.5);
    CHECK(f.stderr_value == 0.0);

    // No events at all: the ratio is undefined, not NaN.
    std::vector<CoupledTrialRow> none(3, count_row(0, 0));
    MismatchRatio u = mismatch_ratio_stats(none);
    CHECK(!u.defined);
    CHECK(u.ratio == 0.0);
    CHECK_THROWS_AS((void)mismatch_ratio_stats(std::vector<CoupledTrialRow>{}),
                    std::invalid_argument);
  }
}
