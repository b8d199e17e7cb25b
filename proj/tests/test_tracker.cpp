#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "sonoloc/tracker.hpp"
#include "test_support.hpp"

using namespace sonoloc;
using testsupport::Rng;

namespace {

DirectionDetection detection(const SphereGrid& grid, int region, double energy,
                             EstimatorKind kind, int rank = 1) {
  DirectionDetection det;
  det.region = region;
  det.direction = grid.points[region];
  det.energy = energy;
  det.rank = rank;
  det.kind = kind;
  return det;
}

}  // namespace

TEST_CASE("detection probability follows the energy excess") {
  const TrackerParams params;
  const EnergyCalibration cal = EnergyCalibration::fixed(2.0);

  // At the reference level the exponential term vanishes and only the
  // minimum keeps the probability positive.
  CHECK(instantaneous_probability(2.0, cal, params) == doctest::Approx(0.1));
  CHECK(instantaneous_probability(0.0, cal, params) == doctest::Approx(0.1));
  // One natural-log-of-two of excess puts the probability at one half.
  CHECK(instantaneous_probability(2.0 * (1.0 + std::log(2.0)), cal, params) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(instantaneous_probability(20.0, cal, params) ==
        doctest::Approx(1.0 - std::exp(1.0 - 10.0)).epsilon(1e-12));
}

TEST_CASE("uncalibrated energies read as the floor probability") {
  const TrackerParams params;
  EnergyCalibration cal = EnergyCalibration::adaptive();
  CHECK_FALSE(cal.warmed_up());
  CHECK(instantaneous_probability(1000.0, cal, params) ==
        doctest::Approx(params.p_floor));

  for (int i = 0; i < 10; ++i) cal.observe_silent_block(2.0);
  CHECK(cal.warmed_up());
  CHECK(cal.silent_blocks() == 10);
  CHECK(cal.e_min() == doctest::Approx(3.0));  // margin x running average
  CHECK(instantaneous_probability(1000.0, cal, params) > 0.99);
}

TEST_CASE("fixed calibration needs no warm-up") {
  const EnergyCalibration cal = EnergyCalibration::fixed(1.0);
  CHECK(cal.warmed_up());
  CHECK(cal.e_min() == doctest::Approx(1.0));
  CHECK_THROWS(EnergyCalibration::fixed(0.0));
  CHECK_THROWS(EnergyCalibration::fixed(-1.0));
}

TEST_CASE("probability is invariant to a common energy rescale") {
  const TrackerParams params;
  for (double energy : {0.5, 1.7, 3.0, 9.0}) {
    const double base =
        instantaneous_probability(energy, EnergyCalibration::fixed(1.25), params);
    // Power-of-two factors keep the energy ratio bit-exact.
    const double scaled = instantaneous_probability(
        energy * 1024.0, EnergyCalibration::fixed(1.25 * 1024.0), params);
    CHECK(base == scaled);
  }
}

TEST_CASE("one-step presence prediction") {
  CHECK(predict_prior(0.0, 0.00004, 0.992) == doctest::Approx(0.00004));
  CHECK(predict_prior(1.0, 0.00004, 0.992) == doctest::Approx(0.992));
  CHECK(predict_prior(0.5, 0.0002, 0.96) == doctest::Approx(0.4801));
}

TEST_CASE("a neutral observation leaves the predicted prior unchanged") {
  // An observation equal to the a-priori presence probability carries no
  // information, so the update returns exactly the predicted prior.
  const double a01 = 0.00004, a11 = 0.992, p1 = 0.5;
  for (double posterior : {0.1, 0.5, 0.9}) {
    const double prior = predict_prior(posterior, a01, a11);
    CHECK(update_region(posterior, p1, a01, a11, p1) ==
          doctest::Approx(prior).epsilon(1e-12));
  }
}

TEST_CASE("matched prior and observation square the odds") {
  // Pick the previous posterior so the predicted prior equals q, observe q:
  // the posterior becomes q^2 / (q^2 + (1-q)^2).
  const double a01 = 0.0002, a11 = 0.96, p1 = 0.5;
  for (double q : {0.2, 0.5, 0.8}) {
    const double previous = (q - a01) / (a11 - a01);
    const double expected = q * q / (q * q + (1.0 - q) * (1.0 - q));
    CHECK(update_region(previous, q, a01, a11, p1) ==
          doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("balanced hypotheses settle at one half") {
  const double a01 = 0.00004, a11 = 0.992, p1 = 0.5;
  const double previous = (0.5 - a01) / (a11 - a01);  // predicted prior 0.5
  CHECK(update_region(previous, 0.5, a01, a11, p1) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("confident observations latch within ten blocks") {
  const TrackerParams params;
  double posterior = params.alpha01_short;
  int crossed = -1;
  for (int block = 1; block <= 10; ++block) {
    posterior = update_region(posterior, 0.9, params.alpha01_short,
                              params.alpha11_short, params.p1);
    if (posterior > 0.99 && crossed < 0) crossed = block;
  }
  CHECK(crossed > 0);
  CHECK(posterior > 0.99);
}

TEST_CASE("posterior recursion matches a scalar replay") {
  const TrackerParams params;
  Rng rng(41);
  for (EstimatorKind kind : {EstimatorKind::kShort, EstimatorKind::kMedium}) {
    const double a01 = params.alpha01(kind);
    const double a11 = params.alpha11(kind);
    double tracked = 0.3;
    double replay = 0.3;
    for (int step = 0; step < 200; ++step) {
      const double obs = rng.uniform(0.001, 0.999);
      tracked = update_region(tracked, obs, a01, a11, params.p1);
      const double prior = a01 + replay * (a11 - a01);
      const double odds_present = prior * obs / params.p1;
      const double odds_absent = (1.0 - prior) * (1.0 - obs) / (1.0 - params.p1);
      replay = odds_present / (odds_present + odds_absent);
      CHECK(tracked == doctest::Approx(replay).epsilon(1e-12));
      CHECK(tracked >= 0.0);
      CHECK(tracked <= 1.0);
    }
  }
}

TEST_CASE("silence drives every starting point below one percent") {
  const TrackerParams params;
  for (EstimatorKind kind : {EstimatorKind::kShort, EstimatorKind::kMedium}) {
    const double a01 = params.alpha01(kind);
    const double a11 = params.alpha11(kind);
    for (double start : {0.0, 0.5, 1.0}) {
      double posterior = start;
      double previous = -1.0;
      for (int block = 0; block < 500; ++block) {
        previous = posterior;
        posterior = update_region(posterior, params.p_floor, a01, a11, params.p1);
      }
      CHECK(posterior < 0.01);
      CHECK(std::abs(posterior - previous) < 1e-12);  // settled on a fixed point
    }
  }
}

TEST_CASE("fusing agreement at one half returns one half") {
  for (double beta : {0.0, 0.35, 0.7, 1.0})
    CHECK(fuse(0.5, 0.5, 0.5, beta) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("zero coupling reduces fusion to independent combination") {
  for (int i = 1; i < 100; ++i) {
    for (int j = 1; j < 100; ++j) {
      const double ps = i / 100.0;
      const double pm = j / 100.0;
      const double fused = fuse(ps, pm, 0.5, 0.0);
      const double odds_present = ps * pm / 0.5;
      const double odds_absent = (1.0 - ps) * (1.0 - pm) / 0.5;
      const double independent = odds_present / (odds_present + odds_absent);
      CHECK(fused == doctest::Approx(independent).epsilon(1e-12));
    }
  }
}

TEST_CASE("fusion of two confident estimators") {
  CHECK(fuse(0.9, 0.9, 0.5, 0.7) == doctest::Approx(0.9457).epsilon(1e-3));
}

TEST_CASE("fusion is symmetric in its estimators") {
  Rng rng(43);
  for (int i = 0; i < 200; ++i) {
    const double a = rng.uniform(0.001, 0.999);
    const double b = rng.uniform(0.001, 0.999);
    CHECK(fuse(a, b, 0.5, 0.7) == fuse(b, a, 0.5, 0.7));
  }
}

TEST_CASE("fusion grows with either estimator") {
  for (double other : {0.1, 0.5, 0.9}) {
    double previous = -1.0;
    for (double p = 0.05; p < 1.0; p += 0.05) {
      const double fused = fuse(p, other, 0.5, 0.7);
      CHECK(fused > previous);
      previous = fused;
    }
  }
}

TEST_CASE("fusion stays inside the unit interval at the extremes") {
  for (double beta : {0.0, 0.7, 1.0}) {
    for (double other : {0.0, 0.005, 0.5, 0.995, 1.0}) {
      for (double p : {0.0, 1.0}) {
        const double fused = fuse(p, other, 0.5, beta);
        CHECK(fused >= 0.0);
        CHECK(fused <= 1.0);
        CHECK(std::isfinite(fused));
      }
    }
  }
  CHECK(fuse(1.0, 1.0, 0.5, 0.7) > 0.99);
  CHECK(fuse(0.0, 0.0, 0.5, 0.7) < 0.01);
}

TEST_CASE("parameter validation rejects out-of-range settings") {
  TrackerParams params;
  CHECK_NOTHROW(params.validate());

  TrackerParams bad = params;
  bad.p_min = 0.0;
  CHECK_THROWS(bad.validate());

  bad = params;
  bad.alpha11_short = bad.alpha01_short;  // chain must favor persistence
  CHECK_THROWS(bad.validate());

  bad = params;
  bad.beta = 1.5;
  CHECK_THROWS(bad.validate());

  bad = params;
  bad.emit_threshold = 0.0;
  CHECK_THROWS(bad.validate());

  bad = params;
  bad.spread_hops = -1;
  CHECK_THROWS(bad.validate());

  bad = params;
  bad.spread_attenuation = 1.5;
  CHECK_THROWS(bad.validate());
}

// ---------------------------------------------------------------------------
// Whole-grid tracker behavior

namespace {

SourceTracker fixed_tracker(const SphereGrid& grid, TrackerParams params,
                            double e_min = 1.0) {
  return SourceTracker(grid, params, EnergyCalibration::fixed(e_min),
                       EnergyCalibration::fixed(e_min));
}

}  // namespace

TEST_CASE("a fresh tracker reports nothing") {
  const SphereGrid grid = build_grid(2);
  const SourceTracker tracker = fixed_tracker(grid, TrackerParams{});
  CHECK(tracker.active_sources().empty());
  for (double p : tracker.fused()) {
    CHECK(p >= 0.0);
    CHECK(p < 0.1);
  }
}

TEST_CASE("steady detections raise exactly one active source") {
  const SphereGrid grid = build_grid(2);
  SourceTracker tracker = fixed_tracker(grid, TrackerParams{});
  const int region = 57;

  for (int block = 0; block < 50; ++block) {
    tracker.ingest({detection(grid, region, 8.0, EstimatorKind::kShort)},
                   EstimatorKind::kShort);
    if (block % 5 == 4)
      tracker.ingest({detection(grid, region, 8.0, EstimatorKind::kMedium)},
                     EstimatorKind::kMedium);
  }

  const auto active = tracker.active_sources();
  REQUIRE(active.size() == 1);
  CHECK(active[0].region == region);
  CHECK(active[0].probability > 0.99);
  CHECK(active[0].energy == doctest::Approx(8.0));
  CHECK(angular_distance_deg(active[0].direction, grid.points[region]) ==
        doctest::Approx(0.0));

  // Belief about being anywhere else stays near the floor.
  int low = 0;
  int far = 0;
  for (int r = 0; r < grid.size(); ++r) {
    if (angular_distance_deg(grid.points[r], grid.points[region]) < 15.0) continue;
    ++far;
    if (tracker.fused()[r] < 0.1) ++low;
  }
  CHECK(low == far);
}

TEST_CASE("sources decay once detections stop") {
  const SphereGrid grid = build_grid(2);
  SourceTracker tracker = fixed_tracker(grid, TrackerParams{});
  const int region = 31;

  for (int block = 0; block < 20; ++block)
    tracker.ingest({detection(grid, region, 8.0, EstimatorKind::kShort)},
                   EstimatorKind::kShort);
  REQUIRE_FALSE(tracker.active_sources().empty());

  for (int block = 0; block < 20; ++block)
    tracker.ingest({}, EstimatorKind::kShort);
  CHECK(tracker.active_sources().empty());
  CHECK(tracker.posterior(EstimatorKind::kShort)[region] < 0.01);
}

TEST_CASE("detections spread one attenuated hop when configured") {
  const SphereGrid grid = build_grid(2);
  const int region = 12;
  const int neighbor = grid.neighbors[region][0];
  int far = -1;
  for (int r = 0; r < grid.size(); ++r)
    if (angular_distance_deg(grid.points[r], grid.points[region]) > 90.0) {
      far = r;
      break;
    }
  REQUIRE(far >= 0);

  TrackerParams spreading;
  spreading.spread_hops = 1;
  spreading.spread_attenuation = 0.5;
  SourceTracker wide = fixed_tracker(grid, spreading);
  wide.ingest({detection(grid, region, 8.0, EstimatorKind::kShort)},
              EstimatorKind::kShort);
  const auto& wide_post = wide.posterior(EstimatorKind::kShort);
  CHECK(wide_post[region] > wide_post[neighbor]);
  CHECK(wide_post[neighbor] > wide_post[far]);

  TrackerParams narrow;
  narrow.spread_hops = 0;
  SourceTracker tight = fixed_tracker(grid, narrow);
  tight.ingest({detection(grid, region, 8.0, EstimatorKind::kShort)},
               EstimatorKind::kShort);
  const auto& tight_post = tight.posterior(EstimatorKind::kShort);
  CHECK(tight_post[region] > tight_post[neighbor]);
  CHECK(tight_post[neighbor] == doctest::Approx(tight_post[far]).epsilon(1e-12));
}

TEST_CASE("a probability plateau reports every tied region") {
  const SphereGrid grid = build_grid(2);
  TrackerParams params;
  params.spread_hops = 0;  // keep the two regions' updates independent
  SourceTracker tracker = fixed_tracker(grid, params);

  const int a = 20;
  const int b = grid.neighbors[a][0];
  for (int block = 0; block < 40; ++block)
    tracker.ingest({detection(grid, a, 8.0, EstimatorKind::kShort),
                    detection(grid, b, 8.0, EstimatorKind::kShort, 2)},
                   EstimatorKind::kShort);

  const auto active = tracker.active_sources();
  REQUIRE(active.size() == 2);
  CHECK(tracker.fused()[a] == doctest::Approx(tracker.fused()[b]).epsilon(1e-12));
  const bool found_a = active[0].region == a || active[1].region == a;
  const bool found_b = active[0].region == b || active[1].region == b;
  CHECK(found_a);
  CHECK(found_b);
}

TEST_CASE("a raised threshold filters weak sources") {
  const SphereGrid grid = build_grid(2);
  SourceTracker tracker = fixed_tracker(grid, TrackerParams{});
  const int region = 45;
  // Moderate energy seen by one estimator only: the fused probability
  // plateaus well below certainty.
  for (int block = 0; block < 12; ++block)
    tracker.ingest({detection(grid, region, 2.2, EstimatorKind::kShort)},
                   EstimatorKind::kShort);

  const auto relaxed = tracker.active_sources(0.05);
  const auto strict = tracker.active_sources(0.999999);
  CHECK(relaxed.size() >= strict.size());
  REQUIRE_FALSE(relaxed.empty());
  CHECK(relaxed[0].region == region);
  CHECK(strict.empty());
}

TEST_CASE("ingest rejects mismatched estimator kinds") {
  const SphereGrid grid = build_grid(1);
  SourceTracker tracker = fixed_tracker(grid, TrackerParams{});
  CHECK_THROWS(tracker.ingest({detection(grid, 0, 1.0, EstimatorKind::kMedium)},
                              EstimatorKind::kShort));
}

TEST_CASE("adaptive calibration learns the silent energy scale") {
  // Mirrors the streaming cadence: five quick blocks per slow block. Without
  // the slow estimator's confirmation the silence gate would never close and
  // the calibration would absorb the source.
  const SphereGrid grid = build_grid(1);
  TrackerParams params;
  SourceTracker tracker(grid, params, EnergyCalibration::adaptive(0.1, 1.5, 10),
                        EnergyCalibration::adaptive(0.1, 1.5, 10));

  // Quiet stretch: the best beamformer peak hovers around 0.4.
  for (int block = 0; block < 60; ++block) {
    tracker.ingest({detection(grid, 3, 0.4, EstimatorKind::kShort)},
                   EstimatorKind::kShort);
    if (block % 5 == 4)
      tracker.ingest({detection(grid, 3, 0.4, EstimatorKind::kMedium)},
                     EstimatorKind::kMedium);
  }
  CHECK(tracker.calibration(EstimatorKind::kShort).warmed_up());
  CHECK(tracker.calibration(EstimatorKind::kMedium).warmed_up());
  CHECK(tracker.calibration(EstimatorKind::kShort).e_min() ==
        doctest::Approx(0.6).epsilon(1e-9));
  CHECK(tracker.active_sources().empty());

  // A loud coherent source now stands far above the learned reference; once
  // the fused probability crosses the emission threshold, adaptation stops.
  for (int block = 0; block < 15; ++block) {
    tracker.ingest({detection(grid, 3, 6.0, EstimatorKind::kShort)},
                   EstimatorKind::kShort);
    if (block % 5 == 4)
      tracker.ingest({detection(grid, 3, 6.0, EstimatorKind::kMedium)},
                     EstimatorKind::kMedium);
  }
  const auto active = tracker.active_sources();
  REQUIRE(active.size() == 1);
  CHECK(active[0].region == 3);
  CHECK(tracker.calibration(EstimatorKind::kShort).e_min() < 6.0);
}
