#pragma once

#include <vector>

#include "sonoloc/geometry.hpp"
#include "sonoloc/search.hpp"
#include "sonoloc/spectral.hpp"

namespace sonoloc {

struct TrackerParams {
  double p_min = 0.1;     // minimum probability of a beamformer detection
  double p_floor = 0.005; // probability when nothing was detected at a region
  double p1 = 0.5;        // a-priori probability of source presence
  double alpha01_short = 0.00004;
  double alpha11_short = 0.992;
  double alpha01_medium = 0.0002;
  double alpha11_medium = 0.96;
  double beta = 0.7;           // estimator dependence: 0 = independent
  double emit_threshold = 0.6; // fused probability needed to report a source
  int spread_hops = 1;         // detection spread to adjacent regions
  double spread_attenuation = 0.5;  // observation factor per hop

  double alpha01(EstimatorKind kind) const {
    return kind == EstimatorKind::kShort ? alpha01_short : alpha01_medium;
  }
  double alpha11(EstimatorKind kind) const {
    return kind == EstimatorKind::kShort ? alpha11_short : alpha11_medium;
  }
  void validate() const;
};

// Running estimate of the beamformer output energy when no source is
// present. Adapts only on blocks the tracker classified as silent; usable
// after a short warm-up, or immediately when fixed from config.
class EnergyCalibration {
 public:
  static EnergyCalibration adaptive(double rate = 0.1, double margin = 1.5,
                                    int warmup_blocks = 10);
  static EnergyCalibration fixed(double e_min);

  bool warmed_up() const { return fixed_ || silent_blocks_ >= warmup_blocks_; }
  double e_min() const;
  void observe_silent_block(double peak_energy);
  long silent_blocks() const { return silent_blocks_; }

 private:
  EnergyCalibration() = default;
  bool fixed_ = false;
  double fixed_value_ = 0.0;
  double rate_ = 0.1;
  double margin_ = 1.5;
  int warmup_blocks_ = 10;
  long silent_blocks_ = 0;
  double average_peak_ = 0.0;
};

// p = max(1 - exp(1 - E/E_min), p_min) once calibrated; p_floor before.
double instantaneous_probability(double energy, const EnergyCalibration& cal,
                                 const TrackerParams& params);

// One-step Markov prediction of the presence prior.
double predict_prior(double posterior_prev, double alpha01, double alpha11);

// Recursive posterior update through the unnormalized two-hypothesis form.
double update_region(double posterior_prev, double obs_prob, double alpha01,
                     double alpha11, double p1);

// Weighted geometric combination of the two estimators' posteriors,
// interpolating between full independence (beta = 0) and equivalence.
double fuse(double p_short, double p_medium, double p1, double beta);

struct ActiveSource {
  int region = 0;
  Vec3 direction;
  double probability = 0.0;
  double energy = 0.0;  // last detection energy observed at this region
  EstimatorKind estimator = EstimatorKind::kShort;
};

// Per-region belief state over the whole grid: one posterior per estimator
// plus the fused probability, advanced in block order.
class SourceTracker {
 public:
  SourceTracker(const SphereGrid& grid, TrackerParams params,
                EnergyCalibration short_cal, EnergyCalibration medium_cal);

  // Applies one block of detections of the given estimator kind: spreads the
  // instantaneous probabilities onto regions, updates that estimator's
  // posteriors, refreshes the fused field, and adapts the energy calibration
  // when the block still looks silent.
  void ingest(const std::vector<DirectionDetection>& detections, EstimatorKind kind);

  // Regions whose fused probability reaches the threshold and is a local
  // maximum over grid adjacency (non-strict), sorted by descending
  // probability.
  std::vector<ActiveSource> active_sources() const;
  std::vector<ActiveSource> active_sources(double threshold) const;

  const std::vector<double>& posterior(EstimatorKind kind) const {
    return kind == EstimatorKind::kShort ? posterior_short_ : posterior_medium_;
  }
  const std::vector<double>& fused() const { return fused_; }
  const EnergyCalibration& calibration(EstimatorKind kind) const {
    return kind == EstimatorKind::kShort ? cal_short_ : cal_medium_;
  }
  const TrackerParams& params() const { return params_; }

 private:
  const SphereGrid& grid_;
  TrackerParams params_;
  EnergyCalibration cal_short_;
  EnergyCalibration cal_medium_;
  std::vector<double> posterior_short_;
  std::vector<double> posterior_medium_;
  std::vector<double> fused_;
  std::vector<double> last_energy_;
  std::vector<EstimatorKind> last_kind_;
};

}  // namespace sonoloc
