#include "sonoloc/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sonoloc {

namespace {
constexpr double kProbEps = 1e-12;
constexpr double kEnergyFloor = 1e-12;
}  // namespace

void TrackerParams::validate() const {
  auto in_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!in_unit(p_min) || !in_unit(p_floor) || !in_unit(p1))
    throw std::invalid_argument("tracker params: probabilities must be in (0,1)");
  if (!in_unit(alpha01_short) || !in_unit(alpha11_short) || !in_unit(alpha01_medium) ||
      !in_unit(alpha11_medium))
    throw std::invalid_argument("tracker params: transition probabilities must be in (0,1)");
  if (alpha01_short >= alpha11_short || alpha01_medium >= alpha11_medium)
    throw std::invalid_argument("tracker params: alpha01 must be below alpha11");
  if (beta < 0.0 || beta > 1.0)
    throw std::invalid_argument("tracker params: beta must be in [0,1]");
  if (!in_unit(emit_threshold))
    throw std::invalid_argument("tracker params: emit threshold must be in (0,1)");
  if (spread_hops < 0) throw std::invalid_argument("tracker params: spread_hops < 0");
  if (spread_attenuation <= 0.0 || spread_attenuation > 1.0)
    throw std::invalid_argument("tracker params: spread attenuation must be in (0,1]");
}

// ---------------------------------------------------------------------------
// EnergyCalibration

EnergyCalibration EnergyCalibration::adaptive(double rate, double margin,
                                              int warmup_blocks) {
  if (rate <= 0.0 || rate > 1.0)
    throw std::invalid_argument("energy calibration: rate must be in (0,1]");
  if (margin < 1.0) throw std::invalid_argument("energy calibration: margin must be >= 1");
  EnergyCalibration cal;
  cal.rate_ = rate;
  cal.margin_ = margin;
  cal.warmup_blocks_ = warmup_blocks;
  return cal;
}

EnergyCalibration EnergyCalibration::fixed(double e_min) {
  if (e_min <= 0.0) throw std::invalid_argument("energy calibration: e_min must be positive");
  EnergyCalibration cal;
  cal.fixed_ = true;
  cal.fixed_value_ = e_min;
  return cal;
}

double EnergyCalibration::e_min() const {
  if (fixed_) return fixed_value_;
  return std::max(margin_ * average_peak_, kEnergyFloor);
}

void EnergyCalibration::observe_silent_block(double peak_energy) {
  if (fixed_) return;
  average_peak_ = silent_blocks_ == 0
                      ? peak_energy
                      : (1.0 - rate_) * average_peak_ + rate_ * peak_energy;
  ++silent_blocks_;
}

// ---------------------------------------------------------------------------
// Probability rules

double instantaneous_probability(double energy, const EnergyCalibration& cal,
                                 const TrackerParams& params) {
  if (!cal.warmed_up()) return params.p_floor;
  return std::max(1.0 - std::exp(1.0 - energy / cal.e_min()), params.p_min);
}

double predict_prior(double posterior_prev, double alpha01, double alpha11) {
  return alpha01 * (1.0 - posterior_prev) + alpha11 * posterior_prev;
}

double update_region(double posterior_prev, double obs_prob, double alpha01,
                     double alpha11, double p1) {
  const double prior = predict_prior(posterior_prev, alpha01, alpha11);
  const double pi1 = prior * obs_prob / p1;
  const double pi0 = (1.0 - prior) * (1.0 - obs_prob) / (1.0 - p1);
  if (pi1 + pi0 <= 0.0) return prior;
  return pi1 / (pi1 + pi0);
}

double fuse(double p_short, double p_medium, double p1, double beta) {
  const double ps = std::clamp(p_short, kProbEps, 1.0 - kProbEps);
  const double pm = std::clamp(p_medium, kProbEps, 1.0 - kProbEps);
  const double exponent = 1.0 - beta / 2.0;
  const double pi1 = std::pow(ps * pm, exponent) / std::pow(p1, 1.0 - beta);
  const double pi0 =
      std::pow((1.0 - ps) * (1.0 - pm), exponent) / std::pow(1.0 - p1, 1.0 - beta);
  return pi1 / (pi1 + pi0);
}

// ---------------------------------------------------------------------------
// SourceTracker

SourceTracker::SourceTracker(const SphereGrid& grid, TrackerParams params,
                             EnergyCalibration short_cal, EnergyCalibration medium_cal)
    : grid_(grid),
      params_(params),
      cal_short_(short_cal),
      cal_medium_(medium_cal),
      posterior_short_(grid.size(), params.p_floor),
      posterior_medium_(grid.size(), params.p_floor),
      fused_(grid.size(), 0.0),
      last_energy_(grid.size(), 0.0),
      last_kind_(grid.size(), EstimatorKind::kShort) {
  params_.validate();
  for (int r = 0; r < grid.size(); ++r)
    fused_[r] = fuse(posterior_short_[r], posterior_medium_[r], params_.p1, params_.beta);
}

void SourceTracker::ingest(const std::vector<DirectionDetection>& detections,
                           EstimatorKind kind) {
  for (const auto& det : detections)
    if (det.kind != kind)
      throw std::invalid_argument("tracker: detection kind does not match block kind");

  EnergyCalibration& cal = kind == EstimatorKind::kShort ? cal_short_ : cal_medium_;

  // Observation probabilities: detected regions (and their neighborhoods,
  // attenuated per hop) get the instantaneous probability, everything else
  // the floor.
  std::vector<double> obs(grid_.size(), params_.p_floor);
  double block_peak_energy = 0.0;
  for (const auto& det : detections) {
    block_peak_energy = std::max(block_peak_energy, det.energy);
    const double p = instantaneous_probability(det.energy, cal, params_);

    std::vector<int> frontier{det.region};
    std::vector<int> hop_of(grid_.size(), -1);
    hop_of[det.region] = 0;
    double factor = 1.0;
    for (int hop = 0; hop <= params_.spread_hops && !frontier.empty(); ++hop) {
      std::vector<int> next;
      for (int r : frontier) {
        const double value = p * factor;
        if (value > obs[r]) {
          obs[r] = value;
          last_energy_[r] = det.energy;
          last_kind_[r] = det.kind;
        }
        for (int nb : grid_.neighbors[r]) {
          if (hop_of[nb] < 0) {
            hop_of[nb] = hop + 1;
            next.push_back(nb);
          }
        }
      }
      frontier = std::move(next);
      factor *= params_.spread_attenuation;
    }
  }

  std::vector<double>& posterior =
      kind == EstimatorKind::kShort ? posterior_short_ : posterior_medium_;
  const double a01 = params_.alpha01(kind);
  const double a11 = params_.alpha11(kind);
  for (int r = 0; r < grid_.size(); ++r)
    posterior[r] = update_region(posterior[r], obs[r], a01, a11, params_.p1);

  double max_fused = 0.0;
  for (int r = 0; r < grid_.size(); ++r) {
    fused_[r] = fuse(posterior_short_[r], posterior_medium_[r], params_.p1, params_.beta);
    max_fused = std::max(max_fused, fused_[r]);
  }

  // Silence-gated adaptation: only blocks that did not produce an active
  // source feed the noise-floor energy estimate.
  if (max_fused <= params_.emit_threshold && !detections.empty())
    cal.observe_silent_block(block_peak_energy);
}

std::vector<ActiveSource> SourceTracker::active_sources() const {
  return active_sources(params_.emit_threshold);
}

std::vector<ActiveSource> SourceTracker::active_sources(double threshold) const {
  std::vector<ActiveSource> out;
  for (int r = 0; r < grid_.size(); ++r) {
    if (fused_[r] < threshold) continue;
    bool is_peak = true;
    for (int nb : grid_.neighbors[r]) {
      if (fused_[nb] > fused_[r]) {
        is_peak = false;
        break;
      }
    }
    if (!is_peak) continue;
    out.push_back({r, grid_.points[r], fused_[r], last_energy_[r], last_kind_[r]});
  }
  std::sort(out.begin(), out.end(), [](const ActiveSource& a, const ActiveSource& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    return a.region < b.region;
  });
  return out;
}

}  // namespace sonoloc
