#pragma once

#include <vector>

#include "sonoloc/geometry.hpp"
#include "sonoloc/spectral.hpp"

namespace sonoloc {

struct DirectionDetection {
  int region = 0;
  Vec3 direction;
  double energy = 0.0;
  int rank = 1;  // 1-based extraction order
  EstimatorKind kind = EstimatorKind::kShort;
  long block_index = 0;
};

struct SearchResult {
  int region = 0;
  double energy = 0.0;
};

// Summed-correlation beamformer energy for every grid direction:
// E_d = sum over pairs of R_ij(lag(d, ij)).
std::vector<double> energy_map(const CorrelationSet& corrs, const TdoaTable& table);

// argmax_d E_d; ties broken by lowest index.
SearchResult direction_search(const CorrelationSet& corrs, const TdoaTable& table);

// Repeated search with peak removal: after each detection the looked-up lag
// (plus removal_radius neighbors on each side) is zeroed per pair on a
// working copy, then the search runs again. The input set is not mutated.
std::vector<DirectionDetection> locate_sources(const CorrelationSet& corrs,
                                               const TdoaTable& table,
                                               const SphereGrid& grid, int count,
                                               int removal_radius = 0);

}  // namespace sonoloc
