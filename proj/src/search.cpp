#include "sonoloc/search.hpp"

#include <stdexcept>

namespace sonoloc {

namespace {
void check_compatible(const CorrelationSet& corrs, const TdoaTable& table) {
  if (corrs.num_mics != table.num_mics)
    throw std::invalid_argument("direction_search: microphone count mismatch");
  if (corrs.pair_count() != table.pair_count())
    throw std::invalid_argument("direction_search: pair count mismatch");
  if (corrs.length() == 0 || table.num_directions == 0)
    throw std::invalid_argument("direction_search: empty inputs");
}
}  // namespace

std::vector<double> energy_map(const CorrelationSet& corrs, const TdoaTable& table) {
  check_compatible(corrs, table);
  const int pairs = table.pair_count();
  const unsigned mask = static_cast<unsigned>(corrs.length()) - 1;

  std::vector<double> energies(table.num_directions);
  const std::int16_t* lag = table.lags.data();
  for (int d = 0; d < table.num_directions; ++d) {
    double e = 0.0;
    for (int p = 0; p < pairs; ++p)
      e += corrs.r[p][static_cast<unsigned>(*lag++) & mask];
    energies[d] = e;
  }
  return energies;
}

SearchResult direction_search(const CorrelationSet& corrs, const TdoaTable& table) {
  const std::vector<double> energies = energy_map(corrs, table);
  SearchResult best{0, energies[0]};
  for (int d = 1; d < static_cast<int>(energies.size()); ++d) {
    if (energies[d] > best.energy) {
      best.region = d;
      best.energy = energies[d];
    }
  }
  return best;
}

std::vector<DirectionDetection> locate_sources(const CorrelationSet& corrs,
                                               const TdoaTable& table,
                                               const SphereGrid& grid, int count,
                                               int removal_radius) {
  if (count < 1) throw std::invalid_argument("locate_sources: count must be >= 1");
  check_compatible(corrs, table);
  if (grid.size() != table.num_directions)
    throw std::invalid_argument("locate_sources: grid/table size mismatch");

  CorrelationSet working = corrs;
  const unsigned mask = static_cast<unsigned>(working.length()) - 1;

  std::vector<DirectionDetection> detections;
  detections.reserve(count);
  for (int rank = 1; rank <= count; ++rank) {
    const SearchResult found = direction_search(working, table);
    DirectionDetection det;
    det.region = found.region;
    det.direction = grid.points[found.region];
    det.energy = found.energy;
    det.rank = rank;
    det.kind = corrs.kind;
    det.block_index = corrs.block_index;
    detections.push_back(det);

    for (int p = 0; p < table.pair_count(); ++p) {
      const int lag = table.lag(found.region, p);
      for (int off = -removal_radius; off <= removal_radius; ++off)
        working.r[p][static_cast<unsigned>(lag + off) & mask] = 0.0;
    }
  }
  return detections;
}

}  // namespace sonoloc
