#include <algorithm>
#include <chrono>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "sonoloc/search.hpp"
#include "test_support.hpp"

using namespace sonoloc;
using testsupport::Rng;

namespace {

// Correlation set with every lag of every pair at zero.
CorrelationSet zero_set(int num_mics, int length) {
  CorrelationSet set;
  set.num_mics = num_mics;
  set.frame_count = 1;
  set.r.assign(num_mics * (num_mics - 1) / 2, std::vector<double>(length, 0.0));
  return set;
}

// Adds `value` at the tabulated lag of every pair for direction `region`,
// optionally smeared onto neighboring lags with linear falloff.
void add_direction_peak(CorrelationSet& set, const TdoaTable& table, int region,
                        double value, int width = 0) {
  const int length = set.length();
  for (int pair = 0; pair < table.pair_count(); ++pair) {
    const int lag = table.lag(region, pair);
    for (int off = -width; off <= width; ++off) {
      const double falloff = 1.0 - std::abs(off) / (width + 1.0);
      set.r[pair][(static_cast<unsigned>(lag + off)) & (length - 1)] +=
          value * falloff;
    }
  }
}

}  // namespace

TEST_CASE("zero correlations give a zero map and the first region") {
  const MicrophoneArray array = MicrophoneArray::prism();
  const SphereGrid grid = build_grid(1);
  const TdoaTable table = build_tdoa_table(array, grid);
  const CorrelationSet set = zero_set(array.size(), 1024);

  const std::vector<double> energies = energy_map(set, table);
  REQUIRE(static_cast<int>(energies.size()) == grid.size());
  for (double e : energies) CHECK(e == 0.0);

  const SearchResult best = direction_search(set, table);
  CHECK(best.region == 0);
  CHECK(best.energy == 0.0);
}

TEST_CASE("energy is the sum of pair correlations at tabulated lags") {
  const MicrophoneArray array = MicrophoneArray::prism(0.3, 0.25, 0.2);
  const SphereGrid grid = build_grid(0);
  const TdoaTable table = build_tdoa_table(array, grid);

  Rng rng(31);
  CorrelationSet set = zero_set(array.size(), 256);
  for (auto& pair : set.r)
    for (double& v : pair) v = rng.uniform(-1.0, 1.0);

  const std::vector<double> energies = energy_map(set, table);
  for (int d = 0; d < grid.size(); ++d) {
    double expected = 0.0;
    for (int pair = 0; pair < table.pair_count(); ++pair)
      expected += set.at(pair, table.lag(d, pair));
    CHECK(energies[d] == expected);
  }
}

TEST_CASE("a synthetic peak set selects its own direction") {
  const MicrophoneArray array = MicrophoneArray::prism();
  const SphereGrid grid = build_grid(2);
  const TdoaTable table = build_tdoa_table(array, grid);

  const int planted = 100;
  CorrelationSet set = zero_set(array.size(), 1024);
  add_direction_peak(set, table, planted, 1.0);

  const SearchResult best = direction_search(set, table);
  CHECK(best.region == planted);
  CHECK(best.energy == doctest::Approx(28.0));
}

TEST_CASE("two microphones tie along the cone of confusion") {
  MicrophoneArray pair_array;
  pair_array.positions = {{0.1715, 0.0, 0.0}, {-0.1715, 0.0, 0.0}};
  const SphereGrid grid = build_grid(1);
  const TdoaTable table = build_tdoa_table(pair_array, grid);

  // A single peak at one direction's lag is shared by every direction on the
  // same cone around the array axis.
  const int planted = 17;
  CorrelationSet set = zero_set(2, 256);
  set.r[0][static_cast<unsigned>(table.lag(planted, 0)) & 255u] = 1.0;

  std::vector<int> sharing;
  for (int d = 0; d < grid.size(); ++d)
    if (table.lag(d, 0) == table.lag(planted, 0)) sharing.push_back(d);
  REQUIRE(sharing.size() >= 2);

  const SearchResult best = direction_search(set, table);
  CHECK(best.region == sharing.front());  // ties break to the lowest index
  CHECK(best.energy == doctest::Approx(1.0));
}

TEST_CASE("locating one source equals the plain search") {
  const MicrophoneArray array = MicrophoneArray::prism();
  const SphereGrid grid = build_grid(1);
  const TdoaTable table = build_tdoa_table(array, grid);

  Rng rng(32);
  CorrelationSet set = zero_set(array.size(), 1024);
  for (auto& pair : set.r)
    for (double& v : pair) v = rng.uniform(-0.1, 0.1);
  add_direction_peak(set, table, 25, 0.5, 2);

  const SearchResult direct = direction_search(set, table);
  const auto located = locate_sources(set, table, grid, 1);
  REQUIRE(located.size() == 1);
  CHECK(located[0].region == direct.region);
  CHECK(located[0].energy == direct.energy);
  CHECK(located[0].rank == 1);
  CHECK(angular_distance_deg(located[0].direction, grid.points[located[0].region]) ==
        doctest::Approx(0.0));
}

TEST_CASE("peak removal uncovers a weaker second source") {
  const MicrophoneArray array = MicrophoneArray::prism();
  const SphereGrid grid = build_grid(2);
  const TdoaTable table = build_tdoa_table(array, grid);

  const int strong = 40;
  int weak = -1;  // any region well away from the strong one
  for (int d = 0; d < grid.size(); ++d)
    if (angular_distance_deg(grid.points[strong], grid.points[d]) > 60.0) {
      weak = d;
      break;
    }
  REQUIRE(weak >= 0);

  CorrelationSet set = zero_set(array.size(), 1024);
  set.kind = EstimatorKind::kMedium;
  set.block_index = 3;
  add_direction_peak(set, table, strong, 1.0);
  add_direction_peak(set, table, weak, 0.95);

  const auto located = locate_sources(set, table, grid, 2);
  REQUIRE(located.size() == 2);
  CHECK(located[0].region == strong);
  CHECK(located[0].rank == 1);
  CHECK(located[1].region == weak);
  CHECK(located[1].rank == 2);
  CHECK(located[0].kind == EstimatorKind::kMedium);
  CHECK(located[1].block_index == 3);
}

TEST_CASE("locate does not mutate its input") {
  const MicrophoneArray array = MicrophoneArray::prism();
  const SphereGrid grid = build_grid(1);
  const TdoaTable table = build_tdoa_table(array, grid);

  Rng rng(33);
  CorrelationSet set = zero_set(array.size(), 1024);
  for (auto& pair : set.r)
    for (double& v : pair) v = rng.uniform(-1.0, 1.0);

  const auto before = set.r;
  (void)locate_sources(set, table, grid, 3, 2);
  CHECK(set.r == before);
}

TEST_CASE("a wider removal radius suppresses the winner's sidelobes") {
  // Needs a fine grid: adjacent directions must fall inside the smeared
  // correlation peak for the sidelobe effect to exist.
  const MicrophoneArray array = MicrophoneArray::prism();
  const SphereGrid grid = build_grid(4);
  const TdoaTable table = build_tdoa_table(array, grid);

  const int strong = 40;
  int weak = -1;
  for (int d = 0; d < grid.size(); ++d)
    if (angular_distance_deg(grid.points[strong], grid.points[d]) > 60.0) {
      weak = d;
      break;
    }
  REQUIRE(weak >= 0);

  // The strong source has a wide correlation peak (3 lags each side), so
  // clearing only the exact lag leaves most of its mass in place and the
  // second pick stays next to it.
  CorrelationSet set = zero_set(array.size(), 1024);
  add_direction_peak(set, table, strong, 1.0, 3);
  add_direction_peak(set, table, weak, 0.35);

  const auto narrow = locate_sources(set, table, grid, 2, 0);
  REQUIRE(narrow.size() == 2);
  CHECK(angular_distance_deg(grid.points[narrow[1].region], grid.points[strong]) <
        10.0);

  const auto wide = locate_sources(set, table, grid, 2, 3);
  REQUIRE(wide.size() == 2);
  CHECK(wide[1].region == weak);
}

TEST_CASE("microphone relabeling does not change the energy map") {
  MicrophoneArray original;
  original.positions = {{0.12, 0.03, -0.05}, {-0.07, 0.11, 0.02}, {0.02, -0.13, 0.08}};
  MicrophoneArray relabeled;
  relabeled.positions = {original.positions[2], original.positions[0],
                         original.positions[1]};

  const SphereGrid grid = build_grid(1);
  const TdoaTable table_a = build_tdoa_table(original, grid);
  const TdoaTable table_b = build_tdoa_table(relabeled, grid);

  // One recorded block, channels permuted the same way as the microphones.
  Rng rng(34);
  const int length = 256;
  std::vector<std::vector<double>> channels(3);
  for (auto& ch : channels) {
    ch.resize(length);
    for (double& x : ch) x = rng.uniform(-1.0, 1.0);
  }

  SpectrumAnalyzer analyzer(length);
  const std::vector<double> weights(length, 1.0);

  Frame frame_a;
  frame_a.samples = channels;
  CorrelationAccumulator acc_a(3, length, {true, false, 0.1});
  acc_a.add(analyzer.analyze(frame_a), weights);
  const auto map_a = energy_map(acc_a.finalize(EstimatorKind::kShort, 0, 0), table_a);

  Frame frame_b;
  frame_b.samples = {channels[2], channels[0], channels[1]};
  CorrelationAccumulator acc_b(3, length, {true, false, 0.1});
  acc_b.add(analyzer.analyze(frame_b), weights);
  const auto map_b = energy_map(acc_b.finalize(EstimatorKind::kShort, 0, 0), table_b);

  REQUIRE(map_a.size() == map_b.size());
  for (std::size_t d = 0; d < map_a.size(); ++d)
    CHECK(map_a[d] == doctest::Approx(map_b[d]).epsilon(1e-9));
}

TEST_CASE("requested source counts are honored") {
  const MicrophoneArray array = MicrophoneArray::prism();
  const SphereGrid grid = build_grid(1);
  const TdoaTable table = build_tdoa_table(array, grid);
  const CorrelationSet set = zero_set(array.size(), 1024);

  CHECK_THROWS(locate_sources(set, table, grid, 0));
  const auto four = locate_sources(set, table, grid, 4);
  REQUIRE(four.size() == 4);
  for (int k = 0; k < 4; ++k) CHECK(four[k].rank == k + 1);
}

TEST_CASE("full-resolution searches are fast enough to stream") {
  const MicrophoneArray array = MicrophoneArray::prism();
  const SphereGrid grid = build_grid(4);
  const TdoaTable table = build_tdoa_table(array, grid);

  Rng rng(35);
  CorrelationSet set = zero_set(array.size(), 1024);
  for (auto& pair : set.r)
    for (double& v : pair) v = rng.uniform(-1.0, 1.0);

  const auto start = std::chrono::steady_clock::now();
  double checksum = 0.0;
  for (int i = 0; i < 50; ++i) checksum += direction_search(set, table).energy;
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(checksum != 0.0);
  // 50 searches over 2562 directions x 28 pairs must run well inside a
  // real-time budget (a short block spans 42.7 ms).
  CHECK(seconds < 1.0);
}
