#include "sonoloc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace sonoloc {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kRadToDeg = 180.0 / kPi;
}  // namespace

double azimuth_deg(const Vec3& v) {
  double az = std::atan2(v.y, v.x) * kRadToDeg;
  if (az >= 180.0) az -= 360.0;  // atan2 returns +180 for (-x, 0)
  return az;
}

double elevation_deg(const Vec3& v) {
  double s = v.z / v.norm();
  s = std::clamp(s, -1.0, 1.0);
  return std::asin(s) * kRadToDeg;
}

Vec3 direction_from_angles(double azimuth, double elevation) {
  const double az = azimuth / kRadToDeg;
  const double el = elevation / kRadToDeg;
  return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

double angular_distance_deg(const Vec3& a, const Vec3& b) {
  const double c = std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0);
  return std::acos(c) * kRadToDeg;
}

// ---------------------------------------------------------------------------
// MicrophoneArray

double MicrophoneArray::aperture() const {
  double best = 0.0;
  for (std::size_t i = 0; i < positions.size(); ++i)
    for (std::size_t j = i + 1; j < positions.size(); ++j)
      best = std::max(best, (positions[i] - positions[j]).norm());
  return best;
}

Vec3 MicrophoneArray::centroid() const {
  Vec3 c;
  for (const Vec3& p : positions) c = c + p;
  return c * (1.0 / static_cast<double>(positions.size()));
}

void MicrophoneArray::validate() const {
  if (positions.size() < 2)
    throw std::invalid_argument("array config: need at least 2 microphones");
  if (sample_rate <= 0.0)
    throw std::invalid_argument("array config: sample_rate must be positive");
  if (speed_of_sound <= 0.0)
    throw std::invalid_argument("array config: speed_of_sound must be positive");
  for (const Vec3& p : positions) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      throw std::invalid_argument("array config: non-finite microphone position");
  }
  for (std::size_t i = 0; i < positions.size(); ++i)
    for (std::size_t j = i + 1; j < positions.size(); ++j)
      if (positions[i].x == positions[j].x && positions[i].y == positions[j].y &&
          positions[i].z == positions[j].z)
        throw std::invalid_argument("array config: duplicate microphone positions");
}

MicrophoneArray MicrophoneArray::prism(double lx, double ly, double lz,
                                       double sample_rate, double speed_of_sound) {
  MicrophoneArray array;
  array.sample_rate = sample_rate;
  array.speed_of_sound = speed_of_sound;
  const double hx = lx / 2, hy = ly / 2, hz = lz / 2;
  for (int corner = 0; corner < 8; ++corner) {
    array.positions.push_back({(corner & 1) ? hx : -hx,
                               (corner & 2) ? hy : -hy,
                               (corner & 4) ? hz : -hz});
  }
  array.validate();
  return array;
}

MicrophoneArray load_array_config(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("array config: parse failure: ") + e.what());
  }
  MicrophoneArray array;
  try {
    array.sample_rate = doc.value("sample_rate", 48000.0);
    array.speed_of_sound = doc.value("speed_of_sound", 343.0);
    if (!doc.contains("positions") || !doc["positions"].is_array())
      throw std::invalid_argument("array config: missing positions list");
    for (const auto& p : doc["positions"]) {
      if (!p.is_array() || p.size() != 3)
        throw std::invalid_argument("array config: each position must be a 3-vector");
      array.positions.push_back(
          {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("array config: parse failure: ") + e.what());
  }
  array.validate();
  return array;
}

MicrophoneArray load_array_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("array config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_array_config(ss.str());
}

// ---------------------------------------------------------------------------
// SphereGrid

namespace {

// Vertices and faces of the regular icosahedron, edge length 2, scaled to
// the unit sphere.
void icosahedron(std::vector<Vec3>& points, std::vector<std::array<int, 3>>& triangles) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  const double n = std::sqrt(1.0 + phi * phi);
  const double a = 1.0 / n, b = phi / n;
  points = {
      {-a, b, 0}, {a, b, 0},   {-a, -b, 0}, {a, -b, 0},
      {0, -a, b}, {0, a, b},   {0, -a, -b}, {0, a, -b},
      {b, 0, -a}, {b, 0, a},   {-b, 0, -a}, {-b, 0, a},
  };
  triangles = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
  };
}

}  // namespace

SphereGrid build_grid(int level) {
  if (level < 0 || level > 6)
    throw std::invalid_argument("build_grid: level must be in 0..6");

  SphereGrid grid;
  grid.level = level;
  icosahedron(grid.points, grid.triangles);

  for (int step = 0; step < level; ++step) {
    // Shared-edge midpoints are created once, keyed by the vertex index pair,
    // so the point count stays exact.
    std::map<std::pair<int, int>, int> midpoint;
    auto midpoint_index = [&](int i, int j) {
      const auto key = std::minmax(i, j);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const Vec3 m = (grid.points[i] + grid.points[j]).normalized();
      const int index = static_cast<int>(grid.points.size());
      grid.points.push_back(m);
      midpoint.emplace(key, index);
      return index;
    };

    std::vector<std::array<int, 3>> next;
    next.reserve(grid.triangles.size() * 4);
    for (const auto& t : grid.triangles) {
      const int ab = midpoint_index(t[0], t[1]);
      const int bc = midpoint_index(t[1], t[2]);
      const int ca = midpoint_index(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({t[1], bc, ab});
      next.push_back({t[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    grid.triangles = std::move(next);
  }

  std::vector<std::set<int>> adjacency(grid.points.size());
  for (const auto& t : grid.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int u = t[k], v = t[(k + 1) % 3];
      adjacency[u].insert(v);
      adjacency[v].insert(u);
    }
  }
  grid.neighbors.resize(grid.points.size());
  for (std::size_t i = 0; i < adjacency.size(); ++i)
    grid.neighbors[i].assign(adjacency[i].begin(), adjacency[i].end());

  return grid;
}

int nearest_region(const SphereGrid& grid, const Vec3& dir) {
  if (std::abs(dir.norm() - 1.0) > 1e-6)
    throw std::invalid_argument("nearest_region: direction must be a unit vector");
  int best = 0;
  double best_dot = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid.size(); ++i) {
    const double d = grid.points[i].dot(dir);
    if (d > best_dot) {
      best_dot = d;
      best = i;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// TdoaTable

int TdoaTable::pair_index(int i, int j, int num_mics) {
  if (i > j) std::swap(i, j);
  return i * num_mics - i * (i + 1) / 2 + (j - i - 1);
}

TdoaTable build_tdoa_table(const MicrophoneArray& array, const SphereGrid& grid) {
  array.validate();
  const int num_mics = array.size();
  const double samples_per_meter = array.sample_rate / array.speed_of_sound;

  TdoaTable table;
  table.num_directions = grid.size();
  table.num_mics = num_mics;
  table.level = grid.level;
  table.max_lag = static_cast<int>(std::ceil(samples_per_meter * array.aperture()));
  if (table.max_lag > std::numeric_limits<std::int16_t>::max())
    throw std::invalid_argument("build_tdoa_table: aperture too large for 16-bit lags");

  table.lags.resize(static_cast<std::size_t>(table.num_directions) * table.pair_count());
  std::size_t at = 0;
  for (int d = 0; d < table.num_directions; ++d) {
    const Vec3& u = grid.points[d];
    for (int i = 0; i < num_mics; ++i) {
      for (int j = i + 1; j < num_mics; ++j) {
        const double tau = samples_per_meter * (array.positions[i] - array.positions[j]).dot(u);
        table.lags[at++] = static_cast<std::int16_t>(std::round(tau));
      }
    }
  }
  return table;
}

void write_tdoa_binary(const TdoaTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  auto put_u32 = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  out.write("STDT", 4);
  put_u32(static_cast<std::uint32_t>(table.level));
  put_u32(static_cast<std::uint32_t>(table.num_mics));
  put_u32(static_cast<std::uint32_t>(table.num_directions));
  put_u32(static_cast<std::uint32_t>(table.max_lag));
  for (std::int16_t lag : table.lags) {
    unsigned char b[2] = {static_cast<unsigned char>(lag & 0xff),
                          static_cast<unsigned char>((lag >> 8) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 2);
  }
  if (!out) throw std::runtime_error("write failure: " + path);
}

TdoaTable read_tdoa_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "STDT")
    throw std::runtime_error("tdoa table: bad magic in " + path);
  auto get_u32 = [&]() {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  };
  TdoaTable table;
  table.level = static_cast<int>(get_u32());
  table.num_mics = static_cast<int>(get_u32());
  table.num_directions = static_cast<int>(get_u32());
  table.max_lag = static_cast<int>(get_u32());
  if (!in) throw std::runtime_error("tdoa table: truncated header in " + path);
  const std::size_t count = static_cast<std::size_t>(table.num_directions) * table.pair_count();
  table.lags.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    table.lags[k] = static_cast<std::int16_t>(static_cast<std::uint16_t>(b[0]) |
                                              (static_cast<std::uint16_t>(b[1]) << 8));
  }
  if (!in) throw std::runtime_error("tdoa table: truncated body in " + path);
  return table;
}

void write_tdoa_csv(const TdoaTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "direction,pair,lag\n";
  for (int d = 0; d < table.num_directions; ++d)
    for (int p = 0; p < table.pair_count(); ++p)
      out << d << ',' << p << ',' << table.lag(d, p) << '\n';
}

void write_grid_csv(const SphereGrid& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "index,x,y,z,azimuth_deg,elevation_deg\n";
  char line[160];
  for (int i = 0; i < grid.size(); ++i) {
    const Vec3& p = grid.points[i];
    std::snprintf(line, sizeof(line), "%d,%.12f,%.12f,%.12f,%.6f,%.6f\n", i, p.x, p.y,
                  p.z, azimuth_deg(p), elevation_deg(p));
    out << line;
  }
}

}  // namespace sonoloc
