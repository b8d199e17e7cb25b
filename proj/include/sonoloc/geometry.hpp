#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace sonoloc {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    const double n = norm();
    return {x / n, y / n, z / n};
  }
};

double azimuth_deg(const Vec3& v);    // [-180, 180)
double elevation_deg(const Vec3& v);  // [-90, 90]
Vec3 direction_from_angles(double azimuth_deg, double elevation_deg);
double angular_distance_deg(const Vec3& a, const Vec3& b);

// Ordered microphone positions in meters plus the physical constants the
// delay model depends on.
struct MicrophoneArray {
  std::vector<Vec3> positions;
  double sample_rate = 48000.0;
  double speed_of_sound = 343.0;

  int size() const { return static_cast<int>(positions.size()); }
  int pair_count() const { return size() * (size() - 1) / 2; }
  double aperture() const;  // largest inter-microphone distance
  Vec3 centroid() const;
  void validate() const;

  // Eight microphones on the corners of an axis-aligned box centered at the
  // origin. The default dimensions are a repository convention, not a
  // published geometry.
  static MicrophoneArray prism(double lx = 0.5, double ly = 0.4, double lz = 0.36,
                               double sample_rate = 48000.0,
                               double speed_of_sound = 343.0);
};

MicrophoneArray load_array_config(const std::string& json_text);
MicrophoneArray load_array_file(const std::string& path);

// Geodesic sphere mesh built by recursive triangle subdivision of an
// icosahedron. Points are unit direction vectors.
struct SphereGrid {
  std::vector<Vec3> points;
  std::vector<std::array<int, 3>> triangles;
  std::vector<std::vector<int>> neighbors;  // sorted adjacent point indices
  int level = 0;

  int size() const { return static_cast<int>(points.size()); }
};

// level 0 is the regular icosahedron (12 points / 20 triangles); each
// subdivision splits every triangle into four. Valid levels are 0..6.
SphereGrid build_grid(int level);

// Index of the grid point with maximal dot product against dir (ties broken
// by lowest index). dir must be unit within 1e-6.
int nearest_region(const SphereGrid& grid, const Vec3& dir);

// Per (direction, microphone-pair) integer arrival-time differences in
// samples, direction-major. Lags fit in 16 bits so the whole table stays
// cache-resident during the search.
struct TdoaTable {
  std::vector<std::int16_t> lags;
  int num_directions = 0;
  int num_mics = 0;
  int max_lag = 0;
  int level = 0;

  int pair_count() const { return num_mics * (num_mics - 1) / 2; }
  std::int16_t lag(int direction, int pair) const {
    return lags[static_cast<std::size_t>(direction) * pair_count() + pair];
  }

  // Canonical enumeration of unordered pairs: (0,1),(0,2),...,(M-2,M-1).
  static int pair_index(int i, int j, int num_mics);
};

// lag(d, ij) = round((Fs/c) * (x_i - x_j) . u_d), half away from zero.
TdoaTable build_tdoa_table(const MicrophoneArray& array, const SphereGrid& grid);

// Flat binary layout: magic "STDT", then uint32 level, M, N, max_lag
// (little-endian), then N*M(M-1)/2 int16 lags, direction-major.
void write_tdoa_binary(const TdoaTable& table, const std::string& path);
TdoaTable read_tdoa_binary(const std::string& path);

void write_tdoa_csv(const TdoaTable& table, const std::string& path);
void write_grid_csv(const SphereGrid& grid, const std::string& path);

}  // namespace sonoloc
