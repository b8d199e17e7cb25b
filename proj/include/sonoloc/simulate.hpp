#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sonoloc/geometry.hpp"
#include "sonoloc/spectral.hpp"

namespace sonoloc {

enum class SignalKind { kWhiteNoise, kSpeechLike, kTone, kFile };

struct TrajectoryKeyframe {
  double time_s = 0.0;
  Vec3 direction;  // unit
};

// One simulated far-field source: a signal kind, an activity span, and a
// direction trajectory (piecewise great-circle between keyframes, held
// constant outside them).
struct SceneSource {
  int id = 0;
  SignalKind kind = SignalKind::kWhiteNoise;
  double frequency_hz = 1000.0;  // tone only
  std::string path;              // file only
  double onset_s = 0.0;
  double offset_s = 0.0;
  double gain = 1.0;  // linear amplitude of the unit-RMS signal
  std::vector<TrajectoryKeyframe> trajectory;

  Vec3 direction_at(double time_s) const;
  void validate(double sample_rate) const;
};

struct Scene {
  std::vector<SceneSource> sources;
  double noise_level = 0.0;  // per-channel independent white noise, RMS
  double duration_s = 1.0;
  std::uint64_t seed = 0;
};

Scene load_scene(const std::string& json_text);
Scene load_scene_file(const std::string& path);

struct GroundTruthRecord {
  double time_s = 0.0;
  int source_id = 0;
  Vec3 direction;
};

struct SynthesisResult {
  std::vector<std::vector<double>> channels;
  std::vector<GroundTruthRecord> truth;  // one record per active source per block
};

// Free-field synthesis: each source reaches every microphone as a plane
// wave, so a channel's contribution is the source signal advanced by the
// projection of the microphone position (relative to the array centroid)
// onto the source direction. Per-channel white noise is added last.
// Bit-reproducible for a given scene seed. Ground truth is logged at the
// short-term block cadence of `plan`, with directions taken at block-center
// time.
SynthesisResult synthesize(const Scene& scene, const MicrophoneArray& array,
                           const FramePlan& plan = {}, int short_block_frames = 4);

// Band-limited delay by a real number of samples (31-tap windowed sinc).
// Integer delays reduce exactly to shifting; samples shifted in from outside
// the input are zero.
std::vector<double> fractional_delay(const std::vector<double>& signal, double delay);

}  // namespace sonoloc
