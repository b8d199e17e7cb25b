#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sonoloc/geometry.hpp"
#include "sonoloc/search.hpp"
#include "sonoloc/spectral.hpp"
#include "sonoloc/tracker.hpp"
#include "sonoloc/wav.hpp"

namespace sonoloc {

// Reference level used to turn beamformer energy into detection
// probability. By default it is learned from blocks the tracker considers
// silent; a fixed level skips the warm-up entirely.
struct EnergyReferenceConfig {
  bool adaptive = true;
  double rate = 0.1;
  double margin = 1.5;
  int warmup_blocks = 10;
  double fixed_short = 1.0;
  double fixed_medium = 1.0;

  void validate() const;
};

struct PipelineConfig {
  MicrophoneArray array = MicrophoneArray::prism();
  FramePlan plan;
  Window window = Window::kHann;
  int grid_level = 4;

  bool whiten = true;
  bool apply_weights = true;
  double gamma = 0.1;
  double noise_rate = 0.05;
  double noise_clamp_ratio = 1.05;

  int short_block_frames = 4;
  int medium_block_frames = 20;
  int short_sources = 2;
  int medium_sources = 4;
  int removal_radius = 0;

  TrackerParams tracker;
  EnergyReferenceConfig energy;

  // Reproduces the plain formulation: rectangular analysis window, no
  // neighborhood spread of detections, no lag clearing around found peaks.
  bool strict_mode = false;

  void validate() const;
  // Copy with the strict-mode substitutions applied.
  PipelineConfig effective() const;
};

PipelineConfig load_pipeline_config(const std::string& json_text);
PipelineConfig load_pipeline_config_file(const std::string& path);
std::string describe_config(const PipelineConfig& config);

struct DetectionEvent {
  double time_s = 0.0;
  int region = 0;
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
  double probability = 0.0;
  double energy = 0.0;
  EstimatorKind estimator = EstimatorKind::kShort;
};

std::string events_to_jsonl(const std::vector<DetectionEvent>& events);
std::vector<DetectionEvent> events_from_jsonl(const std::string& text);

// Streaming localizer: feed audio in chunks of any size; detection events
// accumulate as analysis blocks complete. Chunk boundaries never affect the
// output, and memory stays bounded by the analysis window.
class Pipeline {
 public:
  explicit Pipeline(const PipelineConfig& config);

  // `chunk` holds one vector per channel, all the same length (may be 0).
  void push(const std::vector<std::vector<double>>& chunk);

  std::vector<DetectionEvent> take_events();
  const std::vector<DetectionEvent>& events() const { return events_; }

  const PipelineConfig& config() const { return cfg_; }
  const SphereGrid& grid() const { return grid_; }
  const TdoaTable& table() const { return table_; }
  const SourceTracker& tracker() const { return tracker_; }
  long frames_processed() const { return next_frame_; }

  // Optional debug taps, invoked as each block completes.
  std::function<void(const CorrelationSet&)> correlation_sink;
  std::function<void(const CorrelationSet&, const std::vector<double>&)> energy_sink;

 private:
  void process_frame(const Frame& frame);
  void run_block(CorrelationAccumulator& acc, EstimatorKind kind, long block_index,
                 int block_frames, int sources, long last_frame);
  // Events and ground truth both use block-center timestamps.
  double block_center_time(long block_index, int block_frames) const;

  PipelineConfig cfg_;
  SphereGrid grid_;
  TdoaTable table_;
  SpectrumAnalyzer analyzer_;
  NoiseEstimate noise_;
  BlockOptions block_options_;
  CorrelationAccumulator short_acc_;
  CorrelationAccumulator medium_acc_;
  SourceTracker tracker_;

  std::vector<std::vector<double>> buffer_;  // pending samples per channel
  long buffer_base_ = 0;                     // absolute index of buffer_[.][0]
  long next_frame_ = 0;
  long short_blocks_ = 0;
  long medium_blocks_ = 0;
  std::vector<DetectionEvent> events_;
};

// Runs the whole signal through a fresh pipeline and returns its events.
std::vector<DetectionEvent> run_pipeline(const PipelineConfig& config,
                                         const std::vector<std::vector<double>>& channels);

// Throws unless the file's channel count and sample rate match the array;
// resampling is never attempted.
void validate_wav_input(const PipelineConfig& config, const WavData& wav);

// Same, reading from a WAV file that must pass validate_wav_input.
std::vector<DetectionEvent> run_pipeline_on_wav(const PipelineConfig& config,
                                                const WavData& wav);

}  // namespace sonoloc
