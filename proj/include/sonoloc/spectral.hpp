#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <vector>

#include "sonoloc/fft.hpp"

namespace sonoloc {

enum class EstimatorKind { kShort, kMedium };

const char* to_string(EstimatorKind kind);

enum class Window { kHann, kRectangular };

// Analysis framing: 50%-overlapping power-of-two frames.
struct FramePlan {
  int frame_length = 1024;
  int hop = 512;
  double sample_rate = 48000.0;

  void validate() const;
};

// One windowed multichannel analysis frame.
struct Frame {
  std::vector<std::vector<double>> samples;  // [channel][0..L)
  long index = 0;
};

// Batch framing of equal-length channels; frame t covers samples
// [t*hop, t*hop + L). All channels must hold at least one frame.
std::vector<Frame> frame_stream(const std::vector<std::vector<double>>& channels,
                                const FramePlan& plan, Window window = Window::kHann);

// Window + copy of one frame starting at `start`; shared by the batch and
// streaming paths so both produce identical frames.
Frame extract_frame(const std::vector<std::vector<double>>& channels, long start,
                    long frame_index, const FramePlan& plan, Window window);

// Per-channel complex spectra of one frame plus the mean power spectrum
// across channels.
struct SpectralFrame {
  std::vector<std::vector<std::complex<double>>> spectra;  // [channel][bin 0..L)
  std::vector<double> mean_power;                          // Y(k)
  long index = 0;

  int num_channels() const { return static_cast<int>(spectra.size()); }
  int length() const { return spectra.empty() ? 0 : static_cast<int>(spectra[0].size()); }
};

class SpectrumAnalyzer {
 public:
  explicit SpectrumAnalyzer(int frame_length);
  SpectralFrame analyze(const Frame& frame) const;

 private:
  int frame_length_;
  std::unique_ptr<Fft> fft_;
};

// Exponential time average of the mean power spectrum with an upward clamp,
// so brief signal onsets do not inflate the noise floor. The first update
// copies the input.
class NoiseEstimate {
 public:
  explicit NoiseEstimate(int bins, double rate = 0.05, double clamp_ratio = 1.05,
                         double floor = 1e-12);

  void update(const std::vector<double>& mean_power);
  const std::vector<double>& power() const { return power_; }
  long update_count() const { return updates_; }

 private:
  double rate_;
  double clamp_ratio_;
  double floor_;
  long updates_ = 0;
  std::vector<double> power_;
};

// w(k) = 1 where the signal does not exceed the noise floor, else
// (Y/Y_N)^gamma: bins with high local SNR contribute more.
std::vector<double> compute_weights(const std::vector<double>& mean_power,
                                    const std::vector<double>& noise_power,
                                    double gamma);

struct BlockOptions {
  bool whiten = true;        // divide each cross-power bin by its magnitude
  bool apply_weights = true; // multiply by w^2(k)
  double gamma = 0.1;
};

// Per-pair weighted-whitened cross-correlations for one analysis block, at
// all L circular lags.
struct CorrelationSet {
  std::vector<std::vector<double>> r;  // [pair][lag 0..L)
  int num_mics = 0;
  int frame_count = 0;
  EstimatorKind kind = EstimatorKind::kShort;
  long block_index = 0;
  long first_frame = 0;

  int length() const { return r.empty() ? 0 : static_cast<int>(r[0].size()); }
  int pair_count() const { return static_cast<int>(r.size()); }
  // Circular lookup; lag may be negative.
  double at(int pair, int lag) const {
    return r[pair][static_cast<unsigned>(lag) & (r[pair].size() - 1)];
  }
};

// Accumulates cross-power spectra over the frames of one block and converts
// them to cross-correlations on finalize. Weights are supplied per frame.
class CorrelationAccumulator {
 public:
  CorrelationAccumulator(int num_mics, int frame_length, BlockOptions options = {});

  void add(const SpectralFrame& frame, const std::vector<double>& weights);
  int frames_accumulated() const { return frames_; }
  CorrelationSet finalize(EstimatorKind kind, long block_index, long first_frame);
  void reset();

 private:
  int num_mics_;
  int frame_length_;
  BlockOptions options_;
  int frames_ = 0;
  std::vector<std::vector<std::complex<double>>> cross_power_;  // [pair][bin]
  std::unique_ptr<Fft> fft_;
};

}  // namespace sonoloc
