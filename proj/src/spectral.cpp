#include "sonoloc/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sonoloc {

namespace {
constexpr double kTwoPi = 6.28318530717958647692;

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

double window_value(Window window, int i, int length) {
  switch (window) {
    case Window::kHann:
      // Periodic Hann: constant overlap-add at 50% overlap.
      return 0.5 - 0.5 * std::cos(kTwoPi * i / length);
    case Window::kRectangular:
      return 1.0;
  }
  return 1.0;
}
}  // namespace

const char* to_string(EstimatorKind kind) {
  return kind == EstimatorKind::kShort ? "short" : "medium";
}

void FramePlan::validate() const {
  if (!is_power_of_two(frame_length))
    throw std::invalid_argument("frame plan: frame_length must be a power of two");
  if (hop != frame_length / 2)
    throw std::invalid_argument("frame plan: hop must be frame_length/2");
  if (sample_rate <= 0.0)
    throw std::invalid_argument("frame plan: sample_rate must be positive");
}

Frame extract_frame(const std::vector<std::vector<double>>& channels, long start,
                    long frame_index, const FramePlan& plan, Window window) {
  Frame frame;
  frame.index = frame_index;
  frame.samples.resize(channels.size());
  for (std::size_t ch = 0; ch < channels.size(); ++ch) {
    frame.samples[ch].resize(plan.frame_length);
    for (int i = 0; i < plan.frame_length; ++i)
      frame.samples[ch][i] = channels[ch][start + i] * window_value(window, i, plan.frame_length);
  }
  return frame;
}

std::vector<Frame> frame_stream(const std::vector<std::vector<double>>& channels,
                                const FramePlan& plan, Window window) {
  plan.validate();
  if (channels.empty()) throw std::invalid_argument("frame_stream: no channels");
  const std::size_t length = channels[0].size();
  for (const auto& ch : channels)
    if (ch.size() != length)
      throw std::invalid_argument("frame_stream: channel length mismatch");
  if (length < static_cast<std::size_t>(plan.frame_length))
    throw std::invalid_argument("frame_stream: input shorter than one frame");

  const long count =
      static_cast<long>((length - plan.frame_length) / plan.hop) + 1;
  std::vector<Frame> frames;
  frames.reserve(count);
  for (long t = 0; t < count; ++t)
    frames.push_back(extract_frame(channels, t * plan.hop, t, plan, window));
  return frames;
}

// ---------------------------------------------------------------------------
// SpectrumAnalyzer

SpectrumAnalyzer::SpectrumAnalyzer(int frame_length)
    : frame_length_(frame_length), fft_(std::make_unique<Fft>(frame_length)) {}

SpectralFrame SpectrumAnalyzer::analyze(const Frame& frame) const {
  SpectralFrame out;
  out.index = frame.index;
  const int channels = static_cast<int>(frame.samples.size());
  out.spectra.resize(channels);
  out.mean_power.assign(frame_length_, 0.0);
  for (int ch = 0; ch < channels; ++ch) {
    if (static_cast<int>(frame.samples[ch].size()) != frame_length_)
      throw std::invalid_argument("spectrum: frame length mismatch");
    out.spectra[ch] = fft_->forward_real(frame.samples[ch]);
    for (int k = 0; k < frame_length_; ++k)
      out.mean_power[k] += std::norm(out.spectra[ch][k]);
  }
  for (double& y : out.mean_power) y /= channels;
  return out;
}

// ---------------------------------------------------------------------------
// NoiseEstimate

NoiseEstimate::NoiseEstimate(int bins, double rate, double clamp_ratio, double floor)
    : rate_(rate), clamp_ratio_(clamp_ratio), floor_(floor), power_(bins, floor) {
  if (bins <= 0) throw std::invalid_argument("noise estimate: bins must be positive");
  if (rate <= 0.0 || rate > 1.0)
    throw std::invalid_argument("noise estimate: rate must be in (0,1]");
  if (clamp_ratio < 1.0)
    throw std::invalid_argument("noise estimate: clamp ratio must be >= 1");
}

void NoiseEstimate::update(const std::vector<double>& mean_power) {
  if (mean_power.size() != power_.size())
    throw std::invalid_argument("noise estimate: bin count mismatch");
  if (updates_ == 0) {
    for (std::size_t k = 0; k < power_.size(); ++k)
      power_[k] = std::max(mean_power[k], floor_);
  } else {
    for (std::size_t k = 0; k < power_.size(); ++k) {
      const double target = std::min(mean_power[k], power_[k] * clamp_ratio_);
      power_[k] = std::max((1.0 - rate_) * power_[k] + rate_ * target, floor_);
    }
  }
  ++updates_;
}

std::vector<double> compute_weights(const std::vector<double>& mean_power,
                                    const std::vector<double>& noise_power,
                                    double gamma) {
  if (mean_power.size() != noise_power.size())
    throw std::invalid_argument("compute_weights: bin count mismatch");
  std::vector<double> w(mean_power.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (noise_power[k] <= 0.0)
      throw std::invalid_argument("compute_weights: noise power must be positive");
    w[k] = mean_power[k] <= noise_power[k]
               ? 1.0
               : std::pow(mean_power[k] / noise_power[k], gamma);
  }
  return w;
}

// ---------------------------------------------------------------------------
// CorrelationAccumulator

CorrelationAccumulator::CorrelationAccumulator(int num_mics, int frame_length,
                                               BlockOptions options)
    : num_mics_(num_mics),
      frame_length_(frame_length),
      options_(options),
      fft_(std::make_unique<Fft>(frame_length)) {
  if (num_mics < 2) throw std::invalid_argument("correlation: need at least 2 channels");
  if (!is_power_of_two(frame_length))
    throw std::invalid_argument("correlation: frame length must be a power of two");
  cross_power_.assign(num_mics * (num_mics - 1) / 2,
                      std::vector<std::complex<double>>(frame_length, {0.0, 0.0}));
}

void CorrelationAccumulator::add(const SpectralFrame& frame,
                                 const std::vector<double>& weights) {
  if (frame.num_channels() != num_mics_)
    throw std::invalid_argument("correlation: channel count mismatch");
  if (frame.length() != frame_length_)
    throw std::invalid_argument("correlation: frame length mismatch");
  if (options_.apply_weights && static_cast<int>(weights.size()) != frame_length_)
    throw std::invalid_argument("correlation: weight vector length mismatch");

  // Whitening stabilizer, relative to this frame's loudest bin. The absolute
  // term keeps silent frames from dividing by zero.
  double max_power = 0.0;
  for (const auto& spectrum : frame.spectra)
    for (const auto& x : spectrum) max_power = std::max(max_power, std::norm(x));
  const double epsilon = 1e-12 * max_power + 1e-30;

  int pair = 0;
  for (int i = 0; i < num_mics_; ++i) {
    for (int j = i + 1; j < num_mics_; ++j, ++pair) {
      auto& acc = cross_power_[pair];
      const auto& xi = frame.spectra[i];
      const auto& xj = frame.spectra[j];
      for (int k = 0; k < frame_length_; ++k) {
        // Conjugate on channel i so that a source whose wavefront reaches
        // microphone i first peaks at the positive lag stored in the table.
        std::complex<double> g = std::conj(xi[k]) * xj[k];
        if (options_.whiten) g /= std::abs(xi[k]) * std::abs(xj[k]) + epsilon;
        if (options_.apply_weights) g *= weights[k] * weights[k];
        acc[k] += g;
      }
    }
  }
  ++frames_;
}

CorrelationSet CorrelationAccumulator::finalize(EstimatorKind kind, long block_index,
                                                long first_frame) {
  if (frames_ == 0) throw std::logic_error("correlation: finalize without frames");
  CorrelationSet set;
  set.num_mics = num_mics_;
  set.frame_count = frames_;
  set.kind = kind;
  set.block_index = block_index;
  set.first_frame = first_frame;
  set.r.resize(cross_power_.size());

  const double scale = 1.0 / frames_;
  std::vector<std::complex<double>> mean(frame_length_);
  std::vector<std::complex<double>> corr(frame_length_);
  for (std::size_t pair = 0; pair < cross_power_.size(); ++pair) {
    for (int k = 0; k < frame_length_; ++k) mean[k] = cross_power_[pair][k] * scale;
    fft_->inverse(mean.data(), corr.data());
    set.r[pair].resize(frame_length_);
    for (int t = 0; t < frame_length_; ++t) set.r[pair][t] = corr[t].real();
  }
  reset();
  return set;
}

void CorrelationAccumulator::reset() {
  frames_ = 0;
  for (auto& acc : cross_power_) std::fill(acc.begin(), acc.end(), std::complex<double>(0.0, 0.0));
}

}  // namespace sonoloc
