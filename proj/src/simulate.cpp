#include "sonoloc/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>
#include "sonoloc/wav.hpp"

namespace sonoloc {
namespace {

constexpr int kSincHalfWidth = 15;  // 31-tap interpolation kernel
constexpr double kPi = std::numbers::pi;

// Broadband sources are rendered with this bandwidth, mimicking a physical
// sound source (loudspeaker, voice). Keeping energy out of the top octaves
// widens the cross-correlation main lobe to a few samples, which is what
// makes integer-lag direction lookup on a one-or-two-degree grid behave;
// digitally flat noise up to the Nyquist rate would concentrate the peak
// into a single lag and turn the grid search into a rounding lottery.
constexpr double kSourceBandwidthHz = 6000.0;

// Deterministic, platform-independent generator (splitmix64). Each source
// and each noise channel draws from its own stream so that adding or
// removing one source never perturbs the samples of another.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [-1, 1).
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * (2.0 / 9007199254740992.0) - 1.0;
  }

 private:
  std::uint64_t state_;
};

std::uint64_t stream_seed(std::uint64_t base, std::uint64_t stream) {
  RandomStream mixer(base ^ (stream * 0xd6e8feb86659fd93ULL + 0x2545f4914f6cdd1dULL));
  return mixer.next_u64();
}

// Blackman-windowed sinc taps share the trig of the fractional part: the
// per-tap factors split as cos(pi*(k - f)/W) = cos(pi*k/W)cos(pi*f/W) +
// sin(pi*k/W)sin(pi*f/W), with the k-dependent parts precomputed once.
struct SincTables {
  double cos_k[2 * kSincHalfWidth + 1];
  double sin_k[2 * kSincHalfWidth + 1];
  SincTables() {
    for (int k = -kSincHalfWidth; k <= kSincHalfWidth; ++k) {
      const double phase = kPi * k / (kSincHalfWidth + 1.0);
      cos_k[k + kSincHalfWidth] = std::cos(phase);
      sin_k[k + kSincHalfWidth] = std::sin(phase);
    }
  }
};

const SincTables& sinc_tables() {
  static const SincTables tables;
  return tables;
}

// Value of `signal` at fractional position `pos` (zero outside the array).
double sample_at(const std::vector<double>& signal, double pos) {
  const double floor_pos = std::floor(pos);
  const long base = static_cast<long>(floor_pos);
  const double frac = pos - floor_pos;
  const long n = static_cast<long>(signal.size());

  if (frac == 0.0) {
    return (base >= 0 && base < n) ? signal[static_cast<std::size_t>(base)] : 0.0;
  }

  const SincTables& tab = sinc_tables();
  const double sin_pf = std::sin(kPi * frac);
  const double window_arg = kPi * frac / (kSincHalfWidth + 1.0);
  const double cos_wf = std::cos(window_arg);
  const double sin_wf = std::sin(window_arg);

  double acc = 0.0;
  // Taps sit at integer offsets k; the kernel argument is t = k - frac, so
  // sin(pi*(k - frac)) = -cos(pi*k)*sin(pi*frac) and the sign alternates
  // with k starting from (-1)^(k+1) at the leftmost tap.
  double sign = (kSincHalfWidth % 2 == 0) ? -1.0 : 1.0;
  for (int k = -kSincHalfWidth; k <= kSincHalfWidth; ++k) {
    const long idx = base + k;
    if (idx >= 0 && idx < n) {
      const double t = k - frac;
      const double cos_w = tab.cos_k[k + kSincHalfWidth] * cos_wf +
                           tab.sin_k[k + kSincHalfWidth] * sin_wf;
      const double window = 0.42 + 0.5 * cos_w + 0.08 * (2.0 * cos_w * cos_w - 1.0);
      acc += signal[static_cast<std::size_t>(idx)] * window * sign * sin_pf / (kPi * t);
    }
    sign = -sign;
  }
  return acc;
}

void normalize_rms(std::vector<double>& signal) {
  double power = 0.0;
  for (double v : signal) power += v * v;
  if (signal.empty() || power <= 0.0) return;
  const double scale = 1.0 / std::sqrt(power / static_cast<double>(signal.size()));
  for (double& v : signal) v *= scale;
}

// Unit-RMS noise low-passed to kSourceBandwidthHz by a Blackman-windowed
// sinc filter. Deterministic for a given stream seed.
std::vector<double> band_limited_noise(long length, double sample_rate,
                                       std::uint64_t seed) {
  constexpr int kHalf = 31;
  const double cutoff = std::min(kSourceBandwidthHz / sample_rate, 0.5);
  std::vector<double> taps(2 * kHalf + 1);
  double tap_power = 0.0;
  for (int k = -kHalf; k <= kHalf; ++k) {
    const double t = static_cast<double>(k);
    const double lobe = (k == 0) ? 2.0 * cutoff
                                 : std::sin(2.0 * kPi * cutoff * t) / (kPi * t);
    const double window = 0.42 + 0.5 * std::cos(kPi * t / (kHalf + 1.0)) +
                          0.08 * std::cos(2.0 * kPi * t / (kHalf + 1.0));
    taps[static_cast<std::size_t>(k + kHalf)] = lobe * window;
    tap_power += taps[static_cast<std::size_t>(k + kHalf)] *
                 taps[static_cast<std::size_t>(k + kHalf)];
  }
  // White input with unit variance through the filter has RMS sqrt(sum h^2).
  const double gain = 1.0 / std::sqrt(tap_power / 3.0);  // uniform [-1,1) var 1/3

  RandomStream rng(seed);
  std::vector<double> raw(static_cast<std::size_t>(length) + taps.size() - 1);
  for (double& v : raw) v = rng.next_uniform();
  std::vector<double> out(static_cast<std::size_t>(length), 0.0);
  for (long n = 0; n < length; ++n) {
    double acc = 0.0;
    for (std::size_t k = 0; k < taps.size(); ++k) {
      acc += taps[k] * raw[static_cast<std::size_t>(n) + k];
    }
    out[static_cast<std::size_t>(n)] = gain * acc;
  }
  return out;
}

// Unit-RMS waveform for one source, covering `length` samples starting at
// the source onset.
std::vector<double> render_waveform(const SceneSource& source, long length,
                                    double sample_rate, std::uint64_t seed) {
  std::vector<double> signal(static_cast<std::size_t>(std::max(length, 0L)), 0.0);
  if (length <= 0) return signal;

  switch (source.kind) {
    case SignalKind::kWhiteNoise: {
      signal = band_limited_noise(length, sample_rate, seed);
      break;
    }
    case SignalKind::kSpeechLike: {
      // Broadband noise tilted toward low frequencies by a leaky
      // integrator, gated by a slow raised-cosine envelope so the signal
      // pulses a few times per second like voiced speech.
      RandomStream rng(seed);
      const double pole = 0.95;
      double state = 0.0;
      for (std::size_t n = 0; n < signal.size(); ++n) {
        state = pole * state + (1.0 - pole) * rng.next_uniform();
        const double time_s = static_cast<double>(n) / sample_rate;
        const double envelope =
            0.15 + 0.85 * (0.5 - 0.5 * std::cos(2.0 * kPi * 4.0 * time_s));
        signal[n] = state * envelope;
      }
      normalize_rms(signal);
      break;
    }
    case SignalKind::kTone: {
      const double unit_rms = std::sqrt(2.0);
      for (std::size_t n = 0; n < signal.size(); ++n) {
        signal[n] = unit_rms * std::sin(2.0 * kPi * source.frequency_hz *
                                        static_cast<double>(n) / sample_rate);
      }
      break;
    }
    case SignalKind::kFile: {
      const WavData wav = read_wav(source.path);
      if (wav.channels.size() != 1) {
        throw std::runtime_error("source file must be mono: " + source.path);
      }
      if (wav.sample_rate != sample_rate) {
        throw std::runtime_error("source file sample rate mismatch: " + source.path);
      }
      const std::vector<double>& in = wav.channels[0];
      for (std::size_t n = 0; n < signal.size() && n < in.size(); ++n) signal[n] = in[n];
      break;
    }
  }
  return signal;
}

SignalKind parse_signal_kind(const std::string& name) {
  if (name == "white_noise") return SignalKind::kWhiteNoise;
  if (name == "speech_like") return SignalKind::kSpeechLike;
  if (name == "tone") return SignalKind::kTone;
  if (name == "file") return SignalKind::kFile;
  throw std::runtime_error("unknown signal kind: " + name);
}

}  // namespace

Vec3 SceneSource::direction_at(double time_s) const {
  if (trajectory.empty()) {
    throw std::runtime_error("source has no trajectory keyframes");
  }
  if (time_s <= trajectory.front().time_s) return trajectory.front().direction;
  if (time_s >= trajectory.back().time_s) return trajectory.back().direction;

  std::size_t hi = 1;
  while (trajectory[hi].time_s < time_s) ++hi;
  const TrajectoryKeyframe& a = trajectory[hi - 1];
  const TrajectoryKeyframe& b = trajectory[hi];
  const double span = b.time_s - a.time_s;
  const double t = (span > 0.0) ? (time_s - a.time_s) / span : 1.0;

  // Great-circle interpolation; for near-parallel endpoints fall back to the
  // normalized chord, which is indistinguishable at that separation.
  const double cos_angle = std::clamp(a.direction.dot(b.direction), -1.0, 1.0);
  const double angle = std::acos(cos_angle);
  if (angle < 1e-9) return a.direction;
  const double sin_angle = std::sin(angle);
  const Vec3 mixed = a.direction * (std::sin((1.0 - t) * angle) / sin_angle) +
                     b.direction * (std::sin(t * angle) / sin_angle);
  return mixed.normalized();
}

void SceneSource::validate(double sample_rate) const {
  if (offset_s <= onset_s) {
    throw std::runtime_error("source offset must come after onset");
  }
  if (gain < 0.0) throw std::runtime_error("source gain must be non-negative");
  if (trajectory.empty()) {
    throw std::runtime_error("source needs at least one trajectory keyframe");
  }
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const double len = trajectory[i].direction.norm();
    if (std::abs(len - 1.0) > 1e-6) {
      throw std::runtime_error("trajectory direction must be a unit vector");
    }
    if (i > 0 && trajectory[i].time_s < trajectory[i - 1].time_s) {
      throw std::runtime_error("trajectory keyframes must be time-ordered");
    }
  }
  if (kind == SignalKind::kTone &&
      (frequency_hz <= 0.0 || frequency_hz >= sample_rate / 2.0)) {
    throw std::runtime_error("tone frequency must lie below the Nyquist rate");
  }
  if (kind == SignalKind::kFile && path.empty()) {
    throw std::runtime_error("file source needs a path");
  }
}

Scene load_scene(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("scene is not valid JSON: ") + e.what());
  }

  Scene scene;
  scene.duration_s = doc.at("duration_s").get<double>();
  scene.noise_level = doc.value("noise_level", 0.0);
  scene.seed = doc.value("seed", std::uint64_t{0});
  if (scene.duration_s <= 0.0) {
    throw std::runtime_error("scene duration must be positive");
  }
  if (scene.noise_level < 0.0) {
    throw std::runtime_error("scene noise level must be non-negative");
  }

  int next_id = 0;
  for (const nlohmann::json& item : doc.value("sources", nlohmann::json::array())) {
    SceneSource source;
    source.id = item.value("id", next_id);
    next_id = source.id + 1;
    source.kind = parse_signal_kind(item.value("kind", std::string("white_noise")));
    source.frequency_hz = item.value("frequency_hz", 1000.0);
    source.path = item.value("path", std::string());
    source.onset_s = item.value("onset_s", 0.0);
    source.offset_s = item.value("offset_s", scene.duration_s);
    source.gain = item.value("gain", 1.0);

    if (item.contains("trajectory")) {
      for (const nlohmann::json& kf : item.at("trajectory")) {
        TrajectoryKeyframe key;
        key.time_s = kf.at("time_s").get<double>();
        if (kf.contains("direction")) {
          const nlohmann::json& d = kf.at("direction");
          key.direction = Vec3{d.at(0).get<double>(), d.at(1).get<double>(),
                               d.at(2).get<double>()};
        } else {
          key.direction = direction_from_angles(kf.at("azimuth_deg").get<double>(),
                                                kf.at("elevation_deg").get<double>());
        }
        key.direction = key.direction.normalized();
        source.trajectory.push_back(key);
      }
    } else if (item.contains("azimuth_deg")) {
      TrajectoryKeyframe key;
      key.direction = direction_from_angles(item.at("azimuth_deg").get<double>(),
                                            item.at("elevation_deg").get<double>());
      source.trajectory.push_back(key);
    }
    if (source.trajectory.empty())
      throw std::invalid_argument(
          "scene: source needs azimuth_deg/elevation_deg or a trajectory");
    scene.sources.push_back(std::move(source));
  }
  return scene;
}

Scene load_scene_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scene file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return load_scene(text.str());
}

SynthesisResult synthesize(const Scene& scene, const MicrophoneArray& array,
                           const FramePlan& plan, int short_block_frames) {
  array.validate();
  plan.validate();
  if (short_block_frames <= 0) {
    throw std::runtime_error("short block length must be positive");
  }
  for (const SceneSource& source : scene.sources) source.validate(array.sample_rate);

  const double fs = array.sample_rate;
  const long total = static_cast<long>(std::llround(scene.duration_s * fs));
  if (total <= 0) throw std::runtime_error("scene duration must be positive");

  const std::size_t num_mics = array.positions.size();
  SynthesisResult result;
  result.channels.assign(num_mics,
                         std::vector<double>(static_cast<std::size_t>(total), 0.0));

  // Inter-channel shifts never exceed the array aperture in samples; pad the
  // rendered waveform by that margin plus the interpolation half-width so
  // every kernel read stays in bounds.
  const long margin = static_cast<long>(
                          std::ceil(fs * array.aperture() / array.speed_of_sound)) +
                      kSincHalfWidth + 1;
  const Vec3 centroid = array.centroid();

  for (const SceneSource& source : scene.sources) {
    const long onset = std::max(0L, static_cast<long>(std::llround(source.onset_s * fs)));
    const long offset =
        std::min(total, static_cast<long>(std::llround(source.offset_s * fs)));
    if (offset <= onset) continue;

    const std::uint64_t seed =
        stream_seed(scene.seed, 0x5eedULL + static_cast<std::uint64_t>(source.id));
    // Waveform sample w[i] corresponds to output sample onset + i - margin,
    // with the leading and trailing margins silent, so advanced reads near
    // the activity edges see zeros rather than wrapped data.
    std::vector<double> waveform(static_cast<std::size_t>(offset - onset + 2 * margin),
                                 0.0);
    {
      std::vector<double> body =
          render_waveform(source, offset - onset, fs, seed);
      std::copy(body.begin(), body.end(), waveform.begin() + margin);
    }

    const long first = std::max(0L, onset - margin);
    const long last = std::min(total, offset + margin);
    const bool moving = source.trajectory.size() > 1;
    Vec3 direction = source.direction_at(0.0);
    std::vector<double> advance(num_mics, 0.0);
    auto refresh_advance = [&]() {
      for (std::size_t m = 0; m < num_mics; ++m) {
        advance[m] = fs * (array.positions[m] - centroid).dot(direction) /
                     array.speed_of_sound;
      }
    };
    refresh_advance();

    for (long n = first; n < last; ++n) {
      if (moving) {
        direction = source.direction_at(static_cast<double>(n) / fs);
        refresh_advance();
      }
      const double base = static_cast<double>(n - onset + margin);
      for (std::size_t m = 0; m < num_mics; ++m) {
        // A microphone on the source side of the centroid hears the wave
        // early, i.e. reads the waveform ahead of the nominal position.
        const double value = sample_at(waveform, base + advance[m]);
        result.channels[m][static_cast<std::size_t>(n)] += source.gain * value;
      }
    }
  }

  if (scene.noise_level > 0.0) {
    const double unit_rms = std::sqrt(3.0);
    for (std::size_t m = 0; m < num_mics; ++m) {
      RandomStream rng(stream_seed(scene.seed, 0xA0153ULL + m));
      for (long n = 0; n < total; ++n) {
        result.channels[m][static_cast<std::size_t>(n)] +=
            scene.noise_level * unit_rms * rng.next_uniform();
      }
    }
  }

  // Ground truth at the analysis cadence: one record per active source per
  // complete short-term block, sampled at block-center time.
  const long block_step = static_cast<long>(short_block_frames) * plan.hop;
  const long block_span =
      static_cast<long>(short_block_frames - 1) * plan.hop + plan.frame_length;
  for (long start = 0; start + block_span <= total; start += block_step) {
    const double center_s = (static_cast<double>(start) + block_span / 2.0) / fs;
    for (const SceneSource& source : scene.sources) {
      if (center_s < source.onset_s || center_s >= source.offset_s) continue;
      result.truth.push_back(
          GroundTruthRecord{center_s, source.id, source.direction_at(center_s)});
    }
  }
  return result;
}

std::vector<double> fractional_delay(const std::vector<double>& signal, double delay) {
  if (std::abs(delay) >= static_cast<double>(signal.size())) {
    throw std::runtime_error("delay exceeds signal length");
  }
  std::vector<double> out(signal.size(), 0.0);
  for (std::size_t n = 0; n < out.size(); ++n) {
    out[n] = sample_at(signal, static_cast<double>(n) - delay);
  }
  return out;
}

}  // namespace sonoloc
