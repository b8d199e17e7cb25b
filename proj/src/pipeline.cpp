#include "sonoloc/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>
#include "sonoloc/search.hpp"

namespace sonoloc {
namespace {

EnergyCalibration make_calibration(const EnergyReferenceConfig& energy,
                                   EstimatorKind kind) {
  if (energy.adaptive) {
    return EnergyCalibration::adaptive(energy.rate, energy.margin,
                                       energy.warmup_blocks);
  }
  return EnergyCalibration::fixed(kind == EstimatorKind::kShort ? energy.fixed_short
                                                                : energy.fixed_medium);
}

EstimatorKind estimator_from_string(const std::string& name) {
  if (name == "short") return EstimatorKind::kShort;
  if (name == "medium") return EstimatorKind::kMedium;
  throw std::runtime_error("unknown estimator name: " + name);
}

Window window_from_string(const std::string& name) {
  if (name == "hann") return Window::kHann;
  if (name == "rectangular") return Window::kRectangular;
  throw std::runtime_error("unknown window name: " + name);
}

}  // namespace

void EnergyReferenceConfig::validate() const {
  if (rate <= 0.0 || rate > 1.0) {
    throw std::runtime_error("energy reference rate must lie in (0, 1]");
  }
  if (margin < 1.0) throw std::runtime_error("energy reference margin must be >= 1");
  if (warmup_blocks < 1) {
    throw std::runtime_error("energy reference warm-up must be at least one block");
  }
  if (fixed_short <= 0.0 || fixed_medium <= 0.0) {
    throw std::runtime_error("fixed energy reference must be positive");
  }
}

void PipelineConfig::validate() const {
  array.validate();
  plan.validate();
  if (plan.sample_rate != array.sample_rate) {
    throw std::runtime_error("frame plan and array disagree on the sample rate");
  }
  if (grid_level < 0 || grid_level > 6) {
    throw std::runtime_error("grid level must lie in [0, 6]");
  }
  if (gamma <= 0.0 || gamma > 1.0) {
    throw std::runtime_error("weight exponent must lie in (0, 1]");
  }
  if (noise_rate <= 0.0 || noise_rate > 1.0) {
    throw std::runtime_error("noise adaptation rate must lie in (0, 1]");
  }
  if (noise_clamp_ratio < 1.0) {
    throw std::runtime_error("noise clamp ratio must be >= 1");
  }
  if (short_block_frames < 1 || medium_block_frames < short_block_frames) {
    throw std::runtime_error("block lengths must satisfy 1 <= short <= medium");
  }
  if (medium_block_frames % short_block_frames != 0) {
    throw std::runtime_error(
        "medium block length must be a multiple of the short block length");
  }
  if (short_sources < 1 || medium_sources < 1) {
    throw std::runtime_error("each estimator must extract at least one source");
  }
  if (removal_radius < 0) throw std::runtime_error("removal radius must be >= 0");
  tracker.validate();
  energy.validate();
}

PipelineConfig PipelineConfig::effective() const {
  PipelineConfig out = *this;
  if (out.strict_mode) {
    out.window = Window::kRectangular;
    out.removal_radius = 0;
    out.tracker.spread_hops = 0;
  }
  out.validate();
  return out;
}

PipelineConfig load_pipeline_config(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("config is not valid JSON: ") + e.what());
  }

  PipelineConfig cfg;
  if (doc.contains("array_file")) {
    cfg.array = load_array_file(doc.at("array_file").get<std::string>());
  } else if (doc.contains("array")) {
    cfg.array = load_array_config(doc.at("array").dump());
  }
  cfg.plan.sample_rate = cfg.array.sample_rate;

  if (doc.contains("frame")) {
    const nlohmann::json& frame = doc.at("frame");
    cfg.plan.frame_length = frame.value("length", cfg.plan.frame_length);
    cfg.plan.hop = frame.value("hop", cfg.plan.frame_length / 2);
  }
  if (doc.contains("window")) {
    cfg.window = window_from_string(doc.at("window").get<std::string>());
  }
  cfg.grid_level = doc.value("grid_level", cfg.grid_level);
  cfg.whiten = doc.value("whiten", cfg.whiten);
  cfg.apply_weights = doc.value("apply_weights", cfg.apply_weights);
  cfg.gamma = doc.value("gamma", cfg.gamma);
  cfg.noise_rate = doc.value("noise_rate", cfg.noise_rate);
  cfg.noise_clamp_ratio = doc.value("noise_clamp_ratio", cfg.noise_clamp_ratio);
  cfg.short_block_frames = doc.value("short_block_frames", cfg.short_block_frames);
  cfg.medium_block_frames = doc.value("medium_block_frames", cfg.medium_block_frames);
  cfg.short_sources = doc.value("short_sources", cfg.short_sources);
  cfg.medium_sources = doc.value("medium_sources", cfg.medium_sources);
  cfg.removal_radius = doc.value("removal_radius", cfg.removal_radius);
  cfg.strict_mode = doc.value("strict_mode", cfg.strict_mode);

  if (doc.contains("tracker")) {
    const nlohmann::json& t = doc.at("tracker");
    TrackerParams& p = cfg.tracker;
    p.p_min = t.value("p_min", p.p_min);
    p.p_floor = t.value("p_floor", p.p_floor);
    p.p1 = t.value("p1", p.p1);
    p.alpha01_short = t.value("alpha01_short", p.alpha01_short);
    p.alpha11_short = t.value("alpha11_short", p.alpha11_short);
    p.alpha01_medium = t.value("alpha01_medium", p.alpha01_medium);
    p.alpha11_medium = t.value("alpha11_medium", p.alpha11_medium);
    p.beta = t.value("beta", p.beta);
    p.emit_threshold = t.value("emit_threshold", p.emit_threshold);
    p.spread_hops = t.value("spread_hops", p.spread_hops);
    p.spread_attenuation = t.value("spread_attenuation", p.spread_attenuation);
  }
  if (doc.contains("energy")) {
    const nlohmann::json& e = doc.at("energy");
    EnergyReferenceConfig& r = cfg.energy;
    if (e.contains("mode")) {
      const std::string mode = e.at("mode").get<std::string>();
      if (mode == "adaptive") {
        r.adaptive = true;
      } else if (mode == "fixed") {
        r.adaptive = false;
      } else {
        throw std::runtime_error("energy reference mode must be adaptive or fixed");
      }
    }
    r.rate = e.value("rate", r.rate);
    r.margin = e.value("margin", r.margin);
    r.warmup_blocks = e.value("warmup_blocks", r.warmup_blocks);
    r.fixed_short = e.value("fixed_short", r.fixed_short);
    r.fixed_medium = e.value("fixed_medium", r.fixed_medium);
  }

  cfg.validate();
  return cfg;
}

PipelineConfig load_pipeline_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return load_pipeline_config(text.str());
}

std::string describe_config(const PipelineConfig& config) {
  const PipelineConfig cfg = config.effective();
  const long grid_points = 10L * (1L << (2 * cfg.grid_level)) + 2;
  std::ostringstream out;
  out << "array: " << cfg.array.size() << " microphones, " << cfg.array.sample_rate
      << " Hz, c = " << cfg.array.speed_of_sound << " m/s\n";
  out << "grid: level " << cfg.grid_level << " (" << grid_points << " directions)\n";
  out << "frame: " << cfg.plan.frame_length << " samples, hop " << cfg.plan.hop << ", "
      << (cfg.window == Window::kHann ? "hann" : "rectangular") << " window\n";
  out << "blocks: short " << cfg.short_block_frames << " frames / " << cfg.short_sources
      << " sources, medium " << cfg.medium_block_frames << " frames / "
      << cfg.medium_sources << " sources, removal radius " << cfg.removal_radius
      << "\n";
  out << "weighting: whiten " << (cfg.whiten ? "on" : "off") << ", snr weights "
      << (cfg.apply_weights ? "on" : "off") << " (gamma " << cfg.gamma << ", noise rate "
      << cfg.noise_rate << ", clamp " << cfg.noise_clamp_ratio << ")\n";
  out << "tracker: emit threshold " << cfg.tracker.emit_threshold << ", beta "
      << cfg.tracker.beta << ", spread " << cfg.tracker.spread_hops << " hop(s)\n";
  if (cfg.energy.adaptive) {
    out << "energy reference: adaptive (rate " << cfg.energy.rate << ", margin "
        << cfg.energy.margin << ", warmup " << cfg.energy.warmup_blocks << " blocks)\n";
  } else {
    out << "energy reference: fixed (short " << cfg.energy.fixed_short << ", medium "
        << cfg.energy.fixed_medium << ")\n";
  }
  out << "strict mode: " << (cfg.strict_mode ? "on" : "off") << "\n";
  return out.str();
}

std::string events_to_jsonl(const std::vector<DetectionEvent>& events) {
  std::string out;
  for (const DetectionEvent& e : events) {
    const nlohmann::json line = {
        {"time_s", e.time_s},           {"region", e.region},
        {"azimuth_deg", e.azimuth_deg}, {"elevation_deg", e.elevation_deg},
        {"probability", e.probability}, {"energy", e.energy},
        {"estimator", to_string(e.estimator)}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::vector<DetectionEvent> events_from_jsonl(const std::string& text) {
  std::vector<DetectionEvent> events;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(std::string("bad event line: ") + e.what());
    }
    DetectionEvent event;
    event.time_s = doc.at("time_s").get<double>();
    event.region = doc.at("region").get<int>();
    event.azimuth_deg = doc.at("azimuth_deg").get<double>();
    event.elevation_deg = doc.at("elevation_deg").get<double>();
    event.probability = doc.at("probability").get<double>();
    event.energy = doc.value("energy", 0.0);
    event.estimator = estimator_from_string(doc.value("estimator", std::string("short")));
    events.push_back(event);
  }
  return events;
}

Pipeline::Pipeline(const PipelineConfig& config)
    : cfg_(config.effective()),
      grid_(build_grid(cfg_.grid_level)),
      table_(build_tdoa_table(cfg_.array, grid_)),
      analyzer_(cfg_.plan.frame_length),
      noise_(cfg_.plan.frame_length, cfg_.noise_rate, cfg_.noise_clamp_ratio),
      block_options_{cfg_.whiten, cfg_.apply_weights, cfg_.gamma},
      short_acc_(cfg_.array.size(), cfg_.plan.frame_length, block_options_),
      medium_acc_(cfg_.array.size(), cfg_.plan.frame_length, block_options_),
      tracker_(grid_, cfg_.tracker, make_calibration(cfg_.energy, EstimatorKind::kShort),
               make_calibration(cfg_.energy, EstimatorKind::kMedium)),
      buffer_(cfg_.array.positions.size()) {}

void Pipeline::push(const std::vector<std::vector<double>>& chunk) {
  if (chunk.size() != buffer_.size()) {
    throw std::runtime_error("chunk channel count does not match the array");
  }
  const std::size_t added = chunk.empty() ? 0 : chunk[0].size();
  for (std::size_t c = 0; c < chunk.size(); ++c) {
    if (chunk[c].size() != added) {
      throw std::runtime_error("chunk channels must share one length");
    }
    buffer_[c].insert(buffer_[c].end(), chunk[c].begin(), chunk[c].end());
  }

  const long length = cfg_.plan.frame_length;
  const long hop = cfg_.plan.hop;
  const long available_end =
      buffer_base_ + static_cast<long>(buffer_.empty() ? 0 : buffer_[0].size());
  while (next_frame_ * hop + length <= available_end) {
    const long start = next_frame_ * hop - buffer_base_;
    process_frame(extract_frame(buffer_, start, next_frame_, cfg_.plan, cfg_.window));
    ++next_frame_;
  }

  // Drop fully consumed samples, amortized so steady-state pushes do not
  // shift the buffer on every call.
  const long consumed = next_frame_ * hop - buffer_base_;
  if (consumed > 4 * length) {
    for (std::vector<double>& channel : buffer_) {
      channel.erase(channel.begin(), channel.begin() + consumed);
    }
    buffer_base_ += consumed;
  }
}

void Pipeline::process_frame(const Frame& frame) {
  const SpectralFrame spectral = analyzer_.analyze(frame);
  noise_.update(spectral.mean_power);
  const std::vector<double> weights =
      compute_weights(spectral.mean_power, noise_.power(), cfg_.gamma);
  short_acc_.add(spectral, weights);
  medium_acc_.add(spectral, weights);

  // When both block kinds end on the same frame the medium estimator goes
  // first, so the short-term update that triggers emission already sees the
  // refreshed medium posterior.
  if (medium_acc_.frames_accumulated() == cfg_.medium_block_frames) {
    run_block(medium_acc_, EstimatorKind::kMedium, medium_blocks_,
              cfg_.medium_block_frames, cfg_.medium_sources, frame.index);
    ++medium_blocks_;
  }
  if (short_acc_.frames_accumulated() == cfg_.short_block_frames) {
    run_block(short_acc_, EstimatorKind::kShort, short_blocks_, cfg_.short_block_frames,
              cfg_.short_sources, frame.index);
    const double time_s = block_center_time(short_blocks_, cfg_.short_block_frames);
    for (const ActiveSource& source : tracker_.active_sources()) {
      events_.push_back(DetectionEvent{time_s, source.region,
                                       azimuth_deg(source.direction),
                                       elevation_deg(source.direction),
                                       source.probability, source.energy,
                                       source.estimator});
    }
    ++short_blocks_;
  }
}

void Pipeline::run_block(CorrelationAccumulator& acc, EstimatorKind kind,
                         long block_index, int block_frames, int sources,
                         long last_frame) {
  CorrelationSet set = acc.finalize(kind, block_index, last_frame - block_frames + 1);
  if (correlation_sink) correlation_sink(set);
  if (energy_sink) energy_sink(set, energy_map(set, table_));
  const std::vector<DirectionDetection> detections =
      locate_sources(set, table_, grid_, sources, cfg_.removal_radius);
  tracker_.ingest(detections, kind);
}

double Pipeline::block_center_time(long block_index, int block_frames) const {
  const long start = block_index * block_frames * cfg_.plan.hop;
  const long span =
      static_cast<long>(block_frames - 1) * cfg_.plan.hop + cfg_.plan.frame_length;
  return (static_cast<double>(start) + span / 2.0) / cfg_.plan.sample_rate;
}

std::vector<DetectionEvent> Pipeline::take_events() {
  std::vector<DetectionEvent> out;
  out.swap(events_);
  return out;
}

std::vector<DetectionEvent> run_pipeline(
    const PipelineConfig& config, const std::vector<std::vector<double>>& channels) {
  Pipeline pipeline(config);
  pipeline.push(channels);
  return pipeline.take_events();
}

void validate_wav_input(const PipelineConfig& config, const WavData& wav) {
  if (static_cast<int>(wav.channels.size()) != config.array.size()) {
    throw std::runtime_error("input has " + std::to_string(wav.channels.size()) +
                             " channels but the array has " +
                             std::to_string(config.array.size()));
  }
  if (wav.sample_rate != config.array.sample_rate) {
    throw std::runtime_error(
        "input sample rate does not match the array; resampling is not supported");
  }
}

std::vector<DetectionEvent> run_pipeline_on_wav(const PipelineConfig& config,
                                                const WavData& wav) {
  validate_wav_input(config, wav);
  return run_pipeline(config, wav.channels);
}

}  // namespace sonoloc
