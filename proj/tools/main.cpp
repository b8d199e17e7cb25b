#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "sonoloc/evaluate.hpp"
#include "sonoloc/geometry.hpp"
#include "sonoloc/pipeline.hpp"
#include "sonoloc/simulate.hpp"
#include "sonoloc/wav.hpp"

namespace {

// SONOLOC_LOG=quiet|info|debug (default info). Logs go to stderr so data
// written to stdout stays machine-readable.
int verbosity() {
  static const int level = [] {
    const char* env = std::getenv("SONOLOC_LOG");
    if (env == nullptr) return 1;
    const std::string value(env);
    if (value == "quiet" || value == "0") return 0;
    if (value == "debug" || value == "2") return 2;
    return 1;
  }();
  return level;
}

void log_info(const std::string& text) {
  if (verbosity() >= 1) std::cerr << text;
}

void log_debug(const std::string& text) {
  if (verbosity() >= 2) std::cerr << text;
}

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

sonoloc::PipelineConfig load_config_or_default(const std::string& path, bool strict) {
  sonoloc::PipelineConfig config;
  if (!path.empty()) {
    config = sonoloc::load_pipeline_config_file(path);
    log_info("config: " + path + "\n");
  } else {
    log_info("config: built-in defaults\n");
  }
  if (strict) config.strict_mode = true;
  log_info(sonoloc::describe_config(config));
  return config;
}

void run_locate(const std::string& config_path, const std::string& input_path,
                const std::string& output_path, const std::string& energy_path,
                const std::string& correlation_path, bool strict) {
  const sonoloc::PipelineConfig config = load_config_or_default(config_path, strict);
  const sonoloc::WavData wav = sonoloc::read_wav(input_path);
  sonoloc::validate_wav_input(config, wav);
  log_info("input: " + input_path + " (" + std::to_string(wav.channels.size()) +
           " channels, " + std::to_string(wav.frames()) + " samples)\n");

  sonoloc::Pipeline pipeline(config);

  std::ofstream energy_file;
  if (!energy_path.empty()) {
    energy_file.open(energy_path);
    if (!energy_file) throw std::runtime_error("cannot write file: " + energy_path);
    energy_file << "estimator,block,region,energy\n";
    pipeline.energy_sink = [&](const sonoloc::CorrelationSet& set,
                               const std::vector<double>& energies) {
      for (std::size_t region = 0; region < energies.size(); ++region) {
        energy_file << sonoloc::to_string(set.kind) << ',' << set.block_index << ','
                    << region << ',' << energies[region] << '\n';
      }
    };
  }
  std::ofstream correlation_file;
  if (!correlation_path.empty()) {
    correlation_file.open(correlation_path);
    if (!correlation_file) {
      throw std::runtime_error("cannot write file: " + correlation_path);
    }
    correlation_file << "estimator,block,pair,lag,value\n";
    pipeline.correlation_sink = [&](const sonoloc::CorrelationSet& set) {
      for (int pair = 0; pair < set.pair_count(); ++pair) {
        for (int lag = 0; lag < set.length(); ++lag) {
          correlation_file << sonoloc::to_string(set.kind) << ',' << set.block_index
                           << ',' << pair << ',' << lag << ',' << set.r[pair][lag]
                           << '\n';
        }
      }
    };
  }

  pipeline.push(wav.channels);
  const std::vector<sonoloc::DetectionEvent> events = pipeline.take_events();
  write_text(output_path, sonoloc::events_to_jsonl(events));
  log_info("processed " + std::to_string(pipeline.frames_processed()) + " frames, " +
           std::to_string(events.size()) + " events\n");
}

void run_simulate(const std::string& scene_path, const std::string& array_path,
                  const std::string& wav_path, const std::string& truth_path,
                  bool seed_given, std::uint64_t seed) {
  sonoloc::Scene scene = sonoloc::load_scene_file(scene_path);
  if (seed_given) scene.seed = seed;
  const sonoloc::MicrophoneArray array = array_path.empty()
                                             ? sonoloc::MicrophoneArray::prism()
                                             : sonoloc::load_array_file(array_path);
  log_info("scene: " + scene_path + " (" + std::to_string(scene.sources.size()) +
           " sources, " + std::to_string(scene.duration_s) + " s, seed " +
           std::to_string(scene.seed) + ")\n");

  const sonoloc::SynthesisResult result = sonoloc::synthesize(scene, array);
  sonoloc::WavData wav;
  wav.sample_rate = array.sample_rate;
  wav.channels = result.channels;
  sonoloc::write_wav(wav_path, wav);
  log_info("wrote " + wav_path + " (" + std::to_string(wav.frames()) + " samples x " +
           std::to_string(wav.channels.size()) + " channels)\n");
  if (!truth_path.empty()) {
    write_text(truth_path, sonoloc::truth_to_jsonl(result.truth));
    log_info("wrote " + truth_path + " (" + std::to_string(result.truth.size()) +
             " records)\n");
  }
}

void run_evaluate(const std::string& events_path, const std::string& truth_path,
                  double threshold_deg, double window_s, bool as_json) {
  const std::vector<sonoloc::DetectionEvent> events =
      sonoloc::events_from_jsonl(read_text(events_path));
  const std::vector<sonoloc::GroundTruthRecord> truth =
      sonoloc::truth_from_jsonl(read_text(truth_path));
  sonoloc::EvaluationOptions options;
  options.match_threshold_deg = threshold_deg;
  if (window_s > 0.0) options.time_window_s = window_s;
  const sonoloc::EvaluationReport report = sonoloc::evaluate(events, truth, options);
  std::cout << (as_json ? report.to_json() + "\n" : report.summary());
}

void run_plot_data(const std::string& events_path, const std::string& kind_name,
                   const std::string& output_path, double threshold) {
  sonoloc::PlotKind kind;
  if (kind_name == "azimuth") {
    kind = sonoloc::PlotKind::kAzimuth;
  } else if (kind_name == "elevation") {
    kind = sonoloc::PlotKind::kElevation;
  } else if (kind_name == "probability-map") {
    kind = sonoloc::PlotKind::kProbabilityMap;
  } else {
    throw std::runtime_error("unknown plot kind: " + kind_name);
  }
  const std::vector<sonoloc::DetectionEvent> events =
      sonoloc::events_from_jsonl(read_text(events_path));
  write_text(output_path, sonoloc::emit_plot_data(events, kind, threshold));
}

void run_grid_dump(int level, const std::string& array_path,
                   const std::string& grid_csv, const std::string& table_csv,
                   const std::string& table_bin) {
  const sonoloc::SphereGrid grid = sonoloc::build_grid(level);
  std::cout << "level " << level << ": " << grid.points.size() << " points, "
            << grid.triangles.size() << " triangles\n";
  if (!grid_csv.empty()) {
    sonoloc::write_grid_csv(grid, grid_csv);
    log_info("wrote " + grid_csv + "\n");
  }
  if (!table_csv.empty() || !table_bin.empty()) {
    const sonoloc::MicrophoneArray array =
        array_path.empty() ? sonoloc::MicrophoneArray::prism()
                           : sonoloc::load_array_file(array_path);
    const sonoloc::TdoaTable table = sonoloc::build_tdoa_table(array, grid);
    std::cout << "delay table: " << array.size() << " microphones, max lag "
              << table.max_lag << " samples\n";
    if (!table_csv.empty()) {
      sonoloc::write_tdoa_csv(table, table_csv);
      log_info("wrote " + table_csv + "\n");
    }
    if (!table_bin.empty()) {
      sonoloc::write_tdoa_binary(table, table_bin);
      log_info("wrote " + table_bin + "\n");
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sonoloc: steered-beamformer sound source localization"};
  app.require_subcommand(1);

  // locate
  std::string locate_config, locate_input, locate_output = "-";
  std::string locate_energy, locate_correlations;
  bool locate_strict = false;
  CLI::App* locate = app.add_subcommand("locate", "Localize sources in a WAV file");
  locate->add_option("--config", locate_config, "Pipeline config JSON");
  locate->add_option("--input", locate_input, "Multichannel WAV input")->required();
  locate->add_option("--output", locate_output, "Events JSONL ('-' for stdout)");
  locate->add_option("--dump-energy", locate_energy, "Write per-block energy maps CSV");
  locate->add_option("--dump-correlations", locate_correlations,
                     "Write per-block correlations CSV");
  locate->add_flag("--strict", locate_strict,
                   "Rectangular window, no spread, no lag clearing");
  locate->callback([&] {
    run_locate(locate_config, locate_input, locate_output, locate_energy,
               locate_correlations, locate_strict);
  });

  // simulate
  std::string sim_scene, sim_array, sim_wav, sim_truth;
  std::uint64_t sim_seed = 0;
  CLI::App* simulate = app.add_subcommand("simulate", "Render a scene to a WAV file");
  simulate->add_option("--scene", sim_scene, "Scene JSON")->required();
  simulate->add_option("--array", sim_array, "Array config JSON (default: prism)");
  simulate->add_option("--out-wav", sim_wav, "Output WAV path")->required();
  simulate->add_option("--out-truth", sim_truth, "Output ground-truth JSONL");
  CLI::Option* seed_opt =
      simulate->add_option("--seed", sim_seed, "Override the scene seed");
  simulate->callback([&] {
    run_simulate(sim_scene, sim_array, sim_wav, sim_truth, seed_opt->count() > 0,
                 sim_seed);
  });

  // evaluate
  std::string eval_events, eval_truth;
  double eval_threshold = 10.0, eval_window = 0.0;
  bool eval_json = false;
  CLI::App* evaluate = app.add_subcommand("evaluate", "Score events against ground truth");
  evaluate->add_option("--events", eval_events, "Events JSONL")->required();
  evaluate->add_option("--truth", eval_truth, "Ground-truth JSONL")->required();
  evaluate->add_option("--threshold-deg", eval_threshold, "Angular match threshold");
  evaluate->add_option("--window-s", eval_window, "Time matching window");
  evaluate->add_flag("--json", eval_json, "Emit the report as JSON");
  evaluate->callback([&] {
    run_evaluate(eval_events, eval_truth, eval_threshold, eval_window, eval_json);
  });

  // plot-data
  std::string plot_events, plot_kind = "azimuth", plot_output = "-";
  double plot_threshold = 0.6;
  CLI::App* plot = app.add_subcommand("plot-data", "Extract CSV series from events");
  plot->add_option("--events", plot_events, "Events JSONL")->required();
  plot->add_option("--kind", plot_kind, "azimuth | elevation | probability-map");
  plot->add_option("--out", plot_output, "Output CSV ('-' for stdout)");
  plot->add_option("--threshold", plot_threshold, "Probability cutoff");
  plot->callback(
      [&] { run_plot_data(plot_events, plot_kind, plot_output, plot_threshold); });

  // grid dump
  CLI::App* grid = app.add_subcommand("grid", "Direction grid utilities");
  grid->require_subcommand(1);
  int grid_level = 4;
  std::string grid_array, grid_csv, grid_table_csv, grid_table_bin;
  CLI::App* dump = grid->add_subcommand("dump", "Print grid stats and export tables");
  dump->add_option("--level", grid_level, "Subdivision level (0..6)");
  dump->add_option("--array", grid_array, "Array config JSON (default: prism)");
  dump->add_option("--out-grid", grid_csv, "Write grid points CSV");
  dump->add_option("--out-table", grid_table_csv, "Write delay table CSV");
  dump->add_option("--out-binary", grid_table_bin, "Write delay table binary");
  dump->callback([&] {
    run_grid_dump(grid_level, grid_array, grid_csv, grid_table_csv, grid_table_bin);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  log_debug("done\n");
  return 0;
}
