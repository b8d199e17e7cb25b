#pragma once

#include <string>
#include <vector>

#include "sonoloc/pipeline.hpp"
#include "sonoloc/simulate.hpp"

namespace sonoloc {

std::string truth_to_jsonl(const std::vector<GroundTruthRecord>& truth);
std::vector<GroundTruthRecord> truth_from_jsonl(const std::string& text);

struct EvaluationOptions {
  double match_threshold_deg = 10.0;
  // Events within this much of a truth timestamp may match it; defaults to
  // one medium-term block.
  double time_window_s = 20.0 * 512.0 / 48000.0;
};

struct SourceMetrics {
  int source_id = 0;
  long truth_records = 0;
  long detected = 0;
  double detection_rate = 0.0;
};

struct EvaluationReport {
  std::vector<SourceMetrics> per_source;
  long truth_records = 0;
  long detected_records = 0;
  double detection_rate = 0.0;   // pooled over sources
  double median_error_deg = 0.0; // over detected truth records
  double p95_error_deg = 0.0;
  long total_events = 0;
  long matched_events = 0;
  double false_event_rate = 0.0; // events matching no truth record

  std::string to_json() const;
  std::string summary() const;
};

// Scores emitted events against simulator ground truth: a truth record
// counts as detected when some event close enough in time lies within the
// angular threshold, and an event is false when it matches no truth record.
EvaluationReport evaluate(const std::vector<DetectionEvent>& events,
                          const std::vector<GroundTruthRecord>& truth,
                          const EvaluationOptions& options = {});

enum class PlotKind { kAzimuth, kElevation, kProbabilityMap };

// CSV series for plotting: azimuth/elevation keep events at or above the
// probability threshold, the probability map keeps everything.
std::string emit_plot_data(const std::vector<DetectionEvent>& events, PlotKind kind,
                           double probability_threshold = 0.6);

}  // namespace sonoloc
