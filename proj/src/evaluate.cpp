#include "sonoloc/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace sonoloc {
namespace {

double percentile(std::vector<double> values, double fraction) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t index = static_cast<std::size_t>(std::min(
      values.size() - 1.0, std::max(0.0, std::ceil(fraction * values.size()) - 1.0)));
  return values[index];
}

std::string format_csv_row(std::initializer_list<double> values) {
  std::string row;
  char buf[64];
  for (double v : values) {
    if (!row.empty()) row += ',';
    std::snprintf(buf, sizeof buf, "%.6f", v);
    row += buf;
  }
  row += '\n';
  return row;
}

}  // namespace

std::string truth_to_jsonl(const std::vector<GroundTruthRecord>& truth) {
  std::string out;
  for (const GroundTruthRecord& r : truth) {
    const nlohmann::json line = {{"time_s", r.time_s},
                                 {"source_id", r.source_id},
                                 {"azimuth_deg", azimuth_deg(r.direction)},
                                 {"elevation_deg", elevation_deg(r.direction)}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::vector<GroundTruthRecord> truth_from_jsonl(const std::string& text) {
  std::vector<GroundTruthRecord> truth;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(std::string("bad ground-truth line: ") + e.what());
    }
    GroundTruthRecord record;
    record.time_s = doc.at("time_s").get<double>();
    record.source_id = doc.at("source_id").get<int>();
    record.direction = direction_from_angles(doc.at("azimuth_deg").get<double>(),
                                             doc.at("elevation_deg").get<double>());
    truth.push_back(record);
  }
  return truth;
}

EvaluationReport evaluate(const std::vector<DetectionEvent>& events,
                          const std::vector<GroundTruthRecord>& truth,
                          const EvaluationOptions& options) {
  if (truth.empty()) {
    throw std::runtime_error("evaluation needs at least one ground-truth record");
  }
  if (options.match_threshold_deg <= 0.0 || options.time_window_s < 0.0) {
    throw std::runtime_error("evaluation thresholds must be positive");
  }

  std::vector<Vec3> event_dirs(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    event_dirs[i] =
        direction_from_angles(events[i].azimuth_deg, events[i].elevation_deg);
  }

  EvaluationReport report;
  report.truth_records = static_cast<long>(truth.size());
  report.total_events = static_cast<long>(events.size());

  std::map<int, SourceMetrics> per_source;
  std::vector<bool> event_matched(events.size(), false);
  std::vector<double> errors;

  for (const GroundTruthRecord& record : truth) {
    SourceMetrics& metrics = per_source[record.source_id];
    metrics.source_id = record.source_id;
    ++metrics.truth_records;

    double best = -1.0;
    for (std::size_t i = 0; i < events.size(); ++i) {
      if (std::abs(events[i].time_s - record.time_s) > options.time_window_s) continue;
      const double error = angular_distance_deg(event_dirs[i], record.direction);
      if (error <= options.match_threshold_deg) event_matched[i] = true;
      if (best < 0.0 || error < best) best = error;
    }
    if (best >= 0.0 && best <= options.match_threshold_deg) {
      ++metrics.detected;
      ++report.detected_records;
      errors.push_back(best);
    }
  }

  for (auto& [id, metrics] : per_source) {
    metrics.detection_rate =
        static_cast<double>(metrics.detected) / static_cast<double>(metrics.truth_records);
    report.per_source.push_back(metrics);
  }
  report.detection_rate =
      static_cast<double>(report.detected_records) / static_cast<double>(truth.size());
  report.median_error_deg = percentile(errors, 0.5);
  report.p95_error_deg = percentile(errors, 0.95);

  report.matched_events = static_cast<long>(
      std::count(event_matched.begin(), event_matched.end(), true));
  report.false_event_rate =
      events.empty() ? 0.0
                     : static_cast<double>(report.total_events - report.matched_events) /
                           static_cast<double>(report.total_events);
  return report;
}

std::string EvaluationReport::to_json() const {
  nlohmann::json doc = {{"truth_records", truth_records},
                        {"detected_records", detected_records},
                        {"detection_rate", detection_rate},
                        {"median_error_deg", median_error_deg},
                        {"p95_error_deg", p95_error_deg},
                        {"total_events", total_events},
                        {"matched_events", matched_events},
                        {"false_event_rate", false_event_rate}};
  nlohmann::json sources = nlohmann::json::array();
  for (const SourceMetrics& m : per_source) {
    sources.push_back({{"source_id", m.source_id},
                       {"truth_records", m.truth_records},
                       {"detected", m.detected},
                       {"detection_rate", m.detection_rate}});
  }
  doc["per_source"] = sources;
  return doc.dump(2);
}

std::string EvaluationReport::summary() const {
  std::ostringstream out;
  out << "truth records: " << truth_records << ", detected: " << detected_records
      << " (" << 100.0 * detection_rate << "%)\n";
  out << "angular error: median " << median_error_deg << " deg, p95 " << p95_error_deg
      << " deg\n";
  out << "events: " << total_events << ", unmatched: " << (total_events - matched_events)
      << " (" << 100.0 * false_event_rate << "%)\n";
  for (const SourceMetrics& m : per_source) {
    out << "  source " << m.source_id << ": " << m.detected << "/" << m.truth_records
        << " (" << 100.0 * m.detection_rate << "%)\n";
  }
  return out.str();
}

std::string emit_plot_data(const std::vector<DetectionEvent>& events, PlotKind kind,
                           double probability_threshold) {
  std::string out;
  switch (kind) {
    case PlotKind::kAzimuth:
      out = "time_s,azimuth_deg,probability\n";
      for (const DetectionEvent& e : events) {
        if (e.probability < probability_threshold) continue;
        out += format_csv_row({e.time_s, e.azimuth_deg, e.probability});
      }
      break;
    case PlotKind::kElevation:
      out = "time_s,elevation_deg,probability\n";
      for (const DetectionEvent& e : events) {
        if (e.probability < probability_threshold) continue;
        out += format_csv_row({e.time_s, e.elevation_deg, e.probability});
      }
      break;
    case PlotKind::kProbabilityMap:
      out = "time_s,azimuth_deg,elevation_deg,probability\n";
      for (const DetectionEvent& e : events) {
        out += format_csv_row({e.time_s, e.azimuth_deg, e.elevation_deg, e.probability});
      }
      break;
  }
  return out;
}

}  // namespace sonoloc
