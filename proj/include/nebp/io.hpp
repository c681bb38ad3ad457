#pragma once

// Bit-exact file formats: line-delimited text records for scenarios, frames,
// labels, tracks, loss curves, and metric tables, plus a versioned binary
// container for network weights. Doubles round-trip exactly through the
// shortest-representation conversion.

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "nebp/bp.hpp"
#include "nebp/metrics.hpp"
#include "nebp/neural.hpp"
#include "nebp/simulator.hpp"
#include "nebp/types.hpp"

namespace nebp {

// Record numbering counts non-header lines from one.
struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::size_t record_index)
      : std::runtime_error(what + " (record " + std::to_string(record_index) + ")"),
        record(record_index) {}
  std::size_t record = 0;
};

std::string format_double(double v);             // shortest exact form
double parse_double(const std::string& token);   // throws std::invalid_argument

// --- scenario files (#nebp-scenario v1) ------------------------------------
// Persists duration, step period, ego track, and full trajectories; other
// generation parameters are not needed downstream and reset to defaults.
void write_scenario(std::ostream& os, const Scenario& s);
Scenario read_scenario(std::istream& is);

// --- measurement frame files (#nebp-frames v1) ------------------------------
void write_frames(std::ostream& os, const std::vector<MeasurementFrame>& frames);
std::vector<MeasurementFrame> read_frames(std::istream& is);

// --- label files (#nebp-labels v1) ------------------------------------------
void write_labels(std::ostream& os, const std::vector<FrameLabels>& labels);
std::vector<FrameLabels> read_labels(std::istream& is);

// --- track files (#nebp-tracks v1) ------------------------------------------
void write_tracks(std::ostream& os, const std::vector<std::vector<TrackEstimate>>& tracks);
std::vector<std::vector<TrackEstimate>> read_tracks(std::istream& is);

// --- loss curves (#nebp-loss v1) ---------------------------------------------
void write_loss_curve(std::ostream& os, const std::vector<double>& epoch_loss);
std::vector<double> read_loss_curve(std::istream& is);

// --- metric tables (#nebp-metrics v1) ----------------------------------------
struct MetricRow {
  std::string name;  // no whitespace
  MetricReport report;
};
void write_metric_table(std::ostream& os, const std::vector<MetricRow>& rows);
// Aligned human-readable rendering of the same rows.
std::string render_metric_table(const std::vector<MetricRow>& rows);

// --- weight files ------------------------------------------------------------
// Binary, little-endian: magic "NEBPW\0", u16 major, u16 minor, u8 identity,
// f64 u, u32 network count, then per network a dimension list and row-major
// weights plus biases per layer. Readers reject a different major version and
// any non-finite parameter.
inline constexpr std::uint16_t kWeightsMajor = 1;
inline constexpr std::uint16_t kWeightsMinor = 0;

void save_weights(std::ostream& os, const NeuralStack& stack);
NeuralStack load_weights(std::istream& is);

// File-path conveniences; throw InputError when the file cannot be opened.
void save_weights_file(const std::string& path, const NeuralStack& stack);
NeuralStack load_weights_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace nebp
