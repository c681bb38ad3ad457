#pragma once

// Run configuration: one JSON document covering model parameters, tracker
// settings, scenario generation, detector behavior, metrics, and training.
// Parsing is strict: unknown keys are rejected so typos cannot silently fall
// back to defaults.

#include <cstdint>
#include <string>

#include "nebp/bp.hpp"
#include "nebp/metrics.hpp"
#include "nebp/neural.hpp"
#include "nebp/simulator.hpp"

namespace nebp {

struct MetricsConfig {
  double gospa_cutoff = 5.0;
  double gospa_order = 1.0;
  AmotaConfig amota;

  void validate() const;
};

struct TrainingConfig {
  OptimizerConfig optimizer;
  int scenarios = 50;      // generated training scenarios
  double far_weight = 0.5; // u in the false-alarm loss
  double align_gate = 2.0; // meters, PO-to-truth alignment for labels
  // Ungated pairs sampled per recorded frame. Gating leaves the pair labels
  // nearly all positive; these easy negatives keep the affinity boundary
  // anchored instead of letting scores inflate without opposition.
  int offgate_pairs = 8;

  void validate() const;
};

struct RunConfig {
  std::uint64_t seed = 1;
  bool neural = false;
  std::string weights_path;

  MotionModel motion;
  MeasurementModel measurement;
  double noise_std_pos = 0.4;
  double noise_std_vel = 0.4;

  TrackerConfig tracker;
  ScenarioConfig scenario;  // step period mirrors motion.dt
  DetectorConfig detector;
  MetricsConfig metrics;
  TrainingConfig training;

  // Builds the measurement covariance from the stds, synchronizes derived
  // fields, and validates every section.
  void finalize();
};

// Strict JSON parsing; throws ParseError for syntax errors and InputError for
// unknown keys or out-of-range values. The result is already finalized.
RunConfig parse_config_text(const std::string& json_text);
RunConfig load_config_file(const std::string& path);

// Default configuration rendered as a JSON document.
std::string default_config_text();

}  // namespace nebp
