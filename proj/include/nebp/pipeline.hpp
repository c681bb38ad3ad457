#pragma once

// Glue between the modules: a greedy nearest-neighbor baseline, full tracking
// runs over recorded frames, training-data extraction through the tracker
// hook, and the train/evaluate orchestration used by the command-line tool.

#include <memory>
#include <vector>

#include "nebp/bp.hpp"
#include "nebp/config.hpp"
#include "nebp/metrics.hpp"
#include "nebp/neural.hpp"
#include "nebp/simulator.hpp"

namespace nebp {

// --- greedy baseline ---------------------------------------------------------

struct GreedyConfig {
  double gate = 4.0;    // meters, center distance
  int confirm_hits = 2; // consecutive hits before reporting
  int max_misses = 3;   // coasting budget before deletion
  double dt = 0.5;

  void validate() const;
};

// Classical baseline: globally nearest pairs, measurement states taken
// verbatim, constant-velocity coasting.
class GreedyTracker {
 public:
  explicit GreedyTracker(GreedyConfig cfg);
  std::vector<TrackEstimate> step(const MeasurementFrame& frame);

 private:
  struct Track {
    std::uint64_t id = 0;
    KinematicState state;
    int hits = 0;
    int misses = 0;
    double score = 0.0;
  };
  GreedyConfig cfg_;
  std::vector<Track> tracks_;
  TrackIdAllocator ids_;
};

// --- tracking runs -----------------------------------------------------------

struct TrackingRun {
  std::vector<std::vector<TrackEstimate>> estimates;  // one list per frame
  std::vector<StepDiagnostics> diagnostics;           // populated when requested
};

// BP tracker over a frame sequence; a null enhancer runs plain BP.
TrackingRun run_tracking(const std::vector<MeasurementFrame>& frames,
                         const RunConfig& cfg,
                         std::shared_ptr<EnhancementSource> enhancer,
                         bool collect_diagnostics = false);

TrackingRun run_greedy(const std::vector<MeasurementFrame>& frames,
                       const GreedyConfig& cfg);

// Estimate lists flattened into the metric input form.
std::vector<TrackFrame> to_track_frames(
    const std::vector<std::vector<TrackEstimate>>& estimates);

MetricReport evaluate_run(const TrackingRun& run, const Scenario& scenario,
                          const MetricsConfig& metrics);

// --- dataset generation ------------------------------------------------------

struct GeneratedScenario {
  Scenario scenario;
  std::vector<MeasurementFrame> frames;
  std::vector<FrameLabels> labels;
};

// One deterministic scenario plus detector sweep for a given seed.
GeneratedScenario generate_dataset(const RunConfig& cfg, std::uint64_t seed);

// --- training ----------------------------------------------------------------

// Runs plain BP over the frames and records pair and false-alarm samples at
// every step with measurements. Pair labels come from aligning each legacy PO
// with the nearest truth object within the gate and comparing against the
// detector's measurement origins.
TrainingData record_training_data(const GeneratedScenario& data, const RunConfig& cfg,
                                  std::uint64_t tracker_seed);

struct TrainOutput {
  NeuralStack stack;
  std::vector<double> epoch_loss;
  double initial_loss = 0.0;  // before the first update, on the training set
  double final_loss = 0.0;
};

// Full pipeline: generate cfg.training.scenarios datasets at seeds
// cfg.seed, cfg.seed + 1, ..., record training data, run SGD.
TrainOutput train_pipeline(const RunConfig& cfg);

}  // namespace nebp
