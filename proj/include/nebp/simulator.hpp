#pragma once

// Synthetic data source: ground-truth trajectories under the
// constant-acceleration model plus a detector emulator producing noisy
// measurements, appearance features, clutter, and the labels used for
// training and evaluation.

#include <array>
#include <cstdint>
#include <vector>

#include "nebp/models.hpp"
#include "nebp/random.hpp"
#include "nebp/types.hpp"

namespace nebp {

struct ScenarioConfig {
  int duration = 100;             // steps
  double dt = 0.5;                // seconds per step
  std::size_t initial_objects = 5;
  double birth_rate = 0.0;        // Poisson mean of later births per step
  double survival_prob = 1.0;     // per-step survival of true objects
  double spawn_half_width = 40.0; // birth positions uniform about the ego
  double speed_max = 6.0;         // per-axis initial speed bound
  double accel_noise_std = 0.3;   // maneuver noise of true motion
  double velocity_decay = 0.995;  // per-step velocity persistence; 1 never slows
  double bound_half_width = 48.0; // reflecting boundary about the ego; 0 disables
  int num_classes = 3;
  std::array<double, kBoxDim> box_mean{4.5, 2.0, 1.6};
  double box_std = 0.5;             // per-object box variation about the mean
  double class_center_std = 1.0;    // appearance class centers
  double within_class_std = 0.5;    // per-object latent spread about its center
  std::array<double, 2> ego_start{0.0, 0.0};
  std::array<double, 2> ego_velocity{0.0, 0.0};

  void validate() const;
};

struct Trajectory {
  std::uint64_t truth_id = 0;
  int birth_step = 0;
  int death_step = 0;                  // exclusive
  std::vector<KinematicState> states;  // one per step in [birth, death)
  std::array<double, kBoxDim> box{};
  int class_label = 0;
  std::vector<double> shape_latent;  // 64
  std::vector<double> heat_latent;   // 32

  bool alive(int step) const { return step >= birth_step && step < death_step; }
  const KinematicState& state_at(int step) const {
    return states[static_cast<std::size_t>(step - birth_step)];
  }
};

struct Scenario {
  ScenarioConfig cfg;
  std::vector<Trajectory> trajectories;
  std::vector<std::array<double, 2>> ego;  // one per step

  std::size_t live_count(int step) const;
};

// Deterministic given the stream state; objects born at step 0 and by a
// Poisson stream afterwards, dying by per-step survival draws.
Scenario generate_scenario(const ScenarioConfig& cfg, RngStream& rng);

// Detector behavior around the measurement model: appearance noise, score
// distributions, and clutter feature statistics.
struct DetectorConfig {
  double box_noise_std = 0.1;
  double feature_noise_std = 0.3;     // on shape/heat of real detections
  double score_true_a = 8.0, score_true_b = 2.0;    // Beta for real detections
  double score_false_a = 2.0, score_false_b = 4.0;  // Beta for clutter
  double clutter_feature_std = 1.3;   // clutter shape/heat scale
  std::array<double, 2> clutter_box_range{0.5, 6.0};
  bool with_features = true;          // emit shape/heat vectors at all

  void validate() const;
};

// Per-measurement origin: the truth id of the generating object, or -1 for
// clutter. Indices align with the frame's measurement order.
struct FrameLabels {
  std::vector<std::int64_t> source;
};

// One detector sweep. Real detections appear with probability p_d carrying
// H x + noise; clutter is Poisson(mu_fa) uniform over the ROI and velocity
// box. The measurement order is shuffled so position in the frame carries no
// information.
MeasurementFrame emulate_detector(const Scenario& scenario, int step,
                                  const MeasurementModel& model,
                                  const DetectorConfig& det, RngStream& rng,
                                  FrameLabels* labels = nullptr);

}  // namespace nebp
