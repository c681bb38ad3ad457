#pragma once

// Tracking evaluation: GOSPA with its localization/missed/false decomposition
// and a simplified AMOTA/AMOTP recall sweep, both driven by one optimal
// assignment solver.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "nebp/simulator.hpp"
#include "nebp/types.hpp"

namespace nebp {

struct UndefinedMetric : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Minimum-cost full matching of min(rows, cols) pairs; row_to_col[i] = -1 for
// unmatched rows. Costs must be finite.
struct AssignmentResult {
  std::vector<int> row_to_col;
  double cost = 0.0;
};
AssignmentResult solve_assignment(const Matrix& cost);

struct TrackPoint {
  std::uint64_t track_id = 0;
  std::array<double, 2> pos{};
  double score = 0.0;
};
using TrackFrame = std::vector<TrackPoint>;

struct TruthPoint {
  std::uint64_t truth_id = 0;
  std::array<double, 2> pos{};
};
using TruthFrame = std::vector<TruthPoint>;

// Components carry the p-th powers; total applies the 1/p root.
struct GospaStep {
  double localization = 0.0;
  double missed = 0.0;
  double false_alarm = 0.0;
  double total = 0.0;
};

struct GospaReport {
  std::vector<GospaStep> per_step;
  GospaStep mean;
  double cutoff = 0.0;
  double order = 1.0;
};

// Alpha fixed at 2: unmatched entries cost c^p / 2 each.
GospaStep gospa_step(const std::vector<std::array<double, 2>>& estimates,
                     const std::vector<std::array<double, 2>>& truth, double c, double p);

GospaReport gospa(const std::vector<TrackFrame>& tracks,
                  const std::vector<TruthFrame>& truth, double c, double p);

struct AmotaConfig {
  int recall_levels = 40;
  double match_gate = 2.0;  // meters, 2D center distance

  void validate() const;
};

struct AmotaReport {
  double amota = 0.0;
  double amotp = 0.0;            // meters; gate value at unachievable levels
  std::vector<double> motar;     // one entry per recall level
  std::vector<double> recall_levels;
};

// Sweeps score thresholds over evenly spaced recall levels. MOTAR at level r
// is clamped to [0, 1]:
//   1 - (IDS + FP + FN - (1 - r) P) / (r P)
// with P the total number of truth object-steps. Throws UndefinedMetric when
// truth is empty.
AmotaReport amota_simplified(const std::vector<TrackFrame>& tracks,
                             const std::vector<TruthFrame>& truth,
                             const AmotaConfig& cfg = {});

// Identity switches with every output included (no score threshold).
std::size_t count_id_switches(const std::vector<TrackFrame>& tracks,
                              const std::vector<TruthFrame>& truth, double gate);

struct MetricReport {
  GospaReport gospa;
  double amota = 0.0;
  double amotp = 0.0;
  std::size_t id_switches = 0;
};

MetricReport evaluate_tracking(const std::vector<TrackFrame>& tracks,
                               const std::vector<TruthFrame>& truth, double gospa_c,
                               double gospa_p, const AmotaConfig& cfg = {});

// Ground-truth positions per step for metric evaluation.
std::vector<TruthFrame> truth_frames(const Scenario& scenario);

}  // namespace nebp
