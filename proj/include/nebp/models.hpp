#pragma once

// Statistical models behind the tracker: constant-acceleration motion with
// survival, linear-Gaussian measurements, uniform clutter/birth densities
// over the region of interest, and the likelihood-ratio factors evaluated
// per association hypothesis.

#include <array>
#include <cstddef>

#include "nebp/random.hpp"
#include "nebp/types.hpp"

namespace nebp {

struct MotionModel {
  double dt = 0.5;                 // seconds per step
  double accel_noise_std = 0.5;    // white acceleration-increment intensity
  double survival_prob = 0.99;     // p_s

  void validate() const;
};

// 4x4 symmetric positive definite covariance, row-major.
using Cov4 = std::array<double, 16>;

Cov4 diag_cov4(double pos_std, double vel_std);

struct MeasurementModel {
  double detection_prob = 0.9;     // p_d
  Cov4 noise_cov = diag_cov4(0.4, 0.4);
  double clutter_mean = 10.0;      // mu_FA, Poisson
  double birth_mean = 0.5;         // mu_u, Poisson
  double roi_half_width = 54.0;    // meters, about the ego position
  double clutter_vmax = 15.0;      // clutter velocity support [-vmax, vmax]^2
  double birth_accel_std = 0.5;    // zero-mean acceleration prior of births

  // Derived at finalize(); the inverse Cholesky feeds the likelihood kernels.
  std::array<double, 10> chol_lower{};      // packed lower triangle of L
  std::array<double, 10> inv_chol_lower{};  // packed lower triangle of L^-1
  double log_gauss_norm = 0.0;              // -0.5 log((2pi)^4 det Sigma)
  double log_posvel_density = 0.0;          // log of uniform ROI x velocity-box value
  double log_clutter_density = 0.0;         // log f_FA (same support as above)

  void finalize();
  void validate() const;

  bool in_roi(double x, double y, const std::array<double, 2>& ego) const {
    return x >= ego[0] - roi_half_width && x <= ego[0] + roi_half_width &&
           y >= ego[1] - roi_half_width && y <= ego[1] + roi_half_width;
  }
  bool in_velocity_box(double vx, double vy) const {
    return vx >= -clutter_vmax && vx <= clutter_vmax && vy >= -clutter_vmax &&
           vy <= clutter_vmax;
  }
};

// One step of the constant-acceleration model with white acceleration
// increments of std accel_noise_std * sqrt(dt).
KinematicState sample_transition(const KinematicState& state, const MotionModel& model,
                                 RngStream& rng);

// Whole-cloud propagation through the kernels; rng feeds the acceleration
// increments in particle order (x noise then y noise per particle).
void propagate_particles(ParticleSet& particles, const MotionModel& model,
                         RngStream& rng);

// Gaussian density of z about H x, H selecting (position, velocity).
double measurement_density(const std::array<double, 4>& z, const KinematicState& x,
                           const MeasurementModel& model);
double log_measurement_density(const std::array<double, 4>& z, const KinematicState& x,
                               const MeasurementModel& model);

// Batch form: out[i] = log f(z | x_i) over a particle set.
void log_measurement_density_batch(const std::array<double, 4>& z,
                                   const ParticleSet& particles,
                                   const MeasurementModel& model, double* out);

// Legacy-PO likelihood ratio q(x, r, a; z_frame).
//   r=1, a=j>0 : p_d f(z_j|x) / (mu_FA f_FA(z_j))
//   r=1, a=0   : 1 - p_d
//   r=0        : 1 if a=0 else 0
// a is 1-based over the frame's measurements; throws InputError out of range.
double legacy_likelihood_ratio(const KinematicState& x, bool exists, int a,
                               const MeasurementFrame& frame,
                               const MeasurementModel& model);

// New-PO likelihood ratio v(x, r, b; z).
//   r=1, b=0   : mu_u f_u(x) f(z|x) / (mu_FA f_FA(z))
//   r=1, b!=0  : 0
//   r=0        : 1 (the dummy-density mass; its constant is absorbed by
//                normalization)
// b is 1-based over legacy POs; num_legacy bounds it.
double new_po_likelihood_ratio(const KinematicState& x, bool exists, int b,
                               const Measurement& z, const MeasurementModel& model,
                               const std::array<double, 2>& ego, int num_legacy);

// log f_u(x): uniform position over the ROI about ego, uniform velocity over
// the clutter box, Gaussian zero-mean acceleration. -inf outside support.
double log_birth_density(const KinematicState& x, const MeasurementModel& model,
                         const std::array<double, 2>& ego);

// Squared Mahalanobis distance of z from H x under the measurement noise.
double mahalanobis_sq(const std::array<double, 4>& z, const KinematicState& x,
                      const MeasurementModel& model);

// Gating metric for one predicted cloud: Mahalanobis distance about the
// weighted mean under the innovation covariance (empirical measurement-space
// covariance of the particles plus the noise covariance). Gating under the
// noise alone starves dispersed-but-correct POs of their measurements; this
// keeps the threshold's chi-square meaning as the cloud spreads. Weights are
// assumed normalized.
struct GateMetric {
  std::array<double, 4> center{};           // H applied to the weighted mean
  std::array<double, 10> inv_chol_lower{};  // packed L^-1 of the innovation cov
  double distance_sq(const std::array<double, 4>& z) const;
};

GateMetric make_gate_metric(const ParticleSet& particles, const MeasurementModel& model);

// 99.9% chi-square gate, 4 dof.
inline constexpr double kGateSqDefault = 13.8;

}  // namespace nebp
