#include "nebp/models.hpp"

#include <cmath>
#include <limits>

#include "nebp/kernels.hpp"

namespace nebp {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Cholesky of a 4x4 SPD matrix, packed lower triangle
// [l00, l10, l11, l20, l21, l22, l30, l31, l32, l33].
std::array<double, 10> cholesky4(const Cov4& m) {
  double a[4][4];
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) a[r][c] = m[static_cast<std::size_t>(r) * 4 + c];

  double l[4][4] = {};
  for (int c = 0; c < 4; ++c) {
    double d = a[c][c];
    for (int k = 0; k < c; ++k) d -= l[c][k] * l[c][k];
    if (!(d > 0.0)) throw InputError("measurement covariance is not positive definite");
    l[c][c] = std::sqrt(d);
    for (int r = c + 1; r < 4; ++r) {
      double s = a[r][c];
      for (int k = 0; k < c; ++k) s -= l[r][k] * l[c][k];
      l[r][c] = s / l[c][c];
    }
  }
  return {l[0][0], l[1][0], l[1][1], l[2][0], l[2][1],
          l[2][2], l[3][0], l[3][1], l[3][2], l[3][3]};
}

// Inverse of a packed lower-triangular factor, forward substitution per column.
std::array<double, 10> invert_lower4(const std::array<double, 10>& p) {
  const double l[4][4] = {{p[0], 0, 0, 0},
                          {p[1], p[2], 0, 0},
                          {p[3], p[4], p[5], 0},
                          {p[6], p[7], p[8], p[9]}};
  double inv[4][4] = {};
  for (int c = 0; c < 4; ++c) {
    inv[c][c] = 1.0 / l[c][c];
    for (int r = c + 1; r < 4; ++r) {
      double s = 0.0;
      for (int k = c; k < r; ++k) s += l[r][k] * inv[k][c];
      inv[r][c] = -s / l[r][r];
    }
  }
  return {inv[0][0], inv[1][0], inv[1][1], inv[2][0], inv[2][1],
          inv[2][2], inv[3][0], inv[3][1], inv[3][2], inv[3][3]};
}

double log_gauss2(double x, double y, double std) {
  const double inv = 1.0 / std;
  const double q = (x * inv) * (x * inv) + (y * inv) * (y * inv);
  return -0.5 * q - std::log(kTwoPi * std * std);
}

}  // namespace

void MotionModel::validate() const {
  if (!(dt > 0.0)) throw InputError("motion model: dt must be positive");
  if (!(accel_noise_std >= 0.0)) throw InputError("motion model: negative noise std");
  if (!(survival_prob >= 0.0 && survival_prob <= 1.0))
    throw InputError("motion model: survival probability outside [0,1]");
}

Cov4 diag_cov4(double pos_std, double vel_std) {
  Cov4 c{};
  c[0] = pos_std * pos_std;
  c[5] = pos_std * pos_std;
  c[10] = vel_std * vel_std;
  c[15] = vel_std * vel_std;
  return c;
}

void MeasurementModel::validate() const {
  if (!(detection_prob >= 0.0 && detection_prob <= 1.0))
    throw InputError("measurement model: detection probability outside [0,1]");
  if (!(clutter_mean >= 0.0)) throw InputError("measurement model: negative clutter mean");
  if (!(birth_mean >= 0.0)) throw InputError("measurement model: negative birth mean");
  if (!(roi_half_width > 0.0)) throw InputError("measurement model: ROI half-width <= 0");
  if (!(clutter_vmax > 0.0)) throw InputError("measurement model: clutter vmax <= 0");
  if (!(birth_accel_std > 0.0)) throw InputError("measurement model: birth accel std <= 0");
}

void MeasurementModel::finalize() {
  validate();
  chol_lower = cholesky4(noise_cov);
  inv_chol_lower = invert_lower4(chol_lower);
  // det Sigma = prod diag(L)^2
  const double log_det =
      2.0 * (std::log(chol_lower[0]) + std::log(chol_lower[2]) +
             std::log(chol_lower[5]) + std::log(chol_lower[9]));
  log_gauss_norm = -2.0 * std::log(kTwoPi) - 0.5 * log_det;
  const double side = 2.0 * roi_half_width;
  const double vside = 2.0 * clutter_vmax;
  log_posvel_density = -2.0 * std::log(side) - 2.0 * std::log(vside);
  log_clutter_density = log_posvel_density;
}

KinematicState sample_transition(const KinematicState& state, const MotionModel& model,
                                 RngStream& rng) {
  const double dt = model.dt;
  const double hdt2 = 0.5 * dt * dt;
  KinematicState out;
  for (int d = 0; d < 2; ++d) {
    const double t1 = state.vel[d] * dt;
    const double t2 = state.acc[d] * hdt2;
    out.pos[d] = (state.pos[d] + t1) + t2;
    out.vel[d] = state.vel[d] + state.acc[d] * dt;
  }
  const double noise_std = model.accel_noise_std * std::sqrt(dt);
  out.acc[0] = state.acc[0] + noise_std * rng.normal();
  out.acc[1] = state.acc[1] + noise_std * rng.normal();
  return out;
}

void propagate_particles(ParticleSet& particles, const MotionModel& model,
                         RngStream& rng) {
  const auto& ops = kernels::active();
  const std::size_t n = particles.size();
  ops.ca_propagate(particles.px.data(), particles.vx.data(), particles.ax.data(), n,
                   model.dt);
  ops.ca_propagate(particles.py.data(), particles.vy.data(), particles.ay.data(), n,
                   model.dt);
  const double noise_std = model.accel_noise_std * std::sqrt(model.dt);
  if (noise_std > 0.0) {
    std::vector<double> nx(n), ny(n);
    for (std::size_t i = 0; i < n; ++i) {
      nx[i] = rng.normal();
      ny[i] = rng.normal();
    }
    ops.axpy(particles.ax.data(), nx.data(), noise_std, n);
    ops.axpy(particles.ay.data(), ny.data(), noise_std, n);
  }
}

double log_measurement_density(const std::array<double, 4>& z, const KinematicState& x,
                               const MeasurementModel& model) {
  const double* li = model.inv_chol_lower.data();
  const double r0 = z[0] - x.pos[0];
  const double r1 = z[1] - x.pos[1];
  const double r2 = z[2] - x.vel[0];
  const double r3 = z[3] - x.vel[1];
  const double y0 = li[0] * r0;
  const double y1 = li[1] * r0 + li[2] * r1;
  const double y2 = (li[3] * r0 + li[4] * r1) + li[5] * r2;
  const double y3 = ((li[6] * r0 + li[7] * r1) + li[8] * r2) + li[9] * r3;
  const double q = (y0 * y0 + y1 * y1) + (y2 * y2 + y3 * y3);
  return model.log_gauss_norm - 0.5 * q;
}

double measurement_density(const std::array<double, 4>& z, const KinematicState& x,
                           const MeasurementModel& model) {
  return std::exp(log_measurement_density(z, x, model));
}

void log_measurement_density_batch(const std::array<double, 4>& z,
                                   const ParticleSet& particles,
                                   const MeasurementModel& model, double* out) {
  const auto& ops = kernels::active();
  const std::size_t n = particles.size();
  ops.mahalanobis4_half(particles.px.data(), particles.py.data(), particles.vx.data(),
                        particles.vy.data(), z.data(), model.inv_chol_lower.data(), out,
                        n);
  for (std::size_t i = 0; i < n; ++i) out[i] = model.log_gauss_norm - out[i];
}

double mahalanobis_sq(const std::array<double, 4>& z, const KinematicState& x,
                      const MeasurementModel& model) {
  const double* li = model.inv_chol_lower.data();
  const double r0 = z[0] - x.pos[0];
  const double r1 = z[1] - x.pos[1];
  const double r2 = z[2] - x.vel[0];
  const double r3 = z[3] - x.vel[1];
  const double y0 = li[0] * r0;
  const double y1 = li[1] * r0 + li[2] * r1;
  const double y2 = (li[3] * r0 + li[4] * r1) + li[5] * r2;
  const double y3 = ((li[6] * r0 + li[7] * r1) + li[8] * r2) + li[9] * r3;
  return (y0 * y0 + y1 * y1) + (y2 * y2 + y3 * y3);
}

double GateMetric::distance_sq(const std::array<double, 4>& z) const {
  const double* li = inv_chol_lower.data();
  const double r0 = z[0] - center[0];
  const double r1 = z[1] - center[1];
  const double r2 = z[2] - center[2];
  const double r3 = z[3] - center[3];
  const double y0 = li[0] * r0;
  const double y1 = li[1] * r0 + li[2] * r1;
  const double y2 = (li[3] * r0 + li[4] * r1) + li[5] * r2;
  const double y3 = ((li[6] * r0 + li[7] * r1) + li[8] * r2) + li[9] * r3;
  return (y0 * y0 + y1 * y1) + (y2 * y2 + y3 * y3);
}

GateMetric make_gate_metric(const ParticleSet& particles, const MeasurementModel& model) {
  const std::size_t n = particles.size();
  GateMetric gm;
  Cov4 s = model.noise_cov;
  if (n > 0) {
    const double* w = particles.w.data();
    const double* u[4] = {particles.px.data(), particles.py.data(), particles.vx.data(),
                          particles.vy.data()};
    for (int d = 0; d < 4; ++d)
      gm.center[static_cast<std::size_t>(d)] = kernels::active().dot(w, u[d], n);
    // Centered second moments keep the empirical part PSD up to roundoff; the
    // noise term then guarantees a positive definite sum.
    for (int r = 0; r < 4; ++r) {
      for (int c = r; c < 4; ++c) {
        double acc = 0.0;
        const double mr = gm.center[static_cast<std::size_t>(r)];
        const double mc = gm.center[static_cast<std::size_t>(c)];
        for (std::size_t p = 0; p < n; ++p)
          acc += w[p] * (u[r][p] - mr) * (u[c][p] - mc);
        s[static_cast<std::size_t>(r) * 4 + static_cast<std::size_t>(c)] += acc;
        if (c != r) s[static_cast<std::size_t>(c) * 4 + static_cast<std::size_t>(r)] += acc;
      }
    }
  }
  gm.inv_chol_lower = invert_lower4(cholesky4(s));
  return gm;
}

double legacy_likelihood_ratio(const KinematicState& x, bool exists, int a,
                               const MeasurementFrame& frame,
                               const MeasurementModel& model) {
  const int num_measurements = static_cast<int>(frame.measurements.size());
  if (a < 0 || a > num_measurements)
    throw InputError("association index out of range: " + std::to_string(a));
  if (!exists) return a == 0 ? 1.0 : 0.0;
  if (a == 0) return 1.0 - model.detection_prob;
  const Measurement& z = frame.measurements[static_cast<std::size_t>(a) - 1];
  const double log_num =
      std::log(model.detection_prob) + log_measurement_density(z.kin, x, model);
  const double log_den = std::log(model.clutter_mean) + model.log_clutter_density;
  return std::exp(log_num - log_den);
}

double log_birth_density(const KinematicState& x, const MeasurementModel& model,
                         const std::array<double, 2>& ego) {
  if (!model.in_roi(x.pos[0], x.pos[1], ego) || !model.in_velocity_box(x.vel[0], x.vel[1]))
    return -std::numeric_limits<double>::infinity();
  return model.log_posvel_density + log_gauss2(x.acc[0], x.acc[1], model.birth_accel_std);
}

double new_po_likelihood_ratio(const KinematicState& x, bool exists, int b,
                               const Measurement& z, const MeasurementModel& model,
                               const std::array<double, 2>& ego, int num_legacy) {
  if (b < 0 || b > num_legacy)
    throw InputError("association index out of range: " + std::to_string(b));
  if (!exists) return 1.0;
  if (b != 0) return 0.0;
  if (model.birth_mean <= 0.0) return 0.0;
  const double log_fu = log_birth_density(x, model, ego);
  if (!std::isfinite(log_fu)) return 0.0;
  const double log_num =
      std::log(model.birth_mean) + log_fu + log_measurement_density(z.kin, x, model);
  const double log_den = std::log(model.clutter_mean) + model.log_clutter_density;
  return std::exp(log_num - log_den);
}

}  // namespace nebp
