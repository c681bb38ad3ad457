#include "nebp/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

namespace nebp {
namespace {

// PSD square root by Cholesky with zero-pivot tolerance, so a detector with
// an exactly-zero noise block emits noise-free measurements instead of
// rejecting the covariance outright.
std::array<double, 10> chol_psd4(const Cov4& c) {
  std::array<double, 10> l{};
  double a[4][4];
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a[i][j] = c[static_cast<std::size_t>(4 * i + j)];
  double full[4][4] = {};
  for (int j = 0; j < 4; ++j) {
    double d = a[j][j];
    for (int k = 0; k < j; ++k) d -= full[j][k] * full[j][k];
    if (d < -1e-12) throw InputError("detector noise covariance is indefinite");
    full[j][j] = d > 0.0 ? std::sqrt(d) : 0.0;
    for (int i = j + 1; i < 4; ++i) {
      double s = a[i][j];
      for (int k = 0; k < j; ++k) s -= full[i][k] * full[j][k];
      full[i][j] = full[j][j] > 0.0 ? s / full[j][j] : 0.0;
    }
  }
  int idx = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j <= i; ++j) l[static_cast<std::size_t>(idx++)] = full[i][j];
  return l;
}

std::vector<double> latent_vector(const std::vector<double>& center, double within_std,
                                  RngStream& rng) {
  std::vector<double> v(center.size());
  for (std::size_t d = 0; d < v.size(); ++d) v[d] = center[d] + within_std * rng.normal();
  return v;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (duration <= 0) throw InputError("scenario duration must be positive");
  if (!(dt > 0.0)) throw InputError("scenario step period must be positive");
  if (birth_rate < 0.0) throw InputError("birth rate must be non-negative");
  if (survival_prob < 0.0 || survival_prob > 1.0)
    throw InputError("survival probability must be in [0, 1]");
  if (!(spawn_half_width > 0.0)) throw InputError("spawn half-width must be positive");
  if (speed_max < 0.0) throw InputError("speed bound must be non-negative");
  if (accel_noise_std < 0.0) throw InputError("acceleration noise must be non-negative");
  if (num_classes <= 0) throw InputError("need at least one appearance class");
  if (box_std < 0.0 || class_center_std < 0.0 || within_class_std < 0.0)
    throw InputError("spread parameters must be non-negative");
  if (velocity_decay < 0.0 || velocity_decay > 1.0)
    throw InputError("velocity decay must be in [0, 1]");
  if (bound_half_width < 0.0) throw InputError("boundary half-width must be non-negative");
  if (bound_half_width > 0.0 && spawn_half_width > bound_half_width)
    throw InputError("spawn region must lie inside the reflecting boundary");
}

std::size_t Scenario::live_count(int step) const {
  std::size_t n = 0;
  for (const Trajectory& t : trajectories) n += t.alive(step) ? 1u : 0u;
  return n;
}

Scenario generate_scenario(const ScenarioConfig& cfg, RngStream& rng) {
  cfg.validate();
  Scenario out;
  out.cfg = cfg;

  out.ego.resize(static_cast<std::size_t>(cfg.duration));
  for (int k = 0; k < cfg.duration; ++k) {
    const double t = cfg.dt * k;
    out.ego[static_cast<std::size_t>(k)] = {cfg.ego_start[0] + t * cfg.ego_velocity[0],
                                            cfg.ego_start[1] + t * cfg.ego_velocity[1]};
  }

  // Appearance classes are a shared vocabulary across scenes, drawn from a
  // fixed stream rather than the scenario seed. Per-scene centers would make
  // appearance discrimination unlearnable beyond the training scenarios.
  RngStream class_rng(0, "classes");
  std::vector<std::vector<double>> shape_centers(static_cast<std::size_t>(cfg.num_classes));
  std::vector<std::vector<double>> heat_centers(static_cast<std::size_t>(cfg.num_classes));
  for (int c = 0; c < cfg.num_classes; ++c) {
    shape_centers[static_cast<std::size_t>(c)].resize(kShapeDim);
    heat_centers[static_cast<std::size_t>(c)].resize(kHeatDim);
    for (double& v : shape_centers[static_cast<std::size_t>(c)])
      v = cfg.class_center_std * class_rng.normal();
    for (double& v : heat_centers[static_cast<std::size_t>(c)])
      v = cfg.class_center_std * class_rng.normal();
  }

  // True motion: mean-reverting velocity with gentle maneuvers, so speeds stay
  // stationary over long scenarios. Each segment's acceleration is stored so
  // positions, velocities, and accelerations remain kinematically consistent.
  auto advance = [&cfg](const KinematicState& s, RngStream& r) {
    const double dt = cfg.dt;
    const double eta = cfg.accel_noise_std * dt;
    KinematicState out;
    for (std::size_t d = 0; d < 2; ++d) {
      const double v_new = cfg.velocity_decay * s.vel[d] + eta * r.normal();
      out.pos[d] = s.pos[d] + 0.5 * (s.vel[d] + v_new) * dt;
      out.vel[d] = v_new;
      out.acc[d] = (v_new - s.vel[d]) / dt;
    }
    return out;
  };

  std::uint64_t next_id = 1;
  auto spawn = [&](int step) {
    Trajectory t;
    t.truth_id = next_id++;
    t.birth_step = step;
    const auto& e = out.ego[static_cast<std::size_t>(step)];
    KinematicState s;
    s.pos = {e[0] + cfg.spawn_half_width * (2.0 * rng.uniform() - 1.0),
             e[1] + cfg.spawn_half_width * (2.0 * rng.uniform() - 1.0)};
    s.vel = {cfg.speed_max * (2.0 * rng.uniform() - 1.0),
             cfg.speed_max * (2.0 * rng.uniform() - 1.0)};
    s.acc = {0.0, 0.0};
    t.states.push_back(s);
    for (std::size_t d = 0; d < kBoxDim; ++d)
      t.box[d] = cfg.box_mean[d] + cfg.box_std * rng.normal();
    t.class_label = static_cast<int>(rng.uniform() * cfg.num_classes);
    if (t.class_label >= cfg.num_classes) t.class_label = cfg.num_classes - 1;
    t.shape_latent = latent_vector(shape_centers[static_cast<std::size_t>(t.class_label)],
                                   cfg.within_class_std, rng);
    t.heat_latent = latent_vector(heat_centers[static_cast<std::size_t>(t.class_label)],
                                  cfg.within_class_std, rng);
    out.trajectories.push_back(std::move(t));
  };

  for (std::size_t i = 0; i < cfg.initial_objects; ++i) spawn(0);

  // Keeps synthetic objects inside the sensor support: positions reflect about
  // the ego-centered boundary and the matching velocity and acceleration
  // components flip sign.
  auto reflect = [&cfg](KinematicState& s, const std::array<double, 2>& e) {
    if (cfg.bound_half_width <= 0.0) return;
    const double b = cfg.bound_half_width;
    for (std::size_t a = 0; a < 2; ++a) {
      double d = s.pos[a] - e[a];
      if (d >= -b && d <= b) continue;
      // Fold the excursion back into the box; one fold per boundary crossing.
      int flips = 0;
      while (d > b || d < -b) {
        d = d > b ? 2.0 * b - d : -2.0 * b - d;
        ++flips;
        if (flips > 64) throw DegenerateInput("runaway trajectory at the boundary");
      }
      s.pos[a] = e[a] + d;
      if (flips % 2 == 1) {
        s.vel[a] = -s.vel[a];
        s.acc[a] = -s.acc[a];
      }
    }
  };

  for (int step = 1; step < cfg.duration; ++step) {
    for (Trajectory& t : out.trajectories) {
      if (t.death_step != 0 || t.birth_step >= step) continue;
      if (!rng.bernoulli(cfg.survival_prob)) {
        t.death_step = step;
        continue;
      }
      KinematicState next = advance(t.states.back(), rng);
      reflect(next, out.ego[static_cast<std::size_t>(step)]);
      t.states.push_back(next);
    }
    const std::uint64_t births = rng.poisson(cfg.birth_rate);
    for (std::uint64_t b = 0; b < births; ++b) spawn(step);
  }
  for (Trajectory& t : out.trajectories)
    if (t.death_step == 0) t.death_step = cfg.duration;
  return out;
}

void DetectorConfig::validate() const {
  if (box_noise_std < 0.0 || feature_noise_std < 0.0 || clutter_feature_std < 0.0)
    throw InputError("detector noise parameters must be non-negative");
  if (!(score_true_a > 0.0) || !(score_true_b > 0.0) || !(score_false_a > 0.0) ||
      !(score_false_b > 0.0))
    throw InputError("score Beta parameters must be positive");
  if (!(clutter_box_range[0] > 0.0) || !(clutter_box_range[1] >= clutter_box_range[0]))
    throw InputError("clutter box range must be positive and ordered");
}

MeasurementFrame emulate_detector(const Scenario& scenario, int step,
                                  const MeasurementModel& model, const DetectorConfig& det,
                                  RngStream& rng, FrameLabels* labels) {
  det.validate();
  if (step < 0 || step >= scenario.cfg.duration)
    throw InputError("detector step outside the scenario");
  if (model.detection_prob < 0.0 || model.detection_prob > 1.0)
    throw InputError("detection probability must be in [0, 1]");
  if (model.clutter_mean < 0.0) throw InputError("clutter mean must be non-negative");

  const auto noise_l = chol_psd4(model.noise_cov);
  MeasurementFrame frame;
  frame.step = step;
  frame.ego = scenario.ego[static_cast<std::size_t>(step)];

  std::vector<std::int64_t> source;

  auto push = [&](Measurement&& z, std::int64_t origin) {
    frame.measurements.push_back(std::move(z));
    source.push_back(origin);
  };

  for (const Trajectory& t : scenario.trajectories) {
    if (!t.alive(step) || !rng.bernoulli(model.detection_prob)) continue;
    const KinematicState& x = t.state_at(step);
    Measurement z;
    std::array<double, 4> u{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    const double n0 = noise_l[0] * u[0];
    const double n1 = noise_l[1] * u[0] + noise_l[2] * u[1];
    const double n2 = noise_l[3] * u[0] + noise_l[4] * u[1] + noise_l[5] * u[2];
    const double n3 =
        noise_l[6] * u[0] + noise_l[7] * u[1] + noise_l[8] * u[2] + noise_l[9] * u[3];
    z.kin = {x.pos[0] + n0, x.pos[1] + n1, x.vel[0] + n2, x.vel[1] + n3};
    for (std::size_t d = 0; d < kBoxDim; ++d)
      z.box[d] = t.box[d] + det.box_noise_std * rng.normal();
    if (det.with_features) {
      z.shape.resize(kShapeDim);
      z.heat.resize(kHeatDim);
      for (std::size_t d = 0; d < kShapeDim; ++d)
        z.shape[d] = t.shape_latent[d] + det.feature_noise_std * rng.normal();
      for (std::size_t d = 0; d < kHeatDim; ++d)
        z.heat[d] = t.heat_latent[d] + det.feature_noise_std * rng.normal();
    }
    z.score = rng.beta(det.score_true_a, det.score_true_b);
    push(std::move(z), static_cast<std::int64_t>(t.truth_id));
  }

  const std::uint64_t clutter = rng.poisson(model.clutter_mean);
  for (std::uint64_t c = 0; c < clutter; ++c) {
    Measurement z;
    z.kin = {frame.ego[0] + model.roi_half_width * (2.0 * rng.uniform() - 1.0),
             frame.ego[1] + model.roi_half_width * (2.0 * rng.uniform() - 1.0),
             model.clutter_vmax * (2.0 * rng.uniform() - 1.0),
             model.clutter_vmax * (2.0 * rng.uniform() - 1.0)};
    const double lo = det.clutter_box_range[0];
    const double span = det.clutter_box_range[1] - det.clutter_box_range[0];
    for (std::size_t d = 0; d < kBoxDim; ++d) z.box[d] = lo + span * rng.uniform();
    if (det.with_features) {
      z.shape.resize(kShapeDim);
      z.heat.resize(kHeatDim);
      for (double& v : z.shape) v = det.clutter_feature_std * rng.normal();
      for (double& v : z.heat) v = det.clutter_feature_std * rng.normal();
    }
    z.score = rng.beta(det.score_false_a, det.score_false_b);
    push(std::move(z), -1);
  }

  // Shuffle measurements and labels with one permutation so frame position
  // carries no origin information.
  std::vector<std::size_t> perm(frame.measurements.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm);
  MeasurementFrame shuffled;
  shuffled.step = frame.step;
  shuffled.ego = frame.ego;
  shuffled.measurements.reserve(perm.size());
  std::vector<std::int64_t> shuffled_source;
  shuffled_source.reserve(perm.size());
  for (std::size_t p : perm) {
    shuffled.measurements.push_back(std::move(frame.measurements[p]));
    shuffled_source.push_back(source[p]);
  }
  if (labels != nullptr) labels->source = std::move(shuffled_source);
  return shuffled;
}

}  // namespace nebp
