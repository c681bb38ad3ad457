#include "nebp/bp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "nebp/kernels.hpp"

namespace nebp {

namespace {

constexpr double kRatioCap = 1e300;  // finite stand-in for num / 0

double safe_ratio(double num, double denom) {
  if (num == 0.0) return 0.0;
  if (denom <= 0.0) return kRatioCap;
  return num / denom;
}

// Symmetric relative change, bounded by 1.
double rel_change(double a, double b) {
  const double m = std::max({std::fabs(a), std::fabs(b), 1e-300});
  return std::fabs(a - b) / m;
}

void check_nonneg_finite(const Matrix& m, const char* name) {
  for (double v : m.data) {
    if (!std::isfinite(v) || v < 0.0)
      throw InputError(std::string(name) + " entries must be finite and nonnegative");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Association problem
// ---------------------------------------------------------------------------

AssociationProblem make_association_problem(Matrix beta, Matrix xi,
                                            int max_iterations) {
  const std::size_t I = beta.rows;
  const std::size_t J = xi.rows;
  if (beta.cols != J + 1)
    throw SizeError("beta must be I x (J+1) to match xi with J rows");
  if (xi.cols != I + 1) throw SizeError("xi must be J x (I+1) to match beta with I rows");
  if (max_iterations < 1) throw InputError("max_iterations must be >= 1");
  check_nonneg_finite(beta, "beta");
  check_nonneg_finite(xi, "xi");
  for (std::size_t i = 0; i < I; ++i) {
    double s = 0.0;
    for (std::size_t a = 0; a <= J; ++a) s += beta.at(i, a);
    if (s <= 0.0) throw DegenerateInput("beta row " + std::to_string(i) + " is all zero");
  }
  for (std::size_t j = 0; j < J; ++j) {
    double s = 0.0;
    for (std::size_t b = 0; b <= I; ++b) s += xi.at(j, b);
    if (s <= 0.0) throw DegenerateInput("xi row " + std::to_string(j) + " is all zero");
  }

  AssociationProblem p;
  p.beta = std::move(beta);
  p.xi = std::move(xi);
  p.phi = Matrix(I, J);
  p.eps = Matrix(J, I);
  std::fill(p.phi.data.begin(), p.phi.data.end(), 1.0);
  std::fill(p.eps.data.begin(), p.eps.data.end(), 1.0);
  p.max_iterations = max_iterations;
  return p;
}

IterationStats iterate_association(AssociationProblem& p, double tol) {
  const std::size_t I = p.num_objects();
  const std::size_t J = p.num_measurements();
  IterationStats stats;
  if (I == 0 || J == 0) {
    stats.converged = true;
    return stats;
  }

  std::vector<double> terms(std::max(I, J));
  std::vector<double> prefix(std::max(I, J) + 1);
  std::vector<double> suffix(std::max(I, J) + 1);
  Matrix eps_new(J, I);
  Matrix phi_new(I, J);

  for (int it = 0; it < p.max_iterations; ++it) {
    double delta = 0.0;

    // eps^{[l]} from phi^{[l-1]}: the denominator for target i excludes i's
    // own term, realized with exclusive prefix/suffix sums.
    for (std::size_t j = 0; j < J; ++j) {
      for (std::size_t i = 0; i < I; ++i) terms[i] = p.xi.at(j, i + 1) * p.phi.at(i, j);
      prefix[0] = 0.0;
      for (std::size_t i = 0; i < I; ++i) prefix[i + 1] = prefix[i] + terms[i];
      suffix[I] = 0.0;
      for (std::size_t i = I; i-- > 0;) suffix[i] = suffix[i + 1] + terms[i];
      for (std::size_t i = 0; i < I; ++i) {
        const double excl = prefix[i] + suffix[i + 1];
        const double v = safe_ratio(p.xi.at(j, i + 1), p.xi.at(j, 0) + excl);
        delta = std::max(delta, rel_change(v, p.eps.at(j, i)));
        eps_new.at(j, i) = v;
      }
    }

    // phi^{[l]} from eps^{[l]}.
    for (std::size_t i = 0; i < I; ++i) {
      for (std::size_t j = 0; j < J; ++j) terms[j] = p.beta.at(i, j + 1) * eps_new.at(j, i);
      prefix[0] = 0.0;
      for (std::size_t j = 0; j < J; ++j) prefix[j + 1] = prefix[j] + terms[j];
      suffix[J] = 0.0;
      for (std::size_t j = J; j-- > 0;) suffix[j] = suffix[j + 1] + terms[j];
      for (std::size_t j = 0; j < J; ++j) {
        const double excl = prefix[j] + suffix[j + 1];
        const double v = safe_ratio(p.beta.at(i, j + 1), p.beta.at(i, 0) + excl);
        delta = std::max(delta, rel_change(v, p.phi.at(i, j)));
        phi_new.at(i, j) = v;
      }
    }

    p.eps.data = eps_new.data;
    p.phi.data = phi_new.data;
    ++stats.iterations;
    stats.deltas.push_back(delta);
    stats.final_delta = delta;
    if (delta < tol) {
      stats.converged = true;
      break;
    }
  }
  return stats;
}

AssociationMarginals association_marginals(const AssociationProblem& p) {
  const std::size_t I = p.num_objects();
  const std::size_t J = p.num_measurements();
  AssociationMarginals m;
  m.object = Matrix(I, J + 1);
  m.measurement = Matrix(J, I + 1);

  for (std::size_t i = 0; i < I; ++i) {
    double total = p.beta.at(i, 0);
    m.object.at(i, 0) = p.beta.at(i, 0);
    for (std::size_t j = 0; j < J; ++j) {
      const double v = p.beta.at(i, j + 1) * p.eps.at(j, i);
      m.object.at(i, j + 1) = v;
      total += v;
    }
    if (total <= 0.0) throw DegenerateInput("object marginal has zero mass");
    for (std::size_t a = 0; a <= J; ++a) m.object.at(i, a) /= total;
  }

  for (std::size_t j = 0; j < J; ++j) {
    double total = p.xi.at(j, 0);
    m.measurement.at(j, 0) = p.xi.at(j, 0);
    for (std::size_t i = 0; i < I; ++i) {
      const double v = p.xi.at(j, i + 1) * p.phi.at(i, j);
      m.measurement.at(j, i + 1) = v;
      total += v;
    }
    if (total <= 0.0) throw DegenerateInput("measurement marginal has zero mass");
    for (std::size_t b = 0; b <= I; ++b) m.measurement.at(j, b) /= total;
  }
  return m;
}

namespace {

struct EnumState {
  const Matrix* beta;
  const Matrix* xi;
  std::size_t I, J;
  std::vector<int> owner;  // owner[j] = i claiming j, or -1
  std::vector<int> a;      // a[i] in 0..J
  Matrix* object;
  Matrix* measurement;
  double total = 0.0;

  void recurse(std::size_t i, double weight) {
    if (weight == 0.0) return;
    if (i == I) {
      double w = weight;
      for (std::size_t j = 0; j < J; ++j)
        w *= owner[j] < 0 ? xi->at(j, 0) : xi->at(j, owner[j] + 1);
      if (w == 0.0) return;
      total += w;
      for (std::size_t ii = 0; ii < I; ++ii) object->at(ii, a[ii]) += w;
      for (std::size_t j = 0; j < J; ++j)
        measurement->at(j, owner[j] < 0 ? 0 : owner[j] + 1) += w;
      return;
    }
    a[i] = 0;
    recurse(i + 1, weight * beta->at(i, 0));
    for (std::size_t j = 0; j < J; ++j) {
      if (owner[j] >= 0) continue;  // consistency: one object per measurement
      owner[j] = static_cast<int>(i);
      a[i] = static_cast<int>(j) + 1;
      recurse(i + 1, weight * beta->at(i, j + 1));
      owner[j] = -1;
    }
  }
};

}  // namespace

AssociationMarginals exact_association_marginals(const Matrix& beta, const Matrix& xi) {
  const std::size_t I = beta.rows;
  const std::size_t J = xi.rows;
  if (beta.cols != J + 1 || xi.cols != I + 1)
    throw SizeError("beta must be I x (J+1) and xi J x (I+1)");
  if (I > 8 || J > 8) throw SizeError("exact enumeration supports at most 8 x 8");
  check_nonneg_finite(beta, "beta");
  check_nonneg_finite(xi, "xi");

  AssociationMarginals m;
  m.object = Matrix(I, J + 1);
  m.measurement = Matrix(J, I + 1);
  EnumState st;
  st.beta = &beta;
  st.xi = &xi;
  st.I = I;
  st.J = J;
  st.owner.assign(J, -1);
  st.a.assign(I, 0);
  st.object = &m.object;
  st.measurement = &m.measurement;
  st.recurse(0, 1.0);
  if (st.total <= 0.0) throw DegenerateInput("all association events have zero weight");
  for (double& v : m.object.data) v /= st.total;
  for (double& v : m.measurement.data) v /= st.total;
  return m;
}

// ---------------------------------------------------------------------------
// Per-step intermediates
// ---------------------------------------------------------------------------

BetaResult compute_beta(const PotentialObject& po, const MeasurementFrame& frame,
                        const MeasurementModel& model, double gate_sq) {
  const std::size_t J = frame.measurements.size();
  const std::size_t n = po.particles.size();
  if (!(model.clutter_mean > 0.0))
    throw InputError("likelihood ratios require a positive clutter mean");
  const double e = po.existence;
  BetaResult out;
  out.row.assign(J + 1, 0.0);
  out.row[0] = e * (1.0 - model.detection_prob) + (1.0 - e);

  const GateMetric gate = make_gate_metric(po.particles, model);
  const double log_const = std::log(model.detection_prob) + model.log_gauss_norm -
                           std::log(model.clutter_mean) - model.log_clutter_density;

  const kernels::Ops& k = kernels::active();
  std::vector<double> half_m2(n);
  for (std::size_t j = 0; j < J; ++j) {
    const Measurement& z = frame.measurements[j];
    if (gate.distance_sq(z.kin) > gate_sq) continue;

    k.mahalanobis4_half(po.particles.px.data(), po.particles.py.data(),
                        po.particles.vx.data(), po.particles.vy.data(), z.kin.data(),
                        model.inv_chol_lower.data(), half_m2.data(), n);
    std::vector<double> ratios(n);
    for (std::size_t p = 0; p < n; ++p) ratios[p] = std::exp(log_const - half_m2[p]);
    const double mass = k.dot(po.particles.w.data(), ratios.data(), n);

    out.row[j + 1] = e * mass;
    out.cache.meas_index.push_back(static_cast<int>(j));
    out.cache.ratios.push_back(std::move(ratios));
    out.cache.mass.push_back(mass);
    out.cache.scale.push_back(1.0);
  }
  return out;
}

XiResult compute_xi(const Measurement& z, const MeasurementModel& model,
                    const std::array<double, 2>& ego, std::size_t particle_count,
                    std::size_t num_legacy, RngStream& rng) {
  if (!(model.clutter_mean > 0.0))
    throw InputError("birth mass requires a positive clutter mean");
  XiResult out;
  out.row.assign(num_legacy + 1, 1.0);

  ParticleSet& ps = out.draft.particles;
  ps.resize(particle_count);
  const auto& L = model.chol_lower;  // row-major packed lower triangle
  std::size_t in_support = 0;
  std::vector<char> ok(particle_count);
  for (std::size_t p = 0; p < particle_count; ++p) {
    const double u0 = rng.normal(), u1 = rng.normal(), u2 = rng.normal(),
                 u3 = rng.normal();
    ps.px[p] = z.kin[0] + L[0] * u0;
    ps.py[p] = z.kin[1] + L[1] * u0 + L[2] * u1;
    ps.vx[p] = z.kin[2] + L[3] * u0 + L[4] * u1 + L[5] * u2;
    ps.vy[p] = z.kin[3] + L[6] * u0 + L[7] * u1 + L[8] * u2 + L[9] * u3;
    ps.ax[p] = model.birth_accel_std * rng.normal();
    ps.ay[p] = model.birth_accel_std * rng.normal();
    // The proposal matches the likelihood times the acceleration prior, so the
    // importance weight reduces to mu_u * f_u / (mu_fa * f_fa) restricted to
    // the birth support; position-velocity uniforms equal the clutter density
    // over the same box, leaving the plain rate ratio.
    ok[p] = model.in_roi(ps.px[p], ps.py[p], ego) &&
                    model.in_velocity_box(ps.vx[p], ps.vy[p])
                ? 1
                : 0;
    if (ok[p]) ++in_support;
  }

  const double rate_ratio = model.birth_mean / model.clutter_mean;
  out.draft.mass =
      rate_ratio * (static_cast<double>(in_support) / static_cast<double>(particle_count));
  out.row[0] = 1.0 + out.draft.mass;

  if (in_support > 0) {
    const double w = 1.0 / static_cast<double>(in_support);
    for (std::size_t p = 0; p < particle_count; ++p) ps.w[p] = ok[p] ? w : 0.0;
  } else {
    const double w = 1.0 / static_cast<double>(particle_count);
    std::fill(ps.w.begin(), ps.w.end(), w);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Beliefs
// ---------------------------------------------------------------------------

void TrackManagerConfig::validate() const {
  if (!(prune_threshold > 0.0) || !(prune_threshold <= declare_threshold) ||
      !(declare_threshold < 1.0))
    throw InputError("thresholds must satisfy 0 < T_pru <= T_dec < 1");
}

void TrackerConfig::validate() const {
  manager.validate();
  if (particle_count == 0) throw InputError("particle_count must be positive");
  if (bp_iterations < 1) throw InputError("bp_iterations must be >= 1");
  if (!(bp_tolerance > 0.0)) throw InputError("bp_tolerance must be positive");
  if (!(gate_sq > 0.0)) throw InputError("gate_sq must be positive");
  if (!(ess_fraction > 0.0) || !(ess_fraction <= 1.0))
    throw InputError("ess_fraction must be in (0, 1]");
}

void predict(std::vector<PotentialObject>& legacy, const MotionModel& model,
             RngStream& rng) {
  for (PotentialObject& po : legacy) {
    propagate_particles(po.particles, model, rng);
    po.existence *= model.survival_prob;
  }
}

KinematicState weighted_mean(const ParticleSet& particles) {
  const kernels::Ops& k = kernels::active();
  const std::size_t n = particles.size();
  KinematicState s;
  if (n == 0) return s;
  const double* w = particles.w.data();
  s.pos[0] = k.dot(w, particles.px.data(), n);
  s.pos[1] = k.dot(w, particles.py.data(), n);
  s.vel[0] = k.dot(w, particles.vx.data(), n);
  s.vel[1] = k.dot(w, particles.vy.data(), n);
  s.acc[0] = k.dot(w, particles.ax.data(), n);
  s.acc[1] = k.dot(w, particles.ay.data(), n);
  return s;
}

double effective_sample_size(const std::vector<double>& weights) {
  const kernels::Ops& k = kernels::active();
  const double ss = k.sum_sq(weights.data(), weights.size());
  if (ss <= 0.0) return 0.0;
  return 1.0 / ss;
}

void systematic_resample(ParticleSet& particles, RngStream& rng) {
  const std::size_t n = particles.size();
  if (n == 0) return;
  const double step = 1.0 / static_cast<double>(n);
  double u = rng.uniform() * step;

  ParticleSet out;
  out.resize(n);
  double cum = particles.w[0];
  std::size_t src = 0;
  for (std::size_t p = 0; p < n; ++p) {
    while (u > cum && src + 1 < n) {
      ++src;
      cum += particles.w[src];
    }
    out.px[p] = particles.px[src];
    out.py[p] = particles.py[src];
    out.vx[p] = particles.vx[src];
    out.vy[p] = particles.vy[src];
    out.ax[p] = particles.ax[src];
    out.ay[p] = particles.ay[src];
    out.w[p] = step;
    u += step;
  }
  particles = std::move(out);
}

namespace {

void maybe_resample(ParticleSet& particles, double ess_fraction, RngStream& rng) {
  const std::size_t n = particles.size();
  if (n == 0) return;
  if (effective_sample_size(particles.w) <
      ess_fraction * static_cast<double>(n))
    systematic_resample(particles, rng);
}

}  // namespace

Belief update_legacy_belief(const PotentialObject& predicted, const BetaResult& beta,
                            const std::vector<double>& eps_row,
                            const MeasurementModel& model, double ess_fraction,
                            RngStream& rng) {
  const std::size_t n = predicted.particles.size();
  const std::size_t J = beta.row.size() - 1;
  const double e = predicted.existence;
  const kernels::Ops& k = kernels::active();

  Belief b;
  b.association_marginal.assign(J + 1, 0.0);

  // Existence-conditioned mass per hypothesis; beta.row already carries the
  // neural scale in its measurement entries.
  double exist_mass = e * (1.0 - model.detection_prob);
  b.association_marginal[0] = beta.row[0];  // includes the nonexistence slice
  for (std::size_t g = 0; g < beta.cache.meas_index.size(); ++g) {
    const int j = beta.cache.meas_index[g];
    const double v = beta.row[j + 1] * eps_row[j];
    b.association_marginal[j + 1] = v;
    exist_mass += v;
  }
  const double nonexist_mass = 1.0 - e;
  const double total = exist_mass + nonexist_mass;
  if (total <= 0.0) throw DegenerateInput("legacy belief has zero total mass");
  b.existence = exist_mass / total;
  for (double& v : b.association_marginal) v /= total;

  // Particle weights: w_p *= (1 - p_d) + sum_j C m_eps q_p along gated pairs.
  b.particles = predicted.particles;
  std::vector<double> acc(n, 1.0 - model.detection_prob);
  for (std::size_t g = 0; g < beta.cache.meas_index.size(); ++g) {
    const int j = beta.cache.meas_index[g];
    const double t = beta.cache.scale[g] * eps_row[j];
    if (t != 0.0) k.axpy(acc.data(), beta.cache.ratios[g].data(), t, n);
  }
  k.mul_inplace(b.particles.w.data(), acc.data(), n);
  const double wsum = k.sum(b.particles.w.data(), n);
  if (wsum > 0.0) {
    k.scale(b.particles.w.data(), 1.0 / wsum, n);
    maybe_resample(b.particles, ess_fraction, rng);
  } else {
    // No mass anywhere: keep the prior spread, existence has collapsed.
    b.particles = predicted.particles;
  }
  return b;
}

Belief update_new_belief(const XiResult& xi, const std::vector<double>& phi_col,
                         double birth_scale, double ess_fraction, RngStream& rng) {
  const std::size_t I = xi.row.size() - 1;
  Belief b;
  b.association_marginal.assign(I + 1, 0.0);

  const double mass = birth_scale * xi.draft.mass;
  double total = mass + 1.0;  // b = 0 carries birth mass plus the clutter slice
  b.association_marginal[0] = mass + 1.0;
  for (std::size_t i = 0; i < I; ++i) {
    b.association_marginal[i + 1] = phi_col[i];
    total += phi_col[i];
  }
  if (total <= 0.0) throw DegenerateInput("new belief has zero total mass");
  b.existence = mass / total;
  for (double& v : b.association_marginal) v /= total;

  b.particles = xi.draft.particles;
  maybe_resample(b.particles, ess_fraction, rng);
  return b;
}

DeclareResult declare_estimate_prune(std::vector<PotentialObject> pos,
                                     const TrackManagerConfig& cfg) {
  cfg.validate();
  DeclareResult out;
  for (PotentialObject& po : pos) {
    if (po.existence >= cfg.declare_threshold) {
      TrackEstimate est;
      est.track_id = po.track_id;
      est.state = weighted_mean(po.particles);
      est.report_score = po.detection_score * po.existence;
      out.estimates.push_back(est);
    }
    if (po.existence >= cfg.prune_threshold) out.survivors.push_back(std::move(po));
  }
  out.survivors = promote_new_to_legacy(std::move(out.survivors));
  return out;
}

// ---------------------------------------------------------------------------
// Enhancement
// ---------------------------------------------------------------------------

EnhancementCoefficients IdentityEnhancement::compute(const EnhancementInput& in) {
  const std::size_t I = in.legacy->size();
  const std::size_t J = in.frame->measurements.size();
  EnhancementCoefficients c;
  c.affinity = Matrix(I, J);  // zeros: relu contributes nothing
  c.far.assign(J, 1.0);
  return c;
}

// ---------------------------------------------------------------------------
// Tracker
// ---------------------------------------------------------------------------

BpTracker::BpTracker(MotionModel motion, MeasurementModel measurement,
                     TrackerConfig config, std::uint64_t seed)
    : motion_(std::move(motion)),
      measurement_(std::move(measurement)),
      config_(std::move(config)),
      rng_(seed, "particles") {
  motion_.validate();
  measurement_.validate();
  if (!(measurement_.clutter_mean > 0.0))
    throw InputError("tracking requires a positive clutter mean");
  measurement_.finalize();
  config_.validate();
}

StepResult BpTracker::step(const MeasurementFrame& frame) {
  const std::size_t J = frame.measurements.size();
  StepResult result;
  StepDiagnostics& diag = result.diagnostics;
  diag.num_measurements = J;
  diag.num_legacy_in = legacy_.size();

  // 1. Prediction.
  predict(legacy_, motion_, rng_);
  const std::size_t I = legacy_.size();

  // 2. Likelihood structure.
  std::vector<BetaResult> betas;
  betas.reserve(I);
  Matrix beta(I, J + 1);
  for (std::size_t i = 0; i < I; ++i) {
    betas.push_back(compute_beta(legacy_[i], frame, measurement_, config_.gate_sq));
    for (std::size_t a = 0; a <= J; ++a) beta.at(i, a) = betas[i].row[a];
  }

  std::vector<XiResult> xis;
  xis.reserve(J);
  Matrix xi(J, I + 1);
  for (std::size_t j = 0; j < J; ++j) {
    xis.push_back(compute_xi(frame.measurements[j], measurement_, frame.ego,
                             config_.particle_count, I, rng_));
    for (std::size_t b = 0; b <= I; ++b) xi.at(j, b) = xis[j].row[b];
  }

  // 3. Optional neural enhancement of the association input.
  std::vector<double> birth_scale(J, 1.0);
  Matrix beta_hat(I, J + 1);
  for (std::size_t i = 0; i < I; ++i) {
    double s = 0.0;
    for (std::size_t a = 0; a <= J; ++a) s += beta.at(i, a);
    const double inv = 1.0 / std::max(s, 1e-300);
    for (std::size_t a = 0; a <= J; ++a) beta_hat.at(i, a) = beta.at(i, a) * inv;
  }
  std::vector<std::array<double, 4>> motion_feat(I);
  for (std::size_t i = 0; i < I; ++i) {
    const KinematicState m = weighted_mean(legacy_[i].particles);
    motion_feat[i] = {m.pos[0], m.pos[1], m.vel[0], m.vel[1]};
  }
  EnhancementInput ein;
  ein.legacy = &legacy_;
  ein.legacy_motion = &motion_feat;
  ein.frame = &frame;
  ein.beta_hat = &beta_hat;
  if (hook_ != nullptr) hook_(hook_ctx_, ein);
  if (enhancer_ != nullptr) {
    EnhancementCoefficients coeff = enhancer_->compute(ein);
    if (coeff.affinity.rows != I || coeff.affinity.cols != J ||
        coeff.far.size() != J)
      throw SizeError("enhancement coefficients have wrong shape");
    for (std::size_t i = 0; i < I; ++i) {
      BetaResult& br = betas[i];
      for (std::size_t g = 0; g < br.cache.meas_index.size(); ++g) {
        const int j = br.cache.meas_index[g];
        const double bh = std::max(beta_hat.at(i, j + 1), config_.beta_hat_floor);
        const double c =
            coeff.far[j] + std::max(coeff.affinity.at(i, j), 0.0) / bh;
        br.cache.scale[g] = c;
        br.row[j + 1] *= c;
        beta.at(i, j + 1) *= c;
      }
    }
    for (std::size_t j = 0; j < J; ++j) {
      birth_scale[j] = coeff.far[j];
      xis[j].row[0] = 1.0 + coeff.far[j] * xis[j].draft.mass;
      xi.at(j, 0) = xis[j].row[0];
    }
  }

  // 4. Iterative data association.
  AssociationProblem problem =
      make_association_problem(std::move(beta), std::move(xi), config_.bp_iterations);
  diag.bp = iterate_association(problem, config_.bp_tolerance);

  // 5. Belief updates.
  std::vector<PotentialObject> updated;
  updated.reserve(I + J);
  std::vector<double> eps_row(J), phi_col(I);
  for (std::size_t i = 0; i < I; ++i) {
    for (std::size_t j = 0; j < J; ++j) eps_row[j] = problem.eps.at(j, i);
    Belief bel = update_legacy_belief(legacy_[i], betas[i], eps_row, measurement_,
                                      config_.ess_fraction, rng_);
    PotentialObject po = legacy_[i];
    po.existence = bel.existence;
    // Detection score drifts toward the expected score of the associated
    // measurements; misses leave it unchanged.
    double score_mix = 0.0;
    double mix_mass = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      const double m = bel.association_marginal[j + 1];
      if (m > 0.0) {
        score_mix += m * frame.measurements[j].score;
        mix_mass += m;
      }
    }
    if (mix_mass > 0.0)
      po.detection_score +=
          config_.score_ema * (score_mix - mix_mass * po.detection_score);
    po.particles = std::move(bel.particles);
    if (config_.collect_diagnostics) {
      double ms = 0.0;
      for (double v : bel.association_marginal) ms += v;
      diag.marginal_sums.push_back(ms);
      diag.weight_sums.push_back(
          kernels::active().sum(po.particles.w.data(), po.particles.size()));
      diag.existences.push_back(po.existence);
    }
    updated.push_back(std::move(po));
  }
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t i = 0; i < I; ++i) phi_col[i] = problem.phi.at(i, j);
    Belief bel = update_new_belief(xis[j], phi_col, birth_scale[j],
                                   config_.ess_fraction, rng_);
    const Measurement& z = frame.measurements[j];
    PotentialObject po;
    po.kind = PoKind::New;
    po.track_id = ids_.next();
    po.existence = bel.existence;
    po.particles = std::move(bel.particles);
    po.box = z.box;
    po.shape = z.shape;
    po.heat = z.heat;
    po.detection_score = z.score;
    if (config_.collect_diagnostics) {
      double ms = 0.0;
      for (double v : bel.association_marginal) ms += v;
      diag.marginal_sums.push_back(ms);
      diag.weight_sums.push_back(
          kernels::active().sum(po.particles.w.data(), po.particles.size()));
      diag.existences.push_back(po.existence);
    }
    updated.push_back(std::move(po));
  }

  // 6. Declaration and pruning.
  DeclareResult dec = declare_estimate_prune(std::move(updated), config_.manager);
  diag.num_pruned = I + J - dec.survivors.size();
  legacy_ = std::move(dec.survivors);
  result.estimates = std::move(dec.estimates);
  return result;
}

}  // namespace nebp
