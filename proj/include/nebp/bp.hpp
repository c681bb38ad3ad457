#pragma once

// One full belief-propagation recursion for multi-object tracking:
// prediction, iterative probabilistic data association, belief update, and
// declaration / pruning. Also the exact small-instance enumeration oracle the
// message passing is verified against.
//
// Messages are kept in ratio form: phi(i,j) is the message value at the
// hypothesis b_j = i divided by its value at b_j != i, and eps(j,i) likewise
// for a_i = j. The indicator structure collapses each message to this single
// scalar, and the per-iteration renormalization is implicit in the ratio.

#include <cstdint>
#include <memory>
#include <vector>

#include "nebp/models.hpp"
#include "nebp/random.hpp"
#include "nebp/types.hpp"

namespace nebp {

// ---------------------------------------------------------------------------
// Data association
// ---------------------------------------------------------------------------

struct AssociationProblem {
  Matrix beta;  // I x (J+1): beta_i(a) for a = 0..J
  Matrix xi;    // J x (I+1): xi_j(b) for b = 0..I
  Matrix phi;   // I x J ratio messages, initialized to 1
  Matrix eps;   // J x I ratio messages, initialized to 1
  int max_iterations = 20;

  std::size_t num_objects() const { return beta.rows; }
  std::size_t num_measurements() const { return xi.rows; }
};

// Validates shapes and nonnegativity, rejects all-zero rows, initializes
// messages to ones.
AssociationProblem make_association_problem(Matrix beta, Matrix xi,
                                            int max_iterations = 20);

struct IterationStats {
  int iterations = 0;
  double final_delta = 0.0;
  bool converged = false;
  std::vector<double> deltas;  // per-iteration max relative message change
};

// Runs the eps-then-phi schedule until max_iterations or until the max
// relative message change drops below tol.
IterationStats iterate_association(AssociationProblem& problem, double tol = 1e-6);

struct AssociationMarginals {
  Matrix object;       // I x (J+1): p(a_i = j)
  Matrix measurement;  // J x (I+1): p(b_j = i)
};

// Marginals implied by the current messages.
AssociationMarginals association_marginals(const AssociationProblem& problem);

// Exhaustive enumeration over all consistent (a, b) events, weighting each by
// prod beta_i(a_i) * prod xi_j(b_j). Requires I, J <= 8 (throws SizeError).
AssociationMarginals exact_association_marginals(const Matrix& beta, const Matrix& xi);

// ---------------------------------------------------------------------------
// Per-step intermediates
// ---------------------------------------------------------------------------

// Per legacy PO: the gated measurements with cached per-particle likelihood
// ratios. scale holds the neural coefficient C (1 when enhancement is off).
struct PairCache {
  std::vector<int> meas_index;               // gated j, ascending
  std::vector<std::vector<double>> ratios;   // per-particle q(x_p, 1, j)
  std::vector<double> mass;                  // sum_p w_p * ratios[p]
  std::vector<double> scale;                 // neural C^{i,j}, default 1
};

struct BetaResult {
  std::vector<double> row;  // size J+1
  PairCache cache;
};

// Particle-weighted beta row for one predicted PO; pairs outside the gate
// contribute zero.
BetaResult compute_beta(const PotentialObject& po, const MeasurementFrame& frame,
                        const MeasurementModel& model, double gate_sq);

// Birth proposal draw for one measurement plus the importance estimate of the
// new-PO likelihood mass.
struct BirthDraft {
  ParticleSet particles;  // weights normalized (uniform over in-support draws)
  double mass = 0.0;      // integral of v(x, 1, 0) estimated by importance sampling
};

struct XiResult {
  std::vector<double> row;  // size I+1: [1 + mass, 1, ..., 1]
  BirthDraft draft;
};

XiResult compute_xi(const Measurement& z, const MeasurementModel& model,
                    const std::array<double, 2>& ego, std::size_t particle_count,
                    std::size_t num_legacy, RngStream& rng);

// ---------------------------------------------------------------------------
// Beliefs and track management
// ---------------------------------------------------------------------------

struct Belief {
  double existence = 0.0;
  ParticleSet particles;                      // normalized, resampled if degenerate
  std::vector<double> association_marginal;   // size J+1 (legacy) or I+1 (new)
};

struct TrackManagerConfig {
  double declare_threshold = 0.5;  // T_dec
  double prune_threshold = 1e-3;   // T_pru

  void validate() const;
};

struct TrackEstimate {
  std::uint64_t track_id = 0;
  KinematicState state;
  double report_score = 0.0;
};

// Neural coefficients enter the engine through this interface so the BP side
// stays independent of the network code.
struct EnhancementInput {
  const std::vector<PotentialObject>* legacy = nullptr;  // predicted POs
  const std::vector<std::array<double, 4>>* legacy_motion = nullptr;  // MMSE (pos, vel)
  const MeasurementFrame* frame = nullptr;
  const Matrix* beta_hat = nullptr;  // I x (J+1), rows normalized
};

struct EnhancementCoefficients {
  Matrix affinity;          // I x J, f_rho
  std::vector<double> far;  // size J, f_omega in (0,1]
};

class EnhancementSource {
 public:
  virtual ~EnhancementSource() = default;
  virtual EnhancementCoefficients compute(const EnhancementInput& in) = 0;
};

// f_omega = 1 and f_rho = 0: enhanced messages coincide with plain BP bit for
// bit.
class IdentityEnhancement final : public EnhancementSource {
 public:
  EnhancementCoefficients compute(const EnhancementInput& in) override;
};

// ---------------------------------------------------------------------------
// Tracker
// ---------------------------------------------------------------------------

struct TrackerConfig {
  std::size_t particle_count = 10000;
  int bp_iterations = 20;
  double bp_tolerance = 1e-6;
  TrackManagerConfig manager;
  double gate_sq = kGateSqDefault;
  double ess_fraction = 0.5;           // resample when ESS < fraction * N
  double beta_hat_floor = 1e-12;       // guard for C = f_w + relu(f_rho)/beta_hat
  // Pull rate of a track's detection score toward its associated
  // measurements' scores. Slow on purpose: scores that jump step to step
  // fragment the recall sweep, scores frozen at birth keep first-frame noise.
  double score_ema = 0.25;
  bool collect_diagnostics = false;

  void validate() const;
};

struct StepDiagnostics {
  IterationStats bp;
  std::vector<double> existences;        // per surviving-and-new belief
  std::vector<double> marginal_sums;     // association marginal sums
  std::vector<double> weight_sums;       // particle weight sums
  std::size_t num_measurements = 0;
  std::size_t num_legacy_in = 0;
  std::size_t num_pruned = 0;
};

struct StepResult {
  std::vector<TrackEstimate> estimates;
  StepDiagnostics diagnostics;
};

class BpTracker {
 public:
  BpTracker(MotionModel motion, MeasurementModel measurement, TrackerConfig config,
            std::uint64_t seed);

  // Optional neural enhancement; null reverts to plain BP.
  void set_enhancer(std::shared_ptr<EnhancementSource> enhancer) {
    enhancer_ = std::move(enhancer);
  }

  StepResult step(const MeasurementFrame& frame);

  const std::vector<PotentialObject>& legacy() const { return legacy_; }
  const MotionModel& motion_model() const { return motion_; }
  const MeasurementModel& measurement_model() const { return measurement_; }

  // Hook for the training recorder: called after beta (and beta_hat) exist
  // but before messages are iterated.
  using PreIterationHook = void (*)(void* ctx, const EnhancementInput& in);
  void set_pre_iteration_hook(PreIterationHook hook, void* ctx) {
    hook_ = hook;
    hook_ctx_ = ctx;
  }

 private:
  MotionModel motion_;
  MeasurementModel measurement_;
  TrackerConfig config_;
  RngStream rng_;
  TrackIdAllocator ids_;
  std::vector<PotentialObject> legacy_;
  std::shared_ptr<EnhancementSource> enhancer_;
  PreIterationHook hook_ = nullptr;
  void* hook_ctx_ = nullptr;
};

// ---------------------------------------------------------------------------
// Standalone pieces used by the tracker (exposed for tests)
// ---------------------------------------------------------------------------

// Prior prediction: particles through the motion model, existence times p_s.
void predict(std::vector<PotentialObject>& legacy, const MotionModel& model,
             RngStream& rng);

// Weighted particle mean of the full state.
KinematicState weighted_mean(const ParticleSet& particles);

// Effective sample size of a normalized weight vector.
double effective_sample_size(const std::vector<double>& weights);

// Systematic resampling; weights become uniform.
void systematic_resample(ParticleSet& particles, RngStream& rng);

// Posterior update of one legacy PO from its pair cache and converged
// messages (eps_row has J entries in measurement order). Throws
// DegenerateInput when the total belief mass vanishes.
Belief update_legacy_belief(const PotentialObject& predicted, const BetaResult& beta,
                            const std::vector<double>& eps_row,
                            const MeasurementModel& model, double ess_fraction,
                            RngStream& rng);

// Posterior of one new PO; phi_col has I entries, birth_scale is the neural
// f_omega (1 when off).
Belief update_new_belief(const XiResult& xi, const std::vector<double>& phi_col,
                         double birth_scale, double ess_fraction, RngStream& rng);

struct DeclareResult {
  std::vector<TrackEstimate> estimates;
  std::vector<PotentialObject> survivors;  // promoted to legacy
};

DeclareResult declare_estimate_prune(std::vector<PotentialObject> pos,
                                     const TrackManagerConfig& cfg);

}  // namespace nebp
