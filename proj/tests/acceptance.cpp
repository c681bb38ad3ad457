// Acceptance harness. Each criterion is a standalone check printing exactly
// one PASS/FAIL line with its measured numbers; every tolerance and budget is
// pinned in this file. Run with a criterion key to check one, with no
// arguments to check all. Exit code 0 iff everything that ran passed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "nebp/bp.hpp"
#include "nebp/config.hpp"
#include "nebp/io.hpp"
#include "nebp/metrics.hpp"
#include "nebp/neural.hpp"
#include "nebp/pipeline.hpp"
#include "nebp/random.hpp"
#include "nebp/simulator.hpp"

namespace {

using namespace nebp;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// --- shared builders ---------------------------------------------------------

ParticleSet point_cloud(const KinematicState& at, std::size_t n) {
  ParticleSet ps;
  ps.resize(n);
  for (std::size_t p = 0; p < n; ++p) ps.set_state(p, at);
  for (double& w : ps.w) w = 1.0 / static_cast<double>(n);
  return ps;
}

// Random association instance with the structural xi form: ones except the
// birth column, which is 1 + mass. Beta entries are uniform over the ratio
// range where association is genuinely ambiguous; once one pair dominates by
// orders of magnitude the marginals concentrate and message passing matches
// the oracle trivially.
void random_instance(std::size_t num_objects, std::size_t num_measurements,
                     RngStream& rng, Matrix& beta, Matrix& xi) {
  beta = Matrix(num_objects, num_measurements + 1);
  for (double& v : beta.data) v = rng.uniform(0.05, 2.0);
  xi = Matrix(num_measurements, num_objects + 1, 1.0);
  for (std::size_t j = 0; j < num_measurements; ++j)
    xi.at(j, 0) = 1.0 + rng.uniform(0.05, 2.0);
}

double max_abs_diff(const AssociationMarginals& a, const AssociationMarginals& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.object.data.size(); ++k)
    worst = std::max(worst, std::fabs(a.object.data[k] - b.object.data[k]));
  for (std::size_t k = 0; k < a.measurement.data.size(); ++k)
    worst = std::max(worst, std::fabs(a.measurement.data[k] - b.measurement.data[k]));
  return worst;
}

// Largest per-row total-variation distance over both marginal tables.
double max_row_tv(const AssociationMarginals& a, const AssociationMarginals& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.object.rows; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.object.cols; ++c)
      s += std::fabs(a.object.at(i, c) - b.object.at(i, c));
    worst = std::max(worst, 0.5 * s);
  }
  for (std::size_t j = 0; j < a.measurement.rows; ++j) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.measurement.cols; ++c)
      s += std::fabs(a.measurement.at(j, c) - b.measurement.at(j, c));
    worst = std::max(worst, 0.5 * s);
  }
  return worst;
}

// --- criterion 1: exact marginals on tree-shaped instances -------------------

Outcome oracle_trees() {
  const auto t0 = Clock::now();
  RngStream rng(7, "acceptance");
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const std::size_t spread = 1 + static_cast<std::size_t>(k / 2) % 6;
    const std::size_t I = (k % 2 == 0) ? 1 : spread;
    const std::size_t J = (k % 2 == 0) ? spread : 1;
    Matrix beta, xi;
    random_instance(I, J, rng, beta, xi);
    auto problem = make_association_problem(beta, xi, 1000);
    iterate_association(problem, 1e-13);
    const auto bp = association_marginals(problem);
    const auto exact = exact_association_marginals(beta, xi);
    worst = std::max(worst, max_abs_diff(bp, exact));
  }
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = worst <= 1e-10 && elapsed < 5.0;
  o.detail = "200 instances, max deviation " + fmt(worst) + " (limit 1e-10), " +
             fmt(elapsed) + " s (budget 5)";
  return o;
}

// --- criterion 2: loopy marginals near the oracle ----------------------------

// Checked per instance, which is known to be out of reach for a small share
// of draws: fully converged loopy message passing overstates the winning
// association when several comparable pairings couple two or three objects,
// and that regime has about one percent mass under any instance law that
// covers ambiguity at all. The check stays strict rather than averaging it
// away; the detail line carries the whole picture.
Outcome oracle_loops() {
  const auto t0 = Clock::now();
  RngStream rng(11, "acceptance");
  double worst = 0.0, mean = 0.0;
  int worst_instance = -1, over_limit = 0;
  for (int k = 0; k < 500; ++k) {
    const std::size_t I = 2 + static_cast<std::size_t>(rng.uniform() * 2.0);
    const std::size_t J = 2 + static_cast<std::size_t>(rng.uniform() * 2.0);
    Matrix beta, xi;
    random_instance(I, J, rng, beta, xi);
    auto problem = make_association_problem(beta, xi, 2000);
    iterate_association(problem, 1e-10);
    const auto bp = association_marginals(problem);
    const auto exact = exact_association_marginals(beta, xi);
    const double tv = max_row_tv(bp, exact);
    mean += tv;
    if (tv > 0.05) ++over_limit;
    if (tv > worst) {
      worst = tv;
      worst_instance = k;
    }
  }
  mean /= 500.0;
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = worst <= 0.05 && elapsed < 30.0;
  o.detail = "500 instances, worst TV " + fmt(worst) + " at instance " +
             std::to_string(worst_instance) + " (limit 0.05), " +
             std::to_string(over_limit) + " over limit, mean TV " + fmt(mean) + ", " +
             fmt(elapsed) + " s (budget 30)";
  return o;
}

// --- criterion 3: identity enhancement reduces to plain BP -------------------

Outcome identity_reduction() {
  RunConfig cfg;
  cfg.seed = 42;
  cfg.finalize();  // defaults: 100 steps, 5 objects, clutter mean 10
  const auto data = generate_dataset(cfg, cfg.seed);
  const auto plain = run_tracking(data.frames, cfg, nullptr);
  const auto ident = run_tracking(
      data.frames, cfg, std::make_shared<NeuralEnhancer>(NeuralStack::make_identity()));
  std::ostringstream a, b;
  write_tracks(a, plain.estimates);
  write_tracks(b, ident.estimates);
  const bool same = a.str() == b.str();
  Outcome o;
  o.pass = same && plain.estimates.size() == 100;
  o.detail = std::to_string(a.str().size()) + "-byte track files " +
             (same ? "bitwise identical" : "DIFFER") + " over " +
             std::to_string(plain.estimates.size()) + " steps";
  return o;
}

// --- criterion 4: finite-difference gradient checks --------------------------

struct ParamRef {
  double* value;
  double* grad;
};

double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-6});
}

void collect_refs(Mlp& net, MlpGrads& grads, std::vector<ParamRef>& refs) {
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    for (std::size_t k = 0; k < net.weights(l).data.size(); ++k)
      refs.push_back({&net.weights(l).data[k], &grads.w[l].data[k]});
    for (std::size_t k = 0; k < net.biases(l).size(); ++k)
      refs.push_back({&net.biases(l)[k], &grads.b[l][k]});
  }
}

// Central differences at h = 1e-5 against the recorded analytic gradient for a
// random sample of parameters; the 1e-6 floor keeps near-zero slots from
// inflating the relative error beyond finite-difference resolution.
template <typename Objective>
double check_param_sample(std::vector<ParamRef>& refs, Objective&& objective,
                          RngStream& rng, int checks) {
  const double h = 1e-5;
  double worst = 0.0;
  for (int c = 0; c < checks; ++c) {
    const std::size_t idx =
        static_cast<std::size_t>(rng.uniform() * static_cast<double>(refs.size()));
    const double saved = *refs[idx].value;
    *refs[idx].value = saved + h;
    const double up = objective();
    *refs[idx].value = saved - h;
    const double down = objective();
    *refs[idx].value = saved;
    worst = std::max(worst, rel_err(*refs[idx].grad, (up - down) / (2.0 * h)));
  }
  return worst;
}

FrameSample random_pair_frame(RngStream& rng) {
  FrameSample frame;
  const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 3.0);
  for (std::size_t k = 0; k < n; ++k) {
    PairSample s;
    for (double& v : s.features.l_m) v = rng.uniform(-1.0, 1.0);
    for (double& v : s.features.l_b) v = rng.uniform(-1.0, 1.0);
    s.features.l_s.resize(kShapeDim);
    s.features.l_h.resize(kHeatDim);
    for (double& v : s.features.l_s) v = rng.uniform(-1.0, 1.0);
    for (double& v : s.features.l_h) v = rng.uniform(-1.0, 1.0);
    s.features.has_shape = true;
    s.features.has_heat = true;
    s.features.beta_hat = rng.uniform(0.05, 0.95);
    s.label = rng.uniform() < 0.5 ? 1 : 0;
    frame.pairs.push_back(std::move(s));
  }
  return frame;
}

FrameSample random_far_frame(RngStream& rng) {
  FrameSample frame;
  const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 3.0);
  for (std::size_t k = 0; k < n; ++k) {
    FarSample s;
    s.input.resize(kFarInputDim);
    for (double& v : s.input) v = rng.uniform(-1.0, 1.0);
    s.label = rng.uniform() < 0.5 ? 1 : 0;
    frame.fars.push_back(std::move(s));
  }
  return frame;
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  RngStream rng(13, "acceptance");
  double worst = 0.0;

  // the seven networks, 50 random evaluation points each
  auto stack = NeuralStack::make_default(13);
  Mlp* nets[] = {&stack.motion, &stack.box,      &stack.shape, &stack.heat,
                 &stack.weight, &stack.affinity, &stack.far};
  for (Mlp* net : nets) {
    for (int point = 0; point < 50; ++point) {
      std::vector<double> x(net->input_dim());
      for (double& v : x) v = rng.uniform(-1.5, 1.5);
      std::vector<double> cot(net->output_dim());
      for (double& v : cot) v = rng.uniform(-1.0, 1.0);

      auto grads = net->make_grads();
      Mlp::Tape tape;
      net->forward(x, tape);
      net->backward(tape, cot, grads);
      std::vector<ParamRef> refs;
      collect_refs(*net, grads, refs);
      auto objective = [&]() {
        const auto y = net->forward(x);
        double o = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) o += cot[i] * y[i];
        return o;
      };
      worst = std::max(worst, check_param_sample(refs, objective, rng, 4));
    }
  }

  // both losses through the full chain, 50 random frames each
  for (int mode = 0; mode < 2; ++mode) {
    for (int point = 0; point < 50; ++point) {
      const FrameSample frame =
          mode == 0 ? random_pair_frame(rng) : random_far_frame(rng);
      auto grads = make_stack_grads(stack);
      grads.zero();
      frame_loss_gradient(stack, frame, grads);
      std::vector<ParamRef> refs;
      if (mode == 0) {
        collect_refs(stack.motion, grads.motion, refs);
        collect_refs(stack.box, grads.box, refs);
        collect_refs(stack.shape, grads.shape, refs);
        collect_refs(stack.heat, grads.heat, refs);
        collect_refs(stack.weight, grads.weight, refs);
        collect_refs(stack.affinity, grads.affinity, refs);
      } else {
        collect_refs(stack.far, grads.far, refs);
      }
      auto objective = [&]() { return frame_loss(stack, frame); };
      worst = std::max(worst, check_param_sample(refs, objective, rng, 4));
    }
  }

  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = worst <= 1e-4 && elapsed < 60.0;
  o.detail = "7 networks + 2 losses, worst relative error " + fmt(worst) +
             " (limit 1e-4), " + fmt(elapsed) + " s (budget 60)";
  return o;
}

// --- criterion 5: probability-mass conservation ------------------------------

Outcome conservation() {
  RunConfig cfg;
  cfg.seed = 5;
  cfg.scenario.initial_objects = 10;
  cfg.scenario.duration = 100;
  cfg.measurement.clutter_mean = 20.0;
  cfg.finalize();
  const auto data = generate_dataset(cfg, cfg.seed);
  const auto run = run_tracking(data.frames, cfg, nullptr, true);

  double worst_marginal = 0.0, worst_weight = 0.0;
  double min_e = 1.0, max_e = 0.0;
  std::size_t beliefs = 0;
  for (const StepDiagnostics& d : run.diagnostics) {
    for (double s : d.marginal_sums)
      worst_marginal = std::max(worst_marginal, std::fabs(s - 1.0));
    for (double s : d.weight_sums)
      worst_weight = std::max(worst_weight, std::fabs(s - 1.0));
    for (double e : d.existences) {
      min_e = std::min(min_e, e);
      max_e = std::max(max_e, e);
      ++beliefs;
    }
  }
  Outcome o;
  o.pass = worst_marginal <= 1e-9 && worst_weight <= 1e-9 && min_e >= 0.0 &&
           max_e <= 1.0 && beliefs > 0;
  o.detail = std::to_string(beliefs) + " beliefs, worst |marginal sum - 1| " +
             fmt(worst_marginal) + ", worst |weight sum - 1| " + fmt(worst_weight) +
             " (limits 1e-9), existence in [" + fmt(min_e) + ", " + fmt(max_e) + "]";
  return o;
}

// --- criterion 6: closed-form posterior with no measurements -----------------

Outcome posterior_closed_form() {
  RngStream rng(17, "acceptance");
  double worst = 0.0;
  for (double e : {0.1, 0.37, 0.6, 0.9, 0.999}) {
    for (double pd : {0.3, 0.9, 0.99}) {
      MeasurementModel model;
      model.detection_prob = pd;
      model.finalize();
      PotentialObject po;
      po.existence = e;
      po.particles = point_cloud({{1.0, -2.0}, {0.5, 0.0}, {0.0, 0.0}}, 16);
      const MeasurementFrame empty;
      const auto beta = compute_beta(po, empty, model, kGateSqDefault);
      const auto belief = update_legacy_belief(po, beta, {}, model, 0.5, rng);
      const double analytic = e * (1.0 - pd) / (1.0 - e * pd);
      worst = std::max(worst, std::fabs(belief.existence - analytic));
    }
  }
  Outcome o;
  o.pass = worst <= 1e-9;
  o.detail = "15 (existence, detection) pairs, worst deviation " + fmt(worst) +
             " (limit 1e-9)";
  return o;
}

// --- criterion 7: end-to-end quality against the greedy baseline -------------

Outcome tracking_quality() {
  const auto t0 = Clock::now();
  RunConfig cfg;
  cfg.measurement.detection_prob = 0.95;
  cfg.measurement.clutter_mean = 5.0;
  cfg.scenario.initial_objects = 5;
  cfg.scenario.duration = 100;

  std::size_t good_steps = 0, total_steps = 0;
  double bp_gospa = 0.0, greedy_gospa = 0.0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    cfg.seed = 700 + static_cast<std::uint64_t>(s);
    cfg.finalize();
    const auto data = generate_dataset(cfg, cfg.seed);
    const auto truth = truth_frames(data.scenario);

    const auto bp = run_tracking(data.frames, cfg, nullptr);
    GreedyConfig gc;
    gc.dt = cfg.motion.dt;
    const auto greedy = run_greedy(data.frames, gc);

    for (std::size_t t = 0; t < truth.size(); ++t) {
      const auto have = static_cast<long>(bp.estimates[t].size());
      const auto want = static_cast<long>(truth[t].size());
      if (std::labs(have - want) <= 1) ++good_steps;
      ++total_steps;
    }
    bp_gospa += gospa(to_track_frames(bp.estimates), truth, 5.0, 1.0).mean.total;
    greedy_gospa +=
        gospa(to_track_frames(greedy.estimates), truth, 5.0, 1.0).mean.total;
  }
  bp_gospa /= seeds;
  greedy_gospa /= seeds;
  const double frac = static_cast<double>(good_steps) / static_cast<double>(total_steps);
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = frac >= 0.90 && bp_gospa <= 0.70 * greedy_gospa && elapsed < 300.0;
  o.detail = "cardinality within +-1 in " + fmt(100.0 * frac) +
             "% of steps (need 90), mean GOSPA " + fmt(bp_gospa) + " vs greedy " +
             fmt(greedy_gospa) + " (need <= " + fmt(0.70 * greedy_gospa) + "), " +
             fmt(elapsed) + " s (budget 300)";
  return o;
}

// --- criterion 8: the learned enhancement helps ------------------------------

Outcome learning_signal() {
  const auto t0 = Clock::now();
  RunConfig cfg;
  cfg.seed = 900;
  cfg.measurement.clutter_mean = 30.0;
  cfg.scenario.initial_objects = 5;
  cfg.scenario.duration = 60;
  cfg.tracker.particle_count = 2500;
  cfg.training.scenarios = 50;
  cfg.finalize();

  const TrainOutput trained = train_pipeline(cfg);

  NeuralStack initial = NeuralStack::make_default(cfg.seed);
  initial.u = cfg.training.far_weight;

  const int held_out = 5;
  double loss_initial = 0.0, loss_trained = 0.0;
  double amota_bp = 0.0, amota_nebp = 0.0;
  for (int s = 0; s < held_out; ++s) {
    const std::uint64_t seed = cfg.seed + 1000000 + static_cast<std::uint64_t>(s);
    RunConfig held = cfg;
    held.seed = seed;
    held.finalize();
    const auto data = generate_dataset(held, seed);
    const auto rec = record_training_data(data, held, seed);
    loss_initial += mean_loss(initial, rec);
    loss_trained += mean_loss(trained.stack, rec);

    const auto truth = truth_frames(data.scenario);
    const auto bp = run_tracking(data.frames, held, nullptr);
    const auto nebp = run_tracking(
        data.frames, held, std::make_shared<NeuralEnhancer>(trained.stack));
    amota_bp += amota_simplified(to_track_frames(bp.estimates), truth,
                                 cfg.metrics.amota).amota;
    amota_nebp += amota_simplified(to_track_frames(nebp.estimates), truth,
                                   cfg.metrics.amota).amota;
  }
  loss_initial /= held_out;
  loss_trained /= held_out;
  amota_bp /= held_out;
  amota_nebp /= held_out;

  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = loss_trained < loss_initial && amota_nebp >= amota_bp && elapsed < 900.0;
  o.detail = "held-out loss " + fmt(loss_trained) + " vs initial " + fmt(loss_initial) +
             " (need lower), AMOTA " + fmt(amota_nebp) + " vs plain " + fmt(amota_bp) +
             " (need >=), " + fmt(elapsed) + " s (budget 900)";
  return o;
}

// --- criterion 9: loss hand values -------------------------------------------

Outcome loss_unit_values() {
  double worst = 0.0;
  auto check = [&worst](double got, double want) {
    worst = std::max(worst, std::fabs(got - want));
  };
  const double ln2 = std::log(2.0);
  // one positive pair at zero score: -ln sigma(0)
  check(loss_affinity({0.0}, {1}), ln2);
  // a coefficient of one half in either class
  check(loss_far({0.5}, {1}, 0.5), ln2);
  // u = 0 removes the second false-alarm term entirely
  check(loss_far({0.5, 0.9}, {1, 0}, 0.0), ln2);
  // per-class normalization makes duplicates free
  check(loss_far({0.7, 0.7}, {1, 1}, 0.5) - loss_far({0.7}, {1}, 0.5), 0.0);
  check(loss_affinity({1.0, -0.7, -0.7, -0.7}, {1, 0, 0, 0}) -
            loss_affinity({1.0, -0.7}, {1, 0}),
        0.0);
  Outcome o;
  o.pass = worst <= 1e-12;
  o.detail = "5 hand cases, worst deviation " + fmt(worst) + " (limit 1e-12)";
  return o;
}

// --- driver ------------------------------------------------------------------

struct Criterion {
  const char* key;
  Outcome (*run)();
};

constexpr Criterion kCriteria[] = {
    {"oracle-trees", oracle_trees},
    {"oracle-loops", oracle_loops},
    {"identity-reduction", identity_reduction},
    {"gradient-suite", gradient_suite},
    {"conservation", conservation},
    {"posterior-closed-form", posterior_closed_form},
    {"tracking-quality", tracking_quality},
    {"learning-signal", learning_signal},
    {"loss-unit-values", loss_unit_values},
};

}  // namespace

int main(int argc, char** argv) {
  bool all_pass = true;
  bool matched = false;
  for (const Criterion& c : kCriteria) {
    if (argc > 1 && std::strcmp(argv[1], c.key) != 0) continue;
    matched = true;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.key << ": " << o.detail << "\n";
    all_pass = all_pass && o.pass;
  }
  if (!matched) {
    std::cerr << "unknown criterion '" << argv[1] << "'; known:";
    for (const Criterion& c : kCriteria) std::cerr << " " << c.key;
    std::cerr << "\n";
    return 2;
  }
  return all_pass ? 0 : 1;
}
