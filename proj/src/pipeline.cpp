#include "nebp/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

namespace nebp {
namespace {

double dist2d(const std::array<double, 2>& a, const std::array<double, 2>& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  return std::sqrt(dx * dx + dy * dy);
}

// Greedy one-to-one matching over globally sorted candidate distances.
std::vector<int> greedy_match(const std::vector<std::array<double, 2>>& left,
                              const std::vector<std::array<double, 2>>& right,
                              double gate) {
  struct Cand {
    double d;
    std::size_t i, j;
  };
  std::vector<Cand> cands;
  for (std::size_t i = 0; i < left.size(); ++i)
    for (std::size_t j = 0; j < right.size(); ++j) {
      const double d = dist2d(left[i], right[j]);
      if (d <= gate) cands.push_back({d, i, j});
    }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.d != b.d) return a.d < b.d;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  std::vector<int> left_to_right(left.size(), -1);
  std::vector<char> taken(right.size(), 0);
  for (const Cand& c : cands) {
    if (left_to_right[c.i] >= 0 || taken[c.j]) continue;
    left_to_right[c.i] = static_cast<int>(c.j);
    taken[c.j] = 1;
  }
  return left_to_right;
}

}  // namespace

// --- greedy baseline ---------------------------------------------------------

void GreedyConfig::validate() const {
  if (!(gate > 0.0)) throw InputError("greedy gate must be positive");
  if (confirm_hits < 1) throw InputError("confirmation needs at least one hit");
  if (max_misses < 0) throw InputError("miss budget must be non-negative");
  if (!(dt > 0.0)) throw InputError("step period must be positive");
}

GreedyTracker::GreedyTracker(GreedyConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::vector<TrackEstimate> GreedyTracker::step(const MeasurementFrame& frame) {
  for (Track& t : tracks_) {
    t.state.pos[0] += cfg_.dt * t.state.vel[0];
    t.state.pos[1] += cfg_.dt * t.state.vel[1];
  }
  std::vector<std::array<double, 2>> track_pos, meas_pos;
  track_pos.reserve(tracks_.size());
  for (const Track& t : tracks_) track_pos.push_back(t.state.pos);
  meas_pos.reserve(frame.measurements.size());
  for (const Measurement& z : frame.measurements) meas_pos.push_back({z.kin[0], z.kin[1]});
  const std::vector<int> match = greedy_match(track_pos, meas_pos, cfg_.gate);

  std::vector<char> used(frame.measurements.size(), 0);
  for (std::size_t i = 0; i < tracks_.size(); ++i) {
    Track& t = tracks_[i];
    if (match[i] >= 0) {
      const Measurement& z = frame.measurements[static_cast<std::size_t>(match[i])];
      t.state.pos = {z.kin[0], z.kin[1]};
      t.state.vel = {z.kin[2], z.kin[3]};
      t.score = z.score;
      ++t.hits;
      t.misses = 0;
      used[static_cast<std::size_t>(match[i])] = 1;
    } else {
      ++t.misses;
    }
  }
  tracks_.erase(std::remove_if(tracks_.begin(), tracks_.end(),
                               [this](const Track& t) { return t.misses > cfg_.max_misses; }),
                tracks_.end());
  for (std::size_t j = 0; j < frame.measurements.size(); ++j) {
    if (used[j]) continue;
    const Measurement& z = frame.measurements[j];
    Track t;
    t.id = ids_.next();
    t.state.pos = {z.kin[0], z.kin[1]};
    t.state.vel = {z.kin[2], z.kin[3]};
    t.score = z.score;
    t.hits = 1;
    tracks_.push_back(std::move(t));
  }

  std::vector<TrackEstimate> out;
  for (const Track& t : tracks_) {
    if (t.hits < cfg_.confirm_hits || t.misses > 0) continue;
    out.push_back({t.id, t.state, t.score});
  }
  return out;
}

// --- tracking runs -----------------------------------------------------------

TrackingRun run_tracking(const std::vector<MeasurementFrame>& frames,
                         const RunConfig& cfg,
                         std::shared_ptr<EnhancementSource> enhancer,
                         bool collect_diagnostics) {
  TrackerConfig tc = cfg.tracker;
  tc.collect_diagnostics = collect_diagnostics;
  BpTracker tracker(cfg.motion, cfg.measurement, tc, cfg.seed);
  if (enhancer) tracker.set_enhancer(std::move(enhancer));
  TrackingRun run;
  run.estimates.reserve(frames.size());
  for (const MeasurementFrame& frame : frames) {
    StepResult res = tracker.step(frame);
    run.estimates.push_back(std::move(res.estimates));
    if (collect_diagnostics) run.diagnostics.push_back(std::move(res.diagnostics));
  }
  return run;
}

TrackingRun run_greedy(const std::vector<MeasurementFrame>& frames,
                       const GreedyConfig& cfg) {
  GreedyTracker tracker(cfg);
  TrackingRun run;
  run.estimates.reserve(frames.size());
  for (const MeasurementFrame& frame : frames) run.estimates.push_back(tracker.step(frame));
  return run;
}

std::vector<TrackFrame> to_track_frames(
    const std::vector<std::vector<TrackEstimate>>& estimates) {
  std::vector<TrackFrame> out;
  out.reserve(estimates.size());
  for (const std::vector<TrackEstimate>& step : estimates) {
    TrackFrame f;
    f.reserve(step.size());
    for (const TrackEstimate& e : step)
      f.push_back({e.track_id, {e.state.pos[0], e.state.pos[1]}, e.report_score});
    out.push_back(std::move(f));
  }
  return out;
}

MetricReport evaluate_run(const TrackingRun& run, const Scenario& scenario,
                          const MetricsConfig& metrics) {
  return evaluate_tracking(to_track_frames(run.estimates), truth_frames(scenario),
                           metrics.gospa_cutoff, metrics.gospa_order, metrics.amota);
}

// --- dataset generation ------------------------------------------------------

GeneratedScenario generate_dataset(const RunConfig& cfg, std::uint64_t seed) {
  GeneratedScenario out;
  RngStream srng(seed, "scenario");
  out.scenario = generate_scenario(cfg.scenario, srng);
  RngStream drng(seed, "detector");
  out.frames.reserve(static_cast<std::size_t>(cfg.scenario.duration));
  out.labels.resize(static_cast<std::size_t>(cfg.scenario.duration));
  for (int k = 0; k < cfg.scenario.duration; ++k)
    out.frames.push_back(emulate_detector(out.scenario, k, cfg.measurement, cfg.detector,
                                          drng, &out.labels[static_cast<std::size_t>(k)]));
  return out;
}

// --- training ----------------------------------------------------------------

namespace {

// Builds one FrameSample from the tracker's pre-iteration snapshot.
struct Recorder {
  const GeneratedScenario* data = nullptr;
  double align_gate = 2.0;
  std::size_t offgate_pairs = 8;
  RngStream rng;
  TrainingData samples;

  void record(const EnhancementInput& in) {
    const std::size_t I = in.legacy->size();
    const std::size_t J = in.frame->measurements.size();
    if (J == 0) return;
    const std::size_t step = static_cast<std::size_t>(in.frame->step);
    const std::vector<std::int64_t>& source = data->labels[step].source;

    // Truth positions of this step, aligned greedily against predicted POs.
    std::vector<std::array<double, 2>> truth_pos;
    std::vector<std::int64_t> truth_id;
    for (const Trajectory& t : data->scenario.trajectories) {
      if (!t.alive(in.frame->step)) continue;
      const KinematicState& x = t.state_at(in.frame->step);
      truth_pos.push_back({x.pos[0], x.pos[1]});
      truth_id.push_back(static_cast<std::int64_t>(t.truth_id));
    }
    std::vector<std::array<double, 2>> po_pos;
    po_pos.reserve(I);
    for (std::size_t i = 0; i < I; ++i)
      po_pos.push_back({(*in.legacy_motion)[i][0], (*in.legacy_motion)[i][1]});
    const std::vector<int> aligned = greedy_match(po_pos, truth_pos, align_gate);

    FrameSample sample;
    std::vector<std::int64_t> po_truth(I);
    std::vector<std::array<std::size_t, 2>> off;
    for (std::size_t i = 0; i < I; ++i) {
      po_truth[i] = aligned[i] >= 0 ? truth_id[static_cast<std::size_t>(aligned[i])] : -1;
      for (std::size_t j = 0; j < J; ++j) {
        // Gated pairs carry a message for the coefficient to scale; recording
        // every ungated pair would flood the loss (and memory) with vacuous
        // negatives, so those are only subsampled below.
        if (!(in.beta_hat->at(i, j + 1) > 0.0)) {
          off.push_back({i, j});
          continue;
        }
        PairSample p;
        p.features = make_pair_features((*in.legacy)[i], (*in.legacy_motion)[i],
                                        in.frame->measurements[j],
                                        in.beta_hat->at(i, j + 1));
        p.label = (po_truth[i] >= 0 && source[j] == po_truth[i]) ? 1 : 0;
        sample.pairs.push_back(std::move(p));
      }
    }
    // A few ungated pairs per frame anchor the negative side of the affinity
    // scores; gating alone leaves almost no negatives to learn from.
    const std::size_t take = std::min(offgate_pairs, off.size());
    for (std::size_t k = 0; k < take; ++k) {
      const std::size_t pick =
          k + static_cast<std::size_t>(rng.uniform() * static_cast<double>(off.size() - k));
      std::swap(off[k], off[pick]);
      const auto [i, j] = off[k];
      PairSample p;
      p.features = make_pair_features((*in.legacy)[i], (*in.legacy_motion)[i],
                                      in.frame->measurements[j], 0.0);
      p.label = (po_truth[i] >= 0 && source[j] == po_truth[i]) ? 1 : 0;
      sample.pairs.push_back(std::move(p));
    }
    sample.fars.reserve(J);
    for (std::size_t j = 0; j < J; ++j) {
      FarSample f;
      f.input = far_input(in.frame->measurements[j]);
      f.label = source[j] >= 0 ? 1 : 0;
      sample.fars.push_back(std::move(f));
    }
    samples.push_back(std::move(sample));
  }

  static void hook(void* ctx, const EnhancementInput& in) {
    static_cast<Recorder*>(ctx)->record(in);
  }
};

}  // namespace

TrainingData record_training_data(const GeneratedScenario& data, const RunConfig& cfg,
                                  std::uint64_t tracker_seed) {
  Recorder rec;
  rec.data = &data;
  rec.align_gate = cfg.training.align_gate;
  rec.offgate_pairs = static_cast<std::size_t>(cfg.training.offgate_pairs);
  rec.rng = RngStream(tracker_seed, "recorder");
  BpTracker tracker(cfg.motion, cfg.measurement, cfg.tracker, tracker_seed);
  tracker.set_pre_iteration_hook(&Recorder::hook, &rec);
  for (const MeasurementFrame& frame : data.frames) tracker.step(frame);
  return std::move(rec.samples);
}

TrainOutput train_pipeline(const RunConfig& cfg) {
  TrainingData all;
  for (int i = 0; i < cfg.training.scenarios; ++i) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
    const GeneratedScenario data = generate_dataset(cfg, seed);
    TrainingData part = record_training_data(data, cfg, seed);
    all.insert(all.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  TrainOutput out;
  out.stack = NeuralStack::make_default(cfg.seed);
  out.stack.u = cfg.training.far_weight;
  out.initial_loss = mean_loss(out.stack, all);
  OptimizerConfig opt = cfg.training.optimizer;
  opt.seed = cfg.seed;
  const TrainResult res = train(out.stack, all, opt);
  out.epoch_loss = res.epoch_loss;
  out.final_loss = mean_loss(out.stack, all);
  return out;
}

}  // namespace nebp
