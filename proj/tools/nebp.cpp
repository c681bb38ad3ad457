// Command-line surface: simulate, track, train, eval, compare, import.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nebp/config.hpp"
#include "nebp/io.hpp"
#include "nebp/pipeline.hpp"

namespace {

using namespace nebp;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> particles;
  std::optional<int> iters;
  std::optional<std::string> neural;  // "off" / "on"
  std::optional<std::string> weights;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON run configuration");
  cmd->add_option("--seed", f.seed, "master seed override");
  cmd->add_option("--particles", f.particles, "particle count override");
  cmd->add_option("--iters", f.iters, "message iteration override");
  cmd->add_option("--neural", f.neural, "enhancement: off or on")
      ->check(CLI::IsMember({"off", "on"}));
  cmd->add_option("--weights", f.weights, "weight file override");
}

RunConfig resolve_config(const CommonFlags& f) {
  RunConfig cfg;
  if (!f.config_path.empty()) {
    cfg = load_config_file(f.config_path);
  } else {
    cfg.finalize();
  }
  if (f.seed) cfg.seed = *f.seed;
  if (f.particles) cfg.tracker.particle_count = *f.particles;
  if (f.iters) cfg.tracker.bp_iterations = *f.iters;
  if (f.neural) cfg.neural = *f.neural == "on";
  if (f.weights) cfg.weights_path = *f.weights;
  cfg.finalize();
  return cfg;
}

std::shared_ptr<EnhancementSource> make_enhancer(const RunConfig& cfg, bool use_affinity,
                                                 bool use_far) {
  if (!cfg.neural) return nullptr;
  NeuralStack stack = cfg.weights_path.empty() ? NeuralStack::make_identity()
                                               : load_weights_file(cfg.weights_path);
  return std::make_shared<NeuralEnhancer>(std::move(stack), use_affinity, use_far);
}

template <typename Writer>
void write_file(const std::string& path, Writer&& writer) {
  std::ostringstream ss;
  writer(ss);
  write_text_file(path, ss.str());
}

int cmd_simulate(const CommonFlags& flags, const std::string& out_dir) {
  const RunConfig cfg = resolve_config(flags);
  const GeneratedScenario data = generate_dataset(cfg, cfg.seed);
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  write_file((dir / "scenario.txt").string(),
             [&](std::ostream& os) { write_scenario(os, data.scenario); });
  write_file((dir / "frames.txt").string(),
             [&](std::ostream& os) { write_frames(os, data.frames); });
  write_file((dir / "labels.txt").string(),
             [&](std::ostream& os) { write_labels(os, data.labels); });
  std::cout << "wrote scenario (" << data.scenario.trajectories.size() << " objects, "
            << data.scenario.cfg.duration << " steps) to " << out_dir << "\n";
  return 0;
}

int cmd_track(const CommonFlags& flags, const std::string& frames_path,
              const std::string& out_path) {
  const RunConfig cfg = resolve_config(flags);
  std::ifstream is(frames_path);
  if (!is) throw InputError("cannot open: " + frames_path);
  const std::vector<MeasurementFrame> frames = read_frames(is);
  const TrackingRun run = run_tracking(frames, cfg, make_enhancer(cfg, true, true));
  write_file(out_path, [&](std::ostream& os) { write_tracks(os, run.estimates); });
  std::size_t total = 0;
  for (const auto& step : run.estimates) total += step.size();
  std::cout << "tracked " << frames.size() << " frames, " << total
            << " declared estimates -> " << out_path << "\n";
  return 0;
}

int cmd_train(const CommonFlags& flags, const std::string& out_path,
              const std::string& loss_path) {
  const RunConfig cfg = resolve_config(flags);
  const TrainOutput out = train_pipeline(cfg);
  save_weights_file(out_path, out.stack);
  if (!loss_path.empty())
    write_file(loss_path, [&](std::ostream& os) { write_loss_curve(os, out.epoch_loss); });
  std::cout << "trained on " << cfg.training.scenarios << " scenarios: loss "
            << out.initial_loss << " -> " << out.final_loss << ", weights -> " << out_path
            << "\n";
  return 0;
}

int cmd_eval(const CommonFlags& flags, const std::string& tracks_path,
             const std::string& scenario_path, const std::string& out_path) {
  const RunConfig cfg = resolve_config(flags);
  std::ifstream ts(tracks_path);
  if (!ts) throw InputError("cannot open: " + tracks_path);
  const auto tracks = read_tracks(ts);
  std::ifstream ss(scenario_path);
  if (!ss) throw InputError("cannot open: " + scenario_path);
  const Scenario scenario = read_scenario(ss);

  TrackingRun run;
  run.estimates = tracks;
  const MetricReport rep = evaluate_run(run, scenario, cfg.metrics);
  const std::vector<MetricRow> rows{{"tracks", rep}};
  if (!out_path.empty())
    write_file(out_path, [&](std::ostream& os) { write_metric_table(os, rows); });
  std::cout << render_metric_table(rows);
  return 0;
}

int cmd_compare(const CommonFlags& flags, int suite, const std::string& out_path) {
  RunConfig cfg = resolve_config(flags);
  if (cfg.weights_path.empty())
    throw InputError("compare needs --weights (train first)");
  const NeuralStack stack = load_weights_file(cfg.weights_path);
  cfg.neural = true;

  struct Arm {
    const char* name;
    std::shared_ptr<EnhancementSource> enhancer;
  };
  const std::vector<Arm> arms{
      {"bp", nullptr},
      {"nebp-affinity", std::make_shared<NeuralEnhancer>(stack, true, false)},
      {"nebp-far", std::make_shared<NeuralEnhancer>(stack, false, true)},
      {"nebp-full", std::make_shared<NeuralEnhancer>(stack, true, true)},
  };

  std::vector<MetricRow> rows;
  for (const Arm& arm : arms) rows.push_back({arm.name, {}});
  // Held-out seeds, disjoint from the training range by a wide margin.
  for (int s = 0; s < suite; ++s) {
    const std::uint64_t seed = cfg.seed + 1000000 + static_cast<std::uint64_t>(s);
    const GeneratedScenario data = generate_dataset(cfg, seed);
    for (std::size_t a = 0; a < arms.size(); ++a) {
      const MetricReport rep =
          evaluate_run(run_tracking(data.frames, cfg, arms[a].enhancer), data.scenario,
                       cfg.metrics);
      rows[a].report.amota += rep.amota / suite;
      rows[a].report.amotp += rep.amotp / suite;
      rows[a].report.id_switches += rep.id_switches;
      rows[a].report.gospa.mean.total += rep.gospa.mean.total / suite;
      rows[a].report.gospa.mean.localization += rep.gospa.mean.localization / suite;
      rows[a].report.gospa.mean.missed += rep.gospa.mean.missed / suite;
      rows[a].report.gospa.mean.false_alarm += rep.gospa.mean.false_alarm / suite;
    }
  }
  if (!out_path.empty())
    write_file(out_path, [&](std::ostream& os) { write_metric_table(os, rows); });
  std::cout << render_metric_table(rows);
  return 0;
}

// Converter stub: whitespace records "step x y vx vy [score]" become a frames
// file with empty feature vectors.
int cmd_import(const std::string& in_path, const std::string& out_path) {
  std::ifstream is(in_path);
  if (!is) throw InputError("cannot open: " + in_path);
  std::vector<MeasurementFrame> frames;
  std::string line;
  std::size_t record = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    ++record;
    std::istringstream ls(line);
    int step = 0;
    Measurement z;
    if (!(ls >> step >> z.kin[0] >> z.kin[1] >> z.kin[2] >> z.kin[3]))
      throw ParseError("expected 'step x y vx vy [score]'", record);
    if (!(ls >> z.score)) z.score = 0.5;
    if (step < 0) throw ParseError("negative step", record);
    while (frames.size() <= static_cast<std::size_t>(step)) {
      MeasurementFrame f;
      f.step = static_cast<int>(frames.size());
      frames.push_back(std::move(f));
    }
    frames[static_cast<std::size_t>(step)].measurements.push_back(std::move(z));
  }
  write_file(out_path, [&](std::ostream& os) { write_frames(os, frames); });
  std::cout << "imported " << record << " detections over " << frames.size()
            << " frames -> " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Belief-propagation multiobject tracker with neural enhancement"};
  app.require_subcommand(1);
  bool print_default = false;
  app.add_flag("--default-config", print_default,
               "print the default configuration and exit");

  CommonFlags sim_flags, track_flags, train_flags, eval_flags, cmp_flags;
  std::string sim_out = "out";
  auto* sim = app.add_subcommand("simulate", "generate a scenario and detector frames");
  add_common(sim, sim_flags);
  sim->add_option("--out", sim_out, "output directory");

  std::string track_frames, track_out = "tracks.txt";
  auto* track = app.add_subcommand("track", "run the tracker over recorded frames");
  add_common(track, track_flags);
  track->add_option("--frames", track_frames, "frames file")->required();
  track->add_option("--out", track_out, "track file");

  std::string train_out = "weights.bin", train_loss;
  auto* train = app.add_subcommand("train", "train the enhancement networks");
  add_common(train, train_flags);
  train->add_option("--out", train_out, "weight file");
  train->add_option("--loss-curve", train_loss, "loss curve file");

  std::string eval_tracks, eval_scenario, eval_out;
  auto* eval = app.add_subcommand("eval", "score a track file against a scenario");
  add_common(eval, eval_flags);
  eval->add_option("--tracks", eval_tracks, "track file")->required();
  eval->add_option("--scenario", eval_scenario, "scenario file")->required();
  eval->add_option("--out", eval_out, "metric table file");

  int cmp_suite = 5;
  std::string cmp_out;
  auto* cmp = app.add_subcommand("compare", "ablation table: bp vs enhancement arms");
  add_common(cmp, cmp_flags);
  cmp->add_option("--suite", cmp_suite, "held-out scenario count")
      ->check(CLI::PositiveNumber);
  cmp->add_option("--out", cmp_out, "metric table file");

  std::string import_in, import_out = "frames.txt";
  auto* imp = app.add_subcommand("import", "convert external detections to a frames file");
  imp->add_option("--in", import_in, "detection file: step x y vx vy [score]")->required();
  imp->add_option("--out", import_out, "frames file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (print_default) {
      std::cout << default_config_text();
      return 0;
    }
    if (sim->parsed()) return cmd_simulate(sim_flags, sim_out);
    if (track->parsed()) return cmd_track(track_flags, track_frames, track_out);
    if (train->parsed()) return cmd_train(train_flags, train_out, train_loss);
    if (eval->parsed()) return cmd_eval(eval_flags, eval_tracks, eval_scenario, eval_out);
    if (cmp->parsed()) return cmd_compare(cmp_flags, cmp_suite, cmp_out);
    if (imp->parsed()) return cmd_import(import_in, import_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
