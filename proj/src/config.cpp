#include "nebp/config.hpp"

#include <functional>
#include <map>

#include "json.hpp"
#include "nebp/io.hpp"

namespace nebp {
namespace {

using nlohmann::json;

// Applies the per-key handlers of one JSON object and rejects leftovers.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw InputError("config section '" + name_ + "' must be an object");
  }

  void number(const char* key, double& out) {
    handlers_[key] = [&out, this, key](const json& v) {
      if (!v.is_number()) bad_type(key, "a number");
      out = v.get<double>();
    };
  }

  void integer(const char* key, int& out) {
    handlers_[key] = [&out, this, key](const json& v) {
      if (!v.is_number_integer()) bad_type(key, "an integer");
      out = v.get<int>();
    };
  }

  void size(const char* key, std::size_t& out) {
    handlers_[key] = [&out, this, key](const json& v) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
        bad_type(key, "a non-negative integer");
      out = static_cast<std::size_t>(v.get<std::int64_t>());
    };
  }

  void seed(const char* key, std::uint64_t& out) {
    handlers_[key] = [&out, this, key](const json& v) {
      if (!v.is_number_unsigned() && !v.is_number_integer()) bad_type(key, "an integer");
      out = v.get<std::uint64_t>();
    };
  }

  void text(const char* key, std::string& out) {
    handlers_[key] = [&out, this, key](const json& v) {
      if (!v.is_string()) bad_type(key, "a string");
      out = v.get<std::string>();
    };
  }

  void on_off(const char* key, bool& out) {
    handlers_[key] = [&out, this, key](const json& v) {
      if (!v.is_string() || (v != "on" && v != "off"))
        bad_type(key, "\"on\" or \"off\"");
      out = v == "on";
    };
  }

  void object(const char* key, std::function<void(const json&)> fn) {
    handlers_[key] = std::move(fn);
  }

  void apply() {
    for (const auto& [key, value] : j_.items()) {
      const auto it = handlers_.find(key);
      if (it == handlers_.end())
        throw InputError("unknown config key '" + name_ + "." + key + "'");
      it->second(value);
    }
  }

 private:
  [[noreturn]] void bad_type(const char* key, const char* what) {
    throw InputError("config key '" + name_ + "." + std::string(key) + "' must be " + what);
  }

  const json& j_;
  std::string name_;
  std::map<std::string, std::function<void(const json&)>> handlers_;
};

void parse_motion(const json& j, MotionModel& m) {
  Section s(j, "motion");
  s.number("dt", m.dt);
  s.number("accel_noise_std", m.accel_noise_std);
  s.number("survival_prob", m.survival_prob);
  s.apply();
}

void parse_measurement(const json& j, RunConfig& cfg) {
  Section s(j, "measurement");
  s.number("detection_prob", cfg.measurement.detection_prob);
  s.number("noise_std_pos", cfg.noise_std_pos);
  s.number("noise_std_vel", cfg.noise_std_vel);
  s.number("clutter_mean", cfg.measurement.clutter_mean);
  s.number("birth_mean", cfg.measurement.birth_mean);
  s.number("roi_half_width", cfg.measurement.roi_half_width);
  s.number("clutter_vmax", cfg.measurement.clutter_vmax);
  s.number("birth_accel_std", cfg.measurement.birth_accel_std);
  s.apply();
}

void parse_tracker(const json& j, TrackerConfig& t) {
  Section s(j, "tracker");
  s.size("particles", t.particle_count);
  s.integer("iterations", t.bp_iterations);
  s.number("tolerance", t.bp_tolerance);
  s.number("declare_threshold", t.manager.declare_threshold);
  s.number("prune_threshold", t.manager.prune_threshold);
  s.number("gate_sq", t.gate_sq);
  s.number("ess_fraction", t.ess_fraction);
  s.apply();
}

void parse_scenario(const json& j, ScenarioConfig& c) {
  Section s(j, "scenario");
  s.integer("duration", c.duration);
  s.size("initial_objects", c.initial_objects);
  s.number("birth_rate", c.birth_rate);
  s.number("survival_prob", c.survival_prob);
  s.number("spawn_half_width", c.spawn_half_width);
  s.number("speed_max", c.speed_max);
  s.number("accel_noise_std", c.accel_noise_std);
  s.integer("num_classes", c.num_classes);
  s.apply();
}

void parse_detector(const json& j, DetectorConfig& d) {
  Section s(j, "detector");
  s.number("box_noise_std", d.box_noise_std);
  s.number("feature_noise_std", d.feature_noise_std);
  s.number("clutter_feature_std", d.clutter_feature_std);
  s.number("score_true_a", d.score_true_a);
  s.number("score_true_b", d.score_true_b);
  s.number("score_false_a", d.score_false_a);
  s.number("score_false_b", d.score_false_b);
  s.apply();
}

void parse_metrics(const json& j, MetricsConfig& m) {
  Section s(j, "metrics");
  s.number("gospa_cutoff", m.gospa_cutoff);
  s.number("gospa_order", m.gospa_order);
  s.integer("recall_levels", m.amota.recall_levels);
  s.number("match_gate", m.amota.match_gate);
  s.apply();
}

void parse_training(const json& j, TrainingConfig& t) {
  Section s(j, "training");
  s.number("learning_rate", t.optimizer.learning_rate);
  s.number("momentum", t.optimizer.momentum);
  s.number("weight_decay", t.optimizer.weight_decay);
  s.integer("epochs", t.optimizer.epochs);
  s.integer("scenarios", t.scenarios);
  s.number("far_weight", t.far_weight);
  s.number("align_gate", t.align_gate);
  s.integer("offgate_pairs", t.offgate_pairs);
  s.apply();
}

}  // namespace

void MetricsConfig::validate() const {
  if (!(gospa_cutoff > 0.0)) throw InputError("gospa cutoff must be positive");
  if (!(gospa_order >= 1.0)) throw InputError("gospa order must be at least one");
  amota.validate();
}

void TrainingConfig::validate() const {
  optimizer.validate();
  if (scenarios <= 0) throw InputError("need at least one training scenario");
  if (far_weight < 0.0) throw InputError("far loss weight must be non-negative");
  if (!(align_gate > 0.0)) throw InputError("alignment gate must be positive");
  if (offgate_pairs < 0) throw InputError("offgate pair count must be non-negative");
}

void RunConfig::finalize() {
  if (!(noise_std_pos > 0.0) || !(noise_std_vel > 0.0))
    throw InputError("measurement noise stds must be positive");
  measurement.noise_cov = diag_cov4(noise_std_pos, noise_std_vel);
  measurement.validate();
  measurement.finalize();
  scenario.dt = motion.dt;
  training.optimizer.seed = seed;
  scenario.validate();
  detector.validate();
  tracker.validate();
  metrics.validate();
  training.validate();
  if (motion.dt <= 0.0) throw InputError("step period must be positive");
}

RunConfig parse_config_text(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what(), 0);
  }
  RunConfig cfg;
  Section root(j, "config");
  root.seed("seed", cfg.seed);
  root.on_off("neural", cfg.neural);
  root.text("weights", cfg.weights_path);
  root.object("motion", [&cfg](const json& v) { parse_motion(v, cfg.motion); });
  root.object("measurement", [&cfg](const json& v) { parse_measurement(v, cfg); });
  root.object("tracker", [&cfg](const json& v) { parse_tracker(v, cfg.tracker); });
  root.object("scenario", [&cfg](const json& v) { parse_scenario(v, cfg.scenario); });
  root.object("detector", [&cfg](const json& v) { parse_detector(v, cfg.detector); });
  root.object("metrics", [&cfg](const json& v) { parse_metrics(v, cfg.metrics); });
  root.object("training", [&cfg](const json& v) { parse_training(v, cfg.training); });
  root.apply();
  cfg.finalize();
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  return parse_config_text(read_text_file(path));
}

std::string default_config_text() {
  const RunConfig cfg;
  json j;
  j["seed"] = cfg.seed;
  j["neural"] = cfg.neural ? "on" : "off";
  j["weights"] = cfg.weights_path;
  j["motion"] = {{"dt", cfg.motion.dt},
                 {"accel_noise_std", cfg.motion.accel_noise_std},
                 {"survival_prob", cfg.motion.survival_prob}};
  j["measurement"] = {{"detection_prob", cfg.measurement.detection_prob},
                      {"noise_std_pos", cfg.noise_std_pos},
                      {"noise_std_vel", cfg.noise_std_vel},
                      {"clutter_mean", cfg.measurement.clutter_mean},
                      {"birth_mean", cfg.measurement.birth_mean},
                      {"roi_half_width", cfg.measurement.roi_half_width},
                      {"clutter_vmax", cfg.measurement.clutter_vmax},
                      {"birth_accel_std", cfg.measurement.birth_accel_std}};
  j["tracker"] = {{"particles", cfg.tracker.particle_count},
                  {"iterations", cfg.tracker.bp_iterations},
                  {"tolerance", cfg.tracker.bp_tolerance},
                  {"declare_threshold", cfg.tracker.manager.declare_threshold},
                  {"prune_threshold", cfg.tracker.manager.prune_threshold},
                  {"gate_sq", cfg.tracker.gate_sq},
                  {"ess_fraction", cfg.tracker.ess_fraction}};
  j["scenario"] = {{"duration", cfg.scenario.duration},
                   {"initial_objects", cfg.scenario.initial_objects},
                   {"birth_rate", cfg.scenario.birth_rate},
                   {"survival_prob", cfg.scenario.survival_prob},
                   {"spawn_half_width", cfg.scenario.spawn_half_width},
                   {"speed_max", cfg.scenario.speed_max},
                   {"accel_noise_std", cfg.scenario.accel_noise_std},
                   {"num_classes", cfg.scenario.num_classes}};
  j["detector"] = {{"box_noise_std", cfg.detector.box_noise_std},
                   {"feature_noise_std", cfg.detector.feature_noise_std},
                   {"clutter_feature_std", cfg.detector.clutter_feature_std},
                   {"score_true_a", cfg.detector.score_true_a},
                   {"score_true_b", cfg.detector.score_true_b},
                   {"score_false_a", cfg.detector.score_false_a},
                   {"score_false_b", cfg.detector.score_false_b}};
  j["metrics"] = {{"gospa_cutoff", cfg.metrics.gospa_cutoff},
                  {"gospa_order", cfg.metrics.gospa_order},
                  {"recall_levels", cfg.metrics.amota.recall_levels},
                  {"match_gate", cfg.metrics.amota.match_gate}};
  j["training"] = {{"learning_rate", cfg.training.optimizer.learning_rate},
                   {"momentum", cfg.training.optimizer.momentum},
                   {"weight_decay", cfg.training.optimizer.weight_decay},
                   {"epochs", cfg.training.optimizer.epochs},
                   {"scenarios", cfg.training.scenarios},
                   {"far_weight", cfg.training.far_weight},
                   {"align_gate", cfg.training.align_gate},
                   {"offgate_pairs", cfg.training.offgate_pairs}};
  return j.dump(2) + "\n";
}

}  // namespace nebp
