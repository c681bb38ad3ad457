#include "nebp/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace nebp {
namespace {

constexpr char kScenarioHeader[] = "#nebp-scenario v1";
constexpr char kFramesHeader[] = "#nebp-frames v1";
constexpr char kLabelsHeader[] = "#nebp-labels v1";
constexpr char kTracksHeader[] = "#nebp-tracks v1";
constexpr char kLossHeader[] = "#nebp-loss v1";
constexpr char kMetricsHeader[] = "#nebp-metrics v1";
constexpr char kWeightsMagic[6] = {'N', 'E', 'B', 'P', 'W', '\0'};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    const std::size_t next = line.find(' ', pos);
    if (next == std::string::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    if (next > pos) out.push_back(line.substr(pos, next - pos));
    pos = next + 1;
  }
  return out;
}

// Sequential record reader with one-based indices for diagnostics.
class RecordReader {
 public:
  RecordReader(std::istream& is, const char* header) : is_(is) {
    std::string line;
    if (!std::getline(is_, line) || line != header)
      throw ParseError(std::string("missing header '") + header + "'", 0);
  }

  // False at end of input; skips blank lines.
  bool next() {
    std::string line;
    while (std::getline(is_, line)) {
      if (line.empty()) continue;
      tokens_ = split(line);
      ++index_;
      return true;
    }
    return false;
  }

  std::size_t index() const { return index_; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& tag() const { return tokens_.front(); }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, index_); }

  void expect_count(std::size_t n) const {
    if (tokens_.size() != n)
      fail("record '" + tag() + "' expects " + std::to_string(n - 1) + " fields");
  }

  double number(std::size_t i) const {
    try {
      return parse_double(tokens_.at(i));
    } catch (const std::exception&) {
      fail("bad number '" + tokens_.at(i) + "'");
    }
  }

  long long integer(std::size_t i) const {
    const std::string& t = tokens_.at(i);
    long long v = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size()) fail("bad integer '" + t + "'");
    return v;
  }

  std::size_t count(std::size_t i) const {
    const long long v = integer(i);
    if (v < 0) fail("negative count");
    return static_cast<std::size_t>(v);
  }

 private:
  std::istream& is_;
  std::vector<std::string> tokens_;
  std::size_t index_ = 0;
};

void append(std::string& line, double v) {
  line += ' ';
  line += format_double(v);
}

void append(std::string& line, long long v) {
  line += ' ';
  line += std::to_string(v);
}

void append(std::string& line, std::uint64_t v) {
  line += ' ';
  line += std::to_string(v);
}

template <typename T>
void write_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_raw(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw InputError("truncated weight file");
}

void write_net(std::ostream& os, const Mlp& net) {
  write_raw(os, static_cast<std::uint8_t>(net.output_activation() ==
                                                  OutputActivation::Sigmoid
                                              ? 1
                                              : 0));
  write_raw(os, net.leaky_slope());
  const std::vector<std::size_t>& sizes = net.sizes();
  write_raw(os, static_cast<std::uint32_t>(sizes.size()));
  for (std::size_t s : sizes) write_raw(os, static_cast<std::uint32_t>(s));
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const Matrix& w = net.weights(l);
    os.write(reinterpret_cast<const char*>(w.data.data()),
             static_cast<std::streamsize>(w.data.size() * sizeof(double)));
    const std::vector<double>& b = net.biases(l);
    os.write(reinterpret_cast<const char*>(b.data()),
             static_cast<std::streamsize>(b.size() * sizeof(double)));
  }
}

Mlp read_net(std::istream& is) {
  std::uint8_t act = 0;
  double slope = 0.0;
  read_raw(is, act);
  read_raw(is, slope);
  if (act > 1) throw InputError("unknown output activation in weight file");
  std::uint32_t dim_count = 0;
  read_raw(is, dim_count);
  if (dim_count < 2 || dim_count > 64) throw InputError("implausible network depth");
  std::vector<std::size_t> sizes(dim_count);
  for (std::size_t& s : sizes) {
    std::uint32_t v = 0;
    read_raw(is, v);
    if (v == 0 || v > 1u << 20) throw InputError("implausible layer width");
    s = v;
  }
  Mlp net(sizes, act == 1 ? OutputActivation::Sigmoid : OutputActivation::Linear, slope);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Matrix& w = net.weights(l);
    is.read(reinterpret_cast<char*>(w.data.data()),
            static_cast<std::streamsize>(w.data.size() * sizeof(double)));
    std::vector<double>& b = net.biases(l);
    is.read(reinterpret_cast<char*>(b.data()),
            static_cast<std::streamsize>(b.size() * sizeof(double)));
    if (!is) throw InputError("truncated weight file");
  }
  if (!net.finite()) throw InputError("weight file contains non-finite parameters");
  return net;
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 64> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

double parse_double(const std::string& token) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || p != token.data() + token.size())
    throw std::invalid_argument("not a number: " + token);
  return v;
}

// --- scenario ----------------------------------------------------------------

void write_scenario(std::ostream& os, const Scenario& s) {
  os << kScenarioHeader << '\n';
  {
    std::string line = "meta";
    append(line, static_cast<long long>(s.cfg.duration));
    append(line, s.cfg.dt);
    os << line << '\n';
  }
  for (std::size_t k = 0; k < s.ego.size(); ++k) {
    std::string line = "ego";
    append(line, static_cast<long long>(k));
    append(line, s.ego[k][0]);
    append(line, s.ego[k][1]);
    os << line << '\n';
  }
  for (const Trajectory& t : s.trajectories) {
    std::string line = "obj";
    append(line, t.truth_id);
    append(line, static_cast<long long>(t.birth_step));
    append(line, static_cast<long long>(t.death_step));
    append(line, static_cast<long long>(t.class_label));
    for (double b : t.box) append(line, b);
    os << line << '\n';
    if (!t.shape_latent.empty()) {
      std::string sl = "shape";
      append(sl, t.truth_id);
      for (double v : t.shape_latent) append(sl, v);
      os << sl << '\n';
    }
    if (!t.heat_latent.empty()) {
      std::string hl = "heat";
      append(hl, t.truth_id);
      for (double v : t.heat_latent) append(hl, v);
      os << hl << '\n';
    }
    for (std::size_t k = 0; k < t.states.size(); ++k) {
      const KinematicState& x = t.states[k];
      std::string st = "state";
      append(st, static_cast<long long>(t.birth_step) + static_cast<long long>(k));
      append(st, t.truth_id);
      append(st, x.pos[0]);
      append(st, x.pos[1]);
      append(st, x.vel[0]);
      append(st, x.vel[1]);
      append(st, x.acc[0]);
      append(st, x.acc[1]);
      os << st << '\n';
    }
  }
}

Scenario read_scenario(std::istream& is) {
  RecordReader r(is, kScenarioHeader);
  Scenario s;
  bool have_meta = false;
  std::map<std::uint64_t, std::size_t> by_id;
  while (r.next()) {
    if (r.tag() == "meta") {
      r.expect_count(3);
      s.cfg.duration = static_cast<int>(r.integer(1));
      s.cfg.dt = r.number(2);
      if (s.cfg.duration <= 0 || !(s.cfg.dt > 0.0)) r.fail("invalid scenario meta");
      s.ego.reserve(static_cast<std::size_t>(s.cfg.duration));
      have_meta = true;
    } else if (r.tag() == "ego") {
      if (!have_meta) r.fail("ego before meta");
      r.expect_count(4);
      if (static_cast<std::size_t>(r.integer(1)) != s.ego.size())
        r.fail("ego steps out of order");
      s.ego.push_back({r.number(2), r.number(3)});
    } else if (r.tag() == "obj") {
      if (!have_meta) r.fail("obj before meta");
      r.expect_count(8);
      Trajectory t;
      t.truth_id = static_cast<std::uint64_t>(r.integer(1));
      t.birth_step = static_cast<int>(r.integer(2));
      t.death_step = static_cast<int>(r.integer(3));
      t.class_label = static_cast<int>(r.integer(4));
      for (std::size_t d = 0; d < kBoxDim; ++d) t.box[d] = r.number(5 + d);
      if (t.birth_step < 0 || t.death_step <= t.birth_step ||
          t.death_step > s.cfg.duration)
        r.fail("invalid trajectory lifetime");
      if (!by_id.emplace(t.truth_id, s.trajectories.size()).second)
        r.fail("duplicate object id");
      s.trajectories.push_back(std::move(t));
    } else if (r.tag() == "shape" || r.tag() == "heat") {
      const bool is_shape = r.tag() == "shape";
      const std::size_t dim = is_shape ? kShapeDim : kHeatDim;
      r.expect_count(2 + dim);
      const auto it = by_id.find(static_cast<std::uint64_t>(r.integer(1)));
      if (it == by_id.end()) r.fail("feature for unknown object");
      std::vector<double> v(dim);
      for (std::size_t d = 0; d < dim; ++d) v[d] = r.number(2 + d);
      if (is_shape)
        s.trajectories[it->second].shape_latent = std::move(v);
      else
        s.trajectories[it->second].heat_latent = std::move(v);
    } else if (r.tag() == "state") {
      r.expect_count(9);
      const int step = static_cast<int>(r.integer(1));
      const auto it = by_id.find(static_cast<std::uint64_t>(r.integer(2)));
      if (it == by_id.end()) r.fail("state for unknown object");
      Trajectory& t = s.trajectories[it->second];
      if (step != t.birth_step + static_cast<int>(t.states.size()))
        r.fail("state steps out of order");
      KinematicState x;
      x.pos = {r.number(3), r.number(4)};
      x.vel = {r.number(5), r.number(6)};
      x.acc = {r.number(7), r.number(8)};
      t.states.push_back(x);
    } else {
      r.fail("unknown record '" + r.tag() + "'");
    }
  }
  if (!have_meta) throw ParseError("scenario without meta record", r.index());
  if (s.ego.size() != static_cast<std::size_t>(s.cfg.duration))
    throw ParseError("ego track incomplete", r.index());
  for (const Trajectory& t : s.trajectories)
    if (t.states.size() != static_cast<std::size_t>(t.death_step - t.birth_step))
      throw ParseError("trajectory states incomplete", r.index());
  return s;
}

// --- frames ------------------------------------------------------------------

void write_frames(std::ostream& os, const std::vector<MeasurementFrame>& frames) {
  os << kFramesHeader << '\n';
  for (const MeasurementFrame& f : frames) {
    std::string line = "frame";
    append(line, static_cast<long long>(f.step));
    append(line, f.ego[0]);
    append(line, f.ego[1]);
    append(line, static_cast<long long>(f.measurements.size()));
    os << line << '\n';
    for (std::size_t j = 0; j < f.measurements.size(); ++j) {
      const Measurement& z = f.measurements[j];
      std::string zl = "z";
      append(zl, static_cast<long long>(f.step));
      append(zl, static_cast<long long>(j));
      for (double v : z.kin) append(zl, v);
      for (double v : z.box) append(zl, v);
      append(zl, z.score);
      const bool sh = !z.shape.empty(), ht = !z.heat.empty();
      zl += ' ';
      zl += sh ? 's' : '-';
      zl += ht ? 'h' : '-';
      for (double v : z.shape) append(zl, v);
      for (double v : z.heat) append(zl, v);
      os << zl << '\n';
    }
  }
}

std::vector<MeasurementFrame> read_frames(std::istream& is) {
  RecordReader r(is, kFramesHeader);
  std::vector<MeasurementFrame> frames;
  std::size_t expected = 0;
  while (r.next()) {
    if (r.tag() == "frame") {
      if (expected != 0) r.fail("frame record before previous frame completed");
      r.expect_count(5);
      MeasurementFrame f;
      f.step = static_cast<int>(r.integer(1));
      f.ego = {r.number(2), r.number(3)};
      expected = r.count(4);
      frames.push_back(std::move(f));
    } else if (r.tag() == "z") {
      if (frames.empty() || expected == 0) r.fail("measurement outside a frame");
      if (r.tokens().size() < 12) r.fail("measurement record too short");
      if (static_cast<int>(r.integer(1)) != frames.back().step)
        r.fail("measurement step mismatch");
      if (r.count(2) != frames.back().measurements.size())
        r.fail("measurement index out of order");
      Measurement z;
      for (std::size_t d = 0; d < 4; ++d) z.kin[d] = r.number(3 + d);
      for (std::size_t d = 0; d < kBoxDim; ++d) z.box[d] = r.number(7 + d);
      z.score = r.number(10);
      const std::string& flags = r.tokens()[11];
      if (flags.size() != 2 || (flags[0] != 's' && flags[0] != '-') ||
          (flags[1] != 'h' && flags[1] != '-'))
        r.fail("bad feature flags '" + flags + "'");
      const bool sh = flags[0] == 's', ht = flags[1] == 'h';
      const std::size_t want = 12 + (sh ? kShapeDim : 0) + (ht ? kHeatDim : 0);
      r.expect_count(want);
      std::size_t at = 12;
      if (sh) {
        z.shape.resize(kShapeDim);
        for (double& v : z.shape) v = r.number(at++);
      }
      if (ht) {
        z.heat.resize(kHeatDim);
        for (double& v : z.heat) v = r.number(at++);
      }
      frames.back().measurements.push_back(std::move(z));
      --expected;
    } else {
      r.fail("unknown record '" + r.tag() + "'");
    }
  }
  if (expected != 0)
    throw ParseError("frame truncated: " + std::to_string(expected) +
                         " measurements missing",
                     r.index());
  return frames;
}

// --- labels ------------------------------------------------------------------

void write_labels(std::ostream& os, const std::vector<FrameLabels>& labels) {
  os << kLabelsHeader << '\n';
  {
    std::string line = "meta";
    append(line, static_cast<long long>(labels.size()));
    os << line << '\n';
  }
  for (std::size_t k = 0; k < labels.size(); ++k) {
    for (std::size_t j = 0; j < labels[k].source.size(); ++j) {
      std::string line = "label";
      append(line, static_cast<long long>(k));
      append(line, static_cast<long long>(j));
      append(line, static_cast<long long>(labels[k].source[j]));
      os << line << '\n';
    }
  }
}

std::vector<FrameLabels> read_labels(std::istream& is) {
  RecordReader r(is, kLabelsHeader);
  std::vector<FrameLabels> labels;
  bool have_meta = false;
  while (r.next()) {
    if (r.tag() == "meta") {
      r.expect_count(2);
      labels.resize(r.count(1));
      have_meta = true;
    } else if (r.tag() == "label") {
      if (!have_meta) r.fail("label before meta");
      r.expect_count(4);
      const std::size_t step = r.count(1);
      if (step >= labels.size()) r.fail("label step out of range");
      if (r.count(2) != labels[step].source.size()) r.fail("label index out of order");
      labels[step].source.push_back(r.integer(3));
    } else {
      r.fail("unknown record '" + r.tag() + "'");
    }
  }
  if (!have_meta) throw ParseError("labels without meta record", r.index());
  return labels;
}

// --- tracks ------------------------------------------------------------------

void write_tracks(std::ostream& os, const std::vector<std::vector<TrackEstimate>>& tracks) {
  os << kTracksHeader << '\n';
  {
    std::string line = "meta";
    append(line, static_cast<long long>(tracks.size()));
    os << line << '\n';
  }
  for (std::size_t k = 0; k < tracks.size(); ++k) {
    for (const TrackEstimate& t : tracks[k]) {
      std::string line = "track";
      append(line, static_cast<long long>(k));
      append(line, t.track_id);
      append(line, t.state.pos[0]);
      append(line, t.state.pos[1]);
      append(line, t.state.vel[0]);
      append(line, t.state.vel[1]);
      append(line, t.state.acc[0]);
      append(line, t.state.acc[1]);
      append(line, t.report_score);
      os << line << '\n';
    }
  }
}

std::vector<std::vector<TrackEstimate>> read_tracks(std::istream& is) {
  RecordReader r(is, kTracksHeader);
  std::vector<std::vector<TrackEstimate>> tracks;
  bool have_meta = false;
  while (r.next()) {
    if (r.tag() == "meta") {
      r.expect_count(2);
      tracks.resize(r.count(1));
      have_meta = true;
    } else if (r.tag() == "track") {
      if (!have_meta) r.fail("track before meta");
      r.expect_count(10);
      const std::size_t step = r.count(1);
      if (step >= tracks.size()) r.fail("track step out of range");
      TrackEstimate t;
      t.track_id = static_cast<std::uint64_t>(r.integer(2));
      t.state.pos = {r.number(3), r.number(4)};
      t.state.vel = {r.number(5), r.number(6)};
      t.state.acc = {r.number(7), r.number(8)};
      t.report_score = r.number(9);
      tracks[step].push_back(t);
    } else {
      r.fail("unknown record '" + r.tag() + "'");
    }
  }
  if (!have_meta) throw ParseError("tracks without meta record", r.index());
  return tracks;
}

// --- loss curves -------------------------------------------------------------

void write_loss_curve(std::ostream& os, const std::vector<double>& epoch_loss) {
  os << kLossHeader << '\n';
  for (std::size_t e = 0; e < epoch_loss.size(); ++e) {
    std::string line = "epoch";
    append(line, static_cast<long long>(e));
    append(line, epoch_loss[e]);
    os << line << '\n';
  }
}

std::vector<double> read_loss_curve(std::istream& is) {
  RecordReader r(is, kLossHeader);
  std::vector<double> out;
  while (r.next()) {
    if (r.tag() != "epoch") r.fail("unknown record '" + r.tag() + "'");
    r.expect_count(3);
    if (r.count(1) != out.size()) r.fail("epochs out of order");
    out.push_back(r.number(2));
  }
  return out;
}

// --- metric tables -----------------------------------------------------------

void write_metric_table(std::ostream& os, const std::vector<MetricRow>& rows) {
  os << kMetricsHeader << '\n';
  for (const MetricRow& row : rows) {
    std::string line = "row " + row.name;
    append(line, row.report.amota);
    append(line, row.report.amotp);
    append(line, static_cast<long long>(row.report.id_switches));
    append(line, row.report.gospa.mean.total);
    append(line, row.report.gospa.mean.localization);
    append(line, row.report.gospa.mean.missed);
    append(line, row.report.gospa.mean.false_alarm);
    os << line << '\n';
  }
}

std::string render_metric_table(const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(18) << "arm" << std::right << std::setw(9) << "amota"
     << std::setw(9) << "amotp" << std::setw(6) << "ids" << std::setw(12) << "gospa"
     << std::setw(12) << "loc" << std::setw(12) << "missed" << std::setw(12) << "false"
     << '\n';
  os << std::fixed << std::setprecision(3);
  for (const MetricRow& row : rows) {
    os << std::left << std::setw(18) << row.name << std::right << std::setw(9)
       << row.report.amota << std::setw(9) << row.report.amotp << std::setw(6)
       << row.report.id_switches << std::setw(12) << row.report.gospa.mean.total
       << std::setw(12) << row.report.gospa.mean.localization << std::setw(12)
       << row.report.gospa.mean.missed << std::setw(12)
       << row.report.gospa.mean.false_alarm << '\n';
  }
  return os.str();
}

// --- weights -----------------------------------------------------------------

void save_weights(std::ostream& os, const NeuralStack& stack) {
  stack.validate();
  os.write(kWeightsMagic, sizeof(kWeightsMagic));
  write_raw(os, kWeightsMajor);
  write_raw(os, kWeightsMinor);
  write_raw(os, static_cast<std::uint8_t>(stack.identity ? 1 : 0));
  write_raw(os, stack.u);
  const std::uint32_t count = stack.identity ? 0 : 7;
  write_raw(os, count);
  if (stack.identity) return;
  write_net(os, stack.motion);
  write_net(os, stack.box);
  write_net(os, stack.shape);
  write_net(os, stack.heat);
  write_net(os, stack.weight);
  write_net(os, stack.affinity);
  write_net(os, stack.far);
}

NeuralStack load_weights(std::istream& is) {
  char magic[6];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kWeightsMagic, sizeof(magic)) != 0)
    throw InputError("not a weight file (bad magic)");
  std::uint16_t major = 0, minor = 0;
  read_raw(is, major);
  read_raw(is, minor);
  if (major != kWeightsMajor)
    throw InputError("unsupported weight format major version " + std::to_string(major));
  std::uint8_t identity = 0;
  double u = 0.0;
  read_raw(is, identity);
  read_raw(is, u);
  std::uint32_t count = 0;
  read_raw(is, count);
  if (identity != 0) {
    if (count != 0) throw InputError("identity weight file carries networks");
    NeuralStack s = NeuralStack::make_identity();
    s.u = u;
    return s;
  }
  if (count != 7) throw InputError("weight file must carry exactly seven networks");
  NeuralStack s = NeuralStack::make_identity();
  s.identity = false;
  s.u = u;
  s.motion = read_net(is);
  s.box = read_net(is);
  s.shape = read_net(is);
  s.heat = read_net(is);
  s.weight = read_net(is);
  s.affinity = read_net(is);
  s.far = read_net(is);
  s.validate();
  return s;
}

void save_weights_file(const std::string& path, const NeuralStack& stack) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open for writing: " + path);
  save_weights(os, stack);
  if (!os) throw InputError("write failed: " + path);
}

NeuralStack load_weights_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open: " + path);
  return load_weights(is);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open for writing: " + path);
  os << content;
  if (!os) throw InputError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace nebp
