#pragma once

// Shared domain vocabulary: kinematic states, potential objects with their
// legacy/new lifecycle, measurements, and the paired association vectors.

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nebp {

inline constexpr std::size_t kShapeDim = 64;
inline constexpr std::size_t kHeatDim = 32;
inline constexpr std::size_t kBoxDim = 3;

struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DegenerateInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SizeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Minimal row-major matrix, used for message and coefficient tables.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
};

// 2D position / velocity / acceleration (meters, m/s, m/s^2).
struct KinematicState {
  std::array<double, 2> pos{0.0, 0.0};
  std::array<double, 2> vel{0.0, 0.0};
  std::array<double, 2> acc{0.0, 0.0};
};

// Structure-of-arrays particle cloud; the layout the kernels operate on.
struct ParticleSet {
  std::vector<double> px, py, vx, vy, ax, ay, w;

  std::size_t size() const { return px.size(); }

  void resize(std::size_t n) {
    px.resize(n);
    py.resize(n);
    vx.resize(n);
    vy.resize(n);
    ax.resize(n);
    ay.resize(n);
    w.resize(n);
  }

  KinematicState state(std::size_t i) const {
    return {{px[i], py[i]}, {vx[i], vy[i]}, {ax[i], ay[i]}};
  }

  void set_state(std::size_t i, const KinematicState& s) {
    px[i] = s.pos[0];
    py[i] = s.pos[1];
    vx[i] = s.vel[0];
    vy[i] = s.vel[1];
    ax[i] = s.acc[0];
    ay[i] = s.acc[1];
  }
};

enum class PoKind : std::uint8_t { Legacy, New };

// A hypothesized object: particle cloud plus existence probability, with the
// appearance features carried over from the measurement that spawned it.
// Empty shape/heat vectors mean the feature was not supplied; the similarity
// branch for that feature is disabled downstream.
struct PotentialObject {
  ParticleSet particles;
  double existence = 0.0;
  PoKind kind = PoKind::New;
  std::uint64_t track_id = 0;
  std::array<double, kBoxDim> box{0.0, 0.0, 0.0};
  std::vector<double> shape;  // 64 entries or empty
  std::vector<double> heat;   // 32 entries or empty
  double detection_score = 1.0;
};

struct Measurement {
  std::array<double, 4> kin{0.0, 0.0, 0.0, 0.0};  // x, y, vx, vy
  std::array<double, kBoxDim> box{0.0, 0.0, 0.0};
  double score = 1.0;
  std::vector<double> shape;  // 64 entries or empty
  std::vector<double> heat;   // 32 entries or empty
};

struct MeasurementFrame {
  int step = 0;
  std::array<double, 2> ego{0.0, 0.0};
  std::vector<Measurement> measurements;
};

// Object-oriented vector a (per legacy PO, value in 0..J) and
// measurement-oriented vector b (per measurement, value in 0..I).
struct AssociationVectors {
  std::vector<int> object_oriented;
  std::vector<int> measurement_oriented;
};

// Phi(a, b): 1 iff both vectors describe the same valid association event.
// Throws InputError on out-of-range entries.
bool check_consistency(const std::vector<int>& object_oriented,
                       const std::vector<int>& measurement_oriented);

// Derive b from a valid object-oriented vector (J = measurement count).
std::vector<int> measurement_oriented_from(const std::vector<int>& object_oriented,
                                           std::size_t num_measurements);

// End-of-step promotion: every surviving PO becomes legacy; nothing else
// changes.
std::vector<PotentialObject> promote_new_to_legacy(std::vector<PotentialObject> pos);

// Monotone id source for new POs.
class TrackIdAllocator {
 public:
  std::uint64_t next() { return next_id_++; }
  std::uint64_t peek() const { return next_id_; }

 private:
  std::uint64_t next_id_ = 1;
};

}  // namespace nebp
