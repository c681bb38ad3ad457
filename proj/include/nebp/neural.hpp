#pragma once

// Learned enhancement layer: feature similarity networks, weight fusion,
// affinity and false-alarm-rejection coefficients, the losses they are
// trained with, and exact reverse-mode gradients for all of it.

#include <array>
#include <cstdint>
#include <vector>

#include "nebp/bp.hpp"
#include "nebp/random.hpp"
#include "nebp/types.hpp"

namespace nebp {

// ---------------------------------------------------------------------------
// Multilayer perceptron with leaky-ReLU hidden activations
// ---------------------------------------------------------------------------

enum class OutputActivation { Linear, Sigmoid };

struct MlpGrads {
  std::vector<Matrix> w;
  std::vector<std::vector<double>> b;

  void zero();
  void add_scaled(const MlpGrads& other, double s);
  void scale(double s);
};

class Mlp {
 public:
  Mlp() = default;
  // sizes = [input, hidden..., output]
  Mlp(std::vector<std::size_t> sizes, OutputActivation out, double leaky_slope = 0.01);

  // Xavier-uniform weights, zero biases.
  void init_random(RngStream& rng);

  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  std::size_t num_layers() const { return sizes_.size() - 1; }
  const std::vector<std::size_t>& sizes() const { return sizes_; }
  OutputActivation output_activation() const { return out_; }
  double leaky_slope() const { return slope_; }

  Matrix& weights(std::size_t layer) { return w_[layer]; }
  const Matrix& weights(std::size_t layer) const { return w_[layer]; }
  std::vector<double>& biases(std::size_t layer) { return b_[layer]; }
  const std::vector<double>& biases(std::size_t layer) const { return b_[layer]; }

  // Activations recorded during a forward pass; activ[0] is the input, pre[l]
  // the pre-activation of layer l.
  struct Tape {
    std::vector<std::vector<double>> activ;
    std::vector<std::vector<double>> pre;
  };

  std::vector<double> forward(const std::vector<double>& in) const;
  std::vector<double> forward(const std::vector<double>& in, Tape& tape) const;

  // Reverse pass. upstream is dL/d(output); returns dL/d(input) and
  // accumulates parameter gradients.
  std::vector<double> backward(const Tape& tape, std::vector<double> upstream,
                               MlpGrads& grads) const;
  // Same but upstream is dL/d(pre-activation of the last layer); skips the
  // output-activation derivative (used for numerically exact cross-entropy
  // gradients through a sigmoid).
  std::vector<double> backward_logits(const Tape& tape, std::vector<double> upstream,
                                      MlpGrads& grads) const;

  MlpGrads make_grads() const;
  void apply_update(const MlpGrads& velocity);  // theta += velocity
  bool finite() const;

 private:
  std::vector<double> run(const std::vector<double>& in, Tape* tape) const;
  std::vector<double> back_impl(const Tape& tape, std::vector<double> d,
                                bool through_output, MlpGrads& grads) const;

  std::vector<std::size_t> sizes_;
  OutputActivation out_ = OutputActivation::Linear;
  double slope_ = 0.01;
  std::vector<Matrix> w_;
  std::vector<std::vector<double>> b_;
};

// ---------------------------------------------------------------------------
// The seven-network stack
// ---------------------------------------------------------------------------

inline constexpr std::size_t kMotionFeatDim = 4;
inline constexpr std::size_t kOmegaDim =
    kMotionFeatDim + kBoxDim + kShapeDim + kHeatDim;  // 103
inline constexpr std::size_t kFarInputDim = kBoxDim + kShapeDim + kHeatDim;  // 99

struct NeuralStack {
  Mlp motion;    // 4 -> 1
  Mlp box;       // 3 -> 1
  Mlp shape;     // 64 -> 1
  Mlp heat;      // 32 -> 1
  Mlp weight;    // 103 -> 5, sigmoid
  Mlp affinity;  // 1 -> 1
  Mlp far;       // 99 -> 1, sigmoid
  double u = 0.5;         // FAR loss tuning weight
  bool identity = false;  // identity stack: f_omega = 1, f_rho never positive

  static NeuralStack make_default(std::uint64_t seed);
  static NeuralStack make_identity();

  bool finite() const;
  void validate() const;  // dimension chain and parameter finiteness
};

struct StackGrads {
  MlpGrads motion, box, shape, heat, weight, affinity, far;

  void zero();
  void add_scaled(const StackGrads& other, double s);
  void scale(double s);
};

StackGrads make_stack_grads(const NeuralStack& stack);

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

// Differences between a legacy PO's carried features and a measurement's,
// PO side minus measurement side. Missing shape/heat on either side disables
// that branch: the difference stays zero and the similarity term is 0.
struct PairFeatures {
  std::array<double, kMotionFeatDim> l_m{};
  std::array<double, kBoxDim> l_b{};
  std::vector<double> l_s;  // 64
  std::vector<double> l_h;  // 32
  bool has_shape = false;
  bool has_heat = false;
  double beta_hat = 0.0;  // normalized BP marginal of this pair
};

PairFeatures make_pair_features(const PotentialObject& po,
                                const std::array<double, 4>& po_motion,
                                const Measurement& z, double beta_hat);

// 103-vector (L_m, L_b, L_s, L_h); disabled branches contribute zeros.
std::vector<double> omega_input(const PairFeatures& f);

// 99-vector (box, shape, heat) of the measurement itself.
std::vector<double> far_input(const Measurement& z);

// ---------------------------------------------------------------------------
// Coefficient forward passes
// ---------------------------------------------------------------------------

// Everything an affinity backward pass needs.
struct AffinityEval {
  PairFeatures feat;
  Mlp::Tape tape_m, tape_b, tape_s, tape_h, tape_w, tape_aff;
  std::array<double, 5> r_vec{};  // R_m, R_b, R_s, R_h, R_BP
  std::array<double, 5> omega{};  // in (0,1)^5
  double r = 0.0;                 // omega . r_vec
  double f_rho = 0.0;
};

AffinityEval affinity_forward(const NeuralStack& stack, const PairFeatures& feat);
void affinity_backward(const NeuralStack& stack, const AffinityEval& eval,
                       double d_f_rho, StackGrads& grads);

double far_forward(const NeuralStack& stack, const std::vector<double>& in,
                   Mlp::Tape& tape);

// C = f_omega + relu(f_rho) / max(beta_hat, floor), per pair. beta_hat is the
// I x (J+1) normalized table; column 0 is skipped.
Matrix enhancement_matrix(const Matrix& f_rho, const std::vector<double>& f_omega,
                          const Matrix& beta_hat, double floor_value = 1e-12);

// EnhancementSource adapter for the tracker. The ablation switches disable
// one branch at a time: without affinity f_rho never exceeds zero, without
// the false-alarm net f_omega stays one.
class NeuralEnhancer final : public EnhancementSource {
 public:
  explicit NeuralEnhancer(NeuralStack stack, bool use_affinity = true,
                          bool use_far = true);
  EnhancementCoefficients compute(const EnhancementInput& in) override;
  const NeuralStack& stack() const { return stack_; }

 private:
  NeuralStack stack_;
  bool use_affinity_;
  bool use_far_;
};

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// Weighted binary cross-entropy on sigma(f_rho) with per-class normalization;
// an empty class contributes 0.
double loss_affinity(const std::vector<double>& f_rho, const std::vector<int>& gt);

// L_F1 + u * L_F2 on f_omega in (0,1); per-class normalization, empty class
// contributes 0.
double loss_far(const std::vector<double>& f_omega, const std::vector<int>& gt,
                double u);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

// One association pair observed at one step, with its ground-truth label.
struct PairSample {
  PairFeatures features;
  int label = 0;  // f_gt_rho
};

struct FarSample {
  std::vector<double> input;  // 99
  int label = 0;              // f_gt_omega: 1 real, 0 false alarm
};

// All pairs and measurements of one time step; losses normalize within it.
struct FrameSample {
  std::vector<PairSample> pairs;
  std::vector<FarSample> fars;
};

using TrainingData = std::vector<FrameSample>;

struct OptimizerConfig {
  // With momentum 0.9 the effective step is ten times the rate; rates much
  // above this destabilize late epochs once the sigmoids saturate.
  double learning_rate = 2e-3;
  double momentum = 0.9;
  // L2 pull on weights (biases exempt). The association labels are nearly
  // all positive once gating removes easy negatives, so without decay the
  // logistic keeps inflating scores and held-out pairs it gets wrong become
  // arbitrarily expensive.
  double weight_decay = 0.0;
  int epochs = 20;
  std::uint64_t seed = 1;  // feeds the epoch shuffles

  void validate() const;
};

struct TrainResult {
  std::vector<double> epoch_loss;  // mean per-frame L_A + L_F
};

// Frame loss and its exact parameter gradient.
double frame_loss(const NeuralStack& stack, const FrameSample& frame);
double frame_loss_gradient(const NeuralStack& stack, const FrameSample& frame,
                           StackGrads& grads);

// SGD with momentum over shuffled frames; throws DegenerateInput if the loss
// goes non-finite.
TrainResult train(NeuralStack& stack, const TrainingData& data,
                  const OptimizerConfig& cfg);

double mean_loss(const NeuralStack& stack, const TrainingData& data);

}  // namespace nebp
