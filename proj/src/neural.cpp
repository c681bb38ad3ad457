#include "nebp/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "nebp/kernels.hpp"

namespace nebp {

namespace {

double softplus(double x) {
  // log(1 + e^x) without overflow; for large x the correction vanishes
  if (x > 30.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// MlpGrads
// ---------------------------------------------------------------------------

void MlpGrads::zero() {
  for (Matrix& m : w) std::fill(m.data.begin(), m.data.end(), 0.0);
  for (auto& v : b) std::fill(v.begin(), v.end(), 0.0);
}

void MlpGrads::add_scaled(const MlpGrads& other, double s) {
  for (std::size_t l = 0; l < w.size(); ++l) {
    kernels::active().axpy(w[l].data.data(), other.w[l].data.data(), s,
                           w[l].data.size());
    kernels::active().axpy(b[l].data(), other.b[l].data(), s, b[l].size());
  }
}

void MlpGrads::scale(double s) {
  for (Matrix& m : w) kernels::active().scale(m.data.data(), s, m.data.size());
  for (auto& v : b) kernels::active().scale(v.data(), s, v.size());
}

// ---------------------------------------------------------------------------
// Mlp
// ---------------------------------------------------------------------------

Mlp::Mlp(std::vector<std::size_t> sizes, OutputActivation out, double leaky_slope)
    : sizes_(std::move(sizes)), out_(out), slope_(leaky_slope) {
  if (sizes_.size() < 2) throw InputError("mlp needs at least input and output layers");
  for (std::size_t s : sizes_)
    if (s == 0) throw InputError("mlp layer sizes must be positive");
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    w_.emplace_back(sizes_[l + 1], sizes_[l]);
    b_.emplace_back(sizes_[l + 1], 0.0);
  }
}

void Mlp::init_random(RngStream& rng) {
  for (std::size_t l = 0; l < w_.size(); ++l) {
    const double fan_in = static_cast<double>(sizes_[l]);
    const double fan_out = static_cast<double>(sizes_[l + 1]);
    const double s = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : w_[l].data) v = rng.uniform(-s, s);
    std::fill(b_[l].begin(), b_[l].end(), 0.0);
  }
}

std::vector<double> Mlp::run(const std::vector<double>& in, Tape* tape) const {
  if (in.size() != sizes_.front())
    throw SizeError("mlp input has dimension " + std::to_string(in.size()) +
                    ", expected " + std::to_string(sizes_.front()));
  const auto& k = kernels::active();
  std::vector<double> a = in;
  if (tape != nullptr) {
    tape->activ.clear();
    tape->pre.clear();
    tape->activ.push_back(a);
  }
  for (std::size_t l = 0; l < w_.size(); ++l) {
    std::vector<double> pre(sizes_[l + 1]);
    k.matvec(w_[l].data.data(), a.data(), b_[l].data(), pre.data(), sizes_[l + 1],
             sizes_[l]);
    if (tape != nullptr) tape->pre.push_back(pre);
    const bool last = l + 1 == w_.size();
    std::vector<double> next(pre.size());
    if (!last) {
      for (std::size_t i = 0; i < pre.size(); ++i)
        next[i] = pre[i] > 0.0 ? pre[i] : slope_ * pre[i];
    } else if (out_ == OutputActivation::Sigmoid) {
      for (std::size_t i = 0; i < pre.size(); ++i) next[i] = sigmoid(pre[i]);
    } else {
      next = pre;
    }
    a = std::move(next);
    if (tape != nullptr) tape->activ.push_back(a);
  }
  return a;
}

std::vector<double> Mlp::forward(const std::vector<double>& in) const {
  return run(in, nullptr);
}

std::vector<double> Mlp::forward(const std::vector<double>& in, Tape& tape) const {
  return run(in, &tape);
}

std::vector<double> Mlp::back_impl(const Tape& tape, std::vector<double> d,
                                   bool through_output, MlpGrads& grads) const {
  if (d.size() != sizes_.back()) throw SizeError("upstream gradient dimension mismatch");
  if (tape.pre.size() != w_.size()) throw InputError("tape does not match this network");
  const auto& k = kernels::active();
  for (std::size_t li = w_.size(); li-- > 0;) {
    const bool last = li + 1 == w_.size();
    if (last) {
      if (through_output && out_ == OutputActivation::Sigmoid) {
        const auto& y = tape.activ.back();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] *= y[i] * (1.0 - y[i]);
      }
    } else {
      const auto& pre = tape.pre[li];
      for (std::size_t i = 0; i < d.size(); ++i)
        d[i] *= pre[i] > 0.0 ? 1.0 : slope_;
    }
    const auto& x = tape.activ[li];
    k.outer_acc(grads.w[li].data.data(), d.data(), x.data(), sizes_[li + 1], sizes_[li]);
    k.axpy(grads.b[li].data(), d.data(), 1.0, d.size());
    std::vector<double> dx(sizes_[li]);
    k.matvec_t(w_[li].data.data(), d.data(), dx.data(), sizes_[li + 1], sizes_[li]);
    d = std::move(dx);
  }
  return d;
}

std::vector<double> Mlp::backward(const Tape& tape, std::vector<double> upstream,
                                  MlpGrads& grads) const {
  return back_impl(tape, std::move(upstream), true, grads);
}

std::vector<double> Mlp::backward_logits(const Tape& tape, std::vector<double> upstream,
                                         MlpGrads& grads) const {
  return back_impl(tape, std::move(upstream), false, grads);
}

MlpGrads Mlp::make_grads() const {
  MlpGrads g;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    g.w.emplace_back(sizes_[l + 1], sizes_[l]);
    g.b.emplace_back(sizes_[l + 1], 0.0);
  }
  return g;
}

void Mlp::apply_update(const MlpGrads& velocity) {
  for (std::size_t l = 0; l < w_.size(); ++l) {
    kernels::active().axpy(w_[l].data.data(), velocity.w[l].data.data(), 1.0,
                           w_[l].data.size());
    kernels::active().axpy(b_[l].data(), velocity.b[l].data(), 1.0, b_[l].size());
  }
}

bool Mlp::finite() const {
  for (const Matrix& m : w_)
    for (double v : m.data)
      if (!std::isfinite(v)) return false;
  for (const auto& v : b_)
    for (double x : v)
      if (!std::isfinite(x)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// NeuralStack
// ---------------------------------------------------------------------------

NeuralStack NeuralStack::make_default(std::uint64_t seed) {
  NeuralStack s;
  s.motion = Mlp({kMotionFeatDim, 32, 32, 1}, OutputActivation::Linear);
  s.box = Mlp({kBoxDim, 32, 32, 1}, OutputActivation::Linear);
  s.shape = Mlp({kShapeDim, 32, 32, 1}, OutputActivation::Linear);
  s.heat = Mlp({kHeatDim, 32, 32, 1}, OutputActivation::Linear);
  s.weight = Mlp({kOmegaDim, 64, 64, 5}, OutputActivation::Sigmoid);
  s.affinity = Mlp({1, 16, 1}, OutputActivation::Linear);
  s.far = Mlp({kFarInputDim, 64, 64, 1}, OutputActivation::Sigmoid);
  RngStream rng(seed, "weights");
  s.motion.init_random(rng);
  s.box.init_random(rng);
  s.shape.init_random(rng);
  s.heat.init_random(rng);
  s.weight.init_random(rng);
  s.affinity.init_random(rng);
  s.far.init_random(rng);
  return s;
}

NeuralStack NeuralStack::make_identity() {
  NeuralStack s;
  s.identity = true;
  return s;
}

bool NeuralStack::finite() const {
  if (identity) return true;
  return motion.finite() && box.finite() && shape.finite() && heat.finite() &&
         weight.finite() && affinity.finite() && far.finite();
}

void NeuralStack::validate() const {
  if (identity) return;
  auto expect = [](const Mlp& net, std::size_t in, std::size_t out, const char* name) {
    if (net.num_layers() == 0 || net.input_dim() != in || net.output_dim() != out)
      throw InputError(std::string("network ") + name + " has wrong dimensions");
  };
  expect(motion, kMotionFeatDim, 1, "motion");
  expect(box, kBoxDim, 1, "box");
  expect(shape, kShapeDim, 1, "shape");
  expect(heat, kHeatDim, 1, "heat");
  expect(weight, kOmegaDim, 5, "weight");
  expect(affinity, 1, 1, "affinity");
  expect(far, kFarInputDim, 1, "far");
  if (weight.output_activation() != OutputActivation::Sigmoid ||
      far.output_activation() != OutputActivation::Sigmoid)
    throw InputError("weight and far networks must end in a sigmoid");
  if (!(u >= 0.0 && u <= 1.0)) throw InputError("loss weight u must be in [0,1]");
  if (!finite()) throw InputError("network parameters must be finite");
}

void StackGrads::zero() {
  motion.zero();
  box.zero();
  shape.zero();
  heat.zero();
  weight.zero();
  affinity.zero();
  far.zero();
}

void StackGrads::add_scaled(const StackGrads& other, double s) {
  motion.add_scaled(other.motion, s);
  box.add_scaled(other.box, s);
  shape.add_scaled(other.shape, s);
  heat.add_scaled(other.heat, s);
  weight.add_scaled(other.weight, s);
  affinity.add_scaled(other.affinity, s);
  far.add_scaled(other.far, s);
}

void StackGrads::scale(double s) {
  motion.scale(s);
  box.scale(s);
  shape.scale(s);
  heat.scale(s);
  weight.scale(s);
  affinity.scale(s);
  far.scale(s);
}

StackGrads make_stack_grads(const NeuralStack& stack) {
  StackGrads g;
  g.motion = stack.motion.make_grads();
  g.box = stack.box.make_grads();
  g.shape = stack.shape.make_grads();
  g.heat = stack.heat.make_grads();
  g.weight = stack.weight.make_grads();
  g.affinity = stack.affinity.make_grads();
  g.far = stack.far.make_grads();
  return g;
}

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

PairFeatures make_pair_features(const PotentialObject& po,
                                const std::array<double, 4>& po_motion,
                                const Measurement& z, double beta_hat) {
  auto check_dim = [](const std::vector<double>& v, std::size_t want, const char* what) {
    if (!v.empty() && v.size() != want)
      throw SizeError(std::string(what) + " feature has wrong dimension");
  };
  check_dim(po.shape, kShapeDim, "object shape");
  check_dim(z.shape, kShapeDim, "measurement shape");
  check_dim(po.heat, kHeatDim, "object heat");
  check_dim(z.heat, kHeatDim, "measurement heat");

  PairFeatures f;
  for (std::size_t d = 0; d < 4; ++d) f.l_m[d] = po_motion[d] - z.kin[d];
  for (std::size_t d = 0; d < kBoxDim; ++d) f.l_b[d] = po.box[d] - z.box[d];
  f.l_s.assign(kShapeDim, 0.0);
  f.l_h.assign(kHeatDim, 0.0);
  f.has_shape = !po.shape.empty() && !z.shape.empty();
  f.has_heat = !po.heat.empty() && !z.heat.empty();
  if (f.has_shape)
    for (std::size_t d = 0; d < kShapeDim; ++d) f.l_s[d] = po.shape[d] - z.shape[d];
  if (f.has_heat)
    for (std::size_t d = 0; d < kHeatDim; ++d) f.l_h[d] = po.heat[d] - z.heat[d];
  f.beta_hat = beta_hat;
  return f;
}

std::vector<double> omega_input(const PairFeatures& f) {
  std::vector<double> in;
  in.reserve(kOmegaDim);
  in.insert(in.end(), f.l_m.begin(), f.l_m.end());
  in.insert(in.end(), f.l_b.begin(), f.l_b.end());
  in.insert(in.end(), f.l_s.begin(), f.l_s.end());
  in.insert(in.end(), f.l_h.begin(), f.l_h.end());
  return in;
}

std::vector<double> far_input(const Measurement& z) {
  std::vector<double> in;
  in.reserve(kFarInputDim);
  in.insert(in.end(), z.box.begin(), z.box.end());
  if (z.shape.size() == kShapeDim)
    in.insert(in.end(), z.shape.begin(), z.shape.end());
  else
    in.resize(in.size() + kShapeDim, 0.0);
  if (z.heat.size() == kHeatDim)
    in.insert(in.end(), z.heat.begin(), z.heat.end());
  else
    in.resize(in.size() + kHeatDim, 0.0);
  return in;
}

// ---------------------------------------------------------------------------
// Coefficient passes
// ---------------------------------------------------------------------------

AffinityEval affinity_forward(const NeuralStack& stack, const PairFeatures& feat) {
  AffinityEval e;
  e.feat = feat;
  e.r_vec[0] = stack.motion.forward({feat.l_m.begin(), feat.l_m.end()}, e.tape_m)[0];
  e.r_vec[1] = stack.box.forward({feat.l_b.begin(), feat.l_b.end()}, e.tape_b)[0];
  e.r_vec[2] = feat.has_shape ? stack.shape.forward(feat.l_s, e.tape_s)[0] : 0.0;
  e.r_vec[3] = feat.has_heat ? stack.heat.forward(feat.l_h, e.tape_h)[0] : 0.0;
  e.r_vec[4] = feat.beta_hat;

  const auto om = stack.weight.forward(omega_input(feat), e.tape_w);
  for (std::size_t t = 0; t < 5; ++t) e.omega[t] = om[t];
  double r = 0.0;
  for (std::size_t t = 0; t < 5; ++t) r += e.omega[t] * e.r_vec[t];
  e.r = r;
  e.f_rho = stack.affinity.forward({r}, e.tape_aff)[0];
  return e;
}

void affinity_backward(const NeuralStack& stack, const AffinityEval& eval,
                       double d_f_rho, StackGrads& grads) {
  const auto d_in = stack.affinity.backward(eval.tape_aff, {d_f_rho}, grads.affinity);
  const double d_r = d_in[0];

  std::vector<double> d_omega(5);
  for (std::size_t t = 0; t < 5; ++t) d_omega[t] = d_r * eval.r_vec[t];
  stack.weight.backward(eval.tape_w, d_omega, grads.weight);

  stack.motion.backward(eval.tape_m, {d_r * eval.omega[0]}, grads.motion);
  stack.box.backward(eval.tape_b, {d_r * eval.omega[1]}, grads.box);
  if (eval.feat.has_shape)
    stack.shape.backward(eval.tape_s, {d_r * eval.omega[2]}, grads.shape);
  if (eval.feat.has_heat)
    stack.heat.backward(eval.tape_h, {d_r * eval.omega[3]}, grads.heat);
  // r_vec[4] is the BP marginal: an input, not a parameter
}

double far_forward(const NeuralStack& stack, const std::vector<double>& in,
                   Mlp::Tape& tape) {
  return stack.far.forward(in, tape)[0];
}

Matrix enhancement_matrix(const Matrix& f_rho, const std::vector<double>& f_omega,
                          const Matrix& beta_hat, double floor_value) {
  const std::size_t I = f_rho.rows;
  const std::size_t J = f_rho.cols;
  if (f_omega.size() != J || beta_hat.rows != I || beta_hat.cols != J + 1)
    throw SizeError("enhancement inputs have mismatched shapes");
  Matrix c(I, J);
  for (std::size_t i = 0; i < I; ++i) {
    for (std::size_t j = 0; j < J; ++j) {
      const double relu = std::max(f_rho.at(i, j), 0.0);
      const double bh = std::max(beta_hat.at(i, j + 1), floor_value);
      c.at(i, j) = f_omega[j] + relu / bh;
    }
  }
  return c;
}

NeuralEnhancer::NeuralEnhancer(NeuralStack stack, bool use_affinity, bool use_far)
    : stack_(std::move(stack)), use_affinity_(use_affinity), use_far_(use_far) {
  stack_.validate();
}

EnhancementCoefficients NeuralEnhancer::compute(const EnhancementInput& in) {
  const std::size_t I = in.legacy->size();
  const std::size_t J = in.frame->measurements.size();
  EnhancementCoefficients out;
  out.affinity = Matrix(I, J);
  out.far.assign(J, 1.0);
  if (stack_.identity) return out;  // f_omega = 1, relu(f_rho) = 0 exactly

  Mlp::Tape scratch;
  if (use_far_) {
    for (std::size_t j = 0; j < J; ++j)
      out.far[j] = far_forward(stack_, far_input(in.frame->measurements[j]), scratch);
  }
  if (use_affinity_) {
    for (std::size_t i = 0; i < I; ++i) {
      for (std::size_t j = 0; j < J; ++j) {
        const auto feat =
            make_pair_features((*in.legacy)[i], (*in.legacy_motion)[i],
                               in.frame->measurements[j], in.beta_hat->at(i, j + 1));
        out.affinity.at(i, j) = affinity_forward(stack_, feat).f_rho;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

double loss_affinity(const std::vector<double>& f_rho, const std::vector<int>& gt) {
  if (f_rho.size() != gt.size()) throw SizeError("affinity loss inputs differ in length");
  double pos = 0.0, neg = 0.0;
  std::size_t npos = 0, nneg = 0;
  for (std::size_t i = 0; i < f_rho.size(); ++i) {
    if (gt[i] != 0) {
      pos += softplus(-f_rho[i]);  // -log sigma(f)
      ++npos;
    } else {
      neg += softplus(f_rho[i]);  // -log(1 - sigma(f))
      ++nneg;
    }
  }
  double loss = 0.0;
  if (npos > 0) loss += pos / static_cast<double>(npos);
  if (nneg > 0) loss += neg / static_cast<double>(nneg);
  return loss;
}

double loss_far(const std::vector<double>& f_omega, const std::vector<int>& gt,
                double u) {
  if (f_omega.size() != gt.size()) throw SizeError("far loss inputs differ in length");
  if (!(u >= 0.0 && u <= 1.0)) throw InputError("loss weight u must be in [0,1]");
  double pos = 0.0, neg = 0.0;
  std::size_t npos = 0, nneg = 0;
  for (std::size_t i = 0; i < f_omega.size(); ++i) {
    if (gt[i] != 0) {
      pos -= std::log(f_omega[i]);
      ++npos;
    } else {
      neg -= std::log(1.0 - f_omega[i]);
      ++nneg;
    }
  }
  double loss = 0.0;
  if (npos > 0) loss += pos / static_cast<double>(npos);
  if (nneg > 0) loss += u * neg / static_cast<double>(nneg);
  return loss;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

void OptimizerConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw InputError("learning rate must be nonnegative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InputError("momentum must be in [0,1)");
  if (!(weight_decay >= 0.0)) throw InputError("weight decay must be nonnegative");
  if (epochs < 0) throw InputError("epochs must be nonnegative");
}

namespace {

struct FrameEval {
  double loss = 0.0;
  std::vector<AffinityEval> pair_evals;
  std::vector<Mlp::Tape> far_tapes;
  std::vector<double> far_logits;
  std::vector<double> far_values;
  std::size_t pair_pos = 0, pair_neg = 0, far_pos = 0, far_neg = 0;
};

// Forward over one frame with tapes; loss evaluated in logit space so
// saturated sigmoids cannot produce infinities.
FrameEval eval_frame(const NeuralStack& stack, const FrameSample& frame) {
  FrameEval ev;
  double l_pos = 0.0, l_neg = 0.0;
  for (const PairSample& p : frame.pairs) {
    ev.pair_evals.push_back(affinity_forward(stack, p.features));
    const double f = ev.pair_evals.back().f_rho;
    if (p.label != 0) {
      l_pos += softplus(-f);
      ++ev.pair_pos;
    } else {
      l_neg += softplus(f);
      ++ev.pair_neg;
    }
  }
  double f_pos = 0.0, f_neg = 0.0;
  for (const FarSample& s : frame.fars) {
    Mlp::Tape tape;
    const double val = far_forward(stack, s.input, tape);
    const double logit = tape.pre.back()[0];
    ev.far_tapes.push_back(std::move(tape));
    ev.far_logits.push_back(logit);
    ev.far_values.push_back(val);
    if (s.label != 0) {
      f_pos += softplus(-logit);  // -log f_omega
      ++ev.far_pos;
    } else {
      f_neg += softplus(logit);  // -log(1 - f_omega)
      ++ev.far_neg;
    }
  }
  double loss = 0.0;
  if (ev.pair_pos > 0) loss += l_pos / static_cast<double>(ev.pair_pos);
  if (ev.pair_neg > 0) loss += l_neg / static_cast<double>(ev.pair_neg);
  if (ev.far_pos > 0) loss += f_pos / static_cast<double>(ev.far_pos);
  if (ev.far_neg > 0) loss += stack.u * f_neg / static_cast<double>(ev.far_neg);
  ev.loss = loss;
  return ev;
}

}  // namespace

double frame_loss(const NeuralStack& stack, const FrameSample& frame) {
  return eval_frame(stack, frame).loss;
}

double frame_loss_gradient(const NeuralStack& stack, const FrameSample& frame,
                           StackGrads& grads) {
  FrameEval ev = eval_frame(stack, frame);

  for (std::size_t p = 0; p < frame.pairs.size(); ++p) {
    const double f = ev.pair_evals[p].f_rho;
    const double s = sigmoid(f);
    double up;
    if (frame.pairs[p].label != 0)
      up = -(1.0 - s) / static_cast<double>(ev.pair_pos);
    else
      up = s / static_cast<double>(ev.pair_neg);
    affinity_backward(stack, ev.pair_evals[p], up, grads);
  }
  for (std::size_t q = 0; q < frame.fars.size(); ++q) {
    const double val = ev.far_values[q];
    double up;
    if (frame.fars[q].label != 0)
      up = -(1.0 - val) / static_cast<double>(ev.far_pos);
    else
      up = stack.u * val / static_cast<double>(ev.far_neg);
    stack.far.backward_logits(ev.far_tapes[q], {up}, grads.far);
  }
  return ev.loss;
}

double mean_loss(const NeuralStack& stack, const TrainingData& data) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (const FrameSample& frame : data) total += frame_loss(stack, frame);
  return total / static_cast<double>(data.size());
}

TrainResult train(NeuralStack& stack, const TrainingData& data,
                  const OptimizerConfig& cfg) {
  cfg.validate();
  stack.validate();
  if (stack.identity) throw InputError("identity stacks have no trainable parameters");
  TrainResult result;
  if (data.empty()) return result;

  StackGrads grads = make_stack_grads(stack);
  StackGrads velocity = make_stack_grads(stack);
  RngStream rng(cfg.seed, "training");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  auto apply = [&stack](const StackGrads& vel) {
    stack.motion.apply_update(vel.motion);
    stack.box.apply_update(vel.box);
    stack.shape.apply_update(vel.shape);
    stack.heat.apply_update(vel.heat);
    stack.weight.apply_update(vel.weight);
    stack.affinity.apply_update(vel.affinity);
    stack.far.apply_update(vel.far);
  };
  auto add_decay = [&stack, &grads](double d) {
    auto one = [d](MlpGrads& g, const Mlp& net) {
      for (std::size_t l = 0; l < net.num_layers(); ++l) {
        const Matrix& w = net.weights(l);
        for (std::size_t r = 0; r < w.rows; ++r)
          for (std::size_t c = 0; c < w.cols; ++c)
            g.w[l].at(r, c) += d * w.at(r, c);
      }
    };
    one(grads.motion, stack.motion);
    one(grads.box, stack.box);
    one(grads.shape, stack.shape);
    one(grads.heat, stack.heat);
    one(grads.weight, stack.weight);
    one(grads.affinity, stack.affinity);
    one(grads.far, stack.far);
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_total = 0.0;
    for (std::size_t idx : order) {
      grads.zero();
      const double loss = frame_loss_gradient(stack, data[idx], grads);
      if (!std::isfinite(loss))
        throw DegenerateInput("training diverged: non-finite loss at epoch " +
                              std::to_string(epoch));
      epoch_total += loss;
      if (cfg.weight_decay > 0.0) add_decay(cfg.weight_decay);
      // momentum SGD: v <- m v - lr g; theta <- theta + v
      velocity.scale(cfg.momentum);
      velocity.add_scaled(grads, -cfg.learning_rate);
      apply(velocity);
    }
    if (!stack.finite())
      throw DegenerateInput("training diverged: non-finite parameters at epoch " +
                            std::to_string(epoch));
    result.epoch_loss.push_back(epoch_total / static_cast<double>(data.size()));
  }
  return result;
}

}  // namespace nebp
