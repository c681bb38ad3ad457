#include "nebp/kernels.hpp"

// NEON kernels (aarch64). f64x2 vectors, so the fixed 4-lane reduction is
// emulated with two accumulators: acc01 holds lanes {0,1}, acc23 holds {2,3},
// and groups of four elements feed them exactly as the scalar reference does.
// vmul/vadd only; vmla would fuse and change rounding.

#if defined(__aarch64__)

#include <arm_neon.h>

namespace nebp::kernels {
namespace {

void ca_propagate_neon(double* pos, double* vel, const double* acc, std::size_t n,
                       double dt) {
  const double hdt2 = 0.5 * dt * dt;
  const float64x2_t vdt = vdupq_n_f64(dt);
  const float64x2_t vh = vdupq_n_f64(hdt2);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t p = vld1q_f64(pos + i);
    float64x2_t v = vld1q_f64(vel + i);
    float64x2_t a = vld1q_f64(acc + i);
    float64x2_t t1 = vmulq_f64(v, vdt);
    float64x2_t t2 = vmulq_f64(a, vh);
    p = vaddq_f64(vaddq_f64(p, t1), t2);
    v = vaddq_f64(v, vmulq_f64(a, vdt));
    vst1q_f64(pos + i, p);
    vst1q_f64(vel + i, v);
  }
  for (; i < n; ++i) {
    const double t1 = vel[i] * dt;
    const double t2 = acc[i] * hdt2;
    pos[i] = (pos[i] + t1) + t2;
    vel[i] = vel[i] + acc[i] * dt;
  }
}

void axpy_neon(double* y, const double* x, double a, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t yv = vld1q_f64(y + i);
    float64x2_t xv = vld1q_f64(x + i);
    vst1q_f64(y + i, vaddq_f64(yv, vmulq_f64(va, xv)));
  }
  for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

void scale_neon(double* y, double a, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vmulq_f64(vld1q_f64(y + i), va));
  for (; i < n; ++i) y[i] = y[i] * a;
}

void mul_inplace_neon(double* y, const double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(y + i, vmulq_f64(vld1q_f64(y + i), vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] = y[i] * x[i];
}

void mahalanobis4_half_neon(const double* px, const double* py, const double* vx,
                            const double* vy, const double* z, const double* linv,
                            double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double r0 = z[0] - px[i];
    const double r1 = z[1] - py[i];
    const double r2 = z[2] - vx[i];
    const double r3 = z[3] - vy[i];
    const double y0 = linv[0] * r0;
    const double y1 = linv[1] * r0 + linv[2] * r1;
    const double y2 = (linv[3] * r0 + linv[4] * r1) + linv[5] * r2;
    const double y3 = ((linv[6] * r0 + linv[7] * r1) + linv[8] * r2) + linv[9] * r3;
    const double q = (y0 * y0 + y1 * y1) + (y2 * y2 + y3 * y3);
    out[i] = 0.5 * q;
  }
}

double sum_neon(const double* x, std::size_t n) {
  float64x2_t acc01 = vdupq_n_f64(0.0);
  float64x2_t acc23 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc01 = vaddq_f64(acc01, vld1q_f64(x + i));
    acc23 = vaddq_f64(acc23, vld1q_f64(x + i + 2));
  }
  double acc[4] = {vgetq_lane_f64(acc01, 0), vgetq_lane_f64(acc01, 1),
                   vgetq_lane_f64(acc23, 0), vgetq_lane_f64(acc23, 1)};
  for (; i < n; ++i) acc[i & 3] += x[i];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

double dot_neon(const double* x, const double* y, std::size_t n) {
  float64x2_t acc01 = vdupq_n_f64(0.0);
  float64x2_t acc23 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc01 = vaddq_f64(acc01, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
    acc23 = vaddq_f64(acc23, vmulq_f64(vld1q_f64(x + i + 2), vld1q_f64(y + i + 2)));
  }
  double acc[4] = {vgetq_lane_f64(acc01, 0), vgetq_lane_f64(acc01, 1),
                   vgetq_lane_f64(acc23, 0), vgetq_lane_f64(acc23, 1)};
  for (; i < n; ++i) acc[i & 3] += x[i] * y[i];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

double sum_sq_neon(const double* x, std::size_t n) {
  float64x2_t acc01 = vdupq_n_f64(0.0);
  float64x2_t acc23 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    float64x2_t a = vld1q_f64(x + i);
    float64x2_t b = vld1q_f64(x + i + 2);
    acc01 = vaddq_f64(acc01, vmulq_f64(a, a));
    acc23 = vaddq_f64(acc23, vmulq_f64(b, b));
  }
  double acc[4] = {vgetq_lane_f64(acc01, 0), vgetq_lane_f64(acc01, 1),
                   vgetq_lane_f64(acc23, 0), vgetq_lane_f64(acc23, 1)};
  for (; i < n; ++i) acc[i & 3] += x[i] * x[i];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

void matvec_neon(const double* w, const double* x, const double* b, double* y,
                 std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    double v = dot_neon(w + r * cols, x, cols);
    y[r] = (b != nullptr) ? v + b[r] : v;
  }
}

void matvec_t_neon(const double* w, const double* d, double* y, std::size_t rows,
                   std::size_t cols) {
  for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) axpy_neon(y, w + r * cols, d[r], cols);
}

void outer_acc_neon(double* gw, const double* d, const double* x, std::size_t rows,
                    std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy_neon(gw + r * cols, x, d[r], cols);
}

}  // namespace

const Ops* neon_ops() {
  static const Ops ops = {
      "neon",
      ca_propagate_neon,
      axpy_neon,
      scale_neon,
      mul_inplace_neon,
      mahalanobis4_half_neon,
      sum_neon,
      dot_neon,
      sum_sq_neon,
      matvec_neon,
      matvec_t_neon,
      outer_acc_neon,
  };
  return &ops;
}

}  // namespace nebp::kernels

#else

namespace nebp::kernels {
const Ops* neon_ops() { return nullptr; }
}  // namespace nebp::kernels

#endif
