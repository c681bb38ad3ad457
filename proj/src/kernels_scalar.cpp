#include "nebp/kernels.hpp"

// Scalar reference kernels. Reductions keep four accumulators indexed by
// (i mod 4) and combine them as (l0+l1)+(l2+l3); the SIMD variants reproduce
// this exact order, which is what makes them interchangeable bit for bit.

namespace nebp::kernels {
namespace {

void ca_propagate_scalar(double* pos, double* vel, const double* acc, std::size_t n,
                         double dt) {
  const double hdt2 = 0.5 * dt * dt;
  for (std::size_t i = 0; i < n; ++i) {
    const double t1 = vel[i] * dt;
    const double t2 = acc[i] * hdt2;
    pos[i] = (pos[i] + t1) + t2;
    vel[i] = vel[i] + acc[i] * dt;
  }
}

void axpy_scalar(double* y, const double* x, double a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

void scale_scalar(double* y, double a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] * a;
}

void mul_inplace_scalar(double* y, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] * x[i];
}

void mahalanobis4_half_scalar(const double* px, const double* py, const double* vx,
                              const double* vy, const double* z, const double* linv,
                              double* out, std::size_t n) {
  const double l00 = linv[0];
  const double l10 = linv[1], l11 = linv[2];
  const double l20 = linv[3], l21 = linv[4], l22 = linv[5];
  const double l30 = linv[6], l31 = linv[7], l32 = linv[8], l33 = linv[9];
  for (std::size_t i = 0; i < n; ++i) {
    const double r0 = z[0] - px[i];
    const double r1 = z[1] - py[i];
    const double r2 = z[2] - vx[i];
    const double r3 = z[3] - vy[i];
    const double y0 = l00 * r0;
    const double y1 = l10 * r0 + l11 * r1;
    const double y2 = (l20 * r0 + l21 * r1) + l22 * r2;
    const double y3 = ((l30 * r0 + l31 * r1) + l32 * r2) + l33 * r3;
    const double q = (y0 * y0 + y1 * y1) + (y2 * y2 + y3 * y3);
    out[i] = 0.5 * q;
  }
}

double sum_scalar(const double* x, std::size_t n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) acc[i & 3] += x[i];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) acc[i & 3] += x[i] * y[i];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

double sum_sq_scalar(const double* x, std::size_t n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) acc[i & 3] += x[i] * x[i];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

void matvec_scalar(const double* w, const double* x, const double* b, double* y,
                   std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = w + r * cols;
    double v = dot_scalar(row, x, cols);
    y[r] = (b != nullptr) ? v + b[r] : v;
  }
}

void matvec_t_scalar(const double* w, const double* d, double* y, std::size_t rows,
                     std::size_t cols) {
  for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = w + r * cols;
    const double dr = d[r];
    for (std::size_t c = 0; c < cols; ++c) y[c] = y[c] + dr * row[c];
  }
}

void outer_acc_scalar(double* gw, const double* d, const double* x, std::size_t rows,
                      std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = gw + r * cols;
    const double dr = d[r];
    for (std::size_t c = 0; c < cols; ++c) row[c] = row[c] + dr * x[c];
  }
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops = {
      "scalar",
      ca_propagate_scalar,
      axpy_scalar,
      scale_scalar,
      mul_inplace_scalar,
      mahalanobis4_half_scalar,
      sum_scalar,
      dot_scalar,
      sum_sq_scalar,
      matvec_scalar,
      matvec_t_scalar,
      outer_acc_scalar,
  };
  return ops;
}

}  // namespace nebp::kernels
