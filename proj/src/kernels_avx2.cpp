#include "nebp/kernels.hpp"

// AVX2 kernels. Compiled with -mavx2 and without -mfma: every multiply-add is
// an explicit mul followed by add, matching the scalar reference rounding.
// Reduction lanes map element i to lane (i mod 4), and the horizontal combine
// is spelled out as (l0+l1)+(l2+l3), so all results are bitwise equal to the
// scalar kernels.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace nebp::kernels {
namespace {

inline double hsum_fixed(__m256d v) {
  double t[4];
  _mm256_storeu_pd(t, v);
  return (t[0] + t[1]) + (t[2] + t[3]);
}

void ca_propagate_avx2(double* pos, double* vel, const double* acc, std::size_t n,
                       double dt) {
  const double hdt2 = 0.5 * dt * dt;
  const __m256d vdt = _mm256_set1_pd(dt);
  const __m256d vh = _mm256_set1_pd(hdt2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d p = _mm256_loadu_pd(pos + i);
    __m256d v = _mm256_loadu_pd(vel + i);
    __m256d a = _mm256_loadu_pd(acc + i);
    __m256d t1 = _mm256_mul_pd(v, vdt);
    __m256d t2 = _mm256_mul_pd(a, vh);
    p = _mm256_add_pd(_mm256_add_pd(p, t1), t2);
    v = _mm256_add_pd(v, _mm256_mul_pd(a, vdt));
    _mm256_storeu_pd(pos + i, p);
    _mm256_storeu_pd(vel + i, v);
  }
  for (; i < n; ++i) {
    const double t1 = vel[i] * dt;
    const double t2 = acc[i] * hdt2;
    pos[i] = (pos[i] + t1) + t2;
    vel[i] = vel[i] + acc[i] * dt;
  }
}

void axpy_avx2(double* y, const double* x, double a, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    __m256d xv = _mm256_loadu_pd(x + i);
    _mm256_storeu_pd(y + i, _mm256_add_pd(yv, _mm256_mul_pd(va, xv)));
  }
  for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

void scale_avx2(double* y, double a, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(y + i), va));
  for (; i < n; ++i) y[i] = y[i] * a;
}

void mul_inplace_avx2(double* y, const double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i,
                     _mm256_mul_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) y[i] = y[i] * x[i];
}

void mahalanobis4_half_avx2(const double* px, const double* py, const double* vx,
                            const double* vy, const double* z, const double* linv,
                            double* out, std::size_t n) {
  const __m256d z0 = _mm256_set1_pd(z[0]);
  const __m256d z1 = _mm256_set1_pd(z[1]);
  const __m256d z2 = _mm256_set1_pd(z[2]);
  const __m256d z3 = _mm256_set1_pd(z[3]);
  const __m256d l00 = _mm256_set1_pd(linv[0]);
  const __m256d l10 = _mm256_set1_pd(linv[1]), l11 = _mm256_set1_pd(linv[2]);
  const __m256d l20 = _mm256_set1_pd(linv[3]), l21 = _mm256_set1_pd(linv[4]),
                l22 = _mm256_set1_pd(linv[5]);
  const __m256d l30 = _mm256_set1_pd(linv[6]), l31 = _mm256_set1_pd(linv[7]),
                l32 = _mm256_set1_pd(linv[8]), l33 = _mm256_set1_pd(linv[9]);
  const __m256d half = _mm256_set1_pd(0.5);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d r0 = _mm256_sub_pd(z0, _mm256_loadu_pd(px + i));
    __m256d r1 = _mm256_sub_pd(z1, _mm256_loadu_pd(py + i));
    __m256d r2 = _mm256_sub_pd(z2, _mm256_loadu_pd(vx + i));
    __m256d r3 = _mm256_sub_pd(z3, _mm256_loadu_pd(vy + i));
    __m256d y0 = _mm256_mul_pd(l00, r0);
    __m256d y1 = _mm256_add_pd(_mm256_mul_pd(l10, r0), _mm256_mul_pd(l11, r1));
    __m256d y2 = _mm256_add_pd(
        _mm256_add_pd(_mm256_mul_pd(l20, r0), _mm256_mul_pd(l21, r1)),
        _mm256_mul_pd(l22, r2));
    __m256d y3 = _mm256_add_pd(
        _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(l30, r0), _mm256_mul_pd(l31, r1)),
                      _mm256_mul_pd(l32, r2)),
        _mm256_mul_pd(l33, r3));
    __m256d q = _mm256_add_pd(
        _mm256_add_pd(_mm256_mul_pd(y0, y0), _mm256_mul_pd(y1, y1)),
        _mm256_add_pd(_mm256_mul_pd(y2, y2), _mm256_mul_pd(y3, y3)));
    _mm256_storeu_pd(out + i, _mm256_mul_pd(half, q));
  }
  for (; i < n; ++i) {
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

double sum_avx2(const double* x, std::size_t n) {
  __m256d vacc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vacc = _mm256_add_pd(vacc, _mm256_loadu_pd(x + i));
  double acc[4];
  _mm256_storeu_pd(acc, vacc);
  for (; i < n; ++i) acc[i & 3] += x[i];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d vacc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    vacc = _mm256_add_pd(vacc,
                         _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  double acc[4];
  _mm256_storeu_pd(acc, vacc);
  for (; i < n; ++i) acc[i & 3] += x[i] * y[i];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

double sum_sq_avx2(const double* x, std::size_t n) {
  __m256d vacc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d xv = _mm256_loadu_pd(x + i);
    vacc = _mm256_add_pd(vacc, _mm256_mul_pd(xv, xv));
  }
  double acc[4];
  _mm256_storeu_pd(acc, vacc);
  for (; i < n; ++i) acc[i & 3] += x[i] * x[i];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

void matvec_avx2(const double* w, const double* x, const double* b, double* y,
                 std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    double v = dot_avx2(w + r * cols, x, cols);
    y[r] = (b != nullptr) ? v + b[r] : v;
  }
}

void matvec_t_avx2(const double* w, const double* d, double* y, std::size_t rows,
                   std::size_t cols) {
  for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) axpy_avx2(y, w + r * cols, d[r], cols);
}

void outer_acc_avx2(double* gw, const double* d, const double* x, std::size_t rows,
                    std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy_avx2(gw + r * cols, x, d[r], cols);
}

}  // namespace

const Ops* avx2_ops() {
  static const Ops ops = {
      "avx2",
      ca_propagate_avx2,
      axpy_avx2,
      scale_avx2,
      mul_inplace_avx2,
      mahalanobis4_half_avx2,
      sum_avx2,
      dot_avx2,
      sum_sq_avx2,
      matvec_avx2,
      matvec_t_avx2,
      outer_acc_avx2,
  };
  return &ops;
}

}  // namespace nebp::kernels

#else

namespace nebp::kernels {
const Ops* avx2_ops() { return nullptr; }
}  // namespace nebp::kernels

#endif
