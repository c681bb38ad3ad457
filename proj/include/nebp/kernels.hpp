#pragma once

// Data-parallel inner loops used by the particle engine and the MLP layer.
//
// Every kernel exists in a scalar reference form and (where the platform
// provides it) a SIMD form. The active variant is chosen once at startup from
// CPU capabilities and can be overridden with force() or the NEBP_KERNELS
// environment variable ("scalar", "avx2", "neon").
//
// Reductions use a fixed 4-lane accumulation: element i goes to lane (i mod 4)
// and lanes combine as (l0+l1)+(l2+l3). Both the scalar and the SIMD variants
// implement exactly this order, so results are bitwise identical across
// variants and the tracker output does not depend on which one is active.
// Elementwise kernels keep a fixed operation order per element and never use
// fused multiply-add.

#include <cstddef>
#include <string>
#include <vector>

namespace nebp::kernels {

struct Ops {
  const char* name;

  // pos += vel*dt + acc*(dt^2/2); vel += acc*dt  (per axis pair, in place)
  void (*ca_propagate)(double* pos, double* vel, const double* acc, std::size_t n, double dt);

  // y[i] += a * x[i]
  void (*axpy)(double* y, const double* x, double a, std::size_t n);

  // y[i] *= a
  void (*scale)(double* y, double a, std::size_t n);

  // y[i] *= x[i]
  void (*mul_inplace)(double* y, const double* x, std::size_t n);

  // out[i] = 0.5 * || Linv * (z - H x_i) ||^2 with H selecting (px,py,vx,vy).
  // linv holds the lower-triangular inverse Cholesky factor of the 4x4
  // measurement noise covariance, packed row-wise:
  //   [l00, l10, l11, l20, l21, l22, l30, l31, l32, l33]
  void (*mahalanobis4_half)(const double* px, const double* py, const double* vx,
                            const double* vy, const double* z, const double* linv,
                            double* out, std::size_t n);

  double (*sum)(const double* x, std::size_t n);
  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*sum_sq)(const double* x, std::size_t n);

  // y = W x + b, W row-major rows x cols. Each row is a fixed-lane dot.
  void (*matvec)(const double* w, const double* x, const double* b, double* y,
                 std::size_t rows, std::size_t cols);

  // y = W^T d, accumulated row by row (y starts at zero inside the kernel).
  void (*matvec_t)(const double* w, const double* d, double* y, std::size_t rows,
                   std::size_t cols);

  // gw += d * x^T (outer product accumulate)
  void (*outer_acc)(double* gw, const double* d, const double* x, std::size_t rows,
                    std::size_t cols);
};

// Active kernel table. Resolved on first call: NEBP_KERNELS env override if
// set, otherwise the widest variant the CPU supports.
const Ops& active();

// Force a variant by name; throws std::invalid_argument for unknown or
// unsupported names.
void force(const std::string& name);

// Names of variants usable on this machine ("scalar" always included).
std::vector<std::string> available();

// Reference and SIMD tables, exposed for equivalence tests.
const Ops& scalar_ops();
const Ops* avx2_ops();  // nullptr when unsupported
const Ops* neon_ops();  // nullptr when unsupported

}  // namespace nebp::kernels
