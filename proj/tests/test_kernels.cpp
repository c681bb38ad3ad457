#include <doctest.h>

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "nebp/kernels.hpp"
#include "nebp/random.hpp"

using namespace nebp;
using kernels::Ops;

namespace {

std::vector<double> random_vec(RngStream& rng, std::size_t n, double lo = -3.0,
                               double hi = 3.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  return a.empty() ||
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

bool bitwise_equal(double a, double b) {
  return std::memcmp(&a, &b, sizeof(double)) == 0;
}

const std::size_t kSizes[] = {0, 1, 2, 3, 4, 5, 7, 8, 13, 31, 32, 33, 100, 257};

// Runs every kernel on identical inputs through both tables and demands
// bitwise identical outputs.
void check_pair(const Ops& a, const Ops& b, std::size_t n, std::uint64_t seed) {
  RngStream rng(seed);
  const auto x = random_vec(rng, n);
  const auto y = random_vec(rng, n);
  const double c = rng.uniform(-2.0, 2.0);

  {
    auto pa = x, va = y;
    auto pb = x, vb = y;
    const auto acc = random_vec(rng, n, -1.0, 1.0);
    a.ca_propagate(pa.data(), va.data(), acc.data(), n, 0.5);
    b.ca_propagate(pb.data(), vb.data(), acc.data(), n, 0.5);
    CHECK(bitwise_equal(pa, pb));
    CHECK(bitwise_equal(va, vb));
  }
  {
    auto ya = x, yb = x;
    a.axpy(ya.data(), y.data(), c, n);
    b.axpy(yb.data(), y.data(), c, n);
    CHECK(bitwise_equal(ya, yb));
  }
  {
    auto ya = x, yb = x;
    a.scale(ya.data(), c, n);
    b.scale(yb.data(), c, n);
    CHECK(bitwise_equal(ya, yb));
  }
  {
    auto ya = x, yb = x;
    a.mul_inplace(ya.data(), y.data(), n);
    b.mul_inplace(yb.data(), y.data(), n);
    CHECK(bitwise_equal(ya, yb));
  }
  {
    const auto px = random_vec(rng, n), py = random_vec(rng, n);
    const auto vx = random_vec(rng, n), vy = random_vec(rng, n);
    const double z[4] = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1),
                         rng.uniform(-1, 1)};
    // any lower-triangular factor works for the equivalence check
    const double linv[10] = {2.5, 0.1, 2.5, -0.2, 0.3, 1.1, 0.0, -0.1, 0.2, 1.3};
    std::vector<double> oa(n), ob(n);
    a.mahalanobis4_half(px.data(), py.data(), vx.data(), vy.data(), z, linv,
                        oa.data(), n);
    b.mahalanobis4_half(px.data(), py.data(), vx.data(), vy.data(), z, linv,
                        ob.data(), n);
    CHECK(bitwise_equal(oa, ob));
  }
  CHECK(bitwise_equal(a.sum(x.data(), n), b.sum(x.data(), n)));
  CHECK(bitwise_equal(a.dot(x.data(), y.data(), n), b.dot(x.data(), y.data(), n)));
  CHECK(bitwise_equal(a.sum_sq(x.data(), n), b.sum_sq(x.data(), n)));
  {
    const std::size_t rows = 5;
    const auto w = random_vec(rng, rows * n);
    const auto bias = random_vec(rng, rows);
    std::vector<double> ya(rows), yb(rows);
    a.matvec(w.data(), x.data(), bias.data(), ya.data(), rows, n);
    b.matvec(w.data(), x.data(), bias.data(), yb.data(), rows, n);
    CHECK(bitwise_equal(ya, yb));

    const auto d = random_vec(rng, rows);
    std::vector<double> ta(n), tb(n);
    a.matvec_t(w.data(), d.data(), ta.data(), rows, n);
    b.matvec_t(w.data(), d.data(), tb.data(), rows, n);
    CHECK(bitwise_equal(ta, tb));

    auto ga = random_vec(rng, rows * n);
    auto gb = ga;
    a.outer_acc(ga.data(), d.data(), x.data(), rows, n);
    b.outer_acc(gb.data(), d.data(), x.data(), rows, n);
    CHECK(bitwise_equal(ga, gb));
  }
}

}  // namespace

TEST_CASE("kernel variants agree bitwise with the scalar reference") {
  const Ops& scalar = kernels::scalar_ops();
  std::vector<const Ops*> others;
  if (kernels::avx2_ops() != nullptr) others.push_back(kernels::avx2_ops());
  if (kernels::neon_ops() != nullptr) others.push_back(kernels::neon_ops());
  // x86 CI machines must actually exercise the AVX2 path
#if defined(__x86_64__)
  if (__builtin_cpu_supports("avx2")) CHECK(kernels::avx2_ops() != nullptr);
#endif
  for (const Ops* simd : others) {
    INFO("variant ", simd->name);
    for (std::size_t n : kSizes) {
      for (std::uint64_t seed : {1u, 2u, 3u}) check_pair(scalar, *simd, n, seed);
    }
  }
}

TEST_CASE("kernel arithmetic matches straightforward formulas") {
  const Ops& k = kernels::active();
  RngStream rng(7);
  const std::size_t n = 101;
  const auto x = random_vec(rng, n);
  const auto y = random_vec(rng, n);

  double s = 0.0, d = 0.0, q = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += x[i];
    d += x[i] * y[i];
    q += x[i] * x[i];
  }
  CHECK(k.sum(x.data(), n) == doctest::Approx(s).epsilon(1e-12));
  CHECK(k.dot(x.data(), y.data(), n) == doctest::Approx(d).epsilon(1e-12));
  CHECK(k.sum_sq(x.data(), n) == doctest::Approx(q).epsilon(1e-12));

  // integer-valued sums are exact
  std::vector<double> ones(1000000, 1.0);
  CHECK(k.sum(ones.data(), ones.size()) == 1000000.0);

  auto pos = x;
  auto vel = y;
  const auto acc = random_vec(rng, n);
  const double dt = 0.5;
  k.ca_propagate(pos.data(), vel.data(), acc.data(), n, dt);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(pos[i] ==
          doctest::Approx(x[i] + y[i] * dt + 0.5 * acc[i] * dt * dt).epsilon(1e-12));
    CHECK(vel[i] == doctest::Approx(y[i] + acc[i] * dt).epsilon(1e-12));
  }
}

TEST_CASE("kernel selection") {
  auto names = kernels::available();
  REQUIRE(!names.empty());
  CHECK(names.front() == "scalar");

  kernels::force("scalar");
  CHECK(std::string(kernels::active().name) == "scalar");
  for (const auto& name : names) {
    kernels::force(name);
    CHECK(std::string(kernels::active().name) == name);
  }
  CHECK_THROWS_AS(kernels::force("mmx"), std::invalid_argument);
#if !defined(__aarch64__)
  CHECK_THROWS_AS(kernels::force("neon"), std::invalid_argument);
#endif
  kernels::force(names.back());
}
