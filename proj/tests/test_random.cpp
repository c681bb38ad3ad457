#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "nebp/random.hpp"

using namespace nebp;

TEST_CASE("named substreams are reproducible and independent") {
  RngStream a(42, "scenario");
  RngStream b(42, "scenario");
  RngStream c(42, "detector");
  bool any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64();
    CHECK(va == b.next_u64());
    if (va != c.next_u64()) any_diff = true;
  }
  CHECK(any_diff);

  RngStream d(43, "scenario");
  RngStream e(42, "scenario");
  bool seed_diff = false;
  for (int i = 0; i < 16; ++i)
    if (d.next_u64() != e.next_u64()) seed_diff = true;
  CHECK(seed_diff);
}

TEST_CASE("hash primitives match their reference constants") {
  // first splitmix64 output for state 0 and the fnv-1a offset basis
  CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") != fnv1a64("b"));
}

TEST_CASE("uniform moments and range") {
  RngStream rng(1);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sq += u * u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(sq / n - (sum / n) * (sum / n) == doctest::Approx(1.0 / 12).epsilon(0.02));
}

TEST_CASE("normal moments") {
  RngStream rng(2);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  CHECK(sum / n == doctest::Approx(0.0).epsilon(0.01));
  CHECK(sq / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("poisson mean and variance") {
  RngStream rng(3);
  const int n = 100000;
  const double mean = 10.0;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const int k = rng.poisson(mean);
    sum += k;
    sq += static_cast<double>(k) * k;
  }
  const double m = sum / n;
  CHECK(m == doctest::Approx(mean).epsilon(0.02));
  CHECK(sq / n - m * m == doctest::Approx(mean).epsilon(0.05));
  CHECK(rng.poisson(0.0) == 0);
}

TEST_CASE("beta moments match the detection-score priors") {
  RngStream rng(4);
  const int n = 100000;
  double s82 = 0.0, s24 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = rng.beta(8.0, 2.0);
    const double b = rng.beta(2.0, 4.0);
    REQUIRE(a >= 0.0);
    REQUIRE(a <= 1.0);
    s82 += a;
    s24 += b;
  }
  CHECK(s82 / n == doctest::Approx(0.8).epsilon(0.01));
  CHECK(s24 / n == doctest::Approx(1.0 / 3).epsilon(0.01));
}

TEST_CASE("gamma mean") {
  RngStream rng(5);
  const int n = 100000;
  double s = 0.0, s_small = 0.0;
  for (int i = 0; i < n; ++i) {
    s += rng.gamma(3.0);
    s_small += rng.gamma(0.5);
  }
  CHECK(s / n == doctest::Approx(3.0).epsilon(0.02));
  CHECK(s_small / n == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("bernoulli frequency") {
  RngStream rng(6);
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i)
    if (rng.bernoulli(0.3)) ++hits;
  CHECK(static_cast<double>(hits) / n == doctest::Approx(0.3).epsilon(0.03));
}

TEST_CASE("shuffle is a deterministic permutation") {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  RngStream a(9, "shuffle");
  RngStream b(9, "shuffle");
  a.shuffle(v);
  b.shuffle(w);
  CHECK(v == w);
  CHECK(v != std::vector<int>(v.size(), 0));
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
}
