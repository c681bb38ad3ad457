#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "nebp/metrics.hpp"
#include "nebp/random.hpp"

using namespace nebp;

namespace {

double brute_force_assignment(const Matrix& cost) {
  const std::size_t n = std::min(cost.rows, cost.cols);
  std::vector<std::size_t> rows(cost.rows), cols(cost.cols);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  // Permute whichever side is larger and take the first n pairings.
  if (cost.rows <= cost.cols) {
    do {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += cost.at(i, cols[i]);
      best = std::min(best, acc);
    } while (std::next_permutation(cols.begin(), cols.end()));
  } else {
    do {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += cost.at(rows[j], j);
      best = std::min(best, acc);
    } while (std::next_permutation(rows.begin(), rows.end()));
  }
  return best;
}

}  // namespace

TEST_CASE("assignment solver matches brute force on random rectangles") {
  RngStream rng(123, "toydata");
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t r = 1 + static_cast<std::size_t>(rng.uniform() * 4.0);
    const std::size_t c = 1 + static_cast<std::size_t>(rng.uniform() * 4.0);
    Matrix cost(r, c);
    for (double& v : cost.data) v = rng.uniform() * 10.0 - 2.0;
    const AssignmentResult got = solve_assignment(cost);
    CHECK(got.cost == doctest::Approx(brute_force_assignment(cost)).epsilon(1e-12));
    std::vector<char> used(c, 0);
    std::size_t matched = 0;
    for (int j : got.row_to_col) {
      if (j < 0) continue;
      CHECK(!used[static_cast<std::size_t>(j)]);
      used[static_cast<std::size_t>(j)] = 1;
      ++matched;
    }
    CHECK(matched == std::min(r, c));
  }
  Matrix bad(1, 1);
  bad.at(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(solve_assignment(bad), InputError);
}

TEST_CASE("gospa hand values") {
  const std::vector<std::array<double, 2>> truth{{0.0, 0.0}, {10.0, 0.0}};

  SUBCASE("identical sets score zero") {
    const GospaStep s = gospa_step(truth, truth, 2.0, 1.0);
    CHECK(s.localization == 0.0);
    CHECK(s.missed == 0.0);
    CHECK(s.false_alarm == 0.0);
    CHECK(s.total == 0.0);
  }
  SUBCASE("one missed object costs half the cutoff power") {
    const GospaStep s = gospa_step({{0.0, 0.0}}, truth, 2.0, 1.0);
    CHECK(s.localization == 0.0);
    CHECK(s.missed == doctest::Approx(1.0).epsilon(1e-15));  // c/2 with c=2
    CHECK(s.false_alarm == 0.0);
    CHECK(s.total == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("small offsets accumulate as localization") {
    const std::vector<std::array<double, 2>> est{{0.5, 0.0}, {10.0, 0.5}};
    const GospaStep s = gospa_step(est, truth, 5.0, 1.0);
    CHECK(s.localization == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.missed == 0.0);
    CHECK(s.false_alarm == 0.0);
    CHECK(s.total == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("estimates beyond the cutoff decompose into miss plus false alarm") {
    const GospaStep s = gospa_step({{100.0, 0.0}}, {{{0.0, 0.0}}}, 2.0, 1.0);
    CHECK(s.localization == 0.0);
    CHECK(s.missed == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(s.false_alarm == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(s.total == doctest::Approx(2.0).epsilon(1e-15));
  }
  SUBCASE("second order takes the square root of the sum") {
    const GospaStep s = gospa_step({}, {{{0.0, 0.0}}}, 2.0, 2.0);
    CHECK(s.missed == doctest::Approx(2.0).epsilon(1e-15));  // c^2/2
    CHECK(s.total == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    const GospaStep l = gospa_step({{1.0, 0.0}}, {{{0.0, 0.0}}}, 5.0, 2.0);
    CHECK(l.localization == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(l.total == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("parameter validation") {
    CHECK_THROWS_AS(gospa_step({}, {}, 0.0, 1.0), InputError);
    CHECK_THROWS_AS(gospa_step({}, {}, 2.0, 0.5), InputError);
  }
}

TEST_CASE("gospa prefers the assignment that minimizes total cost") {
  // Crossing assignment would pay 2 * 9; optimal pairing pays 2 * 1.
  const std::vector<std::array<double, 2>> est{{1.0, 0.0}, {9.0, 0.0}};
  const std::vector<std::array<double, 2>> truth{{0.0, 0.0}, {10.0, 0.0}};
  const GospaStep s = gospa_step(est, truth, 20.0, 1.0);
  CHECK(s.localization == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("gospa satisfies the triangle inequality on random sets") {
  RngStream rng(321, "toydata");
  for (int rep = 0; rep < 300; ++rep) {
    auto random_set = [&](std::size_t max_n) {
      std::vector<std::array<double, 2>> s(static_cast<std::size_t>(rng.uniform() * (max_n + 1)));
      for (auto& p : s) p = {rng.uniform() * 10.0, rng.uniform() * 10.0};
      return s;
    };
    const auto a = random_set(4), b = random_set(4), c = random_set(4);
    const double ab = gospa_step(a, b, 2.5, 1.0).total;
    const double bc = gospa_step(b, c, 2.5, 1.0).total;
    const double ac = gospa_step(a, c, 2.5, 1.0).total;
    CHECK(ac <= ab + bc + 1e-12);
    CHECK(gospa_step(a, b, 2.5, 1.0).total == doctest::Approx(gospa_step(b, a, 2.5, 1.0).total).epsilon(1e-12));
  }
}

TEST_CASE("gospa sequence report averages per-step values") {
  std::vector<TrackFrame> tracks(2);
  std::vector<TruthFrame> truth(2);
  truth[0] = {{1, {0.0, 0.0}}};
  truth[1] = {{1, {1.0, 0.0}}};
  tracks[0] = {{7, {0.0, 0.0}, 0.9}};
  // Step 2: no estimate -> one miss.
  const GospaReport rep = gospa(tracks, truth, 2.0, 1.0);
  REQUIRE(rep.per_step.size() == 2);
  CHECK(rep.per_step[0].total == 0.0);
  CHECK(rep.per_step[1].total == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(rep.mean.total == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(rep.mean.missed == doctest::Approx(0.5).epsilon(1e-15));

  std::vector<TrackFrame> wrong(3);
  CHECK_THROWS_AS(gospa(wrong, truth, 2.0, 1.0), SizeError);
}

TEST_CASE("amota trivial endpoints") {
  std::vector<TruthFrame> truth(3);
  for (std::size_t k = 0; k < 3; ++k)
    truth[k] = {{1, {0.0, 0.0}}, {2, {20.0, 0.0}}};

  SUBCASE("perfect tracks reach one") {
    std::vector<TrackFrame> tracks(3);
    for (std::size_t k = 0; k < 3; ++k)
      tracks[k] = {{10, {0.0, 0.0}, 0.9}, {11, {20.0, 0.0}, 0.8}};
    const AmotaReport rep = amota_simplified(tracks, truth, {4, 2.0});
    CHECK(rep.amota == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(rep.amotp == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("no declared tracks scores zero") {
    const std::vector<TrackFrame> tracks(3);
    const AmotaReport rep = amota_simplified(tracks, truth, {4, 2.0});
    CHECK(rep.amota == 0.0);
    CHECK(rep.amotp == doctest::Approx(2.0).epsilon(1e-15));  // gate at every level
  }
  SUBCASE("empty truth is undefined") {
    const std::vector<TrackFrame> tracks(2);
    const std::vector<TruthFrame> none(2);
    CHECK_THROWS_AS(amota_simplified(tracks, none, {4, 2.0}), UndefinedMetric);
  }
}

TEST_CASE("amota matches a hand-computed sweep table") {
  // Two truth objects over two steps: P = 4. One track covers object one in
  // both steps at score 0.9; a second track covers object two only in step
  // one at score 0.5; two clutter outputs at score 0.2.
  std::vector<TruthFrame> truth(2);
  truth[0] = {{1, {0.0, 0.0}}, {2, {30.0, 0.0}}};
  truth[1] = {{1, {1.0, 0.0}}, {2, {31.0, 0.0}}};
  std::vector<TrackFrame> tracks(2);
  tracks[0] = {{10, {0.0, 0.0}, 0.9}, {11, {30.0, 0.0}, 0.5}, {99, {80.0, 0.0}, 0.2}};
  tracks[1] = {{10, {1.0, 0.0}, 0.9}, {98, {-80.0, 0.0}, 0.2}};

  const AmotaReport rep = amota_simplified(tracks, truth, {4, 2.0});
  REQUIRE(rep.motar.size() == 4);
  // r = 0.25 and 0.5: threshold 0.9 keeps two perfect matches; FN = 2 is
  // fully absorbed by the (1 - r) P correction; clamp caps the first level.
  CHECK(rep.motar[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(rep.motar[1] == doctest::Approx(1.0).epsilon(1e-15));
  // r = 0.75: threshold 0.5 adds the third match; FN = 1 = (1 - r) P.
  CHECK(rep.motar[2] == doctest::Approx(1.0).epsilon(1e-15));
  // r = 1.0 is unreachable.
  CHECK(rep.motar[3] == 0.0);
  CHECK(rep.amota == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(rep.amotp == doctest::Approx((0.0 + 0.0 + 0.0 + 2.0) / 4.0).epsilon(1e-15));
}

TEST_CASE("amota penalizes uncorrected errors at their recall level") {
  // One truth object over four steps; the tracker reports it with one false
  // alarm inside the sweep range.
  std::vector<TruthFrame> truth(4);
  for (std::size_t k = 0; k < 4; ++k) truth[k] = {{1, {0.0, 0.0}}};
  std::vector<TrackFrame> tracks(4);
  for (std::size_t k = 0; k < 4; ++k) tracks[k] = {{10, {0.0, 0.0}, 0.9}};
  tracks[2].push_back({55, {50.0, 0.0}, 0.95});  // confident false alarm

  const AmotaReport rep = amota_simplified(tracks, truth, {2, 2.0});
  // r = 0.5: threshold 0.9 (the 0.95 false alarm alone reaches no recall);
  // stats: TP 4, FP 1, FN 0 -> motar = 1 - (1 - 2)/2 -> clamped to 1.
  CHECK(rep.motar[0] == doctest::Approx(1.0).epsilon(1e-15));
  // r = 1.0: same threshold; motar = 1 - (1 + 0 - 0)/4 = 0.75.
  CHECK(rep.motar[1] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(rep.amota == doctest::Approx(0.875).epsilon(1e-15));
}

TEST_CASE("low-scoring clutter never improves amota") {
  RngStream rng(55, "toydata");
  std::vector<TruthFrame> truth(6);
  std::vector<TrackFrame> tracks(6);
  for (std::size_t k = 0; k < 6; ++k) {
    truth[k] = {{1, {0.0, 0.0}}, {2, {15.0, 3.0}}};
    tracks[k] = {{10, {0.1, 0.0}, 0.6 + 0.05 * static_cast<double>(k)},
                 {11, {15.0, 3.1}, 0.7}};
  }
  const AmotaConfig cfg{8, 2.0};
  const double base = amota_simplified(tracks, truth, cfg).amota;
  std::vector<TrackFrame> polluted = tracks;
  for (std::size_t k = 0; k < 6; ++k)
    for (int c = 0; c < 3; ++c)
      polluted[k].push_back({100 + static_cast<std::uint64_t>(c),
                             {rng.uniform() * 100.0 + 30.0, rng.uniform() * 100.0},
                             0.05 * rng.uniform()});
  const double dirty = amota_simplified(polluted, truth, cfg).amota;
  CHECK(dirty <= base + 1e-12);
}

TEST_CASE("identity switches are counted per truth object") {
  std::vector<TruthFrame> truth(4);
  for (std::size_t k = 0; k < 4; ++k) truth[k] = {{1, {static_cast<double>(k), 0.0}}};
  std::vector<TrackFrame> tracks(4);
  tracks[0] = {{10, {0.0, 0.0}, 0.9}};
  tracks[1] = {{10, {1.0, 0.0}, 0.9}};
  tracks[2] = {{20, {2.0, 0.0}, 0.9}};  // switch
  tracks[3] = {{20, {3.0, 0.0}, 0.9}};
  CHECK(count_id_switches(tracks, truth, 2.0) == 1);

  tracks[3] = {{10, {3.0, 0.0}, 0.9}};  // switch back counts again
  CHECK(count_id_switches(tracks, truth, 2.0) == 2);

  // A gap with the same id on both sides is not a switch.
  tracks[2] = {};
  tracks[3] = {{10, {3.0, 0.0}, 0.9}};
  CHECK(count_id_switches(tracks, truth, 2.0) == 0);
}

TEST_CASE("evaluate_tracking composes the report") {
  std::vector<TruthFrame> truth(2);
  truth[0] = {{1, {0.0, 0.0}}};
  truth[1] = {{1, {1.0, 0.0}}};
  std::vector<TrackFrame> tracks(2);
  tracks[0] = {{10, {0.0, 0.0}, 0.9}};
  tracks[1] = {{10, {1.0, 0.0}, 0.9}};
  const MetricReport rep = evaluate_tracking(tracks, truth, 5.0, 1.0, {4, 2.0});
  CHECK(rep.gospa.mean.total == 0.0);
  CHECK(rep.amota == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(rep.id_switches == 0);
  CHECK(rep.amota >= 0.0);
  CHECK(rep.amota <= 1.0);
}

TEST_CASE("truth frames expose scenario positions per step") {
  ScenarioConfig cfg;
  cfg.duration = 20;
  cfg.initial_objects = 3;
  cfg.survival_prob = 0.9;
  cfg.birth_rate = 0.2;
  RngStream rng(17, "scenario");
  const Scenario s = generate_scenario(cfg, rng);
  const std::vector<TruthFrame> frames = truth_frames(s);
  REQUIRE(frames.size() == 20);
  for (int k = 0; k < 20; ++k) {
    CHECK(frames[static_cast<std::size_t>(k)].size() == s.live_count(k));
    for (const TruthPoint& p : frames[static_cast<std::size_t>(k)]) {
      bool found = false;
      for (const Trajectory& t : s.trajectories) {
        if (t.truth_id != p.truth_id) continue;
        REQUIRE(t.alive(k));
        CHECK(p.pos[0] == t.state_at(k).pos[0]);
        CHECK(p.pos[1] == t.state_at(k).pos[1]);
        found = true;
      }
      CHECK(found);
    }
  }
}
