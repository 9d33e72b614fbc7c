#include "orderlab/core.hpp"

#include "doctest.h"
#include "helpers.hpp"
#include "orderlab/models.hpp"

#include <cmath>

using namespace orderlab;
using namespace orderlab::testing;

TEST_CASE("forward two-step iterate matches the hand-evaluated closed form") {
  // (1-h)^2 theta + h eps2 + h(1-h) eps1 with h = 0.5, theta = 1,
  // eps = (1, -1) gives 0.
  const OperatorSequence seq = fixed_quadratic_seq(0.5, {1.0, -1.0});
  const Trajectory traj = apply_forward(seq, vec1(1.0), 2);
  CHECK(traj.records.size() == 3);
  CHECK(traj.records[2].iterate[0] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("backward two-step iterate matches the hand-evaluated closed form") {
  // (1-h)^2 theta + h eps1 + h(1-h) eps2 gives 0.5.
  const OperatorSequence seq = fixed_quadratic_seq(0.5, {1.0, -1.0});
  const Trajectory traj = apply_backward_naive(seq, vec1(1.0), 2);
  CHECK(traj.records[2].iterate[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("zero steps yield only the start point") {
  const OperatorSequence seq = fixed_quadratic_seq(0.5, {1.0});
  for (const Trajectory& traj :
       {apply_forward(seq, vec1(3.0), 0), apply_backward_naive(seq, vec1(3.0), 0)}) {
    CHECK(traj.records.size() == 1);
    CHECK(traj.records[0].step == 0);
    CHECK(traj.records[0].iterate[0] == 3.0);
    CHECK(traj.records[0].step_displacement == 0.0);
  }
}

TEST_CASE("single-step forward and backward coincide") {
  NoiseModel noise;
  const OperatorSequence seq = quadratic_sequence(0.3, noise, 77);
  const Trajectory fwd = apply_forward(seq, vec1(2.0), 1);
  const Trajectory bwd = apply_backward_naive(seq, vec1(2.0), 1);
  CHECK(fwd.records[1].iterate[0] == bwd.records[1].iterate[0]);
}

TEST_CASE("order-1 agreement holds for every seed and model") {
  for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
    NoiseModel noise;
    const OperatorSequence seq = quadratic_sequence(0.1, noise, seed);
    const Trajectory fwd = apply_forward(seq, vec1(1.0), 5);
    const Trajectory bwd = apply_backward_naive(seq, vec1(1.0), 5);
    CHECK(fwd.records[0].iterate[0] == bwd.records[0].iterate[0]);
    CHECK(fwd.records[1].iterate[0] == bwd.records[1].iterate[0]);
    CHECK(fwd.records[1].step_displacement == bwd.records[1].step_displacement);
  }
}

TEST_CASE("identical operators collapse all iteration orders") {
  // Full-batch case: the same map at every step.
  const LeastSquaresProblem ls = random_least_squares(12, 3, 3, 5);
  const OperatorSequence seq = full_batch_sequence(ls.model(), 0.05);
  const Vec start = Vec::Zero(3);
  const long n = 30;
  const Trajectory fwd = apply_forward(seq, start, n);
  const Trajectory bwd = apply_backward_naive(seq, start, n);
  const Trajectory mid = apply_intermittent_backward(seq, start, n, {10, 20});
  const Trajectory sw = apply_backward_after(seq, start, n, 15);
  CHECK(records_identical(fwd, bwd));
  CHECK(records_identical(fwd, mid));
  CHECK(records_identical(fwd, sw));
}

TEST_CASE("backward replay is deterministic and prefix-stable") {
  NoiseModel noise;
  const OperatorSequence seq = quadratic_sequence(0.1, noise, 41);
  const Trajectory a = apply_backward_naive(seq, vec1(1.0), 40);
  const Trajectory b = apply_backward_naive(seq, vec1(1.0), 40);
  CHECK(records_identical(a, b));

  const Trajectory longer = apply_backward_naive(seq, vec1(1.0), 55);
  for (long m = 0; m <= 40; ++m) {
    CHECK(a.records[m].iterate[0] == longer.records[m].iterate[0]);
    CHECK(a.records[m].step_displacement ==
          longer.records[m].step_displacement);
  }
}

TEST_CASE("intermittent backward with no resets equals the naive engine") {
  NoiseModel noise;
  const OperatorSequence seq = quadratic_sequence(0.2, noise, 8);
  const Trajectory plain = apply_backward_naive(seq, vec1(1.0), 25);
  const Trajectory empty = apply_intermittent_backward(seq, vec1(1.0), 25, {});
  const Trajectory boundary =
      apply_intermittent_backward(seq, vec1(1.0), 25, {25});
  CHECK(records_identical(plain, empty));
  CHECK(records_identical(plain, boundary));
}

TEST_CASE("intermittent backward rejects bad reset lists") {
  NoiseModel noise;
  const OperatorSequence seq = quadratic_sequence(0.2, noise, 8);
  CHECK_THROWS_AS(apply_intermittent_backward(seq, vec1(1.0), 10, {0}),
                  ConfigError);
  CHECK_THROWS_AS(apply_intermittent_backward(seq, vec1(1.0), 10, {11}),
                  ConfigError);
  CHECK_THROWS_AS(apply_intermittent_backward(seq, vec1(1.0), 10, {4, 4}),
                  ConfigError);
  CHECK_THROWS_AS(apply_intermittent_backward(seq, vec1(1.0), 10, {6, 3}),
                  ConfigError);
}

TEST_CASE("intermittent backward re-anchors at its own iterate") {
  // Two windows; compare the second window against a manual replay from the
  // recorded anchor.
  NoiseModel noise;
  const OperatorSequence seq = quadratic_sequence(0.1, noise, 13);
  const long n = 20, reset = 8;
  const Trajectory traj =
      apply_intermittent_backward(seq, vec1(1.0), n, {reset});
  const Trajectory plain = apply_backward_naive(seq, vec1(1.0), reset);
  CHECK(traj.records[reset].iterate[0] == plain.records[reset].iterate[0]);
  const Vec anchor = traj.records[reset].iterate;
  for (long m = reset + 1; m <= n; ++m) {
    Vec x = anchor;
    for (long i = m; i > reset; --i) x = seq.at(i).apply(x);
    CHECK(traj.records[m].iterate[0] == x[0]);
  }
}

TEST_CASE("backward-after-switch degenerates correctly at both ends") {
  NoiseModel noise;
  const OperatorSequence seq = quadratic_sequence(0.1, noise, 3);
  const Trajectory bwd = apply_backward_naive(seq, vec1(1.0), 15);
  const Trajectory fwd = apply_forward(seq, vec1(1.0), 15);
  CHECK(records_identical(apply_backward_after(seq, vec1(1.0), 15, 0), bwd));
  CHECK(records_identical(apply_backward_after(seq, vec1(1.0), 15, 15), fwd));
  CHECK_THROWS_AS(apply_backward_after(seq, vec1(1.0), 15, 16), ConfigError);
  CHECK_THROWS_AS(apply_backward_after(seq, vec1(1.0), 15, -1), ConfigError);
}

TEST_CASE("backward-after-switch displacements decay from the anchor") {
  // For the quadratic model the replayed increment at step m is exactly
  // h (1-h)^(m-s-1) |eps_m - anchor|.
  const double h = 0.1;
  NoiseModel noise;
  const std::uint64_t seed = 21;
  const OperatorSequence seq = quadratic_sequence(h, noise, seed);
  const long n = 150, s = 50;
  const Trajectory traj = apply_backward_after(seq, vec1(1.0), n, s);
  CHECK(traj.anchor_steps == std::vector<long>{s});
  const double anchor = traj.records[s].iterate[0];
  for (long m = s + 1; m <= n; ++m) {
    const double eps = noise.sample(seed, m);
    const double expected =
        h * std::pow(1.0 - h, static_cast<double>(m - s - 1)) *
        std::abs(eps - anchor);
    CHECK(traj.records[m].step_displacement ==
          doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("step displacement series matches pairwise distances") {
  NoiseModel noise;
  const OperatorSequence seq = quadratic_sequence(0.1, noise, 17);
  const Trajectory traj = apply_backward_naive(seq, vec1(1.0), 30);
  const std::vector<double> series = step_displacement_series(traj);
  REQUIRE(series.size() == 30);
  for (std::size_t m = 1; m <= series.size(); ++m)
    CHECK(series[m - 1] == distance(traj.records[m].iterate,
                                    traj.records[m - 1].iterate));
}

TEST_CASE("a trajectory pinned at a fixed point has zero displacements") {
  NoiseModel silent;
  silent.scale = 0.0;
  const OperatorSequence seq = quadratic_sequence(0.5, silent, 1);
  const Trajectory traj = apply_forward(seq, vec1(0.0), 10);
  for (double d : step_displacement_series(traj)) CHECK(d == 0.0);
}

TEST_CASE("backward displacements obey the geometric noise envelope") {
  // Entry m <= h (1-h)^(m-1) (max|eps| + |theta0|) for the scalar quadratic.
  const double h = 0.1;
  NoiseModel noise;
  noise.kind = NoiseKind::UniformSymmetric;  // bounded by scale
  const std::uint64_t seed = 4;
  const OperatorSequence seq = quadratic_sequence(h, noise, seed);
  const Trajectory traj = apply_backward_naive(seq, vec1(1.0), 60);
  const std::vector<double> series = step_displacement_series(traj);
  for (std::size_t m = 1; m <= series.size(); ++m) {
    const double envelope =
        h * std::pow(1.0 - h, static_cast<double>(m - 1)) * (1.0 + 1.0);
    CHECK(series[m - 1] <= envelope + 1e-12);
  }
}

TEST_CASE("Cauchy bound: backward iterates stay within D k^n / (1-k)") {
  const double h = 0.1, k = 1.0 - h;
  NoiseModel noise;
  noise.kind = NoiseKind::UniformSymmetric;
  const std::uint64_t seed = 23;
  const OperatorSequence seq = quadratic_sequence(h, noise, seed);
  const Vec start = vec1(1.0);
  const long n_max = 200;

  double bound_d = 0.0;  // sup over the horizon of d(theta, T_i(theta))
  for (long i = 1; i <= n_max; ++i)
    bound_d = std::max(bound_d, distance(start, seq.at(i).apply(start)));

  const Trajectory traj = apply_backward_naive(seq, start, n_max);
  for (long n = 1; n < n_max; ++n) {
    for (long m = n + 1; m <= n_max; ++m) {
      const double gap =
          distance(traj.records[n].iterate, traj.records[m].iterate);
      CHECK(gap <= bound_d * std::pow(k, static_cast<double>(n)) / (1.0 - k) +
                       1e-12);
    }
  }
}

TEST_CASE("operator application counts follow the cost model") {
  NoiseModel noise;
  auto counter = std::make_shared<long>(0);
  const OperatorSequence seq =
      counting_sequence(quadratic_sequence(0.1, noise, 2), counter);

  const long n = 37;
  *counter = 0;
  apply_forward(seq, vec1(1.0), n);
  CHECK(*counter == n);

  *counter = 0;
  apply_backward_naive(seq, vec1(1.0), n);
  CHECK(*counter == n * (n + 1) / 2);

  // Intermittent replay cost is the sum of per-window triangles.
  *counter = 0;
  apply_intermittent_backward(seq, vec1(1.0), 30, {10});
  CHECK(*counter == 10 * 11 / 2 + 20 * 21 / 2);
}

TEST_CASE("divergence aborts with the failing step") {
  OperatorSequence seq;
  seq.at = [](long i) {
    UpdateOperator op;
    op.index = static_cast<int>(i);
    op.learning_rate = 1.0;
    op.apply = [i](const Vec& x) -> Vec {
      return i == 5 ? Vec::Constant(1, std::numeric_limits<double>::infinity())
                    : x;
    };
    return op;
  };
  try {
    apply_forward(seq, Vec::Zero(1), 10);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& err) {
    CHECK(err.step() == 5);
  }
}

TEST_CASE("dimension changes are a configuration error") {
  OperatorSequence seq;
  seq.at = [](long i) {
    UpdateOperator op;
    op.index = static_cast<int>(i);
    op.apply = [](const Vec&) -> Vec { return Vec::Zero(2); };
    return op;
  };
  CHECK_THROWS_AS(apply_forward(seq, Vec::Zero(1), 1), ConfigError);
}

TEST_CASE("dist_to_anchor measures distance to the window terminal") {
  NoiseModel noise;
  const OperatorSequence seq = quadratic_sequence(0.1, noise, 6);
  const long n = 30, reset = 12;
  const Trajectory traj =
      apply_intermittent_backward(seq, vec1(1.0), n, {reset});
  for (long m = 0; m <= reset; ++m)
    CHECK(traj.records[m].dist_to_anchor ==
          distance(traj.records[m].iterate, traj.records[reset].iterate));
  for (long m = reset + 1; m <= n; ++m)
    CHECK(traj.records[m].dist_to_anchor ==
          distance(traj.records[m].iterate, traj.records[n].iterate));
}

TEST_CASE("loss probe thinning fills losses only on probed steps") {
  NoiseModel noise;
  const OperatorSequence seq = quadratic_sequence(0.1, noise, 6);
  EngineOptions opts;
  opts.probe.train = [](const Vec& x) { return x[0] * x[0]; };
  opts.probe.every = 5;
  const Trajectory traj = apply_forward(seq, vec1(1.0), 12, opts);
  for (long m = 0; m <= 12; ++m) {
    if (m % 5 == 0)
      CHECK(!std::isnan(traj.records[m].train_loss));
    else
      CHECK(std::isnan(traj.records[m].train_loss));
  }
}
