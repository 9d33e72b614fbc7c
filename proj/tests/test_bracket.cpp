#include "orderlab/bracket.hpp"

#include "doctest.h"
#include "helpers.hpp"
#include "orderlab/models.hpp"

#include <cmath>

using namespace orderlab;
using namespace orderlab::testing;

namespace {

// Operator with an affine field V(theta) = A theta + b.
UpdateOperator affine_field_op(int index, double h, Mat A, Vec b) {
  auto field = [A, b](const Vec& x) -> Vec { return A * x + b; };
  auto jac = [A](const Vec&) -> Mat { return A; };
  return make_field_operator(index, h, field, jac);
}

OperatorSequence sequence_of(std::vector<UpdateOperator> ops) {
  OperatorSequence seq;
  seq.length = static_cast<long>(ops.size());
  seq.at = [ops = std::move(ops)](long i) {
    return ops.at(static_cast<std::size_t>(i - 1));
  };
  return seq;
}

Mat rot_jacobian_a() {
  Mat A(2, 2);
  A << 0, 1, 0, 0;  // V1(x, y) = (y, 0)
  return A;
}

Mat rot_jacobian_b() {
  Mat A(2, 2);
  A << 0, 0, 1, 0;  // V2(x, y) = (0, x)
  return A;
}

Vec random_point(int dim, std::uint64_t seed, std::uint64_t salt) {
  Vec x(dim);
  for (int i = 0; i < dim; ++i)
    x[i] = rng::gaussian(seed, rng::stream::pairs,
                         salt * 1000 + static_cast<std::uint64_t>(i));
  return x;
}

}  // namespace

TEST_CASE("lie bracket of the shear fields at (1, 2) is (1, -2)") {
  const UpdateOperator a = affine_field_op(1, 0.1, rot_jacobian_a(), Vec::Zero(2));
  const UpdateOperator b = affine_field_op(2, 0.1, rot_jacobian_b(), Vec::Zero(2));
  Vec theta(2);
  theta << 1.0, 2.0;
  const Vec bracket = lie_bracket(a, b, theta);
  CHECK(bracket[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(bracket[1] == doctest::Approx(-2.0).epsilon(1e-14));
}

TEST_CASE("bracket of a field with itself vanishes") {
  const UpdateOperator a = affine_field_op(1, 0.1, rot_jacobian_a(), Vec::Ones(2));
  const Vec theta = random_point(2, 1, 1);
  CHECK(lie_bracket(a, a, theta).norm() == 0.0);
}

TEST_CASE("brackets of constant fields vanish") {
  const UpdateOperator a =
      affine_field_op(1, 0.1, Mat::Zero(2, 2), Vec::Ones(2));
  const UpdateOperator b =
      affine_field_op(2, 0.1, Mat::Zero(2, 2), -Vec::Ones(2));
  CHECK(lie_bracket(a, b, random_point(2, 2, 1)).norm() == 0.0);
}

TEST_CASE("missing capabilities raise CapabilityError naming the operator") {
  UpdateOperator naked;
  naked.index = 7;
  naked.learning_rate = 0.1;
  naked.apply = [](const Vec& x) { return x; };
  const UpdateOperator full =
      affine_field_op(1, 0.1, rot_jacobian_a(), Vec::Zero(2));
  try {
    lie_bracket(naked, full, Vec::Zero(2));
    FAIL("expected CapabilityError");
  } catch (const CapabilityError& err) {
    CHECK(std::string(err.what()).find("7") != std::string::npos);
  }
}

TEST_CASE("bracket antisymmetry and bilinearity hold at random points") {
  NoiseModel noise;
  for (int trial = 0; trial < 25; ++trial) {
    const Vec theta = random_point(2, 40 + trial, 1);
    const Vec shift_a = random_point(2, 40 + trial, 2);
    const Vec shift_b = random_point(2, 40 + trial, 3);
    const UpdateOperator va =
        affine_field_op(1, 0.1, rot_jacobian_a(), shift_a);
    const UpdateOperator vb =
        affine_field_op(2, 0.1, rot_jacobian_b(), shift_b);

    // Antisymmetry.
    CHECK((lie_bracket(va, vb, theta) + lie_bracket(vb, va, theta)).norm() <
          1e-12);

    // Bilinearity in the first slot: [2 va + 3 va', vb].
    const UpdateOperator va2 =
        affine_field_op(3, 0.1, rot_jacobian_b(), shift_b);
    const UpdateOperator combo = affine_field_op(
        4, 0.1, 2.0 * rot_jacobian_a() + 3.0 * rot_jacobian_b(),
        2.0 * shift_a + 3.0 * shift_b);
    const Vec lhs = lie_bracket(combo, vb, theta);
    const Vec rhs = 2.0 * lie_bracket(va, vb, theta) +
                    3.0 * lie_bracket(va2, vb, theta);
    CHECK((lhs - rhs).norm() < 1e-10);
  }
}

TEST_CASE("second-order expansion is exact for 1-D linear fields") {
  // V_i(theta) = a_i theta with a = (1, 2), h = 0.1, theta = 1: the exact
  // composition (1 + 0.1)(1 + 0.2) = 1.32 terminates at order h^2.
  const UpdateOperator t1 =
      affine_field_op(1, 0.1, Mat::Constant(1, 1, 1.0), Vec::Zero(1));
  const UpdateOperator t2 =
      affine_field_op(2, 0.1, Mat::Constant(1, 1, 2.0), Vec::Zero(1));
  const Vec theta = vec1(1.0);
  const Vec expanded = second_order_expansion({t1, t2}, theta);
  CHECK(expanded[0] == doctest::Approx(1.32).epsilon(1e-14));
  CHECK(expanded[0] ==
        doctest::Approx(t1.apply(t2.apply(theta))[0]).epsilon(1e-14));
}

TEST_CASE("second-order expansion of a single factor is the exact operator") {
  const UpdateOperator op =
      affine_field_op(1, 0.2, rot_jacobian_a(), Vec::Ones(2));
  const Vec theta = random_point(2, 5, 1);
  CHECK((second_order_expansion({op}, theta) - op.apply(theta)).norm() == 0.0);
}

TEST_CASE("second-order expansion of zero fields is the identity") {
  const UpdateOperator zero =
      affine_field_op(1, 0.2, Mat::Zero(2, 2), Vec::Zero(2));
  const Vec theta = random_point(2, 6, 1);
  CHECK((second_order_expansion({zero, zero, zero}, theta) - theta).norm() ==
        0.0);
}

TEST_CASE("second-order expansion rejects mismatched learning rates") {
  const UpdateOperator a =
      affine_field_op(1, 0.1, rot_jacobian_a(), Vec::Zero(2));
  const UpdateOperator b =
      affine_field_op(2, 0.2, rot_jacobian_b(), Vec::Zero(2));
  CHECK_THROWS_AS(second_order_expansion({a, b}, Vec::Zero(2)), ConfigError);
}

TEST_CASE("forward/backward gap of the shear pair is predicted exactly") {
  // Affine fields, two steps: no O(h^3) term, so exact == prediction.
  const double h = 0.01;
  const OperatorSequence seq = sequence_of(
      {affine_field_op(1, h, rot_jacobian_a(), Vec::Zero(2)),
       affine_field_op(2, h, rot_jacobian_b(), Vec::Zero(2))});
  Vec theta(2);
  theta << 1.0, 2.0;
  const ForwardBackwardDifference diff =
      forward_backward_difference(seq, theta, 2);
  CHECK(diff.exact[0] == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(diff.exact[1] == doctest::Approx(-2e-4).epsilon(1e-12));
  CHECK((diff.exact - diff.predicted).norm() < 5e-15);  // pure roundoff
}

TEST_CASE("commuting fields close the forward/backward gap") {
  const double h = 0.05;
  const UpdateOperator same =
      affine_field_op(1, h, rot_jacobian_a(), Vec::Ones(2));
  const OperatorSequence seq = sequence_of({same, same, same});
  const ForwardBackwardDifference diff =
      forward_backward_difference(seq, random_point(2, 9, 1), 3);
  CHECK(diff.exact.norm() == 0.0);
  CHECK(diff.predicted.norm() == 0.0);
}

TEST_CASE("bracket prediction residual scales as h^3 on a non-commuting model") {
  const LeastSquaresProblem ls = random_least_squares(12, 3, 3, 19);
  const Vec theta0 = Vec::Zero(3);
  const long n = 6;
  auto residual = [&](double h) {
    const OperatorSequence seq = sgd_sequence(ls.model(), h, 55);
    const ForwardBackwardDifference diff =
        forward_backward_difference(seq, theta0, n);
    return (diff.exact - diff.predicted).norm();
  };
  double bound = 0.0;
  for (double h : {0.1, 0.05, 0.025, 0.0125})
    bound = std::max(bound, residual(h) / (h * h * h));
  // The scaled residual must stay bounded as h -> 0 (take 2x the largest
  // observed value at the coarsest level as the budget).
  CHECK(residual(0.0125) / (0.0125 * 0.0125 * 0.0125) <=
        2.0 * residual(0.1) / (0.1 * 0.1 * 0.1));
  CHECK(bound < 1e6);
}

TEST_CASE("direct approximate backward iterate") {
  const LeastSquaresProblem ls = random_least_squares(12, 3, 2, 23);
  const BatchLossModel model = ls.model();

  SUBCASE("n = 1 carries no correction") {
    const OperatorSequence seq = sgd_sequence(model, 0.05, 7);
    const Vec theta0 = Vec::Zero(3);
    const Vec direct = approx_backward_direct(seq, theta0, 1);
    CHECK((direct - seq.at(1).apply(theta0)).norm() == 0.0);
  }
  SUBCASE("identical batches commute, so the correction vanishes") {
    const UpdateOperator op = sgd_operator(model, 1, 0.05);
    const OperatorSequence seq = sequence_of({op, op, op, op});
    const Vec theta0 = random_point(3, 3, 1);
    const Vec direct = approx_backward_direct(seq, theta0, 4);
    Vec forward = theta0;
    for (long i = 1; i <= 4; ++i) forward = seq.at(i).apply(forward);
    CHECK((direct - forward).norm() == 0.0);
  }
  SUBCASE("distance to the true backward iterate shrinks cubically") {
    const Vec theta0 = Vec::Zero(3);
    auto error_at = [&](double h) {
      const OperatorSequence seq = sgd_sequence(model, h, 7);
      const Vec approx = approx_backward_direct(seq, theta0, 8);
      const Vec exact =
          apply_backward_naive(seq, theta0, 8).terminal_iterate();
      return (approx - exact).norm();
    };
    const double ratio = error_at(0.02) / error_at(0.01);
    CHECK(ratio > 6.5);
    CHECK(ratio < 9.5);
  }
}

TEST_CASE("recursive approximate backward equals the direct oracle") {
  // 20 random instances, d <= 10, n <= 100.
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 2 + trial % 9;
    const int batches = 2 + trial % 4;
    const LeastSquaresProblem ls =
        random_least_squares(batches * (dim + 2), dim, batches,
                             200 + static_cast<std::uint64_t>(trial));
    const OperatorSequence seq =
        sgd_sequence(ls.model(), 0.03, 300 + static_cast<std::uint64_t>(trial));
    const Vec theta0 = random_point(dim, 400 + trial, 1);
    const long n = 10 + (trial * 7) % 91;
    const Vec direct = approx_backward_direct(seq, theta0, n);
    const auto [recursive, state] = approx_backward_recursive(seq, theta0, n);
    CHECK((recursive - direct).norm() / std::max(1.0, direct.norm()) < 1e-10);
    CHECK(state.step == n);
  }
}

TEST_CASE("recursion state unrolls correctly for n = 1 and n = 2") {
  const LeastSquaresProblem ls = random_least_squares(12, 3, 2, 31);
  const BatchLossModel model = ls.model();
  const OperatorSequence seq = sgd_sequence(model, 0.05, 7);
  const Vec theta0 = random_point(3, 5, 2);

  const auto [tilde1, s1] = approx_backward_recursive(seq, theta0, 1);
  CHECK(s1.C.norm() == 0.0);
  CHECK((tilde1 - seq.at(1).apply(theta0)).norm() == 0.0);
  CHECK(s1.g.norm() == 0.0);
  CHECK(s1.H.norm() == 0.0);

  const auto [tilde2, s2] = approx_backward_recursive(seq, theta0, 2);
  const int b1 = seq.at(1).index, b2 = seq.at(2).index;
  // g2 = grad L1(theta0), H2 = hess L1(theta0), C2 = [grad L1, grad L2].
  CHECK((s2.g - model.gradient(b1, theta0)).norm() == 0.0);
  CHECK((s2.H - model.hessian(b1, theta0)).norm() == 0.0);
  const Vec bracket =
      model.hessian(b1, theta0) * model.gradient(b2, theta0) -
      model.hessian(b2, theta0) * model.gradient(b1, theta0);
  CHECK((s2.C - bracket).norm() < 1e-14);
}

TEST_CASE("field-level and loss-level bracket sums agree") {
  // V_i = -grad L_i: the two minus signs cancel in the bracket.
  const LeastSquaresProblem ls = random_least_squares(12, 3, 3, 37);
  const BatchLossModel model = ls.model();
  const Vec theta0 = random_point(3, 71, 1);
  Vec field_level = Vec::Zero(3);
  Vec loss_level = Vec::Zero(3);
  for (int i = 1; i <= 3; ++i) {
    for (int j = i + 1; j <= 3; ++j) {
      field_level += lie_bracket(sgd_operator(model, i, 0.1),
                                 sgd_operator(model, j, 0.1), theta0);
      loss_level += model.hessian(i, theta0) * model.gradient(j, theta0) -
                    model.hessian(j, theta0) * model.gradient(i, theta0);
    }
  }
  CHECK((field_level - loss_level).norm() < 1e-12);
}

TEST_CASE("approx-backward trajectory mirrors the recursion per step") {
  const LeastSquaresProblem ls = random_least_squares(12, 3, 2, 43);
  const OperatorSequence seq = sgd_sequence(ls.model(), 0.05, 7);
  const Vec theta0 = Vec::Zero(3);
  const Trajectory traj = approx_backward_trajectory(seq, theta0, 10);
  CHECK(traj.mode == IterationMode::ApproxBackward);
  for (long m = 1; m <= 10; ++m) {
    const Vec expected = approx_backward_recursive(seq, theta0, m).first;
    CHECK((traj.records[m].iterate - expected).norm() == 0.0);
  }
}

TEST_CASE("order checker validates its ladder and finds Euler first order") {
  auto euler = [](double h) {
    const long steps = std::lround(1.0 / h);
    return std::make_pair(Vec::Constant(1, std::pow(1.0 - h, steps)),
                          Vec::Constant(1, std::exp(-1.0)));
  };
  const std::vector<OrderCheckRow> rows =
      order_check(euler, {0.1, 0.05, 0.025, 0.0125});
  REQUIRE(rows.size() == 4);
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    CHECK(rows[i].ratio > 1.7);
    CHECK(rows[i].ratio < 2.3);
  }
  CHECK_THROWS_AS(order_check(euler, {0.1, 0.05}), ConfigError);
  CHECK_THROWS_AS(order_check(euler, {0.1, 0.06, 0.03}), ConfigError);
}

TEST_CASE("order checker discards errors at the floating-point floor") {
  auto exact = [](double) {
    return std::make_pair(Vec::Constant(1, 0.5), Vec::Constant(1, 0.5));
  };
  const std::vector<OrderCheckRow> rows =
      order_check(exact, {0.1, 0.05, 0.025});
  for (const OrderCheckRow& row : rows) {
    CHECK(row.discarded);
    CHECK(std::isnan(row.ratio));
  }
}
