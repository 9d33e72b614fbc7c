// bracket.hpp - Lie brackets of update vector fields, the second-order
// composition expansion, the bracket-corrected approximate backward iterate
// and its running-sum recursion, and a mesh-halving order-of-accuracy
// checker.

#pragma once

#include "orderlab/core.hpp"

#include <iosfwd>

namespace orderlab {

/// [V_a, V_b](theta) = V_a'(theta) V_b(theta) - V_b'(theta) V_a(theta).
/// Both operators must provide field and Jacobian.
Vec lie_bracket(const UpdateOperator& a, const UpdateOperator& b,
                const Vec& theta);

/// Truncated expansion of the composition T_{i1} ... T_{ik}(theta), where
/// ops[0] is the outermost factor (applied last):
///   theta + h sum_l V_{il}(theta) + h^2 sum_{u<v} V_{iu}'(theta) V_{iv}(theta).
/// All operators must share the same learning rate.
Vec second_order_expansion(const std::vector<UpdateOperator>& ops,
                           const Vec& theta);

struct ForwardBackwardDifference {
  Vec exact;      // T_1...T_n(theta) - T_n...T_1(theta), full compositions
  Vec predicted;  // h^2 sum_{i<j} [V_i, V_j](theta)
};

/// Exact backward-minus-forward gap at theta after n steps, next to its
/// second-order bracket prediction.
ForwardBackwardDifference forward_backward_difference(
    const OperatorSequence& seq, const Vec& theta, long n);

/// Running sums for the recursive approximate backward iterate, kept in
/// loss-gradient convention (V_i = -grad L_i). After n steps:
///   g = sum_{i<n} grad L_i(theta0), H = sum_{i<n} hess L_i(theta0),
///   C = sum_{i<j<=n} [grad L_i, grad L_j](theta0).
struct ApproxBackwardState {
  Vec g;
  Mat H;
  Vec C;
  Vec base_point;
  long step = 0;
};

/// theta~_n = theta_n + h^2 sum_{1<=i<j<=n} [grad L_i, grad L_j](theta0),
/// with the double sum evaluated directly: the oracle for the recursion.
Vec approx_backward_direct(const OperatorSequence& seq, const Vec& theta0,
                           long n);

/// Same value computed with one forward pass plus running sums: one gradient
/// at theta_{n-1}, one gradient and Hessian at theta0, and two
/// matrix-vector products per step.
std::pair<Vec, ApproxBackwardState> approx_backward_recursive(
    const OperatorSequence& seq, const Vec& theta0, long n);

/// Per-step theta~ series as a trajectory (mode approx-backward).
Trajectory approx_backward_trajectory(const OperatorSequence& seq,
                                      const Vec& theta0, long n,
                                      const EngineOptions& opts = {});

struct OrderCheckRow {
  double h = 0.0;
  double error = 0.0;  // distance(approximation, reference)
  double ratio = kNaN; // error(h) / error(h/2)
  bool discarded = false;  // error at the floating-point floor
};

/// Runs build(h) = (approximation, reference) over a geometric ladder of h
/// values (each half the previous, at least 3) and reports error decay
/// ratios; a p-th order method approaches 2^p. Rows with error below 1e-13
/// are discarded.
std::vector<OrderCheckRow> order_check(
    const std::function<std::pair<Vec, Vec>(double)>& build,
    const std::vector<double>& ladder);

/// CSV with columns h,error,ratio,discarded.
void write_order_check_csv(const std::vector<OrderCheckRow>& rows,
                           std::ostream& out);

}  // namespace orderlab
