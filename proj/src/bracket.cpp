#include "orderlab/bracket.hpp"

#include "orderlab/csv.hpp"

#include <cmath>
#include <ostream>

namespace orderlab {

namespace {

void require_bracket_capable(const UpdateOperator& op) {
  if (!op.has_field())
    throw CapabilityError("operator " + std::to_string(op.index) +
                          " provides no vector field");
  if (!op.has_jacobian())
    throw CapabilityError("operator " + std::to_string(op.index) +
                          " provides no field Jacobian");
}

double common_rate(const std::vector<UpdateOperator>& ops) {
  const double h = ops.front().learning_rate;
  for (const UpdateOperator& op : ops)
    if (op.learning_rate != h)
      throw ConfigError("operators disagree on the learning rate");
  return h;
}

std::vector<UpdateOperator> materialize(const OperatorSequence& seq, long n) {
  std::vector<UpdateOperator> ops;
  ops.reserve(static_cast<std::size_t>(n));
  for (long i = 1; i <= n; ++i) ops.push_back(seq.at(i));
  return ops;
}

}  // namespace

Vec lie_bracket(const UpdateOperator& a, const UpdateOperator& b,
                const Vec& theta) {
  require_bracket_capable(a);
  require_bracket_capable(b);
  return a.field_jacobian(theta) * b.field(theta) -
         b.field_jacobian(theta) * a.field(theta);
}

Vec second_order_expansion(const std::vector<UpdateOperator>& ops,
                           const Vec& theta) {
  if (ops.empty()) throw ConfigError("no operators to expand");
  for (const UpdateOperator& op : ops) require_bracket_capable(op);
  const double h = common_rate(ops);
  const std::size_t k = ops.size();
  std::vector<Vec> fields(k);
  std::vector<Mat> jacs(k);
  for (std::size_t l = 0; l < k; ++l) {
    fields[l] = ops[l].field(theta);
    jacs[l] = ops[l].field_jacobian(theta);
  }
  Vec result = theta;
  for (std::size_t l = 0; l < k; ++l) result += h * fields[l];
  for (std::size_t u = 0; u < k; ++u)
    for (std::size_t v = u + 1; v < k; ++v)
      result += h * h * (jacs[u] * fields[v]);
  return result;
}

ForwardBackwardDifference forward_backward_difference(
    const OperatorSequence& seq, const Vec& theta, long n) {
  if (n < 2) throw ConfigError("need at least two operators");
  const std::vector<UpdateOperator> ops = materialize(seq, n);
  for (const UpdateOperator& op : ops) require_bracket_capable(op);
  const double h = common_rate(ops);

  Vec backward = theta;  // T_1 ... T_n: apply T_n first
  for (long i = n; i >= 1; --i)
    backward = ops[static_cast<std::size_t>(i - 1)].apply(backward);
  Vec forward = theta;  // T_n ... T_1: apply T_1 first
  for (long i = 1; i <= n; ++i)
    forward = ops[static_cast<std::size_t>(i - 1)].apply(forward);

  std::vector<Vec> fields(ops.size());
  std::vector<Mat> jacs(ops.size());
  for (std::size_t l = 0; l < ops.size(); ++l) {
    fields[l] = ops[l].field(theta);
    jacs[l] = ops[l].field_jacobian(theta);
  }
  Vec predicted = Vec::Zero(theta.size());
  for (std::size_t i = 0; i < ops.size(); ++i)
    for (std::size_t j = i + 1; j < ops.size(); ++j)
      predicted += jacs[i] * fields[j] - jacs[j] * fields[i];
  predicted *= h * h;

  return {backward - forward, predicted};
}

Vec approx_backward_direct(const OperatorSequence& seq, const Vec& theta0,
                           long n) {
  if (n < 1) throw ConfigError("need at least one step");
  const std::vector<UpdateOperator> ops = materialize(seq, n);
  for (const UpdateOperator& op : ops) require_bracket_capable(op);
  const double h = common_rate(ops);

  Vec x = theta0;
  for (const UpdateOperator& op : ops) x = op.apply(x);

  // Direct double sum of loss-gradient brackets at theta0. The field-level
  // bracket equals the loss-level one: both minus signs cancel.
  std::vector<Vec> fields(ops.size());
  std::vector<Mat> jacs(ops.size());
  for (std::size_t l = 0; l < ops.size(); ++l) {
    fields[l] = ops[l].field(theta0);
    jacs[l] = ops[l].field_jacobian(theta0);
  }
  Vec correction = Vec::Zero(theta0.size());
  for (std::size_t i = 0; i < ops.size(); ++i)
    for (std::size_t j = i + 1; j < ops.size(); ++j)
      correction += jacs[i] * fields[j] - jacs[j] * fields[i];
  return x + h * h * correction;
}

namespace {

// One step of the running-sum recursion; grad/hess are the loss-gradient
// quantities of step k at the base point.
struct RecursionState {
  Vec x;
  ApproxBackwardState s;
  Vec prev_grad;
  Mat prev_hess;
  double h = 0.0;

  RecursionState(const Vec& theta0, double rate)
      : x(theta0), h(rate) {
    const Eigen::Index d = theta0.size();
    s.g = Vec::Zero(d);
    s.H = Mat::Zero(d, d);
    s.C = Vec::Zero(d);
    s.base_point = theta0;
    s.step = 0;
  }

  void advance(const UpdateOperator& op) {
    require_bracket_capable(op);
    if (op.learning_rate != h)
      throw ConfigError("operators disagree on the learning rate");
    const Vec grad = -op.field(s.base_point);
    const Mat hess = -op.field_jacobian(s.base_point);
    x = op.apply(x);
    if (s.step >= 1) {
      s.g += prev_grad;
      s.H += prev_hess;
    }
    s.C += s.H * grad - hess * s.g;
    prev_grad = grad;
    prev_hess = hess;
    ++s.step;
  }

  Vec corrected() const { return x + h * h * s.C; }
};

}  // namespace

std::pair<Vec, ApproxBackwardState> approx_backward_recursive(
    const OperatorSequence& seq, const Vec& theta0, long n) {
  if (n < 1) throw ConfigError("need at least one step");
  const UpdateOperator first = seq.at(1);
  RecursionState rec(theta0, first.learning_rate);
  rec.advance(first);
  for (long k = 2; k <= n; ++k) rec.advance(seq.at(k));
  return {rec.corrected(), rec.s};
}

Trajectory approx_backward_trajectory(const OperatorSequence& seq,
                                      const Vec& theta0, long n,
                                      const EngineOptions& opts) {
  if (n < 0) throw ConfigError("negative step count");
  Trajectory traj;
  traj.mode = IterationMode::ApproxBackward;
  traj.mode_label = mode_name(traj.mode);
  traj.seed = seq.seed;
  traj.iterates_recorded = opts.record_iterates;

  Vec prev = theta0;
  auto push = [&](long step, const Vec& point, double displacement) {
    TrajectoryRecord rec;
    rec.step = step;
    rec.step_displacement = displacement;
    if (opts.probe.every > 0 && step % opts.probe.every == 0) {
      if (opts.probe.train) rec.train_loss = opts.probe.train(point);
      if (opts.probe.test) rec.test_loss = opts.probe.test(point);
    }
    if (opts.record_iterates) rec.iterate = point;
    traj.records.push_back(std::move(rec));
  };
  push(0, theta0, 0.0);

  if (n > 0) {
    RecursionState rec(theta0, seq.at(1).learning_rate);
    for (long k = 1; k <= n; ++k) {
      rec.advance(seq.at(k));
      const Vec point = rec.corrected();
      if (!all_finite(point))
        throw DivergenceError(k, "non-finite iterate at step " +
                                     std::to_string(k));
      push(k, point, distance(point, prev));
      prev = point;
    }
  }
  finalize_dist_to_anchor(traj);
  return traj;
}

std::vector<OrderCheckRow> order_check(
    const std::function<std::pair<Vec, Vec>(double)>& build,
    const std::vector<double>& ladder) {
  if (ladder.size() < 3)
    throw ConfigError("order check needs at least 3 ladder values");
  for (std::size_t i = 1; i < ladder.size(); ++i) {
    if (std::abs(ladder[i] - 0.5 * ladder[i - 1]) > 1e-12 * ladder[i - 1])
      throw ConfigError("ladder values must halve at each level");
  }
  std::vector<OrderCheckRow> rows;
  for (double h : ladder) {
    const auto [approx, reference] = build(h);
    OrderCheckRow row;
    row.h = h;
    row.error = distance(approx, reference);
    row.discarded = row.error < 1e-13;
    rows.push_back(row);
  }
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    if (!rows[i].discarded && !rows[i + 1].discarded)
      rows[i].ratio = rows[i].error / rows[i + 1].error;
  }
  return rows;
}

void write_order_check_csv(const std::vector<OrderCheckRow>& rows,
                           std::ostream& out) {
  out << "h,error,ratio,discarded\n";
  for (const OrderCheckRow& row : rows) {
    out << format17(row.h) << ',' << format17(row.error) << ','
        << csv_cell(row.ratio) << ',' << (row.discarded ? 1 : 0) << '\n';
  }
}

}  // namespace orderlab
