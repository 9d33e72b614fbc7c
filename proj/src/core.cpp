#include "orderlab/core.hpp"

#include <algorithm>
#include <utility>

namespace orderlab {

UpdateOperator make_field_operator(int index, double h,
                                   std::function<Vec(const Vec&)> field,
                                   std::function<Mat(const Vec&)> jacobian) {
  UpdateOperator op;
  op.index = index;
  op.learning_rate = h;
  op.field = std::move(field);
  op.field_jacobian = std::move(jacobian);
  op.apply = [h, f = op.field](const Vec& x) -> Vec { return x + h * f(x); };
  return op;
}

OperatorSequence counting_sequence(OperatorSequence base,
                                   std::shared_ptr<long> counter) {
  OperatorSequence seq;
  seq.seed = base.seed;
  seq.length = base.length;
  seq.at = [inner = std::move(base.at), counter](long i) {
    UpdateOperator op = inner(i);
    op.apply = [f = std::move(op.apply), counter](const Vec& x) -> Vec {
      ++*counter;
      return f(x);
    };
    return op;
  };
  return seq;
}

std::string mode_name(IterationMode mode) {
  switch (mode) {
    case IterationMode::Forward:
      return "forward";
    case IterationMode::Backward:
      return "backward";
    case IterationMode::IntermittentBackward:
      return "intermittent";
    case IterationMode::BackwardAfterSwitch:
      return "backward-after";
    case IterationMode::ApproxBackward:
      return "approx-backward";
    case IterationMode::OrderAverage:
      return "order-average";
  }
  return "unknown";
}

namespace {

void check_start(const Vec& start) {
  if (start.size() == 0) throw ConfigError("start point is empty");
  if (!all_finite(start)) throw ConfigError("start point is not finite");
}

Vec apply_checked(const OperatorSequence& seq, long op_index, const Vec& x,
                  long traj_step) {
  const UpdateOperator op = seq.at(op_index);
  Vec y = op.apply(x);
  if (y.size() != x.size()) {
    throw ConfigError("operator " + std::to_string(op_index) +
                      " changed dimension from " + std::to_string(x.size()) +
                      " to " + std::to_string(y.size()));
  }
  if (!all_finite(y)) {
    throw DivergenceError(traj_step, "non-finite iterate at step " +
                                         std::to_string(traj_step));
  }
  return y;
}

struct Recorder {
  Trajectory traj;
  const EngineOptions& opts;
  Vec prev;

  Recorder(IterationMode mode, std::uint64_t seed, const EngineOptions& o,
           const Vec& start, long n)
      : opts(o), prev(start) {
    traj.mode = mode;
    traj.mode_label = mode_name(mode);
    traj.seed = seed;
    traj.iterates_recorded = opts.record_iterates;
    traj.records.reserve(static_cast<std::size_t>(n) + 1);
    push(0, start, 0.0);
  }

  void push(long step, const Vec& point, double displacement) {
    TrajectoryRecord rec;
    rec.step = step;
    rec.step_displacement = displacement;
    if (opts.probe.every > 0 && step % opts.probe.every == 0) {
      if (opts.probe.train) rec.train_loss = opts.probe.train(point);
      if (opts.probe.test) rec.test_loss = opts.probe.test(point);
    }
    if (opts.record_iterates) rec.iterate = point;
    traj.records.push_back(std::move(rec));
  }

  void advance(long step, const Vec& point) {
    push(step, point, distance(point, prev));
    prev = point;
  }
};

}  // namespace

void finalize_dist_to_anchor(Trajectory& traj) {
  if (!traj.iterates_recorded) return;
  const long n = traj.steps();
  std::vector<long> bounds = traj.anchor_steps;
  bounds.push_back(n);
  long lo = 0;
  for (long hi : bounds) {
    if (hi < lo) continue;
    const Vec& endpoint = traj.records[static_cast<std::size_t>(hi)].iterate;
    for (long m = lo; m <= hi; ++m) {
      traj.records[static_cast<std::size_t>(m)].dist_to_anchor =
          distance(traj.records[static_cast<std::size_t>(m)].iterate, endpoint);
    }
    lo = hi + 1;
  }
}

Trajectory apply_forward(const OperatorSequence& seq, const Vec& start, long n,
                         const EngineOptions& opts) {
  if (n < 0) throw ConfigError("negative step count");
  check_start(start);
  Recorder rec(IterationMode::Forward, seq.seed, opts, start, n);
  Vec x = start;
  for (long m = 1; m <= n; ++m) {
    x = apply_checked(seq, m, x, m);
    rec.advance(m, x);
  }
  finalize_dist_to_anchor(rec.traj);
  return std::move(rec.traj);
}

Trajectory apply_backward_naive(const OperatorSequence& seq, const Vec& start,
                                long n, const EngineOptions& opts) {
  if (n < 0) throw ConfigError("negative step count");
  check_start(start);
  Recorder rec(IterationMode::Backward, seq.seed, opts, start, n);
  for (long m = 1; m <= n; ++m) {
    Vec x = start;
    for (long i = m; i >= 1; --i) x = apply_checked(seq, i, x, m);
    rec.advance(m, x);
  }
  finalize_dist_to_anchor(rec.traj);
  return std::move(rec.traj);
}

Trajectory apply_intermittent_backward(const OperatorSequence& seq,
                                       const Vec& start, long n,
                                       const std::vector<long>& resets,
                                       const EngineOptions& opts) {
  if (n < 0) throw ConfigError("negative step count");
  check_start(start);
  for (std::size_t k = 0; k < resets.size(); ++k) {
    if (resets[k] < 1 || resets[k] > n)
      throw ConfigError("reset step " + std::to_string(resets[k]) +
                        " outside [1, " + std::to_string(n) + "]");
    if (k > 0 && resets[k] <= resets[k - 1])
      throw ConfigError("reset steps must be strictly increasing");
  }
  Recorder rec(IterationMode::IntermittentBackward, seq.seed, opts, start, n);
  rec.traj.anchor_steps = resets;
  Vec anchor = start;
  long anchor_step = 0;
  std::size_t next_reset = 0;
  for (long m = 1; m <= n; ++m) {
    Vec x = anchor;
    for (long i = m; i > anchor_step; --i) x = apply_checked(seq, i, x, m);
    rec.advance(m, x);
    if (next_reset < resets.size() && resets[next_reset] == m) {
      anchor = x;
      anchor_step = m;
      ++next_reset;
    }
  }
  finalize_dist_to_anchor(rec.traj);
  return std::move(rec.traj);
}

Trajectory apply_backward_after(const OperatorSequence& seq, const Vec& start,
                                long n, long switch_step,
                                const EngineOptions& opts) {
  if (n < 0) throw ConfigError("negative step count");
  if (switch_step < 0 || switch_step > n)
    throw ConfigError("switch step " + std::to_string(switch_step) +
                      " outside [0, " + std::to_string(n) + "]");
  check_start(start);
  Recorder rec(IterationMode::BackwardAfterSwitch, seq.seed, opts, start, n);
  if (switch_step > 0) rec.traj.anchor_steps = {switch_step};
  Vec anchor = start;
  for (long m = 1; m <= switch_step; ++m) {
    anchor = apply_checked(seq, m, anchor, m);
    rec.advance(m, anchor);
  }
  for (long m = switch_step + 1; m <= n; ++m) {
    Vec x = anchor;
    for (long i = m; i > switch_step; --i) x = apply_checked(seq, i, x, m);
    rec.advance(m, x);
  }
  finalize_dist_to_anchor(rec.traj);
  return std::move(rec.traj);
}

std::vector<double> step_displacement_series(const Trajectory& traj) {
  if (traj.records.empty()) throw ConfigError("trajectory has no records");
  std::vector<double> series;
  series.reserve(traj.records.size() - 1);
  for (std::size_t m = 1; m < traj.records.size(); ++m)
    series.push_back(traj.records[m].step_displacement);
  return series;
}

}  // namespace orderlab
