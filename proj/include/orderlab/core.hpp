// core.hpp - update operators, operator sequences, and the four trajectory
// engines (forward, naive backward replay, intermittent backward,
// backward-after-switch).

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace orderlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Euclidean distance between two parameter points.
inline double distance(const Vec& a, const Vec& b) { return (a - b).norm(); }

inline bool all_finite(const Vec& v) { return v.allFinite(); }

// ---------------------------------------------------------------------------
// Error taxonomy
// ---------------------------------------------------------------------------

/// Invalid configuration or arguments (bad resets, dimension mismatch, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A trajectory produced a non-finite iterate; carries the failing step.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(long step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

/// An operation needed a capability (field, Jacobian, Hessian) the operator
/// or model does not provide.
class CapabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Not enough usable data for a statistical operation.
class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A guard against combinatorial blowup (e.g. factorial enumeration).
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Plot request with no data.
class EmptyPlotError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Operators and sequences
// ---------------------------------------------------------------------------

/// One update step theta' = T_i(theta). When `field` is present the map has
/// the form T_i(theta) = theta + h * V_i(theta), and `field_jacobian`, when
/// present, evaluates V_i'(theta).
struct UpdateOperator {
  int index = 0;               // 1-based batch index
  double learning_rate = 0.0;  // h
  std::function<Vec(const Vec&)> apply;
  std::function<Vec(const Vec&)> field;
  std::function<Mat(const Vec&)> field_jacobian;

  bool has_field() const { return static_cast<bool>(field); }
  bool has_jacobian() const { return static_cast<bool>(field_jacobian); }
};

/// Builds an operator from its vector field; apply(x) = x + h * field(x).
UpdateOperator make_field_operator(int index, double h,
                                   std::function<Vec(const Vec&)> field,
                                   std::function<Mat(const Vec&)> jacobian = {});

/// Seeded stream of operators T_1, T_2, ... The operator at index i is a
/// pure function of (i, seed): regenerating it yields a pointwise-identical
/// map, which is what allows O(d)-state replay.
struct OperatorSequence {
  std::function<UpdateOperator(long)> at;  // 1-based index
  std::uint64_t seed = 0;
  long length = 0;  // 0 = unbounded / streaming
};

/// Wraps a sequence so every apply() bumps *counter. Used by the cost-model
/// tests.
OperatorSequence counting_sequence(OperatorSequence base,
                                   std::shared_ptr<long> counter);

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

enum class IterationMode {
  Forward,
  Backward,
  IntermittentBackward,
  BackwardAfterSwitch,
  ApproxBackward,
  OrderAverage,
};

/// Short mode tag used in CSV filenames and legends.
std::string mode_name(IterationMode mode);

struct TrajectoryRecord {
  long step = 0;
  double train_loss = kNaN;  // NaN = not evaluated at this step
  double test_loss = kNaN;
  double step_displacement = 0.0;  // ||theta_n - theta_{n-1}||
  double dist_to_anchor = kNaN;    // distance to the window's terminal iterate
  Vec iterate;                     // empty unless iterates are recorded
};

struct Trajectory {
  IterationMode mode = IterationMode::Forward;
  std::string mode_label;  // defaults to mode_name(mode)
  std::vector<TrajectoryRecord> records;  // step 0 first, strictly increasing
  std::vector<long> anchor_steps;         // reset/switch points; empty if none
  std::uint64_t seed = 0;
  bool iterates_recorded = false;

  long steps() const { return static_cast<long>(records.size()) - 1; }
  const TrajectoryRecord& at(long step) const { return records.at(step); }
  const Vec& terminal_iterate() const { return records.back().iterate; }
  double terminal_displacement() const {
    return records.back().step_displacement;
  }
};

/// Optional loss evaluation attached to a trajectory run. Losses are
/// evaluated on steps where step % every == 0 (step 0 included).
struct LossProbe {
  std::function<double(const Vec&)> train;
  std::function<double(const Vec&)> test;
  long every = 1;
};

struct EngineOptions {
  bool record_iterates = true;  // needed for dist_to_anchor and rate fits
  LossProbe probe;
};

// ---------------------------------------------------------------------------
// Engines
//
// Step and batch indices are 1-based; step 0 is the initial point. Every
// engine validates iterates and throws DivergenceError at the first
// non-finite step. Operators are always regenerated through seq.at(i), never
// cached, so replay state is O(d).
// ---------------------------------------------------------------------------

/// theta_m = T_m T_{m-1} ... T_1(start); n operator applications.
Trajectory apply_forward(const OperatorSequence& seq, const Vec& start, long n,
                         const EngineOptions& opts = {});

/// theta_m = T_1 T_2 ... T_m(start), each step replayed in full from start;
/// n(n+1)/2 operator applications.
Trajectory apply_backward_naive(const OperatorSequence& seq, const Vec& start,
                                long n, const EngineOptions& opts = {});

/// Backward replay whose anchor is reset to the trajectory's own iterate at
/// each step in `resets` (strictly increasing, each in [1, n]). Empty resets
/// reproduce apply_backward_naive exactly.
Trajectory apply_intermittent_backward(const OperatorSequence& seq,
                                       const Vec& start, long n,
                                       const std::vector<long>& resets,
                                       const EngineOptions& opts = {});

/// Forward for steps 1..s, then backward replay anchored at the forward
/// iterate theta_s. s = 0 is plain backward, s = n plain forward.
Trajectory apply_backward_after(const OperatorSequence& seq, const Vec& start,
                                long n, long switch_step,
                                const EngineOptions& opts = {});

/// Displacement column of a trajectory: entry m is
/// distance(iterate m, iterate m-1), for m = 1..n.
std::vector<double> step_displacement_series(const Trajectory& traj);

/// Fills dist_to_anchor for every record: the distance from each iterate to
/// the terminal iterate of its anchor window (the proxy for the limit the
/// window converges to). No-op unless iterates were recorded.
void finalize_dist_to_anchor(Trajectory& traj);

}  // namespace orderlab
