// models.hpp - concrete operator families and datasets: the noisy scalar
// quadratic, linearized dynamics near a minimum, the two-point constant maps,
// linear least squares, and the synthetic regression datasets.

#pragma once

#include "orderlab/core.hpp"
#include "orderlab/rng.hpp"

#include <iosfwd>
#include <optional>
#include <utility>

namespace orderlab {

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

enum class NoiseKind { Gaussian, UniformSymmetric, Rademacher };

NoiseKind noise_kind_from_string(const std::string& s);
std::string to_string(NoiseKind kind);

/// Zero-mean i.i.d. noise whose draw at step i is a pure function of
/// (i, seed); forward and backward replays therefore see identical noise
/// per index. `scale` is the standard deviation (gaussian), half-width
/// (uniform-symmetric), or magnitude (rademacher).
struct NoiseModel {
  NoiseKind kind = NoiseKind::Gaussian;
  double scale = 1.0;
  std::uint64_t stream = rng::stream::noise;

  double sample(std::uint64_t seed, long step, int coord = 0) const;
  Vec sample_vec(std::uint64_t seed, long step, int dim) const;

  /// sup |eps| for bounded kinds; nullopt for gaussian.
  std::optional<double> bound() const;
};

// ---------------------------------------------------------------------------
// Noisy scalar quadratic (loss theta^2 / 2 with gradient noise)
// ---------------------------------------------------------------------------

/// T_i(theta) = (1 - h) theta + h eps_i on R^1, with field
/// V_i(theta) = -theta + eps_i and constant Jacobian [-1].
UpdateOperator quadratic_noisy_operator(double h, long step,
                                        const NoiseModel& noise,
                                        std::uint64_t seed);

OperatorSequence quadratic_sequence(double h, const NoiseModel& noise,
                                    std::uint64_t seed);

/// (1-h)^n theta + sum_j h (1-h)^(n-j) eps_j: oracle for apply_forward on
/// this model.
double quadratic_forward_closed_form(double theta0, double h,
                                     const std::vector<double>& eps);

/// (1-h)^n theta + sum_j h (1-h)^(j-1) eps_j: oracle for
/// apply_backward_naive on this model.
double quadratic_backward_closed_form(double theta0, double h,
                                      const std::vector<double>& eps);

// ---------------------------------------------------------------------------
// Linearized dynamics near a minimum
// ---------------------------------------------------------------------------

/// T_i(theta) = theta* + (I - hH)(theta - theta*) + h eps_i, the first-order
/// expansion of an SGD step around a minimum with Hessian H (symmetric).
UpdateOperator linearized_operator(const Vec& minimum, const Mat& hessian,
                                   double h, long step,
                                   const NoiseModel& noise, std::uint64_t seed);

OperatorSequence linearized_sequence(const Vec& minimum, const Mat& hessian,
                                     double h, const NoiseModel& noise,
                                     std::uint64_t seed);

// ---------------------------------------------------------------------------
// Two-point counterexample: constant maps S(theta) = x0, U(theta) = y0
// ---------------------------------------------------------------------------

/// Constant map to x0 (pick_second = false) or y0 (pick_second = true),
/// expressed as a field with h = 1 so the operator contract holds.
UpdateOperator two_point_operator(bool pick_second, const Vec& x0,
                                  const Vec& y0);

/// Fair-coin choice of S or U at every step.
OperatorSequence two_point_sequence(const Vec& x0, const Vec& y0,
                                    std::uint64_t seed);

// ---------------------------------------------------------------------------
// Batch loss models
// ---------------------------------------------------------------------------

/// A loss split into batches: L(theta) = (1/N) sum_i L_i(theta). Batch
/// indices are 1-based. `hessian` may be empty; models are immutable after
/// construction and safe to evaluate concurrently.
struct BatchLossModel {
  int batch_count = 0;
  int dim = 0;
  std::function<double(int, const Vec&)> loss;
  std::function<Vec(int, const Vec&)> gradient;
  std::function<Mat(int, const Vec&)> hessian;
  std::function<double(const Vec&)> full_loss;

  bool has_hessian() const { return static_cast<bool>(hessian); }
};

/// SGD step for one batch: field(theta) = -gradient(i, theta), Jacobian
/// -hessian(i, theta) when the model provides one. h = 0 is the identity.
UpdateOperator sgd_operator(const BatchLossModel& model, int batch, double h);

/// Batches sampled uniformly with replacement per step, seeded.
OperatorSequence sgd_sequence(const BatchLossModel& model, double h,
                              std::uint64_t seed);

/// Full-batch gradient descent: the same averaged-loss operator at every
/// step.
OperatorSequence full_batch_sequence(const BatchLossModel& model, double h);

// ---------------------------------------------------------------------------
// Linear least squares
// ---------------------------------------------------------------------------

/// min (1/rows) ||A theta - b||^2 with rows grouped into batches. A must
/// have full column rank. Per-batch loss is the mean squared residual over
/// the batch rows; gradients and Hessians are analytic.
struct LeastSquaresProblem {
  Mat A;
  Vec b;
  std::vector<std::vector<int>> batches;  // 0-based row indices per batch
  Vec interpolating_minimum;  // set when b = A theta_bar exactly

  int dim() const { return static_cast<int>(A.cols()); }
  int batch_count() const { return static_cast<int>(batches.size()); }
  double batch_loss(int batch, const Vec& theta) const;   // 1-based
  Vec batch_gradient(int batch, const Vec& theta) const;
  Mat batch_hessian(int batch) const;
  BatchLossModel model() const;
};

LeastSquaresProblem least_squares_model(Mat A, Vec b,
                                        std::vector<std::vector<int>> batches);

/// Seeded Gaussian instance with b = A theta_bar + residual_scale * noise;
/// residual_scale = 0 gives an interpolating minimum at theta_bar. Rows are
/// split into `batch_count` contiguous equal batches.
LeastSquaresProblem random_least_squares(int rows, int cols, int batch_count,
                                         std::uint64_t instance_seed,
                                         double residual_scale = 0.0);

/// Strict-convexity constants over the batch Hessians: m = smallest and
/// M = largest eigenvalue across batches.
std::pair<double, double> convexity_constants(const LeastSquaresProblem& ls);

// ---------------------------------------------------------------------------
// Synthetic regression datasets
// ---------------------------------------------------------------------------

enum class DatasetKind { Square, Cos10x, Cube };

DatasetKind dataset_kind_from_string(const std::string& s);
std::string to_string(DatasetKind kind);

/// Training inputs x_i = -1 + 2i/100 for i = 0..100 (101 points); held-out
/// test inputs are the 100 midpoints x~_i = -1 + (2i+1)/100.
struct RegressionDataset {
  DatasetKind kind = DatasetKind::Square;
  std::vector<double> inputs, targets;
  std::vector<double> test_inputs, test_targets;
};

RegressionDataset synthetic_regression_dataset(DatasetKind kind);

/// CSV export with columns split,x,y (split = train | test).
void write_dataset_csv(const RegressionDataset& data, std::ostream& out);

}  // namespace orderlab
