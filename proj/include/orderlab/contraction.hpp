// contraction.hpp - analytic and empirical contraction diagnostics: operator
// norm factors, critical learning rates, strict-convexity contraction
// bounds, single-step displacement checks, and exponential rate fits.

#pragma once

#include "orderlab/core.hpp"

#include <optional>

namespace orderlab {

/// max_i |1 - h lambda_i| over the eigenvalues of symmetric H: the exact
/// Lipschitz factor of the gradient-descent map theta -> theta - h H theta.
double gd_operator_norm_factor(const Mat& H, double h);

/// 2 / lambda_max(H). The GD map contracts iff 0 < h < this value.
double critical_learning_rate(const Mat& H);

/// sqrt(1 - 2hm + h^2 M^2): contraction factor bound for a gradient step on
/// a strictly convex loss with constants 0 < m <= M. Below 1 iff
/// 0 < h < 2m/M^2.
double strict_convexity_factor(double h, double m, double M);

/// Max over sampled pairs in the ball of d(T(a), T(b)) / d(a, b); a lower
/// bound on the Lipschitz constant over the region. Degenerate pairs are
/// resampled.
double empirical_contraction_estimate(const UpdateOperator& op,
                                      const Vec& center, double radius,
                                      int n_pairs, std::uint64_t seed);

struct DisplacementCheck {
  double max_displacement = 0.0;  // max_i d(probe, T_i(probe)), i <= steps
  double bound = 0.0;             // the supplied D
  bool holds = false;             // max_displacement < bound
};

DisplacementCheck displacement_bound_check(
    const OperatorSequence& seq, const Vec& probe, long steps,
    double bound = std::numeric_limits<double>::infinity());

struct RateFit {
  double slope = 0.0;      // estimates log k
  double intercept = 0.0;  // estimates log C
  double residual_rms = 0.0;
  long points_used = 0;
};

/// Least-squares fit of log(distances[i]) against steps[i], using only
/// points with distance > 1e-12. Throws InsufficientDataError below 5
/// usable points.
RateFit exponential_rate_fit(const std::vector<long>& steps,
                             const std::vector<double>& distances);

/// Fit of log d(theta_n, limit) against n for a trajectory with recorded
/// iterates.
RateFit exponential_rate_fit(const Trajectory& traj, const Vec& limit);

struct ContractionReport {
  std::optional<double> analytic_factor;
  double empirical_factor = 0.0;
  double displacement_bound = 0.0;
  Vec probe;
  double rate_slope = 0.0;
  double rate_constant = 0.0;  // C = exp(intercept)
  bool pass = false;           // empirical factor < 1 and displacement bounded
};

std::string contraction_report_json(const ContractionReport& report);

}  // namespace orderlab
