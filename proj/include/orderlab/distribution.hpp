// distribution.hpp - backward limit points vs forward terminal samples:
// ensemble collection across seeds, the analytic stationary law of the noisy
// quadratic, and Kolmogorov-Smirnov comparisons.

#pragma once

#include "orderlab/core.hpp"

#include <iosfwd>

namespace orderlab {

enum class EnsembleKind { BackwardLimits, ForwardTerminals };

struct LimitEnsemble {
  EnsembleKind kind = EnsembleKind::BackwardLimits;
  std::vector<std::uint64_t> seeds;
  std::vector<Vec> points;      // one per seed
  std::vector<bool> converged;  // terminal step displacement < tolerance
  std::vector<bool> diverged;   // hit a non-finite iterate
  long steps_used = 0;
  double tolerance = 0.0;

  std::size_t size() const { return points.size(); }
  long converged_count() const;

  /// A point enters distribution tests when it did not diverge and, for
  /// backward-limit ensembles, when it converged. Forward terminals sample
  /// the fixed-n distribution, so convergence is not expected of them.
  bool usable(std::size_t i) const;
  long usable_count() const;
  /// Values of coordinate `coord` over the usable seeds.
  std::vector<double> coordinate(int coord) const;
};

using SequenceFactory = std::function<OperatorSequence(std::uint64_t seed)>;

/// Runs apply_backward_naive per seed and records the terminal iterate plus
/// a convergence flag. Divergent seeds are flagged, keep their last finite
/// iterate, and are excluded from coordinate extraction.
LimitEnsemble backward_limit_ensemble(const SequenceFactory& make_seq,
                                      const Vec& start,
                                      const std::vector<std::uint64_t>& seeds,
                                      long n, double tol);

/// Runs apply_forward per seed and records the iterate at step n.
LimitEnsemble forward_terminal_ensemble(const SequenceFactory& make_seq,
                                        const Vec& start,
                                        const std::vector<std::uint64_t>& seeds,
                                        long n, double tol = 1e-10);

/// Stationary mean and variance of the noisy quadratic with Gaussian noise:
/// (0, h sigma^2 / (2 - h)). Requires 0 < h < 2.
std::pair<double, double> quadratic_stationary_params(double h, double sigma);

double normal_cdf(double x, double mean, double sd);

/// One-sample Kolmogorov-Smirnov statistic: sup over order statistics of
/// |empirical CDF - reference CDF|, two-sided evaluation at each sample.
double ks_statistic(std::vector<double> samples,
                    const std::function<double(double)>& cdf);

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_two_sample(std::vector<double> a, std::vector<double> b);

/// 1% critical value for the one-sample statistic, 1.63 / sqrt(n).
double ks_critical_1pct(std::size_t n);
/// 1% critical value for the two-sample statistic,
/// 1.63 sqrt((n1 + n2) / (n1 n2)).
double ks_two_sample_critical_1pct(std::size_t n1, std::size_t n2);

struct EnsembleComparison {
  std::vector<double> ks;          // per coordinate, two-sample
  std::vector<double> mean_delta;  // mean(a) - mean(b) per coordinate
  std::vector<double> var_ratio;   // var(a) / var(b) per coordinate
  double max_ks = 0.0;
  bool verdict = false;  // max_ks below the caller's threshold
};

/// Compares the converged subsets of two ensembles coordinate by
/// coordinate. Throws InsufficientDataError when either converged subset is
/// empty.
EnsembleComparison compare_ensembles(const LimitEnsemble& a,
                                     const LimitEnsemble& b,
                                     double ks_threshold);

/// CSV with columns seed,converged,diverged,x0,x1,...
void write_ensemble_csv(const LimitEnsemble& ensemble, std::ostream& out);
LimitEnsemble read_ensemble_csv(std::istream& in, EnsembleKind kind);

}  // namespace orderlab
