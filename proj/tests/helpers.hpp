// helpers.hpp - shared fixtures for the test suites.

#pragma once

#include "orderlab/core.hpp"
#include "orderlab/models.hpp"

#include <vector>

namespace orderlab::testing {

inline Vec vec1(double x) { return Vec::Constant(1, x); }

/// Noisy scalar quadratic operators with an explicit noise list
/// (1-based: eps[i-1] at step i).
inline OperatorSequence fixed_quadratic_seq(double h,
                                            std::vector<double> eps) {
  OperatorSequence seq;
  seq.length = static_cast<long>(eps.size());
  seq.at = [h, eps = std::move(eps)](long i) {
    const double e = eps.at(static_cast<std::size_t>(i - 1));
    UpdateOperator op;
    op.index = static_cast<int>(i);
    op.learning_rate = h;
    op.apply = [h, e](const Vec& x) -> Vec {
      return vec1((1.0 - h) * x[0] + h * e);
    };
    op.field = [e](const Vec& x) -> Vec { return vec1(-x[0] + e); };
    op.field_jacobian = [](const Vec&) -> Mat {
      return Mat::Constant(1, 1, -1.0);
    };
    return op;
  };
  return seq;
}

/// Noise list regenerated the way quadratic_sequence draws it.
inline std::vector<double> noise_draws(const NoiseModel& noise,
                                       std::uint64_t seed, long n) {
  std::vector<double> eps;
  for (long i = 1; i <= n; ++i) eps.push_back(noise.sample(seed, i));
  return eps;
}

inline bool records_identical(const Trajectory& a, const Trajectory& b) {
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t m = 0; m < a.records.size(); ++m) {
    if (a.records[m].step != b.records[m].step) return false;
    if (a.records[m].step_displacement != b.records[m].step_displacement)
      return false;
    if (a.records[m].iterate.size() != b.records[m].iterate.size())
      return false;
    for (Eigen::Index k = 0; k < a.records[m].iterate.size(); ++k)
      if (a.records[m].iterate[k] != b.records[m].iterate[k]) return false;
  }
  return true;
}

}  // namespace orderlab::testing
