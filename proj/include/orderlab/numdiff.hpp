// numdiff.hpp - central finite differences for gradients and Hessians.

#pragma once

#include "orderlab/core.hpp"

namespace orderlab {

/// Central-difference gradient of a scalar function; per-coordinate step
/// rel_step * max(1, |theta_j|).
Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& theta,
                double rel_step = 1e-5);

/// Central-difference Jacobian of a gradient function, symmetrized by
/// averaging with its transpose. Used where no analytic Hessian exists.
Mat fd_hessian_from_gradient(const std::function<Vec(const Vec&)>& grad,
                             const Vec& theta, double rel_step = 1e-4);

}  // namespace orderlab
