#include "orderlab/contraction.hpp"

#include "orderlab/csv.hpp"
#include "orderlab/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace orderlab {

namespace {
Vec symmetric_eigenvalues(const Mat& H) {
  if (H.rows() != H.cols()) throw ConfigError("matrix must be square");
  const double scale = 1.0 + H.cwiseAbs().maxCoeff();
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ConfigError("matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  return es.eigenvalues();
}
}  // namespace

double gd_operator_norm_factor(const Mat& H, double h) {
  const Vec lambda = symmetric_eigenvalues(H);
  double factor = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i)
    factor = std::max(factor, std::abs(1.0 - h * lambda[i]));
  return factor;
}

double critical_learning_rate(const Mat& H) {
  const Vec lambda = symmetric_eigenvalues(H);
  if (lambda.minCoeff() <= 0.0)
    throw ConfigError("matrix must be positive definite");
  return 2.0 / lambda.maxCoeff();
}

double strict_convexity_factor(double h, double m, double M) {
  if (m <= 0.0) throw ConfigError("lower convexity constant must be positive");
  if (m > M) throw ConfigError("convexity constants must satisfy m <= M");
  if (h <= 0.0) throw ConfigError("learning rate must be positive");
  const double radicand = 1.0 - 2.0 * h * m + h * h * M * M;
  if (radicand < 0.0)
    throw ConfigError("factor undefined: 1 - 2hm + h^2 M^2 < 0");
  return std::sqrt(radicand);
}

double empirical_contraction_estimate(const UpdateOperator& op,
                                      const Vec& center, double radius,
                                      int n_pairs, std::uint64_t seed) {
  if (n_pairs < 1) throw ConfigError("need at least one pair");
  if (radius <= 0.0) throw ConfigError("radius must be positive");
  const int dim = static_cast<int>(center.size());

  // Uniform point in the ball: Gaussian direction, radius ~ u^(1/d).
  auto draw = [&](std::uint64_t idx) -> Vec {
    Vec dir(dim);
    for (int c = 0; c < dim; ++c)
      dir[c] = rng::gaussian(seed, rng::stream::pairs, idx * (dim + 1) + c);
    const double norm = dir.norm();
    if (norm == 0.0) return center;
    const double u =
        rng::uniform_open(seed, rng::stream::pairs, idx * (dim + 1) + dim);
    return center + radius * std::pow(u, 1.0 / dim) * (dir / norm);
  };

  double worst = 0.0;
  std::uint64_t idx = 0;
  for (int k = 0; k < n_pairs; ++k) {
    Vec a, b;
    double gap = 0.0;
    do {
      a = draw(idx++);
      b = draw(idx++);
      gap = distance(a, b);
    } while (gap == 0.0);
    worst = std::max(worst, distance(op.apply(a), op.apply(b)) / gap);
  }
  return worst;
}

DisplacementCheck displacement_bound_check(const OperatorSequence& seq,
                                           const Vec& probe, long steps,
                                           double bound) {
  if (steps < 1) throw ConfigError("need at least one step");
  DisplacementCheck check;
  check.bound = bound;
  for (long i = 1; i <= steps; ++i) {
    check.max_displacement =
        std::max(check.max_displacement, distance(probe, seq.at(i).apply(probe)));
  }
  check.holds = check.max_displacement < bound;
  return check;
}

RateFit exponential_rate_fit(const std::vector<long>& steps,
                             const std::vector<double>& distances) {
  if (steps.size() != distances.size())
    throw ConfigError("steps/distances length mismatch");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (distances[i] > 1e-12) {  // below that, log is floating-point noise
      xs.push_back(static_cast<double>(steps[i]));
      ys.push_back(std::log(distances[i]));
    }
  }
  const long n = static_cast<long>(xs.size());
  if (n < 5)
    throw InsufficientDataError("rate fit needs at least 5 usable points, got " +
                                std::to_string(n));
  double sx = 0, sy = 0;
  for (long i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (long i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0;
  for (long i = 0; i < n; ++i) {
    const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ss += r * r;
  }
  fit.residual_rms = std::sqrt(ss / n);
  fit.points_used = n;
  return fit;
}

RateFit exponential_rate_fit(const Trajectory& traj, const Vec& limit) {
  if (!traj.iterates_recorded)
    throw ConfigError("rate fit needs recorded iterates");
  std::vector<long> steps;
  std::vector<double> dists;
  for (const TrajectoryRecord& rec : traj.records) {
    steps.push_back(rec.step);
    dists.push_back(distance(rec.iterate, limit));
  }
  return exponential_rate_fit(steps, dists);
}

namespace {
std::string number_or_null(double v) {
  return std::isfinite(v) ? format17(v) : std::string("null");
}
}  // namespace

std::string contraction_report_json(const ContractionReport& report) {
  std::ostringstream out;
  out << "{";
  out << "\"analytic_factor\":";
  if (report.analytic_factor)
    out << number_or_null(*report.analytic_factor);
  else
    out << "null";
  out << ",\"empirical_factor\":" << number_or_null(report.empirical_factor);
  out << ",\"displacement_bound\":"
      << number_or_null(report.displacement_bound);
  out << ",\"probe\":[";
  for (Eigen::Index i = 0; i < report.probe.size(); ++i) {
    if (i) out << ',';
    out << number_or_null(report.probe[i]);
  }
  out << "],\"rate_slope\":" << number_or_null(report.rate_slope);
  out << ",\"rate_constant\":" << number_or_null(report.rate_constant);
  out << ",\"pass\":" << (report.pass ? "true" : "false");
  out << "}";
  return out.str();
}

}  // namespace orderlab
