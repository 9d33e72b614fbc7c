#include "orderlab/models.hpp"

#include "orderlab/csv.hpp"
#include "orderlab/numdiff.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <memory>
#include <ostream>

namespace orderlab {

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "gaussian") return NoiseKind::Gaussian;
  if (s == "uniform-symmetric" || s == "uniform")
    return NoiseKind::UniformSymmetric;
  if (s == "rademacher") return NoiseKind::Rademacher;
  throw ConfigError("unknown noise kind: " + s);
}

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::Gaussian:
      return "gaussian";
    case NoiseKind::UniformSymmetric:
      return "uniform-symmetric";
    case NoiseKind::Rademacher:
      return "rademacher";
  }
  return "unknown";
}

namespace {
// Draw index packs (step, coordinate); coordinates are capped so indices
// never collide across steps.
constexpr int kCoordBits = 16;
constexpr std::uint64_t pack_index(long step, int coord) {
  return (static_cast<std::uint64_t>(step) << kCoordBits) |
         static_cast<std::uint64_t>(coord);
}
}  // namespace

double NoiseModel::sample(std::uint64_t seed, long step, int coord) const {
  if (step < 0) throw ConfigError("negative noise step");
  if (coord < 0 || coord >= (1 << kCoordBits))
    throw ConfigError("noise coordinate out of range");
  const std::uint64_t idx = pack_index(step, coord);
  switch (kind) {
    case NoiseKind::Gaussian:
      return scale * rng::gaussian(seed, stream, idx);
    case NoiseKind::UniformSymmetric:
      return scale * (2.0 * rng::uniform01(seed, stream, idx) - 1.0);
    case NoiseKind::Rademacher:
      return rng::flip(seed, stream, idx) ? scale : -scale;
  }
  return 0.0;
}

Vec NoiseModel::sample_vec(std::uint64_t seed, long step, int dim) const {
  Vec v(dim);
  for (int c = 0; c < dim; ++c) v[c] = sample(seed, step, c);
  return v;
}

std::optional<double> NoiseModel::bound() const {
  if (kind == NoiseKind::Gaussian) return std::nullopt;
  return scale;
}

// ---------------------------------------------------------------------------
// Noisy scalar quadratic
// ---------------------------------------------------------------------------

UpdateOperator quadratic_noisy_operator(double h, long step,
                                        const NoiseModel& noise,
                                        std::uint64_t seed) {
  if (h <= 0) throw ConfigError("learning rate must be positive");
  const double eps = noise.sample(seed, step);
  UpdateOperator op;
  op.index = static_cast<int>(step);
  op.learning_rate = h;
  op.apply = [h, eps](const Vec& x) -> Vec {
    Vec y(1);
    y[0] = (1.0 - h) * x[0] + h * eps;
    return y;
  };
  op.field = [eps](const Vec& x) -> Vec {
    Vec v(1);
    v[0] = -x[0] + eps;
    return v;
  };
  op.field_jacobian = [](const Vec&) -> Mat {
    Mat j(1, 1);
    j(0, 0) = -1.0;
    return j;
  };
  return op;
}

OperatorSequence quadratic_sequence(double h, const NoiseModel& noise,
                                    std::uint64_t seed) {
  OperatorSequence seq;
  seq.seed = seed;
  seq.at = [h, noise, seed](long i) {
    return quadratic_noisy_operator(h, i, noise, seed);
  };
  return seq;
}

double quadratic_forward_closed_form(double theta0, double h,
                                     const std::vector<double>& eps) {
  // Horner evaluation: theta_n = (1-h) theta_{n-1} + h eps_n.
  double value = theta0;
  for (double e : eps) value = (1.0 - h) * value + h * e;
  return value;
}

double quadratic_backward_closed_form(double theta0, double h,
                                      const std::vector<double>& eps) {
  const long n = static_cast<long>(eps.size());
  double value = theta0;
  for (long j = n; j >= 1; --j)
    value = (1.0 - h) * value + h * eps[static_cast<std::size_t>(j - 1)];
  return value;
}

// ---------------------------------------------------------------------------
// Linearized dynamics near a minimum
// ---------------------------------------------------------------------------

namespace {
void require_symmetric(const Mat& H) {
  const double scale = 1.0 + H.cwiseAbs().maxCoeff();
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ConfigError("hessian must be symmetric");
}
}  // namespace

UpdateOperator linearized_operator(const Vec& minimum, const Mat& hessian,
                                   double h, long step,
                                   const NoiseModel& noise,
                                   std::uint64_t seed) {
  if (h <= 0) throw ConfigError("learning rate must be positive");
  if (hessian.rows() != hessian.cols() || hessian.rows() != minimum.size())
    throw ConfigError("hessian/minimum dimension mismatch");
  require_symmetric(hessian);
  const int dim = static_cast<int>(minimum.size());
  auto shared = std::make_shared<const std::pair<Vec, Mat>>(minimum, hessian);
  const Vec eps = noise.sample_vec(seed, step, dim);
  UpdateOperator op;
  op.index = static_cast<int>(step);
  op.learning_rate = h;
  op.apply = [h, shared, eps](const Vec& x) -> Vec {
    const auto& [star, H] = *shared;
    return star + (x - star) - h * (H * (x - star)) + h * eps;
  };
  op.field = [shared, eps](const Vec& x) -> Vec {
    const auto& [star, H] = *shared;
    return -(H * (x - star)) + eps;
  };
  op.field_jacobian = [shared](const Vec&) -> Mat { return -shared->second; };
  return op;
}

OperatorSequence linearized_sequence(const Vec& minimum, const Mat& hessian,
                                     double h, const NoiseModel& noise,
                                     std::uint64_t seed) {
  require_symmetric(hessian);
  OperatorSequence seq;
  seq.seed = seed;
  seq.at = [minimum, hessian, h, noise, seed](long i) {
    return linearized_operator(minimum, hessian, h, i, noise, seed);
  };
  return seq;
}

// ---------------------------------------------------------------------------
// Two-point constant maps
// ---------------------------------------------------------------------------

UpdateOperator two_point_operator(bool pick_second, const Vec& x0,
                                  const Vec& y0) {
  if (x0.size() != y0.size()) throw ConfigError("x0/y0 dimension mismatch");
  if ((x0 - y0).norm() == 0.0)
    throw ConfigError("two-point targets must be distinct");
  const Vec target = pick_second ? y0 : x0;
  UpdateOperator op;
  op.index = pick_second ? 2 : 1;
  op.learning_rate = 1.0;  // so that apply(x) = x + h (target - x) = target
  op.apply = [target](const Vec&) -> Vec { return target; };
  op.field = [target](const Vec& x) -> Vec { return target - x; };
  op.field_jacobian = [n = target.size()](const Vec&) -> Mat {
    return -Mat::Identity(n, n);
  };
  return op;
}

OperatorSequence two_point_sequence(const Vec& x0, const Vec& y0,
                                    std::uint64_t seed) {
  OperatorSequence seq;
  seq.seed = seed;
  seq.at = [x0, y0, seed](long i) {
    const bool second =
        rng::flip(seed, rng::stream::coin, static_cast<std::uint64_t>(i));
    return two_point_operator(second, x0, y0);
  };
  return seq;
}

// ---------------------------------------------------------------------------
// SGD operators over batch loss models
// ---------------------------------------------------------------------------

UpdateOperator sgd_operator(const BatchLossModel& model, int batch, double h) {
  if (h < 0) throw ConfigError("learning rate must be non-negative");
  if (batch < 1 || batch > model.batch_count)
    throw ConfigError("batch index out of range");
  UpdateOperator op;
  op.index = batch;
  op.learning_rate = h;
  op.apply = [h, batch, grad = model.gradient](const Vec& x) -> Vec {
    return x - h * grad(batch, x);
  };
  op.field = [batch, grad = model.gradient](const Vec& x) -> Vec {
    return -grad(batch, x);
  };
  if (model.has_hessian()) {
    op.field_jacobian = [batch, hess = model.hessian](const Vec& x) -> Mat {
      return -hess(batch, x);
    };
  }
  return op;
}

OperatorSequence sgd_sequence(const BatchLossModel& model, double h,
                              std::uint64_t seed) {
  OperatorSequence seq;
  seq.seed = seed;
  seq.at = [model, h, seed](long i) {
    const int batch =
        1 + static_cast<int>(rng::below(
                seed, rng::stream::batch_order, static_cast<std::uint64_t>(i),
                static_cast<std::uint64_t>(model.batch_count)));
    return sgd_operator(model, batch, h);
  };
  return seq;
}

OperatorSequence full_batch_sequence(const BatchLossModel& model, double h) {
  OperatorSequence seq;
  seq.at = [model, h](long i) {
    const int n = model.batch_count;
    UpdateOperator op;
    op.index = static_cast<int>(i);
    op.learning_rate = h;
    op.field = [model, n](const Vec& x) -> Vec {
      Vec g = Vec::Zero(x.size());
      for (int b = 1; b <= n; ++b) g += model.gradient(b, x);
      return -g / n;
    };
    op.apply = [h, f = op.field](const Vec& x) -> Vec { return x + h * f(x); };
    if (model.has_hessian()) {
      op.field_jacobian = [model, n](const Vec& x) -> Mat {
        Mat H = Mat::Zero(x.size(), x.size());
        for (int b = 1; b <= n; ++b) H += model.hessian(b, x);
        return -H / n;
      };
    }
    return op;
  };
  return seq;
}

// ---------------------------------------------------------------------------
// Linear least squares
// ---------------------------------------------------------------------------

namespace {
std::pair<Mat, Vec> batch_rows(const Mat& A, const Vec& b,
                               const std::vector<int>& rows) {
  Mat Ab(rows.size(), A.cols());
  Vec bb(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    Ab.row(static_cast<Eigen::Index>(r)) = A.row(rows[r]);
    bb[static_cast<Eigen::Index>(r)] = b[rows[r]];
  }
  return {Ab, bb};
}
}  // namespace

double LeastSquaresProblem::batch_loss(int batch, const Vec& theta) const {
  const auto& rows = batches.at(static_cast<std::size_t>(batch - 1));
  double s = 0.0;
  for (int r : rows) {
    const double res = A.row(r).dot(theta) - b[r];
    s += res * res;
  }
  return s / static_cast<double>(rows.size());
}

Vec LeastSquaresProblem::batch_gradient(int batch, const Vec& theta) const {
  const auto& rows = batches.at(static_cast<std::size_t>(batch - 1));
  Vec g = Vec::Zero(dim());
  for (int r : rows) {
    const double res = A.row(r).dot(theta) - b[r];
    g += 2.0 * res * A.row(r).transpose();
  }
  return g / static_cast<double>(rows.size());
}

Mat LeastSquaresProblem::batch_hessian(int batch) const {
  const auto& rows = batches.at(static_cast<std::size_t>(batch - 1));
  auto [Ab, bb] = batch_rows(A, b, rows);
  return (2.0 / static_cast<double>(rows.size())) * (Ab.transpose() * Ab);
}

BatchLossModel LeastSquaresProblem::model() const {
  auto shared = std::make_shared<const LeastSquaresProblem>(*this);
  BatchLossModel m;
  m.batch_count = batch_count();
  m.dim = dim();
  m.loss = [shared](int i, const Vec& t) { return shared->batch_loss(i, t); };
  m.gradient = [shared](int i, const Vec& t) {
    return shared->batch_gradient(i, t);
  };
  m.hessian = [shared](int i, const Vec&) { return shared->batch_hessian(i); };
  m.full_loss = [shared](const Vec& t) {
    double s = 0.0;
    for (int i = 1; i <= shared->batch_count(); ++i)
      s += shared->batch_loss(i, t);
    return s / static_cast<double>(shared->batch_count());
  };
  return m;
}

LeastSquaresProblem least_squares_model(
    Mat A, Vec b, std::vector<std::vector<int>> batches) {
  if (A.rows() != b.size()) throw ConfigError("A/b row count mismatch");
  if (A.rows() < A.cols())
    throw ConfigError("least squares needs at least as many rows as columns");
  Eigen::ColPivHouseholderQR<Mat> qr(A);
  if (qr.rank() < A.cols())
    throw ConfigError("design matrix is rank-deficient");
  if (batches.empty()) throw ConfigError("at least one batch required");
  for (const auto& rows : batches) {
    if (rows.empty()) throw ConfigError("empty batch");
    for (int r : rows)
      if (r < 0 || r >= A.rows()) throw ConfigError("batch row out of range");
  }
  return LeastSquaresProblem{std::move(A), std::move(b), std::move(batches), Vec()};
}

LeastSquaresProblem random_least_squares(int rows, int cols, int batch_count,
                                         std::uint64_t instance_seed,
                                         double residual_scale) {
  if (rows <= 0 || cols <= 0 || batch_count <= 0)
    throw ConfigError("invalid least-squares shape");
  if (rows % batch_count != 0)
    throw ConfigError("row count must be divisible by batch count");
  Mat A(rows, cols);
  std::uint64_t idx = 0;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      A(i, j) = rng::gaussian(instance_seed, rng::stream::init, idx++);
  Vec theta_bar(cols);
  for (int j = 0; j < cols; ++j)
    theta_bar[j] = rng::gaussian(instance_seed, rng::stream::init, idx++);
  // Row-wise dot products, the same reduction the gradient uses, so the
  // interpolating minimum is a fixed point to the last bit.
  Vec b(rows);
  for (int i = 0; i < rows; ++i) b[i] = A.row(i).dot(theta_bar);
  if (residual_scale != 0.0) {
    for (int i = 0; i < rows; ++i)
      b[i] += residual_scale *
              rng::gaussian(instance_seed, rng::stream::init, idx++);
  }
  const int per = rows / batch_count;
  std::vector<std::vector<int>> batches(static_cast<std::size_t>(batch_count));
  for (int i = 0; i < rows; ++i)
    batches[static_cast<std::size_t>(i / per)].push_back(i);
  LeastSquaresProblem ls =
      least_squares_model(std::move(A), std::move(b), std::move(batches));
  if (residual_scale == 0.0) ls.interpolating_minimum = theta_bar;
  return ls;
}

std::pair<double, double> convexity_constants(const LeastSquaresProblem& ls) {
  double m = std::numeric_limits<double>::infinity();
  double M = 0.0;
  for (int i = 1; i <= ls.batch_count(); ++i) {
    Eigen::SelfAdjointEigenSolver<Mat> es(ls.batch_hessian(i));
    m = std::min(m, es.eigenvalues().minCoeff());
    M = std::max(M, es.eigenvalues().maxCoeff());
  }
  return {m, M};
}

// ---------------------------------------------------------------------------
// Synthetic regression datasets
// ---------------------------------------------------------------------------

DatasetKind dataset_kind_from_string(const std::string& s) {
  if (s == "square") return DatasetKind::Square;
  if (s == "cos10x") return DatasetKind::Cos10x;
  if (s == "cube") return DatasetKind::Cube;
  throw ConfigError("unknown dataset kind: " + s);
}

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::Square:
      return "square";
    case DatasetKind::Cos10x:
      return "cos10x";
    case DatasetKind::Cube:
      return "cube";
  }
  return "unknown";
}

namespace {
double target_fn(DatasetKind kind, double x) {
  switch (kind) {
    case DatasetKind::Square:
      return x * x;
    case DatasetKind::Cos10x:
      return std::cos(10.0 * x);
    case DatasetKind::Cube:
      return x * x * x;
  }
  return 0.0;
}
}  // namespace

RegressionDataset synthetic_regression_dataset(DatasetKind kind) {
  RegressionDataset data;
  data.kind = kind;
  for (int i = 0; i <= 100; ++i) {
    const double x = -1.0 + 2.0 * i / 100.0;
    data.inputs.push_back(x);
    data.targets.push_back(target_fn(kind, x));
  }
  for (int i = 0; i < 100; ++i) {
    const double x = -1.0 + (2.0 * i + 1.0) / 100.0;
    data.test_inputs.push_back(x);
    data.test_targets.push_back(target_fn(kind, x));
  }
  return data;
}

void write_dataset_csv(const RegressionDataset& data, std::ostream& out) {
  out << "split,x,y\n";
  for (std::size_t i = 0; i < data.inputs.size(); ++i)
    out << "train," << format17(data.inputs[i]) << ','
        << format17(data.targets[i]) << '\n';
  for (std::size_t i = 0; i < data.test_inputs.size(); ++i)
    out << "test," << format17(data.test_inputs[i]) << ','
        << format17(data.test_targets[i]) << '\n';
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& theta,
                double rel_step) {
  Vec g(theta.size());
  Vec probe = theta;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double step = rel_step * std::max(1.0, std::abs(theta[j]));
    probe[j] = theta[j] + step;
    const double up = f(probe);
    probe[j] = theta[j] - step;
    const double down = f(probe);
    probe[j] = theta[j];
    g[j] = (up - down) / (2.0 * step);
  }
  return g;
}

Mat fd_hessian_from_gradient(const std::function<Vec(const Vec&)>& grad,
                             const Vec& theta, double rel_step) {
  const Eigen::Index d = theta.size();
  Mat H(d, d);
  Vec probe = theta;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double step = rel_step * std::max(1.0, std::abs(theta[j]));
    probe[j] = theta[j] + step;
    const Vec up = grad(probe);
    probe[j] = theta[j] - step;
    const Vec down = grad(probe);
    probe[j] = theta[j];
    H.col(j) = (up - down) / (2.0 * step);
  }
  return 0.5 * (H + H.transpose());
}

}  // namespace orderlab
