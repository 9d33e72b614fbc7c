#include "orderlab/distribution.hpp"

#include "orderlab/csv.hpp"
#include "orderlab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace orderlab {

long LimitEnsemble::converged_count() const {
  long n = 0;
  for (std::size_t i = 0; i < size(); ++i)
    if (converged[i] && !diverged[i]) ++n;
  return n;
}

bool LimitEnsemble::usable(std::size_t i) const {
  if (diverged[i]) return false;
  return kind == EnsembleKind::ForwardTerminals || converged[i];
}

long LimitEnsemble::usable_count() const {
  long n = 0;
  for (std::size_t i = 0; i < size(); ++i)
    if (usable(i)) ++n;
  return n;
}

std::vector<double> LimitEnsemble::coordinate(int coord) const {
  std::vector<double> values;
  for (std::size_t i = 0; i < size(); ++i)
    if (usable(i)) values.push_back(points[i][coord]);
  return values;
}

namespace {

enum class Direction { Forward, Backward };

LimitEnsemble collect_ensemble(const SequenceFactory& make_seq,
                               const Vec& start,
                               const std::vector<std::uint64_t>& seeds, long n,
                               double tol, Direction direction) {
  LimitEnsemble ensemble;
  ensemble.kind = direction == Direction::Backward
                      ? EnsembleKind::BackwardLimits
                      : EnsembleKind::ForwardTerminals;
  ensemble.seeds = seeds;
  ensemble.steps_used = n;
  ensemble.tolerance = tol;
  ensemble.points.resize(seeds.size());
  // Byte flags during the parallel fill; vector<bool> packs bits and is not
  // safe for concurrent element writes.
  std::vector<unsigned char> converged(seeds.size(), 0);
  std::vector<unsigned char> diverged(seeds.size(), 0);

  EngineOptions opts;
  opts.record_iterates = true;

  auto run = [&](std::uint64_t seed, long steps) {
    const OperatorSequence seq = make_seq(seed);
    return direction == Direction::Backward
               ? apply_backward_naive(seq, start, steps, opts)
               : apply_forward(seq, start, steps, opts);
  };

  parallel_for_index(seeds.size(), [&](std::size_t i) {
    try {
      const Trajectory traj = run(seeds[i], n);
      ensemble.points[i] = traj.terminal_iterate();
      converged[i] = traj.terminal_displacement() < tol ? 1 : 0;
    } catch (const DivergenceError& err) {
      // Keep the last finite iterate for the record; the seed is excluded
      // from distribution tests.
      diverged[i] = 1;
      const long last_ok = err.step() - 1;
      ensemble.points[i] =
          last_ok >= 0 ? run(seeds[i], last_ok).terminal_iterate() : start;
    }
  });
  ensemble.converged.assign(converged.begin(), converged.end());
  ensemble.diverged.assign(diverged.begin(), diverged.end());
  return ensemble;
}

}  // namespace

LimitEnsemble backward_limit_ensemble(const SequenceFactory& make_seq,
                                      const Vec& start,
                                      const std::vector<std::uint64_t>& seeds,
                                      long n, double tol) {
  if (n < 2) throw ConfigError("backward ensemble needs n >= 2");
  if (tol <= 0.0) throw ConfigError("tolerance must be positive");
  return collect_ensemble(make_seq, start, seeds, n, tol, Direction::Backward);
}

LimitEnsemble forward_terminal_ensemble(const SequenceFactory& make_seq,
                                        const Vec& start,
                                        const std::vector<std::uint64_t>& seeds,
                                        long n, double tol) {
  if (n < 1) throw ConfigError("forward ensemble needs n >= 1");
  return collect_ensemble(make_seq, start, seeds, n, tol, Direction::Forward);
}

std::pair<double, double> quadratic_stationary_params(double h, double sigma) {
  if (h <= 0.0 || h >= 2.0)
    throw ConfigError("stationary law exists only for h in (0, 2)");
  return {0.0, h * sigma * sigma / (2.0 - h)};
}

double normal_cdf(double x, double mean, double sd) {
  return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

double ks_statistic(std::vector<double> samples,
                    const std::function<double(double)>& cdf) {
  if (samples.empty()) throw ConfigError("KS statistic needs samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, f - static_cast<double>(i) / n);
    d = std::max(d, static_cast<double>(i + 1) / n - f);
  }
  return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ConfigError("KS statistic needs samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na -
                             static_cast<double>(j) / nb));
  }
  return d;
}

double ks_critical_1pct(std::size_t n) {
  return 1.63 / std::sqrt(static_cast<double>(n));
}

double ks_two_sample_critical_1pct(std::size_t n1, std::size_t n2) {
  return 1.63 * std::sqrt(static_cast<double>(n1 + n2) /
                          (static_cast<double>(n1) * static_cast<double>(n2)));
}

namespace {
std::pair<double, double> mean_var(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, xs.size() > 1 ? ss / (n - 1.0) : 0.0};
}
}  // namespace

EnsembleComparison compare_ensembles(const LimitEnsemble& a,
                                     const LimitEnsemble& b,
                                     double ks_threshold) {
  if (a.usable_count() == 0 || b.usable_count() == 0)
    throw InsufficientDataError("no usable points in one of the ensembles");
  const int dim = static_cast<int>(a.points.front().size());
  EnsembleComparison cmp;
  for (int c = 0; c < dim; ++c) {
    const std::vector<double> xa = a.coordinate(c);
    const std::vector<double> xb = b.coordinate(c);
    cmp.ks.push_back(ks_two_sample(xa, xb));
    const auto [ma, va] = mean_var(xa);
    const auto [mb, vb] = mean_var(xb);
    cmp.mean_delta.push_back(ma - mb);
    cmp.var_ratio.push_back(vb == 0.0
                                ? std::numeric_limits<double>::infinity()
                                : va / vb);
    cmp.max_ks = std::max(cmp.max_ks, cmp.ks.back());
  }
  cmp.verdict = cmp.max_ks < ks_threshold;
  return cmp;
}

void write_ensemble_csv(const LimitEnsemble& ensemble, std::ostream& out) {
  const int dim =
      ensemble.points.empty() ? 0 : static_cast<int>(ensemble.points[0].size());
  out << "seed,converged,diverged";
  for (int c = 0; c < dim; ++c) out << ",x" << c;
  out << '\n';
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    out << ensemble.seeds[i] << ',' << (ensemble.converged[i] ? 1 : 0) << ','
        << (ensemble.diverged[i] ? 1 : 0);
    for (int c = 0; c < dim; ++c)
      out << ',' << format17(ensemble.points[i][c]);
    out << '\n';
  }
}

LimitEnsemble read_ensemble_csv(std::istream& in, EnsembleKind kind) {
  const CsvTable table = read_csv(in);
  if (table.header.size() < 4)
    throw ConfigError("ensemble CSV needs seed,converged,diverged,x0,...");
  LimitEnsemble ensemble;
  ensemble.kind = kind;
  const int dim = static_cast<int>(table.header.size()) - 3;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    ensemble.seeds.push_back(
        static_cast<std::uint64_t>(table.columns[0][r]));
    ensemble.converged.push_back(table.columns[1][r] != 0.0);
    ensemble.diverged.push_back(table.columns[2][r] != 0.0);
    Vec p(dim);
    for (int c = 0; c < dim; ++c)
      p[c] = table.columns[static_cast<std::size_t>(c) + 3][r];
    ensemble.points.push_back(std::move(p));
  }
  return ensemble;
}

}  // namespace orderlab
