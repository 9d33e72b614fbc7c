#include "orderlab/runner.hpp"

#include "orderlab/csv.hpp"
#include "orderlab/mlp.hpp"
#include "orderlab/order_average.hpp"
#include "orderlab/parallel.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace orderlab {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Experiment setup
// ---------------------------------------------------------------------------

ExperimentSetup build_setup(const ExperimentConfig& cfg) {
  ExperimentSetup setup;
  const double h = cfg.learning_rate;
  switch (cfg.experiment) {
    case ExperimentKind::Quadratic: {
      const NoiseModel noise = cfg.model.noise;
      const Vec theta0 = cfg.theta0;
      setup.sequence = [h, noise](std::uint64_t seed) {
        return quadratic_sequence(h, noise, seed);
      };
      setup.start = [theta0](std::uint64_t) { return theta0; };
      setup.probe.train = [](const Vec& x) { return 0.5 * x[0] * x[0]; };
      setup.analytic_factor = std::abs(1.0 - h);
      setup.dim = 1;
      break;
    }
    case ExperimentKind::Linearized: {
      const NoiseModel noise = cfg.model.noise;
      const Vec minimum = cfg.model.minimum;
      const Mat H = cfg.model.hessian;
      const Vec theta0 = cfg.theta0;
      setup.sequence = [minimum, H, h, noise](std::uint64_t seed) {
        return linearized_sequence(minimum, H, h, noise, seed);
      };
      setup.start = [theta0](std::uint64_t) { return theta0; };
      setup.probe.train = [minimum, H](const Vec& x) {
        return 0.5 * (x - minimum).dot(H * (x - minimum));
      };
      setup.analytic_factor = gd_operator_norm_factor(H, h);
      setup.dim = static_cast<int>(minimum.size());
      break;
    }
    case ExperimentKind::TwoPoint: {
      const Vec x0 = cfg.model.x0, y0 = cfg.model.y0;
      const Vec theta0 = cfg.theta0;
      setup.sequence = [x0, y0](std::uint64_t seed) {
        return two_point_sequence(x0, y0, seed);
      };
      setup.start = [theta0](std::uint64_t) { return theta0; };
      setup.analytic_factor = 0.0;  // constant maps
      setup.dim = static_cast<int>(x0.size());
      break;
    }
    case ExperimentKind::LeastSquares: {
      auto problem = std::make_shared<const LeastSquaresProblem>(
          random_least_squares(cfg.model.rows, cfg.model.cols,
                               cfg.model.batches, cfg.model.instance_seed,
                               cfg.model.residual_scale));
      auto model = std::make_shared<const BatchLossModel>(problem->model());
      const Vec theta0 = cfg.theta0;
      setup.sequence = [model, h](std::uint64_t seed) {
        return sgd_sequence(*model, h, seed);
      };
      setup.start = [theta0](std::uint64_t) { return theta0; };
      setup.probe.train = [model](const Vec& x) { return model->full_loss(x); };
      double factor = 0.0;
      for (int i = 1; i <= problem->batch_count(); ++i)
        factor = std::max(factor,
                          gd_operator_norm_factor(problem->batch_hessian(i), h));
      setup.analytic_factor = factor;
      setup.batch_model = model;
      setup.dim = problem->dim();
      break;
    }
    case ExperimentKind::Regression: {
      auto mlp = std::make_shared<const MlpModel>(
          make_mlp(cfg.model.widths,
                   synthetic_regression_dataset(cfg.model.dataset),
                   cfg.batch_size));
      auto model = std::make_shared<const BatchLossModel>(mlp->model());
      setup.sequence = [model, h](std::uint64_t seed) {
        return sgd_sequence(*model, h, seed);
      };
      setup.start = [mlp](std::uint64_t seed) { return mlp->init_params(seed); };
      setup.probe.train = [mlp](const Vec& x) { return mlp->train_loss(x); };
      setup.probe.test = [mlp](const Vec& x) { return mlp->test_loss(x); };
      setup.batch_model = model;
      setup.dim = mlp->dim();
      break;
    }
  }
  setup.probe.every = cfg.eval_every;
  return setup;
}

// ---------------------------------------------------------------------------
// run_experiment
// ---------------------------------------------------------------------------

namespace {

std::string lambda_label(double lambda) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "order-average(lambda=%.6g)", lambda);
  return buf;
}

Trajectory order_average_trajectory(const BatchLossModel& model,
                                    const Vec& start, long n, double h,
                                    double lambda, int c, std::uint64_t seed,
                                    const EngineOptions& opts,
                                    const std::string& label) {
  std::vector<int> units(static_cast<std::size_t>(model.batch_count));
  std::iota(units.begin(), units.end(), 1);

  Trajectory traj;
  traj.mode = IterationMode::OrderAverage;
  traj.mode_label = label;
  traj.seed = seed;
  traj.iterates_recorded = opts.record_iterates;
  Vec prev = start;
  auto push = [&](long step, const Vec& point, double displacement) {
    TrajectoryRecord rec;
    rec.step = step;
    rec.step_displacement = displacement;
    if (opts.probe.every > 0 && step % opts.probe.every == 0) {
      if (opts.probe.train) rec.train_loss = opts.probe.train(point);
      if (opts.probe.test) rec.test_loss = opts.probe.test(point);
    }
    if (opts.record_iterates) rec.iterate = point;
    traj.records.push_back(std::move(rec));
  };
  push(0, start, 0.0);
  Vec x = start;
  for (long t = 1; t <= n; ++t) {
    // The step's whole-unit batch is re-split with a step-pure seed.
    const std::uint64_t split_seed =
        rng::word(seed, rng::stream::split, static_cast<std::uint64_t>(t));
    Vec y = order_average_regularized_update(model, units, x, h, lambda, c,
                                             split_seed);
    if (!all_finite(y))
      throw DivergenceError(t, "non-finite iterate at step " +
                                   std::to_string(t));
    push(t, y, distance(y, x));
    x = std::move(y);
  }
  finalize_dist_to_anchor(traj);
  return traj;
}

struct RunTask {
  std::uint64_t seed = 0;
  IterationMode mode = IterationMode::Forward;
  double lambda = 0.0;
  std::string label;
  std::string filename;
};

struct TaskResult {
  RunStatus status;
  Vec terminal;
  bool has_terminal = false;
  bool converged = false;
};

Trajectory run_mode(const ExperimentConfig& cfg, const ExperimentSetup& setup,
                    const RunTask& task, long steps,
                    const EngineOptions& opts) {
  const OperatorSequence seq = setup.sequence(task.seed);
  const Vec start = setup.start(task.seed);
  switch (task.mode) {
    case IterationMode::Forward:
      return apply_forward(seq, start, steps, opts);
    case IterationMode::Backward:
      return apply_backward_naive(seq, start, steps, opts);
    case IterationMode::IntermittentBackward: {
      std::vector<long> resets;
      for (long r : cfg.resets)
        if (r <= steps) resets.push_back(r);
      return apply_intermittent_backward(seq, start, steps, resets, opts);
    }
    case IterationMode::BackwardAfterSwitch:
      return apply_backward_after(seq, start, steps,
                                  std::min(cfg.switch_step, steps), opts);
    case IterationMode::ApproxBackward:
      return approx_backward_trajectory(seq, start, steps, opts);
    case IterationMode::OrderAverage:
      return order_average_trajectory(*setup.batch_model, start, steps,
                                      cfg.learning_rate, task.lambda,
                                      cfg.split_count, task.seed, opts,
                                      task.label);
  }
  throw ConfigError("unhandled mode");
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

json run_status_json(const RunStatus& status) {
  json entry;
  entry["seed"] = status.seed;
  entry["mode"] = status.mode_label;
  entry["csv"] = status.csv_file;
  entry["status"] = status.status;
  if (status.diverged_step >= 0) entry["diverged_step"] = status.diverged_step;
  entry["wall_seconds"] = status.wall_seconds;
  if (!status.hash.empty()) entry["fnv1a64"] = status.hash;
  return entry;
}

}  // namespace

bool RunOutcome::all_diverged() const {
  if (runs.empty()) return false;
  for (const RunStatus& status : runs)
    if (status.status != "diverged") return false;
  return true;
}

RunOutcome run_experiment(const ExperimentConfig& cfg) {
  if (cfg.output_dir.empty())
    throw ConfigError("invalid config: output_dir (empty)");
  const ExperimentSetup setup = build_setup(cfg);
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);

  // Task grid: modes x seeds (x lambda for order-average).
  std::vector<RunTask> tasks;
  for (IterationMode mode : cfg.modes) {
    const std::vector<double> lambdas =
        mode == IterationMode::OrderAverage ? cfg.lambdas
                                            : std::vector<double>{0.0};
    for (double lambda : lambdas) {
      for (std::uint64_t seed : cfg.seeds) {
        RunTask task;
        task.seed = seed;
        task.mode = mode;
        task.lambda = lambda;
        task.label = mode == IterationMode::OrderAverage ? lambda_label(lambda)
                                                         : mode_name(mode);
        task.filename = "seed" + std::to_string(seed) + "_" + task.label +
                        ".csv";
        tasks.push_back(std::move(task));
      }
    }
  }

  // The manifest is on disk before any CSV row and finalized afterwards.
  const auto t_begin = std::chrono::steady_clock::now();
  json manifest;
  manifest["tool_version"] = kToolVersion;
  manifest["created_unix_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count();
  manifest["status"] = "running";
  manifest["config"] = json::parse(config_to_json(cfg));
  manifest["runs"] = json::array();
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");

  if (cfg.experiment == ExperimentKind::Regression) {
    std::ostringstream data_csv;
    write_dataset_csv(synthetic_regression_dataset(cfg.model.dataset),
                      data_csv);
    write_text_file(dir / "dataset.csv", data_csv.str());
  }

  std::vector<TaskResult> results(tasks.size());
  parallel_for_index(tasks.size(), [&](std::size_t i) {
    const RunTask& task = tasks[i];
    TaskResult& result = results[i];
    result.status.seed = task.seed;
    result.status.mode_label = task.label;
    result.status.csv_file = task.filename;
    const auto t0 = std::chrono::steady_clock::now();

    EngineOptions opts;
    opts.record_iterates = true;
    opts.probe = setup.probe;

    Trajectory traj;
    try {
      traj = run_mode(cfg, setup, task, cfg.steps, opts);
      result.converged = traj.terminal_displacement() < cfg.tolerance;
      result.status.status = result.converged ? "converged" : "completed";
    } catch (const DivergenceError& err) {
      result.status.status = "diverged";
      result.status.diverged_step = err.step();
      // Keep the finite prefix so the CSV still shows the blow-up approach.
      traj = run_mode(cfg, setup, task, err.step() - 1, opts);
    }
    result.terminal = traj.terminal_iterate();
    result.has_terminal = true;

    std::ostringstream csv;
    write_trajectory_csv(traj, csv);
    const std::string bytes = csv.str();
    result.status.hash = fnv1a64_hex(bytes);
    write_text_file(dir / task.filename, bytes);
    result.status.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
  });

  // Terminal-point ensembles for the plain modes, small dimensions only.
  if (setup.dim <= 32) {
    for (IterationMode mode :
         {IterationMode::Backward, IterationMode::Forward}) {
      LimitEnsemble ensemble;
      ensemble.kind = mode == IterationMode::Backward
                          ? EnsembleKind::BackwardLimits
                          : EnsembleKind::ForwardTerminals;
      ensemble.steps_used = cfg.steps;
      ensemble.tolerance = cfg.tolerance;
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (tasks[i].mode != mode || !results[i].has_terminal) continue;
        ensemble.seeds.push_back(tasks[i].seed);
        ensemble.points.push_back(results[i].terminal);
        ensemble.converged.push_back(results[i].converged);
        ensemble.diverged.push_back(results[i].status.status == "diverged");
      }
      if (!ensemble.seeds.empty()) {
        std::ostringstream csv;
        write_ensemble_csv(ensemble, csv);
        write_text_file(dir / (mode == IterationMode::Backward
                                   ? "ensemble_backward.csv"
                                   : "ensemble_forward.csv"),
                        csv.str());
      }
    }
  }

  // Contraction report off the first backward run, when the model family
  // has an analytic factor to compare against.
  const bool has_backward =
      std::find(cfg.modes.begin(), cfg.modes.end(), IterationMode::Backward) !=
      cfg.modes.end();
  if (has_backward && setup.analytic_factor) {
    ContractionReport report;
    report.analytic_factor = setup.analytic_factor;
    const std::uint64_t seed = cfg.seeds.front();
    const Vec start = setup.start(seed);
    const OperatorSequence seq = setup.sequence(seed);
    report.probe = start;
    report.empirical_factor =
        empirical_contraction_estimate(seq.at(1), start, 1.0, 200, seed);
    report.displacement_bound =
        displacement_bound_check(seq, start, std::min<long>(cfg.steps, 100))
            .max_displacement;
    try {
      const CsvTable table = read_csv_file(
          (dir / ("seed" + std::to_string(seed) + "_backward.csv")).string());
      const auto& steps_col = table.column("step");
      const auto& dist_col = table.column("dist_to_anchor");
      std::vector<long> steps(steps_col.size());
      for (std::size_t i = 0; i < steps_col.size(); ++i)
        steps[i] = static_cast<long>(steps_col[i]);
      const RateFit fit = exponential_rate_fit(steps, dist_col);
      report.rate_slope = fit.slope;
      report.rate_constant = std::exp(fit.intercept);
    } catch (const std::exception&) {
      report.rate_slope = kNaN;
      report.rate_constant = kNaN;
    }
    report.pass = report.empirical_factor < 1.0 &&
                  std::isfinite(report.displacement_bound);
    write_text_file(dir / "contraction_report.json",
                    contraction_report_json(report) + "\n");
  }

  RunOutcome outcome;
  outcome.directory = dir.string();
  for (const TaskResult& result : results) outcome.runs.push_back(result.status);

  manifest["status"] = "complete";
  for (const RunStatus& status : outcome.runs)
    manifest["runs"].push_back(run_status_json(status));
  manifest["total_wall_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin)
          .count();
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
  return outcome;
}

// ---------------------------------------------------------------------------
// Stability report
// ---------------------------------------------------------------------------

StabilityRow stability_row(const CsvTable& table, long window) {
  const long rows = static_cast<long>(table.rows());
  if (window < 1) throw ConfigError("window must be positive");
  if (window > rows)
    throw ConfigError("window " + std::to_string(window) +
                      " exceeds recorded steps " + std::to_string(rows));
  const auto& loss = table.column("train_loss");
  const auto& disp = table.column("step_displacement");
  StabilityRow row;
  std::vector<double> values;
  for (long i = rows - window; i < rows; ++i) {
    const double l = loss[static_cast<std::size_t>(i)];
    if (!std::isnan(l)) values.push_back(l);
    row.max_step_displacement =
        std::max(row.max_step_displacement, disp[static_cast<std::size_t>(i)]);
  }
  if (values.size() > 1) {
    const double mean =
        std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    row.loss_variance = ss / (static_cast<double>(values.size()) - 1.0);
  }
  return row;
}

StabilityReport stability_report_from_dir(const std::string& run_dir,
                                          long window) {
  StabilityReport report;
  report.window = window;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("seed", 0) == 0 && name.find('_') != std::string::npos &&
        name.size() > 4 && name.substr(name.size() - 4) == ".csv" &&
        name.rfind("ensemble", 0) != 0)
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw ConfigError("no trajectory CSVs under " + run_dir);

  std::map<std::uint64_t, std::map<std::string, StabilityRow>> by_seed;
  for (const fs::path& file : files) {
    const std::string name = file.filename().string();
    const std::size_t sep = name.find('_');
    const std::uint64_t seed = std::stoull(name.substr(4, sep - 4));
    const std::string label = name.substr(sep + 1, name.size() - sep - 5);
    StabilityRow row = stability_row(read_csv_file(file.string()), window);
    row.seed = seed;
    row.mode_label = label;
    report.rows.push_back(row);
    by_seed[seed][label] = row;
  }
  for (const auto& [seed, modes] : by_seed) {
    const auto fwd = modes.find("forward");
    const auto bwd = modes.find("backward");
    if (fwd != modes.end() && bwd != modes.end()) {
      const bool wins =
          bwd->second.loss_variance < fwd->second.loss_variance &&
          bwd->second.max_step_displacement <
              fwd->second.max_step_displacement;
      report.backward_wins.emplace_back(seed, wins);
    }
  }
  return report;
}

std::string stability_report_text(const StabilityReport& report) {
  std::ostringstream out;
  out << "stability over final " << report.window << " records\n";
  out << "seed  mode                          loss_variance   max_step_disp\n";
  for (const StabilityRow& row : report.rows) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-5llu %-28s %.6e  %.6e\n",
                  static_cast<unsigned long long>(row.seed),
                  row.mode_label.c_str(), row.loss_variance,
                  row.max_step_displacement);
    out << line;
  }
  for (const auto& [seed, wins] : report.backward_wins)
    out << "seed " << seed << ": backward "
        << (wins ? "more stable than" : "NOT more stable than")
        << " forward\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Distribution tests
// ---------------------------------------------------------------------------

DistTestResult dist_test_run_dir(const std::string& run_dir,
                                 const std::string& reference) {
  const fs::path dir(run_dir);
  std::ifstream manifest_in(dir / "manifest.json");
  if (!manifest_in)
    throw ConfigError("no manifest.json under " + run_dir);
  json manifest = json::parse(manifest_in);
  const ExperimentConfig cfg = parse_config(manifest["config"].dump());

  auto load = [&](const char* file, EnsembleKind kind) {
    std::ifstream in(dir / file);
    if (!in)
      throw ConfigError(std::string(file) + " not found under " + run_dir +
                        " (run with the matching mode first)");
    return read_ensemble_csv(in, kind);
  };

  DistTestResult result;
  result.reference = reference;
  if (reference == "analytic") {
    if (cfg.experiment != ExperimentKind::Quadratic ||
        cfg.model.noise.kind != NoiseKind::Gaussian)
      throw ConfigError(
          "analytic reference needs the quadratic experiment with gaussian "
          "noise");
    const LimitEnsemble backward =
        load("ensemble_backward.csv", EnsembleKind::BackwardLimits);
    const auto [mean, variance] =
        quadratic_stationary_params(cfg.learning_rate, cfg.model.noise.scale);
    const double sd = std::sqrt(variance);
    const std::vector<double> samples = backward.coordinate(0);
    if (samples.empty()) throw InsufficientDataError("no converged seeds");
    result.samples = samples.size();
    result.statistic = ks_statistic(
        samples, [&](double x) { return normal_cdf(x, mean, sd); });
    result.threshold = ks_critical_1pct(samples.size());
  } else if (reference == "two-sample") {
    const LimitEnsemble backward =
        load("ensemble_backward.csv", EnsembleKind::BackwardLimits);
    const LimitEnsemble forward =
        load("ensemble_forward.csv", EnsembleKind::ForwardTerminals);
    const double threshold = ks_two_sample_critical_1pct(
        static_cast<std::size_t>(backward.usable_count()),
        static_cast<std::size_t>(forward.usable_count()));
    const EnsembleComparison cmp =
        compare_ensembles(backward, forward, threshold);
    result.samples = static_cast<std::size_t>(backward.usable_count());
    result.statistic = cmp.max_ks;
    result.threshold = threshold;
  } else {
    throw ConfigError("reference must be 'analytic' or 'two-sample'");
  }
  result.pass = result.statistic < result.threshold;
  return result;
}

// ---------------------------------------------------------------------------
// Order-check studies
// ---------------------------------------------------------------------------

namespace {

std::vector<double> ladder_values(double h0, int levels) {
  if (levels < 3) throw ConfigError("order check needs at least 3 levels");
  std::vector<double> ladder;
  double h = h0;
  for (int i = 0; i < levels; ++i, h *= 0.5) ladder.push_back(h);
  return ladder;
}

LeastSquaresProblem study_instance(int batch_count) {
  // Mildly scaled so h * lambda_max stays well inside the asymptotic regime
  // over the default ladders.
  LeastSquaresProblem ls =
      random_least_squares(12 * batch_count, 5, batch_count, 11);
  return least_squares_model(0.5 * ls.A, 0.5 * ls.b, ls.batches);
}

}  // namespace

std::vector<OrderCheckRow> order_check_study(const std::string& study,
                                             double h0, int levels, int c) {
  const std::vector<double> ladder = ladder_values(h0, levels);

  if (study == "euler") {
    // Forward Euler on x' = -x over unit time against the exact flow;
    // validates the checker itself at first order.
    auto build = [](double h) {
      const long steps = std::lround(1.0 / h);
      Vec approx = Vec::Constant(1, std::pow(1.0 - h, steps));
      Vec exact = Vec::Constant(1, std::exp(-1.0));
      return std::make_pair(approx, exact);
    };
    return order_check(build, ladder);
  }

  if (study == "eq8") {
    auto problem = std::make_shared<const LeastSquaresProblem>(
        study_instance(10));
    auto build = [problem](double h) {
      const BatchLossModel model = problem->model();
      const OperatorSequence seq = sgd_sequence(model, h, 101);
      const Vec theta0 = Vec::Zero(problem->dim());
      const long n = 12;
      const Vec approx = approx_backward_recursive(seq, theta0, n).first;
      EngineOptions opts;
      const Vec exact =
          apply_backward_naive(seq, theta0, n, opts).terminal_iterate();
      return std::make_pair(approx, exact);
    };
    return order_check(build, ladder);
  }

  if (study == "small-batch" || study == "perm-average") {
    // A non-affine model: over affine (least-squares) fields the c = 2
    // identities are exact and leave nothing for the ladder to measure.
    const int units_count = 12;
    if (units_count % c != 0)
      throw ConfigError("split count must divide 12 for this study");
    auto mlp = std::make_shared<const MlpModel>(
        make_mlp({6}, synthetic_regression_dataset(DatasetKind::Square), 1));
    const BatchLossModel model = mlp->model();
    std::vector<int> units(units_count);
    std::iota(units.begin(), units.end(), 1);
    const auto splits = split_batch(units, c, 3);
    const Vec theta = mlp->init_params(17);
    if (study == "small-batch") {
      std::vector<int> identity(static_cast<std::size_t>(c));
      std::iota(identity.begin(), identity.end(), 1);
      auto build = [=](double h_small) {
        const Vec approx =
            large_batch_update(model, units, theta, c * h_small) +
            small_batch_regularizer(model, splits, theta, h_small);
        const Vec exact = sequential_small_batch_update(model, splits, theta,
                                                        h_small, identity);
        return std::make_pair(approx, exact);
      };
      return order_check(build, ladder);
    }
    auto build = [=](double h_small) {
      const Vec approx =
          large_batch_update(model, units, theta, c * h_small) +
          0.5 * h_small * h_small * pair_interaction_sum(model, splits, theta);
      const Vec exact =
          permutation_average_update_exact(model, splits, theta, h_small);
      return std::make_pair(approx, exact);
    };
    return order_check(build, ladder);
  }

  throw ConfigError("unknown study: " + study +
                    " (euler, eq8, small-batch, perm-average)");
}

}  // namespace orderlab
