// runner.hpp - experiment orchestration: seeded execution over the
// seed x mode grid, manifest + CSV emission, stability reports, distribution
// tests, and the order-of-accuracy studies.

#pragma once

#include "orderlab/bracket.hpp"
#include "orderlab/config.hpp"
#include "orderlab/contraction.hpp"
#include "orderlab/csv.hpp"
#include "orderlab/distribution.hpp"

#include <optional>

namespace orderlab {

/// Everything the engines need for one experiment: per-seed sequences and
/// start points, the loss probe, and model metadata.
struct ExperimentSetup {
  std::function<OperatorSequence(std::uint64_t seed)> sequence;
  std::function<Vec(std::uint64_t seed)> start;
  LossProbe probe;
  std::optional<double> analytic_factor;  // per-operator Lipschitz, if known
  std::shared_ptr<const BatchLossModel> batch_model;  // order-average runs
  int dim = 0;
};

ExperimentSetup build_setup(const ExperimentConfig& config);

struct RunStatus {
  std::uint64_t seed = 0;
  std::string mode_label;
  std::string csv_file;
  std::string status;  // converged | completed | diverged
  long diverged_step = -1;
  double wall_seconds = 0.0;
  std::string hash;
};

struct RunOutcome {
  std::string directory;
  std::vector<RunStatus> runs;

  bool all_diverged() const;
};

/// Executes the full seed x mode grid, writing the manifest first, one CSV
/// per run, ensemble CSVs for forward/backward terminals (small dimensions
/// only), and a contraction report when the model has an analytic factor.
RunOutcome run_experiment(const ExperimentConfig& config);

// --- stability -------------------------------------------------------------

struct StabilityRow {
  std::uint64_t seed = 0;
  std::string mode_label;
  double loss_variance = 0.0;          // train loss over the final window
  double max_step_displacement = 0.0;  // over the same window
};

struct StabilityReport {
  long window = 0;
  std::vector<StabilityRow> rows;
  // seed -> backward beats forward on both metrics
  std::vector<std::pair<std::uint64_t, bool>> backward_wins;
};

/// Variance of train loss and max step displacement over the final `window`
/// data rows of a trajectory CSV table.
StabilityRow stability_row(const CsvTable& table, long window);

StabilityReport stability_report_from_dir(const std::string& run_dir,
                                          long window);
std::string stability_report_text(const StabilityReport& report);

// --- distribution tests ------------------------------------------------------

struct DistTestResult {
  std::string reference;  // analytic | two-sample
  double statistic = 0.0;
  double threshold = 0.0;  // 1% critical value
  bool pass = false;
  std::size_t samples = 0;
};

DistTestResult dist_test_run_dir(const std::string& run_dir,
                                 const std::string& reference);

// --- order-of-accuracy studies ----------------------------------------------

/// Named ladder studies: "euler" (first-order self-test), "eq8" (approximate
/// backward vs true backward), "small-batch" (sequential small-batch vs
/// large batch + implicit regularizer), "perm-average" (exact permutation
/// average vs its second-order formula). `c` is the split count for the
/// batch-splitting studies.
std::vector<OrderCheckRow> order_check_study(const std::string& study,
                                             double h0, int levels, int c = 2);

}  // namespace orderlab
