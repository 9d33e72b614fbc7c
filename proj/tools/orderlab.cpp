// orderlab - experiment runner for forward/backward iteration-order studies.

#include "orderlab/csv.hpp"
#include "orderlab/runner.hpp"
#include "orderlab/svg.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace orderlab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitAllDiverged = 3;
constexpr int kExitInternal = 4;

int cmd_run(const std::string& config_path) {
  const ExperimentConfig cfg = load_config(config_path);
  const RunOutcome outcome = run_experiment(cfg);
  for (const RunStatus& run : outcome.runs) {
    std::cout << run.csv_file << ": " << run.status;
    if (run.diverged_step >= 0) std::cout << " at step " << run.diverged_step;
    std::cout << '\n';
  }
  std::cout << "run directory: " << outcome.directory << '\n';
  if (outcome.all_diverged()) {
    std::cerr << "all seeds diverged\n";
    return kExitAllDiverged;
  }
  return kExitOk;
}

int cmd_plot(const std::string& run_dir, const std::string& column,
             bool log_y, std::string out_path) {
  std::vector<PlotSeries> series;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("seed", 0) == 0 &&
        name.size() > 4 && name.substr(name.size() - 4) == ".csv")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const fs::path& file : files) {
    const CsvTable table = read_csv_file(file.string());
    PlotSeries s;
    s.label = file.stem().string();
    s.x = table.column("step");
    s.y = table.column(column);
    series.push_back(std::move(s));
  }
  PlotSpec spec;
  spec.title = fs::path(run_dir).filename().string();
  spec.y_label = column;
  spec.log_y = log_y;
  const std::string svg = render_svg(series, spec);
  if (out_path.empty())
    out_path = (fs::path(run_dir) / ("plot_" + column + ".svg")).string();
  std::ofstream out(out_path, std::ios::binary);
  out << svg;
  std::cout << "wrote " << out_path << '\n';
  return kExitOk;
}

int cmd_report(const std::string& run_dir, long window) {
  const StabilityReport report = stability_report_from_dir(run_dir, window);
  std::cout << stability_report_text(report);
  return kExitOk;
}

int cmd_dist_test(const std::string& run_dir, const std::string& reference) {
  const DistTestResult result = dist_test_run_dir(run_dir, reference);
  std::cout << "reference: " << result.reference << '\n'
            << "samples:   " << result.samples << '\n'
            << "KS stat:   " << format17(result.statistic) << '\n'
            << "1% crit:   " << format17(result.threshold) << '\n'
            << (result.pass ? "PASS" : "FAIL") << '\n';
  return kExitOk;
}

int cmd_order_check(const std::string& study, double h0, int levels, int c,
                    const std::string& out_path) {
  const std::vector<OrderCheckRow> rows = order_check_study(study, h0, levels, c);
  std::cout << "h,error,ratio,discarded\n";
  for (const OrderCheckRow& row : rows)
    std::cout << format17(row.h) << ',' << format17(row.error) << ','
              << csv_cell(row.ratio) << ',' << (row.discarded ? 1 : 0) << '\n';
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary);
    write_order_check_csv(rows, out);
    std::cout << "wrote " << out_path << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"orderlab: iteration-order experiments for stochastic "
               "optimizers"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "execute an experiment config");
  run->add_option("--config", config_path, "JSON config file")->required();

  std::string plot_dir, plot_column = "train_loss", plot_out;
  bool plot_log_y = false;
  auto* plot = app.add_subcommand("plot", "render trajectory CSVs as SVG");
  plot->add_option("--run-dir", plot_dir, "run directory")->required();
  plot->add_option("--column", plot_column, "CSV column to plot");
  plot->add_flag("--log-y", plot_log_y, "log-scale y axis");
  plot->add_option("--out", plot_out, "output SVG path");

  std::string report_dir;
  long report_window = 100;
  auto* report = app.add_subcommand("report", "stability report over a run");
  report->add_option("--run-dir", report_dir, "run directory")->required();
  report->add_option("--window", report_window, "final-window size");

  std::string dist_dir, dist_reference = "analytic";
  auto* dist = app.add_subcommand("dist-test", "distribution test on a run");
  dist->add_option("--run-dir", dist_dir, "run directory")->required();
  dist->add_option("--reference", dist_reference, "analytic | two-sample");

  std::string study = "eq8", order_out;
  double h0 = 0.1;
  int levels = 4, split_c = 2;
  auto* order = app.add_subcommand("order-check", "order-of-accuracy ladder");
  order->add_option("--study", study,
                    "euler | eq8 | small-batch | perm-average");
  order->add_option("--h0", h0, "largest ladder value");
  order->add_option("--levels", levels, "ladder length (halving)");
  order->add_option("--c", split_c, "split count for batch studies");
  order->add_option("--out", order_out, "output CSV path");

  auto* version = app.add_subcommand("version", "print version");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path);
    if (plot->parsed())
      return cmd_plot(plot_dir, plot_column, plot_log_y, plot_out);
    if (report->parsed()) return cmd_report(report_dir, report_window);
    if (dist->parsed()) return cmd_dist_test(dist_dir, dist_reference);
    if (order->parsed())
      return cmd_order_check(study, h0, levels, split_c, order_out);
    if (version->parsed()) {
      std::cout << "orderlab " << kToolVersion << '\n';
      return kExitOk;
    }
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return kExitConfig;
  } catch (const EmptyPlotError& err) {
    std::cerr << "plot error: " << err.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitInternal;
  }
  return kExitOk;
}
