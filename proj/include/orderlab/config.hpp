// config.hpp - experiment configuration: JSON schema, defaults, validation.

#pragma once

#include "orderlab/core.hpp"
#include "orderlab/models.hpp"

namespace orderlab {

inline constexpr const char* kToolVersion = "0.1.0";

enum class ExperimentKind {
  Quadratic,
  Linearized,
  TwoPoint,
  LeastSquares,
  Regression,
};

ExperimentKind experiment_from_string(const std::string& s);
std::string to_string(ExperimentKind kind);

struct ModelParams {
  // regression
  std::vector<int> widths = {64, 64};
  std::string activation = "tanh";
  DatasetKind dataset = DatasetKind::Square;
  // quadratic / linearized
  NoiseModel noise;
  Mat hessian;  // linearized only
  Vec minimum;  // defaults to zeros
  // two-point
  Vec x0, y0;
  // least squares (seeded synthetic instance)
  int rows = 40;
  int cols = 5;
  int batches = 10;
  std::uint64_t instance_seed = 1;
  double residual_scale = 0.0;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::Quadratic;
  std::vector<IterationMode> modes;
  double learning_rate = 0.0;  // 0 = per-experiment default
  long steps = 0;              // 0 = per-experiment default
  std::vector<std::uint64_t> seeds;
  int batch_size = 0;  // 0 = default
  long eval_every = 1;
  std::string output_dir;
  std::vector<long> resets;  // intermittent mode
  long switch_step = -1;     // backward-after mode
  std::vector<double> lambdas = {0.0};  // order-average sweep
  int split_count = 2;                  // order-average c
  double tolerance = 1e-10;             // convergence detection
  Vec theta0;  // optional start override; empty = per-experiment default

  ModelParams model;
};

/// Parses and validates a config; applies the per-experiment defaults.
/// Unknown keys and invalid field combinations raise ConfigError listing
/// the offending fields.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

/// Canonical JSON echo of a parsed config (sorted keys; deterministic).
std::string config_to_json(const ExperimentConfig& config);

}  // namespace orderlab
