#include "orderlab/config.hpp"

#include "orderlab/mlp.hpp"

#include "json.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace orderlab {

using nlohmann::json;

ExperimentKind experiment_from_string(const std::string& s) {
  if (s == "quadratic") return ExperimentKind::Quadratic;
  if (s == "linearized") return ExperimentKind::Linearized;
  if (s == "two-point") return ExperimentKind::TwoPoint;
  if (s == "least-squares") return ExperimentKind::LeastSquares;
  if (s == "regression") return ExperimentKind::Regression;
  throw ConfigError("unknown experiment: " + s);
}

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Quadratic:
      return "quadratic";
    case ExperimentKind::Linearized:
      return "linearized";
    case ExperimentKind::TwoPoint:
      return "two-point";
    case ExperimentKind::LeastSquares:
      return "least-squares";
    case ExperimentKind::Regression:
      return "regression";
  }
  return "unknown";
}

namespace {

IterationMode mode_from_string(const std::string& s) {
  if (s == "forward") return IterationMode::Forward;
  if (s == "backward") return IterationMode::Backward;
  if (s == "intermittent") return IterationMode::IntermittentBackward;
  if (s == "backward-after") return IterationMode::BackwardAfterSwitch;
  if (s == "approx-backward") return IterationMode::ApproxBackward;
  if (s == "order-average") return IterationMode::OrderAverage;
  throw ConfigError("unknown mode: " + s);
}

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where, std::vector<std::string>& issues) {
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key()))
      issues.push_back(where + item.key() + " (unknown key)");
  }
}

Vec json_to_vec(const json& arr) {
  Vec v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

Mat json_to_mat(const json& arr) {
  const std::size_t rows = arr.size();
  const std::size_t cols = rows ? arr[0].size() : 0;
  Mat m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (arr[i].size() != cols) throw ConfigError("ragged matrix");
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          arr[i][j].get<double>();
  }
  return m;
}

json vec_to_json(const Vec& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

json mat_to_json(const Mat& m) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    arr.push_back(row);
  }
  return arr;
}

void apply_defaults(ExperimentConfig& cfg) {
  if (cfg.seeds.empty()) cfg.seeds = {1, 2, 3, 4, 5};
  switch (cfg.experiment) {
    case ExperimentKind::Quadratic:
      if (cfg.learning_rate == 0.0) cfg.learning_rate = 0.1;
      if (cfg.steps == 0) cfg.steps = 400;
      if (cfg.batch_size == 0) cfg.batch_size = 1;
      if (cfg.theta0.size() == 0) cfg.theta0 = Vec::Constant(1, 1.0);
      break;
    case ExperimentKind::Linearized:
      if (cfg.learning_rate == 0.0) cfg.learning_rate = 0.1;
      if (cfg.steps == 0) cfg.steps = 400;
      if (cfg.batch_size == 0) cfg.batch_size = 1;
      if (cfg.model.minimum.size() == 0 && cfg.model.hessian.size() != 0)
        cfg.model.minimum = Vec::Zero(cfg.model.hessian.rows());
      if (cfg.theta0.size() == 0 && cfg.model.minimum.size() != 0)
        cfg.theta0 = cfg.model.minimum + Vec::Ones(cfg.model.minimum.size());
      break;
    case ExperimentKind::TwoPoint:
      if (cfg.learning_rate == 0.0) cfg.learning_rate = 1.0;
      if (cfg.steps == 0) cfg.steps = 1000;
      if (cfg.batch_size == 0) cfg.batch_size = 1;
      if (cfg.model.x0.size() == 0) cfg.model.x0 = Vec::Zero(1);
      if (cfg.model.y0.size() == 0) cfg.model.y0 = Vec::Ones(1);
      if (cfg.theta0.size() == 0) cfg.theta0 = cfg.model.x0;
      break;
    case ExperimentKind::LeastSquares:
      if (cfg.learning_rate == 0.0) cfg.learning_rate = 0.05;
      if (cfg.steps == 0) cfg.steps = 200;
      if (cfg.batch_size == 0) cfg.batch_size = 1;
      if (cfg.theta0.size() == 0) cfg.theta0 = Vec::Zero(cfg.model.cols);
      break;
    case ExperimentKind::Regression:
      // Paper desk-scale defaults: batch size 1, 1400 steps, rate 0.05 for
      // the square dataset and 0.02 for cos10x / cube.
      if (cfg.learning_rate == 0.0)
        cfg.learning_rate =
            cfg.model.dataset == DatasetKind::Square ? 0.05 : 0.02;
      if (cfg.steps == 0) cfg.steps = 1400;
      if (cfg.batch_size == 0) cfg.batch_size = 1;
      break;
  }
}

int regression_dim(const ExperimentConfig& cfg) {
  MlpModel probe = make_mlp(cfg.model.widths,
                            synthetic_regression_dataset(cfg.model.dataset), 1);
  return probe.dim();
}

bool hessian_capable(const ExperimentConfig& cfg) {
  switch (cfg.experiment) {
    case ExperimentKind::Quadratic:
    case ExperimentKind::Linearized:
    case ExperimentKind::TwoPoint:
    case ExperimentKind::LeastSquares:
      return true;
    case ExperimentKind::Regression:
      return regression_dim(cfg) <= kHessianDimCap;
  }
  return false;
}

void validate(const ExperimentConfig& cfg, std::vector<std::string>& issues) {
  if (cfg.modes.empty()) issues.push_back("modes (empty)");
  if (cfg.learning_rate <= 0.0) issues.push_back("learning_rate (must be > 0)");
  if (cfg.steps < 0) issues.push_back("steps (negative)");
  if (cfg.seeds.empty()) issues.push_back("seeds (empty)");
  if (cfg.eval_every < 1) issues.push_back("eval_every (must be >= 1)");
  if (cfg.batch_size < 1) issues.push_back("batch_size (must be >= 1)");
  if (cfg.tolerance <= 0.0) issues.push_back("tolerance (must be > 0)");
  if (cfg.model.noise.scale < 0.0) issues.push_back("model.noise.scale (< 0)");

  bool has_intermittent = false, has_switch = false, has_order = false,
       has_approx = false;
  for (IterationMode mode : cfg.modes) {
    has_intermittent |= mode == IterationMode::IntermittentBackward;
    has_switch |= mode == IterationMode::BackwardAfterSwitch;
    has_order |= mode == IterationMode::OrderAverage;
    has_approx |= mode == IterationMode::ApproxBackward;
  }
  if (has_intermittent) {
    for (std::size_t k = 0; k < cfg.resets.size(); ++k) {
      if (cfg.resets[k] < 1 || cfg.resets[k] > cfg.steps) {
        issues.push_back("resets (step out of [1, steps])");
        break;
      }
      if (k > 0 && cfg.resets[k] <= cfg.resets[k - 1]) {
        issues.push_back("resets (not strictly increasing)");
        break;
      }
    }
  }
  if (has_switch && (cfg.switch_step < 0 || cfg.switch_step > cfg.steps))
    issues.push_back("switch_step (must be in [0, steps])");
  if (has_approx && !hessian_capable(cfg))
    issues.push_back("modes (approx-backward needs a Hessian-capable model; "
                     "parameter count exceeds " +
                     std::to_string(kHessianDimCap) + ")");
  if (has_order) {
    if (cfg.experiment != ExperimentKind::LeastSquares &&
        cfg.experiment != ExperimentKind::Regression)
      issues.push_back("modes (order-average needs a batch loss model)");
    else if (!hessian_capable(cfg))
      issues.push_back("modes (order-average needs Hessians; parameter count "
                       "exceeds " +
                       std::to_string(kHessianDimCap) + ")");
    if (cfg.split_count < 2) issues.push_back("c (must be >= 2)");
    for (double lambda : cfg.lambdas)
      if (lambda < 0.0) {
        issues.push_back("lambda (must be >= 0)");
        break;
      }
  }

  switch (cfg.experiment) {
    case ExperimentKind::Linearized:
      if (cfg.model.hessian.size() == 0) {
        issues.push_back("model.hessian (required for linearized)");
      } else {
        if (cfg.model.hessian.rows() != cfg.model.hessian.cols())
          issues.push_back("model.hessian (not square)");
        else if ((cfg.model.hessian - cfg.model.hessian.transpose())
                     .cwiseAbs()
                     .maxCoeff() >
                 1e-12 * (1.0 + cfg.model.hessian.cwiseAbs().maxCoeff()))
          issues.push_back("model.hessian (not symmetric)");
        if (cfg.model.minimum.size() != cfg.model.hessian.rows())
          issues.push_back("model.minimum (dimension mismatch)");
      }
      break;
    case ExperimentKind::TwoPoint:
      if (cfg.model.x0.size() != cfg.model.y0.size())
        issues.push_back("model.x0/model.y0 (dimension mismatch)");
      else if ((cfg.model.x0 - cfg.model.y0).norm() == 0.0)
        issues.push_back("model.y0 (must differ from x0)");
      break;
    case ExperimentKind::LeastSquares:
      if (cfg.model.rows < cfg.model.cols)
        issues.push_back("model.rows (need rows >= cols)");
      if (cfg.model.batches < 1 || cfg.model.rows % cfg.model.batches != 0)
        issues.push_back("model.batches (must divide rows)");
      if (has_order && cfg.model.batches % cfg.split_count != 0)
        issues.push_back("c (must divide the unit-batch count)");
      break;
    case ExperimentKind::Regression: {
      if (cfg.model.activation != "tanh")
        issues.push_back("model.activation (only tanh is supported)");
      for (int w : cfg.model.widths)
        if (w < 1) {
          issues.push_back("model.widths (must be positive)");
          break;
        }
      if (cfg.batch_size > 101)
        issues.push_back("batch_size (dataset has 101 training points)");
      break;
    }
    case ExperimentKind::Quadratic:
      if (cfg.theta0.size() != 1) issues.push_back("theta0 (must be scalar)");
      break;
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& err) {
    throw ConfigError(std::string("config is not valid JSON: ") + err.what());
  }
  if (!root.is_object()) throw ConfigError("config must be a JSON object");

  std::vector<std::string> issues;
  check_keys(root,
             {"experiment", "modes", "learning_rate", "steps", "seeds",
              "batch_size", "eval_every", "output_dir", "resets",
              "switch_step", "lambda", "c", "tolerance", "theta0", "model"},
             "", issues);

  ExperimentConfig cfg;
  try {
    cfg.experiment = experiment_from_string(
        root.value("experiment", std::string("quadratic")));
  } catch (const ConfigError& err) {
    issues.push_back(std::string("experiment (") + err.what() + ")");
  }
  if (root.contains("modes")) {
    for (const auto& m : root["modes"]) {
      try {
        cfg.modes.push_back(mode_from_string(m.get<std::string>()));
      } catch (const ConfigError& err) {
        issues.push_back(std::string("modes (") + err.what() + ")");
      }
    }
  }
  cfg.learning_rate = root.value("learning_rate", 0.0);
  cfg.steps = root.value("steps", 0L);
  if (root.contains("seeds"))
    for (const auto& s : root["seeds"])
      cfg.seeds.push_back(s.get<std::uint64_t>());
  cfg.batch_size = root.value("batch_size", 0);
  cfg.eval_every = root.value("eval_every", 1L);
  cfg.output_dir = root.value("output_dir", std::string());
  if (root.contains("resets"))
    for (const auto& r : root["resets"]) cfg.resets.push_back(r.get<long>());
  cfg.switch_step = root.value("switch_step", -1L);
  if (root.contains("lambda")) {
    cfg.lambdas.clear();
    if (root["lambda"].is_array())
      for (const auto& l : root["lambda"])
        cfg.lambdas.push_back(l.get<double>());
    else
      cfg.lambdas.push_back(root["lambda"].get<double>());
  }
  cfg.split_count = root.value("c", 2);
  cfg.tolerance = root.value("tolerance", 1e-10);
  if (root.contains("theta0")) {
    cfg.theta0 = root["theta0"].is_array()
                     ? json_to_vec(root["theta0"])
                     : Vec::Constant(1, root["theta0"].get<double>());
  }

  if (root.contains("model")) {
    const json& model = root["model"];
    check_keys(model,
               {"widths", "activation", "dataset", "noise", "hessian",
                "minimum", "x0", "y0", "rows", "cols", "batches",
                "instance_seed", "residual_scale"},
               "model.", issues);
    if (model.contains("widths")) {
      cfg.model.widths.clear();
      for (const auto& w : model["widths"])
        cfg.model.widths.push_back(w.get<int>());
    }
    cfg.model.activation = model.value("activation", std::string("tanh"));
    if (model.contains("dataset")) {
      try {
        cfg.model.dataset =
            dataset_kind_from_string(model["dataset"].get<std::string>());
      } catch (const ConfigError& err) {
        issues.push_back(std::string("model.dataset (") + err.what() + ")");
      }
    }
    if (model.contains("noise")) {
      const json& noise = model["noise"];
      check_keys(noise, {"kind", "scale"}, "model.noise.", issues);
      if (noise.contains("kind")) {
        try {
          cfg.model.noise.kind =
              noise_kind_from_string(noise["kind"].get<std::string>());
        } catch (const ConfigError& err) {
          issues.push_back(std::string("model.noise.kind (") + err.what() +
                           ")");
        }
      }
      cfg.model.noise.scale = noise.value("scale", 1.0);
    }
    if (model.contains("hessian")) cfg.model.hessian = json_to_mat(model["hessian"]);
    if (model.contains("minimum")) cfg.model.minimum = json_to_vec(model["minimum"]);
    if (model.contains("x0")) cfg.model.x0 = json_to_vec(model["x0"]);
    if (model.contains("y0")) cfg.model.y0 = json_to_vec(model["y0"]);
    cfg.model.rows = model.value("rows", 40);
    cfg.model.cols = model.value("cols", 5);
    cfg.model.batches = model.value("batches", 10);
    cfg.model.instance_seed = model.value("instance_seed", 1ULL);
    cfg.model.residual_scale = model.value("residual_scale", 0.0);
  }

  apply_defaults(cfg);
  validate(cfg, issues);
  if (!issues.empty()) {
    std::string what = "invalid config: ";
    for (std::size_t i = 0; i < issues.size(); ++i) {
      if (i) what += "; ";
      what += issues[i];
    }
    throw ConfigError(what);
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json root;
  root["experiment"] = to_string(cfg.experiment);
  json modes = json::array();
  for (IterationMode mode : cfg.modes) modes.push_back(mode_name(mode));
  root["modes"] = modes;
  root["learning_rate"] = cfg.learning_rate;
  root["steps"] = cfg.steps;
  root["seeds"] = cfg.seeds;
  root["batch_size"] = cfg.batch_size;
  root["eval_every"] = cfg.eval_every;
  root["output_dir"] = cfg.output_dir;
  root["resets"] = cfg.resets;
  root["switch_step"] = cfg.switch_step;
  root["lambda"] = cfg.lambdas;
  root["c"] = cfg.split_count;
  root["tolerance"] = cfg.tolerance;
  root["theta0"] = vec_to_json(cfg.theta0);

  json model;
  model["widths"] = cfg.model.widths;
  model["activation"] = cfg.model.activation;
  model["dataset"] = to_string(cfg.model.dataset);
  model["noise"] = {{"kind", to_string(cfg.model.noise.kind)},
                    {"scale", cfg.model.noise.scale}};
  if (cfg.model.hessian.size() != 0)
    model["hessian"] = mat_to_json(cfg.model.hessian);
  if (cfg.model.minimum.size() != 0)
    model["minimum"] = vec_to_json(cfg.model.minimum);
  if (cfg.model.x0.size() != 0) model["x0"] = vec_to_json(cfg.model.x0);
  if (cfg.model.y0.size() != 0) model["y0"] = vec_to_json(cfg.model.y0);
  model["rows"] = cfg.model.rows;
  model["cols"] = cfg.model.cols;
  model["batches"] = cfg.model.batches;
  model["instance_seed"] = cfg.model.instance_seed;
  model["residual_scale"] = cfg.model.residual_scale;
  root["model"] = model;

  return root.dump(2);
}

}  // namespace orderlab
