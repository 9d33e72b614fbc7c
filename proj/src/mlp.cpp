#include "orderlab/mlp.hpp"

#include "orderlab/numdiff.hpp"

#include <cmath>
#include <memory>

namespace orderlab {

namespace {

// Parameter layout: per layer, W (out x in, column-major) then b (out).
struct LayerView {
  Eigen::Map<const Mat> W;
  Eigen::Map<const Vec> b;
};

LayerView layer_view(const Vec& theta, const std::vector<int>& dims,
                     std::size_t layer, std::ptrdiff_t& offset) {
  const int in = dims[layer], out = dims[layer + 1];
  Eigen::Map<const Mat> W(theta.data() + offset, out, in);
  offset += static_cast<std::ptrdiff_t>(out) * in;
  Eigen::Map<const Vec> b(theta.data() + offset, out);
  offset += out;
  return {W, b};
}

}  // namespace

int MlpModel::dim() const {
  int d = 0;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l)
    d += layer_dims[l] * layer_dims[l + 1] + layer_dims[l + 1];
  return d;
}

int MlpModel::batch_count() const {
  return static_cast<int>(data.inputs.size()) / batch_size;
}

Vec MlpModel::init_params(std::uint64_t seed) const {
  // Gain 0.3 keeps the narrow desk-scale nets in the near-lazy regime a much
  // wider network would occupy; at gain 1 the single-sample update operators
  // leave their contractive region and backward replays stop settling.
  constexpr double kInitGain = 0.3;
  Vec theta = Vec::Zero(dim());
  std::ptrdiff_t offset = 0;
  std::uint64_t idx = 0;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const int in = layer_dims[l], out = layer_dims[l + 1];
    const double s = kInitGain / std::sqrt(static_cast<double>(in));
    for (int k = 0; k < out * in; ++k)
      theta[offset + k] =
          s * (2.0 * rng::uniform01(seed, rng::stream::init, idx++) - 1.0);
    offset += static_cast<std::ptrdiff_t>(out) * in + out;  // biases stay 0
  }
  return theta;
}

double MlpModel::predict(const Vec& theta, double x) const {
  Vec a(1);
  a[0] = x;
  std::ptrdiff_t offset = 0;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const LayerView layer = layer_view(theta, layer_dims, l, offset);
    Vec z = layer.W * a + layer.b;
    a = (l + 2 < layer_dims.size()) ? z.array().tanh().matrix() : z;
  }
  return a[0];
}

double MlpModel::batch_loss(int batch, const Vec& theta) const {
  const int lo = (batch - 1) * batch_size;
  double s = 0.0;
  for (int k = 0; k < batch_size; ++k) {
    const double r = predict(theta, data.inputs[lo + k]) - data.targets[lo + k];
    s += r * r;
  }
  return s / batch_size;
}

Vec MlpModel::batch_gradient(int batch, const Vec& theta) const {
  const std::size_t layers = layer_dims.size() - 1;
  Vec grad = Vec::Zero(theta.size());
  std::vector<Vec> act(layers + 1);  // activations, act[0] = input
  const int lo = (batch - 1) * batch_size;
  for (int k = 0; k < batch_size; ++k) {
    const double x = data.inputs[lo + k];
    const double y = data.targets[lo + k];

    act[0] = Vec::Constant(1, x);
    std::ptrdiff_t offset = 0;
    for (std::size_t l = 0; l < layers; ++l) {
      const LayerView layer = layer_view(theta, layer_dims, l, offset);
      Vec z = layer.W * act[l] + layer.b;
      act[l + 1] = (l + 1 < layers) ? z.array().tanh().matrix() : z;
    }

    // Squared error, mean over the batch.
    Vec delta = Vec::Constant(1, 2.0 * (act[layers][0] - y) / batch_size);
    for (std::size_t l = layers; l-- > 0;) {
      const int in = layer_dims[l], out = layer_dims[l + 1];
      offset -= static_cast<std::ptrdiff_t>(out) * in + out;
      Eigen::Map<const Mat> W(theta.data() + offset, out, in);
      Eigen::Map<Mat> dW(grad.data() + offset, out, in);
      Eigen::Map<Vec> db(grad.data() + offset +
                             static_cast<std::ptrdiff_t>(out) * in,
                         out);
      dW.noalias() += delta * act[l].transpose();
      db += delta;
      if (l > 0) {
        // tanh'(z) = 1 - tanh(z)^2, and act[l] already holds tanh(z).
        delta = (W.transpose() * delta)
                    .cwiseProduct((1.0 - act[l].array().square()).matrix());
      }
    }
  }
  return grad;
}

double MlpModel::train_loss(const Vec& theta) const {
  double s = 0.0;
  for (std::size_t i = 0; i < data.inputs.size(); ++i) {
    const double r = predict(theta, data.inputs[i]) - data.targets[i];
    s += r * r;
  }
  return s / static_cast<double>(data.inputs.size());
}

double MlpModel::test_loss(const Vec& theta) const {
  double s = 0.0;
  for (std::size_t i = 0; i < data.test_inputs.size(); ++i) {
    const double r = predict(theta, data.test_inputs[i]) - data.test_targets[i];
    s += r * r;
  }
  return s / static_cast<double>(data.test_inputs.size());
}

BatchLossModel MlpModel::model() const {
  auto shared = std::make_shared<const MlpModel>(*this);
  BatchLossModel m;
  m.batch_count = batch_count();
  m.dim = dim();
  m.loss = [shared](int i, const Vec& t) { return shared->batch_loss(i, t); };
  m.gradient = [shared](int i, const Vec& t) {
    return shared->batch_gradient(i, t);
  };
  if (dim() <= kHessianDimCap) {
    m.hessian = [shared](int i, const Vec& t) {
      return fd_hessian_from_gradient(
          [shared, i](const Vec& p) { return shared->batch_gradient(i, p); },
          t);
    };
  }
  m.full_loss = [shared](const Vec& t) {
    double s = 0.0;
    for (int i = 1; i <= shared->batch_count(); ++i)
      s += shared->batch_loss(i, t);
    return s / static_cast<double>(shared->batch_count());
  };
  return m;
}

MlpModel make_mlp(const std::vector<int>& widths, RegressionDataset data,
                  int batch_size) {
  for (int w : widths)
    if (w < 1) throw ConfigError("layer widths must be positive");
  if (batch_size < 1 ||
      batch_size > static_cast<int>(data.inputs.size()))
    throw ConfigError("invalid batch size");
  MlpModel mlp;
  mlp.layer_dims.push_back(1);
  for (int w : widths) mlp.layer_dims.push_back(w);
  mlp.layer_dims.push_back(1);
  mlp.data = std::move(data);
  mlp.batch_size = batch_size;
  return mlp;
}

}  // namespace orderlab
