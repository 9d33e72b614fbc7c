// mlp.hpp - small multilayer perceptron for the synthetic regression tasks.
// Scalar input, scalar output, tanh hidden layers, squared-error loss;
// gradients by reverse-mode differentiation implemented here.

#pragma once

#include "orderlab/core.hpp"
#include "orderlab/models.hpp"

namespace orderlab {

/// Dense d x d Hessian storage is refused above this dimension.
inline constexpr int kHessianDimCap = 2000;

struct MlpModel {
  std::vector<int> layer_dims;  // input, hidden..., output
  RegressionDataset data;
  int batch_size = 1;

  int dim() const;          // flattened parameter count
  int batch_count() const;  // floor(train size / batch_size)

  /// Scaled uniform fan-in weights, zero biases; pure function of seed.
  Vec init_params(std::uint64_t seed) const;

  double predict(const Vec& theta, double x) const;
  double batch_loss(int batch, const Vec& theta) const;  // 1-based
  Vec batch_gradient(int batch, const Vec& theta) const;

  /// Mean squared error over the full training / held-out set.
  double train_loss(const Vec& theta) const;
  double test_loss(const Vec& theta) const;

  /// Batch-loss view. The Hessian is central finite differences of the
  /// gradient (symmetrized) and is provided only when dim() <= kHessianDimCap.
  BatchLossModel model() const;
};

/// widths lists the hidden layer sizes, e.g. {64, 64}.
MlpModel make_mlp(const std::vector<int>& widths, RegressionDataset data,
                  int batch_size = 1);

}  // namespace orderlab
