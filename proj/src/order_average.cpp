#include "orderlab/order_average.hpp"

#include "orderlab/rng.hpp"

#include <algorithm>
#include <numeric>

namespace orderlab {

std::vector<std::vector<int>> split_batch(const std::vector<int>& batch, int c,
                                          std::uint64_t seed) {
  if (c < 1) throw ConfigError("split count must be positive");
  if (batch.empty()) throw ConfigError("empty batch");
  if (batch.size() % static_cast<std::size_t>(c) != 0)
    throw ConfigError("batch size " + std::to_string(batch.size()) +
                      " not divisible by c = " + std::to_string(c) +
                      "; resize the batch to a divisible size");
  std::vector<int> shuffled = batch;
  // Seeded Fisher-Yates.
  for (std::size_t i = shuffled.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(
        rng::below(seed, rng::stream::split, i, i + 1));
    std::swap(shuffled[i], shuffled[j]);
  }
  const std::size_t per = shuffled.size() / static_cast<std::size_t>(c);
  std::vector<std::vector<int>> splits(static_cast<std::size_t>(c));
  for (std::size_t k = 0; k < shuffled.size(); ++k)
    splits[k / per].push_back(shuffled[k]);
  return splits;
}

SplitConfig make_split_config(const BatchLossModel& model,
                              std::vector<int> batch, int c, double h,
                              double lambda, std::uint64_t seed) {
  if (c < 2) throw ConfigError("split count must be at least 2");
  if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
  for (int u : batch)
    if (u < 1 || u > model.batch_count)
      throw ConfigError("batch unit out of range");
  SplitConfig cfg;
  cfg.c = c;
  cfg.large_rate = h;
  cfg.small_rate = h / c;
  cfg.lambda = lambda;
  cfg.splits = split_batch(batch, c, seed);
  cfg.batch = std::move(batch);
  return cfg;
}

Vec group_field(const BatchLossModel& model, const std::vector<int>& group,
                const Vec& theta) {
  if (group.empty()) throw ConfigError("empty unit group");
  Vec g = Vec::Zero(theta.size());
  for (int u : group) g += model.gradient(u, theta);
  return -g / static_cast<double>(group.size());
}

Mat group_jacobian(const BatchLossModel& model, const std::vector<int>& group,
                   const Vec& theta) {
  if (!model.has_hessian())
    throw CapabilityError("model provides no Hessian");
  Mat H = Mat::Zero(theta.size(), theta.size());
  for (int u : group) H += model.hessian(u, theta);
  return -H / static_cast<double>(group.size());
}

Vec large_batch_update(const BatchLossModel& model,
                       const std::vector<int>& batch, const Vec& theta,
                       double h) {
  return theta + h * group_field(model, batch, theta);
}

Vec sequential_small_batch_update(const BatchLossModel& model,
                                  const std::vector<std::vector<int>>& splits,
                                  const Vec& theta, double h_small,
                                  const std::vector<int>& order) {
  const int c = static_cast<int>(splits.size());
  std::vector<bool> seen(static_cast<std::size_t>(c), false);
  if (static_cast<int>(order.size()) != c)
    throw ConfigError("order must be a permutation of 1..c");
  for (int s : order) {
    if (s < 1 || s > c || seen[static_cast<std::size_t>(s - 1)])
      throw ConfigError("order must be a permutation of 1..c");
    seen[static_cast<std::size_t>(s - 1)] = true;
  }
  // Composition order: the last-listed factor acts first.
  Vec x = theta;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto& group = splits[static_cast<std::size_t>(*it - 1)];
    x += h_small * group_field(model, group, x);
  }
  return x;
}

Vec small_batch_regularizer(const BatchLossModel& model,
                            const std::vector<std::vector<int>>& splits,
                            const Vec& theta, double h_small) {
  const std::size_t c = splits.size();
  std::vector<Vec> fields(c);
  std::vector<Mat> jacs(c);
  for (std::size_t i = 0; i < c; ++i) {
    fields[i] = group_field(model, splits[i], theta);
    jacs[i] = group_jacobian(model, splits[i], theta);
  }
  Vec term = Vec::Zero(theta.size());
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = i + 1; j < c; ++j) term += jacs[i] * fields[j];
  return h_small * h_small * term;
}

Vec permutation_average_update_exact(
    const BatchLossModel& model, const std::vector<std::vector<int>>& splits,
    const Vec& theta, double h_small) {
  const int c = static_cast<int>(splits.size());
  if (c > kMaxEnumeratedSplits)
    throw ResourceError("permutation enumeration capped at c <= " +
                        std::to_string(kMaxEnumeratedSplits) + ", got c = " +
                        std::to_string(c));
  std::vector<int> order(static_cast<std::size_t>(c));
  std::iota(order.begin(), order.end(), 1);
  Vec sum = Vec::Zero(theta.size());
  long count = 0;
  do {
    sum += sequential_small_batch_update(model, splits, theta, h_small, order);
    ++count;
  } while (std::next_permutation(order.begin(), order.end()));
  return sum / static_cast<double>(count);
}

Vec pair_interaction_sum(const BatchLossModel& model,
                         const std::vector<std::vector<int>>& splits,
                         const Vec& theta) {
  std::vector<Vec> fields(splits.size());
  std::vector<Mat> jacs(splits.size());
  for (std::size_t i = 0; i < splits.size(); ++i) {
    fields[i] = group_field(model, splits[i], theta);
    jacs[i] = group_jacobian(model, splits[i], theta);
  }
  Vec term = Vec::Zero(theta.size());
  for (std::size_t i = 0; i < splits.size(); ++i)
    for (std::size_t j = 0; j < splits.size(); ++j)
      if (i != j) term += jacs[i] * fields[j];
  return term;
}

Vec order_average_regularized_update(const BatchLossModel& model,
                                     const std::vector<int>& batch,
                                     const Vec& theta, double h, double lambda,
                                     int c, std::uint64_t seed) {
  if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
  const std::vector<std::vector<int>> splits = split_batch(batch, c, seed);
  return large_batch_update(model, batch, theta, h) +
         lambda * pair_interaction_sum(model, splits, theta);
}

}  // namespace orderlab
