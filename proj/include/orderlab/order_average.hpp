// order_average.hpp - large-batch vs sequential small-batch updates, the
// implicit small-batch regularization term, the exact permutation-average
// update, and the explicit lambda-weighted order-average regularizer.

#pragma once

#include "orderlab/core.hpp"
#include "orderlab/models.hpp"

namespace orderlab {

/// Factorial enumeration guard for the exact permutation average.
inline constexpr int kMaxEnumeratedSplits = 8;

struct SplitConfig {
  int c = 2;                // split count
  double large_rate = 0.0;  // h
  double small_rate = 0.0;  // h' = h / c
  double lambda = 0.0;      // explicit regularizer strength
  std::vector<int> batch;   // unit-batch indices (1-based into the model)
  std::vector<std::vector<int>> splits;  // equal-size partition of batch
};

/// Seeded uniform partition of `batch` into c equal parts. The batch size
/// must be divisible by c; callers resize per the divisibility convention.
std::vector<std::vector<int>> split_batch(const std::vector<int>& batch, int c,
                                          std::uint64_t seed);

SplitConfig make_split_config(const BatchLossModel& model,
                              std::vector<int> batch, int c, double h,
                              double lambda, std::uint64_t seed);

/// Field of a group of unit batches: V_G(theta) = -(1/|G|) sum grad L_u.
Vec group_field(const BatchLossModel& model, const std::vector<int>& group,
                const Vec& theta);
/// Jacobian of the group field (needs the model's Hessian).
Mat group_jacobian(const BatchLossModel& model, const std::vector<int>& group,
                   const Vec& theta);

/// One step with the whole-batch field: theta + h V_B(theta). Satisfies
/// h V_B = h' sum_i V_i over any equal split with h' = h/c.
Vec large_batch_update(const BatchLossModel& model,
                       const std::vector<int>& batch, const Vec& theta,
                       double h);

/// Applies the c split updates as the composition
/// T_{order[0]} T_{order[1]} ... T_{order[c-1]}(theta); order entries are
/// 1-based split labels and the first-listed factor is applied last. The
/// identity order therefore expands to
/// T_large + h'^2 sum_{i<j} V_i' V_j + O(h'^3).
Vec sequential_small_batch_update(const BatchLossModel& model,
                                  const std::vector<std::vector<int>>& splits,
                                  const Vec& theta, double h_small,
                                  const std::vector<int>& order);

/// h'^2 sum_{i<j} V_i'(theta) V_j(theta): the implicit small-batch
/// regularization term.
Vec small_batch_regularizer(const BatchLossModel& model,
                            const std::vector<std::vector<int>>& splits,
                            const Vec& theta, double h_small);

/// Arithmetic mean of the sequential update over all c! orders; the
/// brute-force oracle for the second-order formula. Guarded at c <= 8.
Vec permutation_average_update_exact(
    const BatchLossModel& model, const std::vector<std::vector<int>>& splits,
    const Vec& theta, double h_small);

/// sum_{i != j} V_i'(theta) V_j(theta) over the splits; the order-free
/// interaction term behind the explicit regularizer.
Vec pair_interaction_sum(const BatchLossModel& model,
                         const std::vector<std::vector<int>>& splits,
                         const Vec& theta);

/// T_large(theta) + lambda sum_{i != j} V_i'(theta) V_j(theta). With
/// lambda = h'^2 / 2 this matches the exact permutation average to O(h'^3).
Vec order_average_regularized_update(const BatchLossModel& model,
                                     const std::vector<int>& batch,
                                     const Vec& theta, double h, double lambda,
                                     int c, std::uint64_t seed);

}  // namespace orderlab
