#pragma once

#include <optional>
#include <vector>

#include "tbdp/kernels.hpp"

namespace tbdp {

/// Criterion j over terminal histories. Three representations:
///  - full_table: explicit cost per h_T;
///  - final_state: j = values o theta_T, with theta_T a dense table over H_T;
///  - additive: j(h_T) = sum_t L_t(theta_t(h_t), u_t, w_{t+1}) + K(theta_T(h_T)),
///    with per-stage theta tables over each H_t.
struct Criterion {
  enum class Rep { full_table, final_state, additive };
  Rep rep = Rep::full_table;

  // full_table
  std::vector<Cost> full;  // over H_T

  // final_state
  std::vector<int> theta_final;       // H_T -> X_T
  int final_state_size = 0;           // |X_T|
  std::vector<Cost> final_values;     // over X_T

  // additive
  std::vector<std::vector<int>> theta;  // theta[t]: H_t -> X_t, t = 0..T
  std::vector<int> state_sizes;         // |X_t|, t = 0..T
  // stage_costs[t] indexed (x * |U_t| + u) * |W_{t+1}| + w
  std::vector<std::vector<Cost>> stage_costs;
  std::vector<Cost> final_cost;  // K over X_T

  static Criterion from_table(std::vector<Cost> values);
  static Criterion from_final_state(std::vector<int> theta_T, int state_size,
                                    std::vector<Cost> values);
};

/// A complete declarative instance: spaces, kernel family for stages 1..T,
/// and the criterion.
struct ProblemSpec {
  StageSpaces spaces;
  std::vector<StochasticKernel> kernels;  // stages 1..T, in order
  Criterion criterion;

  int horizon() const { return spaces.horizon(); }

  const StochasticKernel& kernel(int stage) const {
    return kernel_for_stage(kernels, stage);
  }

  /// Kernel stages cover exactly 1..T, rows well-formed, criterion tables
  /// sized for their domains, every |U_t| >= 1 (vacuous by FiniteSpace).
  void validate() const;

  Cost criterion_value(const History& h_T) const;

  /// x_t = theta_t(h_t) for additive/final-state criteria.
  int additive_state(int t, const History& h_t) const;
  Cost stage_cost(int t, int x, int u, int w) const;
};

}  // namespace tbdp
