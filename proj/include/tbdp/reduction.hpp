#pragma once

#include <optional>

#include "tbdp/bellman.hpp"

namespace tbdp {

/// Stage boundaries t_0 = 0 < t_1 < ... < t_N = T.
struct BlockSchedule {
  std::vector<int> boundaries;

  int blocks() const { return static_cast<int>(boundaries.size()) - 1; }
  void validate(int horizon) const;

  static BlockSchedule unit(int horizon);
};

/// theta_t: dense table H_t -> X_t.
struct ReductionMap {
  int stage = 0;
  FiniteSpace state_space;
  std::vector<int> table;  // indexed by dense history index

  int apply(const StageSpaces& spaces, const History& h) const {
    return table.at(spaces.index_of(h));
  }
  void validate(const StageSpaces& spaces) const;

  static ReductionMap identity(const StageSpaces& spaces, int stage);
  static ReductionMap last_uncertainty(const StageSpaces& spaces, int stage);
  static ReductionMap running_sum(const StageSpaces& spaces, int stage);
  static ReductionMap from_rule(const StageSpaces& spaces, int stage,
                                int state_size,
                                const std::function<int(const History&)>& f);
};

/// Boundary maps theta and per-block dynamics f across a schedule. The
/// dynamics for block i is a dense table over X_{t_i} x H_{t_i+1:t_{i+1}},
/// indexed x * segment_count + segment_index.
struct Reduction {
  std::vector<ReductionMap> theta;            // one per boundary
  std::vector<std::vector<int>> dynamics;     // one per block

  static Reduction canonical(const StageSpaces& spaces,
                             const BlockSchedule& schedule);
  static Reduction from_maps(const StageSpaces& spaces,
                             const BlockSchedule& schedule,
                             std::vector<ReductionMap> theta);
};

struct ReductionCounterexample {
  int block = 0;
  long long history_index = 0;   // in H_{t_i}
  long long segment_index = 0;   // in H_{t_i+1:...}
  long long other_history_index = -1;  // second member of a violating pair
  std::string detail;
};

/// Checks the commutation theta_{t_{i+1}}(h, seg) == f(theta_{t_i}(h), seg)
/// on every block; returns the first counterexample in lexicographic order.
std::optional<ReductionCounterexample> check_state_reduction(
    const Reduction& reduction, const BlockSchedule& schedule,
    const ProblemSpec& problem);

/// Reduced kernel rows per block and in-block stage, indexed
/// (x * prefix_count + prefix) where the prefix is the in-block segment
/// H_{t_i+1:s-1} (a single empty prefix at the first in-block stage).
struct ReducedKernels {
  // rows[block][s - (t_i + 1)]
  std::vector<std::vector<std::vector<Distribution>>> rows;
};

struct DeriveResult {
  std::optional<ReducedKernels> kernels;
  std::optional<ReductionCounterexample> counterexample;

  bool ok() const { return kernels.has_value(); }
};

/// Builds reduced kernels by grouping histories on the key
/// (theta_{t_i}(h_{t_i}), in-block prefix) and verifying row coincidence
/// within total-variation 1e-9. Compatibility by well-definedness.
DeriveResult derive_reduced_kernels(const Reduction& reduction,
                                    const BlockSchedule& schedule,
                                    const ProblemSpec& problem,
                                    double tolerance = 1e-9);

/// Per-block policy: argmin controls per (state, in-block prefix).
struct BlockPolicy {
  // controls[block][s - t_i][x * prefix_count + prefix]
  std::vector<std::vector<std::vector<int>>> controls;
};

struct ReducedSolve {
  std::vector<ValueFunction> boundary_values;  // one per boundary, over X
  BlockPolicy policy;
};

/// Applies the reduced Bellman operator across one block [r, t'] to
/// phi_tilde over X_{t'}: the nested inf/expectation over in-block segments,
/// evaluated by backward recursion over in-block depth. Also records the
/// argmin control per (state, prefix) when policy != nullptr.
std::vector<Cost> apply_reduced_block(
    const ProblemSpec& problem, const Reduction& reduction,
    const BlockSchedule& schedule, int block, const ReducedKernels& kernels,
    std::span<const Cost> phi_tilde,
    std::vector<std::vector<int>>* policy = nullptr);

/// Block DP: V~_{t_N} = reduced criterion, V~_{t_i} = B~ V~_{t_{i+1}}.
/// Pre: compatibility established (derive_reduced_kernels succeeded).
/// check_factorization verifies j = j~ o theta_T exhaustively.
ReducedSolve solve_reduced_dp(const ProblemSpec& problem,
                              const BlockSchedule& schedule,
                              const Reduction& reduction,
                              std::span<const Cost> reduced_criterion,
                              bool check_factorization = true);

/// Per-stage reduction bundle for the unit-block and additive solvers:
/// theta per stage plus tables f_t indexed (x * |U_t| + u) * |W_{t+1}| + w.
struct UnitReduction {
  std::vector<ReductionMap> theta;           // stages 0..T
  std::vector<std::vector<int>> dynamics;    // per stage t

  Reduction as_reduction(const StageSpaces& spaces) const;
};

/// Classical state-space DP; identical to solve_reduced_dp with the
/// all-unit schedule.
ReducedSolve solve_unit_block_dp(const ProblemSpec& problem,
                                 const UnitReduction& reduction,
                                 std::span<const Cost> reduced_criterion,
                                 bool check_factorization = true);

/// Additive DP: V^_T = K, V^_t(x) = min_u E[L_t(x,u,w) + V^_{t+1}(f(x,u,w))].
/// Requires problem.criterion to be additive; the reduction maps are taken
/// from the criterion's theta tables and the supplied dynamics.
ReducedSolve solve_additive_dp(const ProblemSpec& problem,
                               const UnitReduction& reduction);

}  // namespace tbdp
