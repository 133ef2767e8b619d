#pragma once

#include <optional>
#include <vector>

#include "tbdp/reduction.hpp"
#include "tbdp/two_timescale.hpp"

namespace tbdp {

// Head histories have entries (w0, u_head_0, w_1, u_tail_1, ..., u_head_{s-1},
// w_s, u_tail_s): one uncertainty at stage 0 and then a (head control,
// uncertainty, tail control) triple per step. They are indexed densely in
// mixed radix, most significant entry first.

struct DhdKernel {
  bool white = false;
  // white: rows[0] used for every history; otherwise one row per head
  // history of the previous stage, in index order.
  std::vector<Distribution> rows;
};

struct DhdCriterion {
  enum class Rep { full_table, additive };
  Rep rep = Rep::full_table;

  // full_table: one cost per terminal head history.
  std::vector<Cost> full;

  // additive: per-stage state maps x_s = theta[s](h_s) with
  // stage_costs[s] indexed ((x*NU_head+u_head)*NW+w)*NU_tail+u_tail and a
  // final cost over the last state space.
  std::vector<std::vector<int>> theta;
  std::vector<int> state_sizes;
  std::vector<std::vector<Cost>> stage_costs;
  std::vector<Cost> final_cost;
};

struct DhdProblem {
  int horizon = 0;                        // S
  FiniteSpace head_uncertainty;           // W at stage 0
  std::vector<FiniteSpace> head_controls; // stage s control, s = 0..S-1
  std::vector<FiniteSpace> uncertainties; // W at stage s, s = 1..S
  std::vector<FiniteSpace> tail_controls; // tail control at stage s, s = 1..S
  std::vector<DhdKernel> kernels;         // kernel into stage s, s = 1..S
  DhdCriterion criterion;

  void validate() const;
  long long head_count(int s) const;
  std::vector<int> head_entries(int s, long long index) const;
  long long step_index(int s, long long h, int u_head, int w,
                       int u_tail) const;
  const Distribution& kernel_row(int s, long long h_prev) const;
  Cost criterion_value(long long terminal_index) const;
};

struct DhdValueFunction {
  int stage = 0;
  std::vector<Cost> values;
  std::vector<int> head_argmin;  // per domain point
  std::vector<int> tail_argmin;  // per (domain point * NU_head + u_head) * NW + w
};

// One backward step of the head/tail operator over head histories:
// out(h) = min_{u_head} E_w [ min_{u_tail} phi(h, u_head, w, u_tail) ].
DhdValueFunction dhd_bellman_apply(int s, std::span<const Cost> phi,
                                   const DhdProblem& problem);

// Full backward recursion over head histories; index S holds the terminal
// criterion values.
std::vector<DhdValueFunction> solve_dhd_history(const DhdProblem& problem);

struct DhdReductionMap {
  int stage = 0;
  FiniteSpace state_space;
  std::vector<int> table;  // per head history of the stage
};

struct DhdReduction {
  std::vector<DhdReductionMap> theta;    // stages 0..S
  std::vector<std::vector<int>> dynamics;  // per stage s: ((x*NUh+uh)*NW+w)*NUt+ut -> x'

  static DhdReduction identity(const DhdProblem& problem);
};

std::optional<ReductionCounterexample> check_dhd_reduction(
    const DhdProblem& problem, const DhdReduction& reduction);

struct DhdDeriveResult {
  // rows[s-1][x]: conditional law of w_s given state x at stage s-1.
  std::optional<std::vector<std::vector<Distribution>>> rows;
  std::optional<ReductionCounterexample> counterexample;
  bool ok() const { return rows.has_value(); }
};

DhdDeriveResult derive_dhd_kernels(const DhdProblem& problem,
                                   const DhdReduction& reduction,
                                   double tolerance = 1e-9);

// Reduced head/tail DP over states: V~_s(x) = min_{u_head} sum_w
// rho~(x)[w] * min_{u_tail} [stage cost + V~_{s+1}(f(x,u_head,w,u_tail))].
// With a full-table criterion, reduced_criterion must agree with it through
// theta_S; with an additive criterion, its state maps must match the
// reduction's and reduced_criterion is ignored in favor of the final cost.
std::vector<DhdValueFunction> solve_dhd(const DhdProblem& problem,
                                        const DhdReduction& reduction,
                                        std::span<const Cost> reduced_criterion,
                                        bool check_factorization = true);

// Embedding into a two-scale problem with one fast step per day: day d
// carries (u_head_d, w_{d+1}) and a spurious singleton uncertainty at the
// next day boundary, so flat histories at day boundaries index identically
// to head histories.
TwoScaleProblem embed_dhd(const DhdProblem& problem);

// Reservoir instance: stock x on {0..x_max}, turbined volume q from a grid,
// inflow a per period, optional spill r in {0..a_max}.
struct DamParams {
  int x_max = 0;
  std::vector<Distribution> inflows;            // one per period
  std::vector<int> turbine_grid;                // admissible q volumes
  std::vector<std::vector<double>> period_cost; // [period][q index], >= 0
  std::vector<double> final_cost;               // over stock grid, >= 0
};

// Single-decision variant: dynamics x' = min{x_max, x - q + a}, feasibility
// 0 <= q <= x charged as +infinity.
struct DamFlat {
  ProblemSpec problem;
  UnitReduction reduction;
};

// Head/tail variant: head control q, tail control (spill) r, dynamics
// x' = x - q + a - r with 0 <= q <= x and 0 <= x' <= x_max charged as
// +infinity; spill itself costs nothing.
struct DamDhd {
  DhdProblem problem;
  DhdReduction reduction;
  std::vector<Cost> reduced_criterion;
};

DamFlat build_dam_flat(const DamParams& params);
DamDhd build_dam_dhd(const DamParams& params);

}  // namespace tbdp
