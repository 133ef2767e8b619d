#pragma once

#include <vector>

#include "tbdp/bellman.hpp"
#include "tbdp/dhd.hpp"
#include "tbdp/reduction.hpp"
#include "tbdp/two_timescale.hpp"

namespace tbdp {

// An exogenous noise process over the per-stage uncertainty spaces. Three
// representations:
//  - joint_table: explicit probability of every full path w_{0:T}, indexed
//    in lexicographic (mixed-radix) path order;
//  - white_noise: independent per-stage marginals;
//  - day_independent: a two-scale clock, a marginal for w_0, and one joint
//    table per day over that day's noise block (stages (d,1)..(d+1,0)),
//    blocks mutually independent.
struct NoiseProcessSpec {
  enum class Rep { joint_table, white_noise, day_independent };
  Rep rep = Rep::white_noise;

  std::vector<FiniteSpace> spaces;  // W_0..W_T
  std::vector<double> joint;        // joint_table
  std::vector<Distribution> marginals;  // white_noise: stages 0..T; also the
                                        // w_0 marginal for day_independent
  TwoScaleClock clock;                       // day_independent
  std::vector<std::vector<double>> day_joint;  // [day], path-lex within block

  void validate() const;
  long long path_count() const;
};

struct NoiseKernels {
  std::vector<StochasticKernel> kernels;  // stages 1..T
  // True when some conditioning path had probability zero and its row was
  // set to uniform by convention.
  bool zero_probability_rows = false;
};

// Conditional one-step kernels of the process; rows depend on histories
// only through their uncertainty coordinates.
NoiseKernels kernels_from_noise_process(const NoiseProcessSpec& spec);

// Exact optimum over controls adapted to the future noise only: at stage s
// the control may depend on w_{t+1..s} but not on past controls. Equals the
// history-feedback value on noise-driven problems.
Cost adapted_value_oracle(int t, const History& h_t,
                          const ProblemSpec& problem,
                          const SolveOptions& options = {});

enum class WhiteNoiseMode { final_cost, additive };

// Direct white-noise state recursion: V~_t(x) = min_u sum_w p_t+1(w) *
// [stage cost +] V~_{t+1}(f(x,u,w)), over states forward-reachable from
// X_0 = W_0. Requires every kernel row to be history-independent.
std::vector<ValueFunction> solve_white_noise_dp(const ProblemSpec& problem,
                                                const UnitReduction& reduction,
                                                WhiteNoiseMode mode);

// Slow-scale recursion for day-independent noise: each day solved as an
// adapted-control scenario tree over that day's joint block, conditionals
// taken from the block table directly. joint_table specs are accepted when
// the joint factors into independent day blocks.
ReducedSolve solve_white_noise_2ts(const TwoScaleProblem& problem,
                                   const NoiseProcessSpec& spec,
                                   const Reduction& reduction,
                                   std::span<const Cost> reduced_criterion);

// Direct white-noise head/tail recursion: V~_s(x) = min_uh sum_w p(w) *
// min_ut [stage cost +] V~_{s+1}(f(x,uh,w,ut)).
std::vector<DhdValueFunction> solve_white_noise_dhd(
    const DhdProblem& problem, const DhdReduction& reduction,
    std::span<const Cost> reduced_criterion);

}  // namespace tbdp
