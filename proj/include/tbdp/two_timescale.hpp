#pragma once

#include <utility>
#include <vector>

#include "tbdp/reduction.hpp"

namespace tbdp {

// Lexicographic two-scale clock: days 0..D, minutes 0..M, plus the terminal
// point (D+1, 0). Flat stage of (d, m) is d*(M+1)+m.
struct TwoScaleClock {
  int days = 0;     // D
  int minutes = 0;  // M

  void validate() const;
  int flat_horizon() const { return (days + 1) * (minutes + 1); }
  int lex_index(int d, int m) const;
  std::pair<int, int> lex_pair(int flat) const;
  bool is_day_boundary(int flat) const { return flat % (minutes + 1) == 0; }
};

// A flat-horizon problem whose stages are read through a two-scale clock.
// Kernels at minute 0 of day d+1 are the across-day family; kernels at
// minutes 1..M are the within-day family.
struct TwoScaleProblem {
  TwoScaleClock clock;
  ProblemSpec flat;

  void validate() const;
};

TwoScaleProblem make_two_scale_problem(TwoScaleClock clock, ProblemSpec flat);

// The schedule whose boundaries are the day starts (d,0) for d = 0..D+1.
BlockSchedule day_boundary_schedule(const TwoScaleClock& clock);

// Value and per-tree-node policy of the day-d nested problem started at
// slow state x with terminal cost next_value (over X_{d+1}).
struct IntraBlockSolve {
  Cost value;
  // policy[k][p]: control at in-day depth k given intra-day prefix p.
  std::vector<std::vector<int>> policy;
};

IntraBlockSolve intra_block_solve(const TwoScaleProblem& problem,
                                  const Reduction& reduction,
                                  const ReducedKernels& kernels, int day,
                                  int x, std::span<const Cost> next_value);

// Slow-scale DP: V~_{D+1} = reduced criterion, V~_d(x) by the day-d nested
// scenario-tree solve. Requires the reduction to be compatible on the
// day-boundary schedule and the criterion to factor through theta_{D+1}.
ReducedSolve solve_two_timescale(const TwoScaleProblem& problem,
                                 const Reduction& reduction,
                                 std::span<const Cost> reduced_criterion,
                                 bool check_factorization = true);

}  // namespace tbdp
