#include "tbdp/two_timescale.hpp"

namespace tbdp {

void TwoScaleClock::validate() const {
  if (days < 0 || minutes < 0)
    fail(ErrorKind::validation, "clock requires days >= 0 and minutes >= 0");
}

int TwoScaleClock::lex_index(int d, int m) const {
  bool in_grid = d >= 0 && d <= days && m >= 0 && m <= minutes;
  bool terminal = d == days + 1 && m == 0;
  if (!in_grid && !terminal)
    fail(ErrorKind::invalid_range, "(" + std::to_string(d) + "," +
                                       std::to_string(m) +
                                       ") is not a clock point");
  return d * (minutes + 1) + m;
}

std::pair<int, int> TwoScaleClock::lex_pair(int flat) const {
  if (flat < 0 || flat > flat_horizon())
    fail(ErrorKind::invalid_range, "flat stage out of the clock span");
  return {flat / (minutes + 1), flat % (minutes + 1)};
}

void TwoScaleProblem::validate() const {
  clock.validate();
  flat.validate();
  if (flat.horizon() != clock.flat_horizon())
    fail(ErrorKind::instance_mismatch,
         "flat horizon != (D+1)(M+1) demanded by the clock");
}

TwoScaleProblem make_two_scale_problem(TwoScaleClock clock, ProblemSpec flat) {
  TwoScaleProblem p{clock, std::move(flat)};
  p.validate();
  return p;
}

BlockSchedule day_boundary_schedule(const TwoScaleClock& clock) {
  BlockSchedule s;
  for (int d = 0; d <= clock.days + 1; ++d)
    s.boundaries.push_back(d * (clock.minutes + 1));
  return s;
}

namespace {

struct TreeSolver {
  const TwoScaleProblem& problem;
  const Reduction& reduction;
  const ReducedKernels& kernels;
  int day;
  int x;
  std::span<const Cost> next_value;
  int a;  // flat stage of (day, 0)
  int L;  // minutes + 1 steps in the day
  std::vector<std::vector<int>>* policy;

  // Value at in-day depth k with intra-day prefix index p (the prefix spans
  // flat stages a+1..a+k).
  Cost node(int k, long long p) const {
    const StageSpaces& spaces = problem.flat.spaces;
    if (k == L) {
      long long segN = spaces.segment_count(a + 1, a + L);
      int xn = reduction.dynamics[day][x * segN + p];
      return xn >= 0 ? next_value[xn] : Cost::inf();
    }
    int s = a + k;
    int nu = spaces.control_size(s);
    int nw = spaces.uncertainty_size(s + 1);
    long long pN = spaces.segment_count(a + 1, s);
    const Distribution& row = kernels.rows[day][k][x * pN + p];
    Cost best = Cost::inf();
    int best_u = 0;
    for (int u = 0; u < nu; ++u) {
      Cost acc(0.0);
      for (int w = 0; w < nw; ++w)
        acc += node(k + 1, (p * nu + u) * nw + w).scaled(row[w]);
      if (u == 0 || acc < best) {
        best = acc;
        best_u = u;
      }
    }
    if (policy) (*policy)[k][p] = best_u;
    return best;
  }
};

}  // namespace

IntraBlockSolve intra_block_solve(const TwoScaleProblem& problem,
                                  const Reduction& reduction,
                                  const ReducedKernels& kernels, int day,
                                  int x, std::span<const Cost> next_value) {
  const StageSpaces& spaces = problem.flat.spaces;
  if (day < 0 || day > problem.clock.days)
    fail(ErrorKind::invalid_range, "day out of range");
  if (x < 0 || x >= reduction.theta[day].state_space.size)
    fail(ErrorKind::instance_mismatch, "state out of X_d");
  if (static_cast<int>(next_value.size()) !=
      reduction.theta[day + 1].state_space.size)
    fail(ErrorKind::instance_mismatch, "next_value size != |X_{d+1}|");

  IntraBlockSolve out;
  int a = problem.clock.lex_index(day, 0);
  int L = problem.clock.minutes + 1;
  out.policy.resize(L);
  for (int k = 0; k < L; ++k)
    out.policy[k].assign(spaces.segment_count(a + 1, a + k), 0);

  bool reached = false;
  for (int v : reduction.theta[day].table)
    if (v == x) {
      reached = true;
      break;
    }
  if (!reached) {
    out.value = Cost::inf();
    return out;
  }
  TreeSolver solver{problem, reduction, kernels, day,
                    x,       next_value, a,       L,
                    &out.policy};
  out.value = solver.node(0, 0);
  return out;
}

ReducedSolve solve_two_timescale(const TwoScaleProblem& problem,
                                 const Reduction& reduction,
                                 std::span<const Cost> reduced_criterion,
                                 bool check_factorization) {
  problem.validate();
  BlockSchedule schedule = day_boundary_schedule(problem.clock);
  if (auto ce = check_state_reduction(reduction, schedule, problem.flat))
    fail(ErrorKind::validation,
         "not a slow-scale state reduction (day " + std::to_string(ce->block) +
             "): " + ce->detail);
  auto derived = derive_reduced_kernels(reduction, schedule, problem.flat);
  if (!derived.ok())
    fail(ErrorKind::validation,
         "incompatible kernels: " + derived.counterexample->detail);

  int T = problem.flat.horizon();
  const ReductionMap& theta_T = reduction.theta.back();
  if (static_cast<int>(reduced_criterion.size()) != theta_T.state_space.size)
    fail(ErrorKind::instance_mismatch, "reduced criterion size != |X_{D+1}|");
  if (check_factorization) {
    long long hN = problem.flat.spaces.history_count(T);
    for (long long hi = 0; hi < hN; ++hi) {
      Cost j = problem.flat.criterion_value(problem.flat.spaces.history_at(T, hi));
      if (cost_gap(j, reduced_criterion[theta_T.table[hi]]) > 1e-9)
        fail(ErrorKind::factorization,
             "criterion does not factor through theta_{D+1} at history " +
                 std::to_string(hi));
    }
  }

  int D = problem.clock.days;
  ReducedSolve out;
  out.boundary_values.resize(D + 2);
  out.policy.controls.resize(D + 1);
  ValueFunction vT;
  vT.stage = T;
  vT.domain = ValueFunction::Domain::reduced_state;
  vT.values.assign(reduced_criterion.begin(), reduced_criterion.end());
  out.boundary_values[D + 1] = std::move(vT);

  const StageSpaces& spaces = problem.flat.spaces;
  for (int d = D; d >= 0; --d) {
    int xN = reduction.theta[d].state_space.size;
    int a = problem.clock.lex_index(d, 0);
    int L = problem.clock.minutes + 1;
    ValueFunction vf;
    vf.stage = a;
    vf.domain = ValueFunction::Domain::reduced_state;
    vf.values.resize(xN);
    vf.argmin.assign(xN, 0);
    out.policy.controls[d].resize(L);
    for (int k = 0; k < L; ++k)
      out.policy.controls[d][k].assign(
          static_cast<size_t>(xN) * spaces.segment_count(a + 1, a + k), 0);
    for (int x = 0; x < xN; ++x) {
      IntraBlockSolve day_solve =
          intra_block_solve(problem, reduction, *derived.kernels, d, x,
                            out.boundary_values[d + 1].values);
      vf.values[x] = day_solve.value;
      for (int k = 0; k < L; ++k) {
        long long pN = spaces.segment_count(a + 1, a + k);
        for (long long p = 0; p < pN; ++p)
          out.policy.controls[d][k][x * pN + p] = day_solve.policy[k][p];
      }
      vf.argmin[x] = day_solve.policy[0][0];
    }
    out.boundary_values[d] = std::move(vf);
  }
  return out;
}

}  // namespace tbdp
