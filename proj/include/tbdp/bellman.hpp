#pragma once

#include "tbdp/problem.hpp"

namespace tbdp {

/// Table from histories (or reduced states) to extended costs, with an
/// optional argmin control per domain element.
struct ValueFunction {
  enum class Domain { history, reduced_state };

  int stage = 0;
  Domain domain = Domain::history;
  std::vector<Cost> values;
  std::vector<int> argmin;  // empty when not recorded

  Cost at(long long i) const { return values.at(i); }
};

struct SolveOptions {
  long long table_budget = 1'000'000;  // total V-table entries across stages
  long long enumeration_cap = 10'000'000;
  int threads = 1;
};

/// One-step operator: output(h_t) = min_u E_{w ~ rho_{t:t+1}(h_t,.)}
/// phi(h_t, u, w), ties broken toward the smallest control index.
ValueFunction apply_bellman(int t, const ValueFunction& phi,
                            const ProblemSpec& problem,
                            const SolveOptions& opts = {});

/// B_{t:r} = B_{t:t-1} o ... o B_{r+1:r}; identity when r == t.
ValueFunction compose_bellman(int r, int t, const ValueFunction& phi,
                              const ProblemSpec& problem,
                              const SolveOptions& opts = {});

/// Terminal value function V_T = j as a dense table.
ValueFunction terminal_value(const ProblemSpec& problem);

/// Backward recursion V_T = j, V_t = B_{t+1:t} V_{t+1}. Returns V_0..V_T
/// (indexed by stage).
std::vector<ValueFunction> solve_history_dp(const ProblemSpec& problem,
                                            const SolveOptions& opts = {});

/// Expected criterion under rho^gamma_{t:T} from h_t.
Cost evaluate_feedback(int t, const History& h_t, const Feedback& gamma,
                       const ProblemSpec& problem);

/// Exact minimum of evaluate_feedback over all history feedbacks, computed
/// by exhaustive enumeration of the feedback choices on histories reachable
/// from h_t (choices elsewhere cannot affect the value). Capacity error when
/// the enumeration count exceeds the cap.
Cost brute_force_value(int t, const History& h_t, const ProblemSpec& problem,
                       const SolveOptions& opts = {});

/// Greedy feedback read off the argmin tables of a solve_history_dp result.
Feedback argmin_feedback(const ProblemSpec& problem,
                         const std::vector<ValueFunction>& vfs);

}  // namespace tbdp
