#include "tbdp/reduction.hpp"

#include <algorithm>

namespace tbdp {

void BlockSchedule::validate(int horizon) const {
  if (boundaries.size() < 2 || boundaries.front() != 0 ||
      boundaries.back() != horizon)
    fail(ErrorKind::validation, "schedule must run from 0 to T");
  for (size_t i = 1; i < boundaries.size(); ++i)
    if (boundaries[i] <= boundaries[i - 1])
      fail(ErrorKind::validation, "schedule must be strictly increasing");
}

BlockSchedule BlockSchedule::unit(int horizon) {
  BlockSchedule s;
  for (int t = 0; t <= horizon; ++t) s.boundaries.push_back(t);
  return s;
}

void ReductionMap::validate(const StageSpaces& spaces) const {
  if (static_cast<long long>(table.size()) != spaces.history_count(stage))
    fail(ErrorKind::incomplete_reduction,
         "theta table size != |H_t| at stage " + std::to_string(stage));
  for (int x : table)
    if (x < 0 || x >= state_space.size)
      fail(ErrorKind::validation, "theta value out of state space");
}

ReductionMap ReductionMap::identity(const StageSpaces& spaces, int stage) {
  long long n = spaces.history_count(stage);
  ReductionMap m;
  m.stage = stage;
  m.state_space = FiniteSpace(static_cast<int>(n));
  m.table.resize(n);
  for (long long i = 0; i < n; ++i) m.table[i] = static_cast<int>(i);
  return m;
}

ReductionMap ReductionMap::last_uncertainty(const StageSpaces& spaces,
                                            int stage) {
  return from_rule(spaces, stage, spaces.uncertainty_size(stage),
                   [](const History& h) { return h.entries.back(); });
}

ReductionMap ReductionMap::running_sum(const StageSpaces& spaces, int stage) {
  int max_sum = 0;
  for (int s = 0; s <= stage; ++s)
    max_sum += spaces.uncertainty_size(s) - 1;
  return from_rule(spaces, stage, max_sum + 1, [](const History& h) {
    int sum = 0;
    for (size_t p = 0; p < h.entries.size(); p += 2) sum += h.entries[p];
    return sum;
  });
}

ReductionMap ReductionMap::from_rule(
    const StageSpaces& spaces, int stage, int state_size,
    const std::function<int(const History&)>& f) {
  ReductionMap m;
  m.stage = stage;
  m.state_space = FiniteSpace(state_size);
  long long n = spaces.history_count(stage);
  m.table.resize(n);
  for (long long i = 0; i < n; ++i) {
    int x = f(spaces.history_at(stage, i));
    if (x < 0 || x >= state_size)
      fail(ErrorKind::validation, "reduction rule value out of state space");
    m.table[i] = x;
  }
  return m;
}

Reduction Reduction::canonical(const StageSpaces& spaces,
                               const BlockSchedule& schedule) {
  Reduction red;
  for (int b : schedule.boundaries)
    red.theta.push_back(ReductionMap::identity(spaces, b));
  for (int i = 0; i < schedule.blocks(); ++i) {
    int a = schedule.boundaries[i];
    int b = schedule.boundaries[i + 1];
    long long segN = spaces.segment_count(a + 1, b);
    long long xN = spaces.history_count(a);
    std::vector<int> f(xN * segN);
    for (long long x = 0; x < xN; ++x)
      for (long long s = 0; s < segN; ++s)
        f[x * segN + s] = static_cast<int>(x * segN + s);
    red.dynamics.push_back(std::move(f));
  }
  return red;
}

Reduction Reduction::from_maps(const StageSpaces& spaces,
                               const BlockSchedule& schedule,
                               std::vector<ReductionMap> theta) {
  if (theta.size() != schedule.boundaries.size())
    fail(ErrorKind::incomplete_reduction,
         "need one theta per schedule boundary");
  Reduction red;
  red.theta = std::move(theta);
  for (int i = 0; i < schedule.blocks(); ++i) {
    int a = schedule.boundaries[i];
    int b = schedule.boundaries[i + 1];
    long long segN = spaces.segment_count(a + 1, b);
    long long xN = red.theta[i].state_space.size;
    std::vector<int> f(xN * segN, -1);
    long long hN = spaces.history_count(a);
    for (long long hi = 0; hi < hN; ++hi) {
      History h = spaces.history_at(a, hi);
      int x = red.theta[i].table[hi];
      for (long long si = 0; si < segN; ++si) {
        HistorySegment seg = spaces.segment_at(a + 1, b, si);
        int xn = red.theta[i + 1].apply(spaces, spaces.concat(h, seg));
        if (f[x * segN + si] < 0) f[x * segN + si] = xn;
        // Disagreements surface in check_state_reduction.
      }
    }
    red.dynamics.push_back(std::move(f));
  }
  return red;
}

std::optional<ReductionCounterexample> check_state_reduction(
    const Reduction& reduction, const BlockSchedule& schedule,
    const ProblemSpec& problem) {
  const auto& spaces = problem.spaces;
  schedule.validate(problem.horizon());
  if (reduction.theta.size() != schedule.boundaries.size() ||
      reduction.dynamics.size() != static_cast<size_t>(schedule.blocks()))
    fail(ErrorKind::incomplete_reduction,
         "reduction must declare theta per boundary and f per block");
  for (size_t i = 0; i < reduction.theta.size(); ++i) {
    if (reduction.theta[i].stage != schedule.boundaries[i])
      fail(ErrorKind::incomplete_reduction,
           "theta stage does not match schedule boundary");
    reduction.theta[i].validate(spaces);
  }

  for (int i = 0; i < schedule.blocks(); ++i) {
    int a = schedule.boundaries[i];
    int b = schedule.boundaries[i + 1];
    long long segN = spaces.segment_count(a + 1, b);
    long long hN = spaces.history_count(a);
    const auto& f = reduction.dynamics[i];
    if (static_cast<long long>(f.size()) !=
        reduction.theta[i].state_space.size * segN)
      fail(ErrorKind::incomplete_reduction,
           "dynamics table size mismatch in block " + std::to_string(i));
    for (long long hi = 0; hi < hN; ++hi) {
      History h = spaces.history_at(a, hi);
      int x = reduction.theta[i].table[hi];
      for (long long si = 0; si < segN; ++si) {
        HistorySegment seg = spaces.segment_at(a + 1, b, si);
        int lhs = reduction.theta[i + 1].apply(spaces, spaces.concat(h, seg));
        int rhs = f[x * segN + si];
        if (lhs != rhs)
          return ReductionCounterexample{
              i, hi, si, -1,
              "theta_{t+1}(h,seg) = " + std::to_string(lhs) +
                  " but f(theta_t(h), seg) = " + std::to_string(rhs)};
      }
    }
  }
  return std::nullopt;
}

DeriveResult derive_reduced_kernels(const Reduction& reduction,
                                    const BlockSchedule& schedule,
                                    const ProblemSpec& problem,
                                    double tolerance) {
  const auto& spaces = problem.spaces;
  schedule.validate(problem.horizon());
  ReducedKernels out;
  out.rows.resize(schedule.blocks());

  for (int i = 0; i < schedule.blocks(); ++i) {
    int a = schedule.boundaries[i];
    int b = schedule.boundaries[i + 1];
    int xN = reduction.theta[i].state_space.size;
    for (int s = a + 1; s <= b; ++s) {
      long long prefixN = spaces.segment_count(a + 1, s - 1);
      std::vector<std::optional<Distribution>> rows(xN * prefixN);
      std::vector<long long> owner(xN * prefixN, -1);
      long long hN = spaces.history_count(s - 1);
      for (long long hi = 0; hi < hN; ++hi) {
        History h = spaces.history_at(s - 1, hi);
        auto [prefix_h, seg] = spaces.split(h, a);
        long long key =
            reduction.theta[i].apply(spaces, prefix_h) * prefixN +
            spaces.segment_index(seg);
        const Distribution& row = problem.kernel(s).row(spaces, h);
        if (!rows[key]) {
          rows[key] = row;
          owner[key] = hi;
        } else if (total_variation(*rows[key], row) > tolerance) {
          return DeriveResult{
              std::nullopt,
              ReductionCounterexample{
                  i, owner[key], spaces.segment_index(seg), hi,
                  "kernel rows differ at in-block stage " +
                      std::to_string(s)}};
        }
      }
      std::vector<Distribution> dense;
      dense.reserve(rows.size());
      for (auto& r : rows)
        dense.push_back(r ? std::move(*r)
                          : Distribution::uniform(spaces.uncertainty_size(s)));
      out.rows[i].push_back(std::move(dense));
    }
  }
  return DeriveResult{std::move(out), std::nullopt};
}

namespace {

// States of X_{t_i} with at least one history mapping to them; unreached
// states carry value +inf by convention.
std::vector<char> reached_states(const ReductionMap& theta) {
  std::vector<char> reached(theta.state_space.size, 0);
  for (int x : theta.table) reached[x] = 1;
  return reached;
}

}  // namespace

std::vector<Cost> apply_reduced_block(
    const ProblemSpec& problem, const Reduction& reduction,
    const BlockSchedule& schedule, int block, const ReducedKernels& kernels,
    std::span<const Cost> phi_tilde, std::vector<std::vector<int>>* policy) {
  const auto& spaces = problem.spaces;
  int a = schedule.boundaries[block];
  int b = schedule.boundaries[block + 1];
  int L = b - a;
  int xN = reduction.theta[block].state_space.size;
  if (static_cast<int>(phi_tilde.size()) !=
      reduction.theta[block + 1].state_space.size)
    fail(ErrorKind::instance_mismatch,
         "phi_tilde size != |X| at the block's right boundary");
  auto reached = reached_states(reduction.theta[block]);
  long long segN = spaces.segment_count(a + 1, b);
  const auto& f = reduction.dynamics[block];

  // G at depth L: terminal over (x, full segment).
  std::vector<Cost> g(static_cast<size_t>(xN) * segN);
  for (int x = 0; x < xN; ++x)
    for (long long si = 0; si < segN; ++si) {
      int xn = f[x * segN + si];
      g[x * segN + si] =
          (reached[x] && xn >= 0) ? phi_tilde[xn] : Cost::inf();
    }

  if (policy) policy->assign(L, {});
  for (int k = L - 1; k >= 0; --k) {
    int s = a + k;  // control stage inside the block
    int nu = spaces.control_size(s);
    int nw = spaces.uncertainty_size(s + 1);
    long long pN = spaces.segment_count(a + 1, s);
    const auto& rows = kernels.rows[block][k];  // stage s+1, prefix length k
    std::vector<Cost> next(static_cast<size_t>(xN) * pN);
    if (policy) (*policy)[k].assign(static_cast<size_t>(xN) * pN, 0);
    for (int x = 0; x < xN; ++x) {
      for (long long p = 0; p < pN; ++p) {
        long long key = x * pN + p;
        if (!reached[x]) {
          next[key] = Cost::inf();
          continue;
        }
        const Distribution& row = rows[key];
        Cost best = Cost::inf();
        int best_u = 0;
        for (int u = 0; u < nu; ++u) {
          Cost acc(0.0);
          for (int w = 0; w < nw; ++w) {
            long long child = x * (pN * nu * nw) + (p * nu + u) * nw + w;
            acc += g[child].scaled(row[w]);
          }
          if (u == 0 || acc < best) {
            best = acc;
            best_u = u;
          }
        }
        next[key] = best;
        if (policy) (*policy)[k][key] = best_u;
      }
    }
    g = std::move(next);
  }
  return g;  // size xN
}

ReducedSolve solve_reduced_dp(const ProblemSpec& problem,
                              const BlockSchedule& schedule,
                              const Reduction& reduction,
                              std::span<const Cost> reduced_criterion,
                              bool check_factorization) {
  const auto& spaces = problem.spaces;
  if (auto ce = check_state_reduction(reduction, schedule, problem))
    fail(ErrorKind::validation,
         "not a state reduction (block " + std::to_string(ce->block) + "): " +
             ce->detail);
  auto derived = derive_reduced_kernels(reduction, schedule, problem);
  if (!derived.ok())
    fail(ErrorKind::validation,
         "incompatible kernels: " + derived.counterexample->detail);

  int T = problem.horizon();
  const ReductionMap& theta_T = reduction.theta.back();
  if (static_cast<int>(reduced_criterion.size()) != theta_T.state_space.size)
    fail(ErrorKind::instance_mismatch, "reduced criterion size != |X_T|");
  if (check_factorization) {
    long long hN = spaces.history_count(T);
    std::vector<long long> witness(theta_T.state_space.size, -1);
    for (long long hi = 0; hi < hN; ++hi) {
      Cost j = problem.criterion_value(spaces.history_at(T, hi));
      int x = theta_T.table[hi];
      if (cost_gap(j, reduced_criterion[x]) > 1e-9) {
        std::string other =
            witness[x] >= 0 ? " (also reached by history " +
                                  std::to_string(witness[x]) + ")"
                            : "";
        fail(ErrorKind::factorization,
             "criterion does not factor through theta_T at history " +
                 std::to_string(hi) + other);
      }
      witness[x] = hi;
    }
  }

  ReducedSolve out;
  int N = schedule.blocks();
  out.boundary_values.resize(N + 1);
  out.policy.controls.resize(N);
  ValueFunction vT;
  vT.stage = T;
  vT.domain = ValueFunction::Domain::reduced_state;
  vT.values.assign(reduced_criterion.begin(), reduced_criterion.end());
  out.boundary_values[N] = std::move(vT);
  for (int i = N - 1; i >= 0; --i) {
    std::vector<Cost> v = apply_reduced_block(
        problem, reduction, schedule, i, *derived.kernels,
        out.boundary_values[i + 1].values, &out.policy.controls[i]);
    ValueFunction vf;
    vf.stage = schedule.boundaries[i];
    vf.domain = ValueFunction::Domain::reduced_state;
    vf.values = std::move(v);
    if (!out.policy.controls[i].empty())
      vf.argmin = out.policy.controls[i][0];  // first in-block stage, pN == 1
    out.boundary_values[i] = std::move(vf);
  }
  return out;
}

Reduction UnitReduction::as_reduction(const StageSpaces& spaces) const {
  Reduction red;
  red.theta = theta;
  // Unit-block segments (u_t, w_{t+1}) index exactly as (x, u, w) tables.
  red.dynamics = dynamics;
  (void)spaces;
  return red;
}

ReducedSolve solve_unit_block_dp(const ProblemSpec& problem,
                                 const UnitReduction& reduction,
                                 std::span<const Cost> reduced_criterion,
                                 bool check_factorization) {
  BlockSchedule schedule = BlockSchedule::unit(problem.horizon());
  return solve_reduced_dp(problem, schedule,
                          reduction.as_reduction(problem.spaces),
                          reduced_criterion, check_factorization);
}

ReducedSolve solve_additive_dp(const ProblemSpec& problem,
                               const UnitReduction& reduction) {
  if (problem.criterion.rep != Criterion::Rep::additive)
    fail(ErrorKind::representation,
         "solve_additive_dp requires an additive criterion");
  const auto& spaces = problem.spaces;
  int T = problem.horizon();
  BlockSchedule schedule = BlockSchedule::unit(T);
  Reduction red = reduction.as_reduction(spaces);
  if (auto ce = check_state_reduction(red, schedule, problem))
    fail(ErrorKind::validation, "not a state reduction: " + ce->detail);
  auto derived = derive_reduced_kernels(red, schedule, problem);
  if (!derived.ok())
    fail(ErrorKind::validation,
         "incompatible kernels: " + derived.counterexample->detail);

  ReducedSolve out;
  out.boundary_values.resize(T + 1);
  out.policy.controls.resize(T);
  ValueFunction vT;
  vT.stage = T;
  vT.domain = ValueFunction::Domain::reduced_state;
  vT.values = problem.criterion.final_cost;
  out.boundary_values[T] = std::move(vT);

  for (int t = T - 1; t >= 0; --t) {
    int xN = reduction.theta[t].state_space.size;
    int nu = spaces.control_size(t);
    int nw = spaces.uncertainty_size(t + 1);
    auto reached = reached_states(reduction.theta[t]);
    const auto& rows = derived.kernels->rows[t][0];
    const auto& f = reduction.dynamics[t];
    ValueFunction vf;
    vf.stage = t;
    vf.domain = ValueFunction::Domain::reduced_state;
    vf.values.resize(xN);
    vf.argmin.resize(xN);
    for (int x = 0; x < xN; ++x) {
      if (!reached[x]) {
        vf.values[x] = Cost::inf();
        vf.argmin[x] = 0;
        continue;
      }
      const Distribution& row = rows[x];
      Cost best = Cost::inf();
      int best_u = 0;
      for (int u = 0; u < nu; ++u) {
        Cost acc(0.0);
        for (int w = 0; w < nw; ++w) {
          Cost inner = problem.stage_cost(t, x, u, w) +
                       out.boundary_values[t + 1].values.at(
                           f[(static_cast<long long>(x) * nu + u) * nw + w]);
          acc += inner.scaled(row[w]);
        }
        if (u == 0 || acc < best) {
          best = acc;
          best_u = u;
        }
      }
      vf.values[x] = best;
      vf.argmin[x] = best_u;
    }
    out.policy.controls[t] = {vf.argmin};
    out.boundary_values[t] = std::move(vf);
  }
  return out;
}

}  // namespace tbdp
