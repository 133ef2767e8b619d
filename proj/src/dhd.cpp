#include "tbdp/dhd.hpp"

#include <algorithm>

namespace tbdp {

void DhdProblem::validate() const {
  if (horizon < 1) fail(ErrorKind::validation, "horizon must be >= 1");
  size_t S = static_cast<size_t>(horizon);
  if (head_controls.size() != S || uncertainties.size() != S ||
      tail_controls.size() != S || kernels.size() != S)
    fail(ErrorKind::validation,
         "need one head control, uncertainty, tail control and kernel space "
         "per step");
  for (int s = 1; s <= horizon; ++s) {
    const DhdKernel& k = kernels[s - 1];
    size_t expected = k.white ? 1 : static_cast<size_t>(head_count(s - 1));
    if (k.rows.size() != expected)
      fail(ErrorKind::validation,
           "kernel row count mismatch at stage " + std::to_string(s));
    for (const Distribution& row : k.rows)
      if (row.size() != uncertainties[s - 1].size)
        fail(ErrorKind::validation,
             "kernel row width mismatch at stage " + std::to_string(s));
  }
  switch (criterion.rep) {
    case DhdCriterion::Rep::full_table:
      if (static_cast<long long>(criterion.full.size()) != head_count(horizon))
        fail(ErrorKind::validation, "criterion table size mismatch");
      break;
    case DhdCriterion::Rep::additive: {
      if (criterion.theta.size() != S + 1 ||
          criterion.state_sizes.size() != S + 1 ||
          criterion.stage_costs.size() != S ||
          static_cast<int>(criterion.final_cost.size()) !=
              criterion.state_sizes[S])
        fail(ErrorKind::validation, "additive criterion tables mismatch");
      for (int s = 0; s <= horizon; ++s)
        if (static_cast<long long>(criterion.theta[s].size()) != head_count(s))
          fail(ErrorKind::validation,
               "criterion state map size mismatch at stage " +
                   std::to_string(s));
      for (int s = 0; s < horizon; ++s) {
        long long n = static_cast<long long>(criterion.state_sizes[s]) *
                      head_controls[s].size * uncertainties[s].size *
                      tail_controls[s].size;
        if (static_cast<long long>(criterion.stage_costs[s].size()) != n)
          fail(ErrorKind::validation,
               "stage cost table size mismatch at stage " + std::to_string(s));
      }
      break;
    }
  }
}

long long DhdProblem::head_count(int s) const {
  long long n = head_uncertainty.size;
  for (int k = 0; k < s; ++k)
    n *= static_cast<long long>(head_controls[k].size) *
         uncertainties[k].size * tail_controls[k].size;
  return n;
}

std::vector<int> DhdProblem::head_entries(int s, long long index) const {
  std::vector<int> radices{head_uncertainty.size};
  for (int k = 0; k < s; ++k) {
    radices.push_back(head_controls[k].size);
    radices.push_back(uncertainties[k].size);
    radices.push_back(tail_controls[k].size);
  }
  std::vector<int> entries(radices.size());
  for (int p = static_cast<int>(radices.size()) - 1; p >= 0; --p) {
    entries[p] = static_cast<int>(index % radices[p]);
    index /= radices[p];
  }
  return entries;
}

long long DhdProblem::step_index(int s, long long h, int u_head, int w,
                                 int u_tail) const {
  return ((h * head_controls[s].size + u_head) * uncertainties[s].size + w) *
             tail_controls[s].size +
         u_tail;
}

const Distribution& DhdProblem::kernel_row(int s, long long h_prev) const {
  const DhdKernel& k = kernels[s - 1];
  return k.white ? k.rows[0] : k.rows.at(h_prev);
}

Cost DhdProblem::criterion_value(long long terminal_index) const {
  if (criterion.rep == DhdCriterion::Rep::full_table)
    return criterion.full.at(terminal_index);
  std::vector<int> entries = head_entries(horizon, terminal_index);
  Cost total(0.0);
  long long prefix = entries[0];
  for (int s = 0; s < horizon; ++s) {
    int uh = entries[1 + 3 * s];
    int w = entries[2 + 3 * s];
    int ut = entries[3 + 3 * s];
    long long x = criterion.theta[s][prefix];
    long long cell =
        ((x * head_controls[s].size + uh) * uncertainties[s].size + w) *
            tail_controls[s].size +
        ut;
    total += criterion.stage_costs[s][cell];
    prefix = step_index(s, prefix, uh, w, ut);
  }
  total += criterion.final_cost[criterion.theta[horizon][prefix]];
  return total;
}

namespace {

// Shared head/tail backward step; stage_cost may be null (Mayer form).
DhdValueFunction backward_step(
    int s, std::span<const Cost> phi, const DhdProblem& problem,
    const std::function<Cost(long long h, int uh, int w, int ut)>* stage_cost) {
  if (s < 0 || s >= problem.horizon)
    fail(ErrorKind::instance_mismatch, "stage out of range");
  long long hN = problem.head_count(s);
  int nuh = problem.head_controls[s].size;
  int nw = problem.uncertainties[s].size;
  int nut = problem.tail_controls[s].size;
  if (static_cast<long long>(phi.size()) != problem.head_count(s + 1))
    fail(ErrorKind::instance_mismatch,
         "value table size mismatch at stage " + std::to_string(s + 1));

  DhdValueFunction out;
  out.stage = s;
  out.values.resize(hN);
  out.head_argmin.resize(hN);
  out.tail_argmin.assign(hN * nuh * nw, 0);
  for (long long h = 0; h < hN; ++h) {
    const Distribution& row = problem.kernel_row(s + 1, h);
    Cost best = Cost::inf();
    int best_uh = 0;
    for (int uh = 0; uh < nuh; ++uh) {
      Cost acc(0.0);
      for (int w = 0; w < nw; ++w) {
        Cost inner = Cost::inf();
        int inner_ut = 0;
        for (int ut = 0; ut < nut; ++ut) {
          Cost c = phi[problem.step_index(s, h, uh, w, ut)];
          if (stage_cost) c += (*stage_cost)(h, uh, w, ut);
          if (ut == 0 || c < inner) {
            inner = c;
            inner_ut = ut;
          }
        }
        out.tail_argmin[(h * nuh + uh) * nw + w] = inner_ut;
        acc += inner.scaled(row[w]);
      }
      if (uh == 0 || acc < best) {
        best = acc;
        best_uh = uh;
      }
    }
    out.values[h] = best;
    out.head_argmin[h] = best_uh;
  }
  return out;
}

}  // namespace

DhdValueFunction dhd_bellman_apply(int s, std::span<const Cost> phi,
                                   const DhdProblem& problem) {
  return backward_step(s, phi, problem, nullptr);
}

std::vector<DhdValueFunction> solve_dhd_history(const DhdProblem& problem) {
  problem.validate();
  int S = problem.horizon;
  std::vector<DhdValueFunction> out(S + 1);
  out[S].stage = S;
  long long terminalN = problem.head_count(S);
  out[S].values.resize(terminalN);
  bool additive = problem.criterion.rep == DhdCriterion::Rep::additive;
  for (long long h = 0; h < terminalN; ++h)
    out[S].values[h] = additive
                           ? problem.criterion.final_cost
                                 [problem.criterion.theta[S][h]]
                           : problem.criterion.full[h];
  for (int s = S - 1; s >= 0; --s) {
    if (additive) {
      std::function<Cost(long long, int, int, int)> cost =
          [&](long long h, int uh, int w, int ut) {
            long long x = problem.criterion.theta[s][h];
            long long cell = ((x * problem.head_controls[s].size + uh) *
                                  problem.uncertainties[s].size +
                              w) *
                                 problem.tail_controls[s].size +
                             ut;
            return problem.criterion.stage_costs[s][cell];
          };
      out[s] = backward_step(s, out[s + 1].values, problem, &cost);
    } else {
      out[s] = dhd_bellman_apply(s, out[s + 1].values, problem);
    }
  }
  return out;
}

DhdReduction DhdReduction::identity(const DhdProblem& problem) {
  DhdReduction red;
  for (int s = 0; s <= problem.horizon; ++s) {
    DhdReductionMap m;
    m.stage = s;
    long long n = problem.head_count(s);
    m.state_space = FiniteSpace(static_cast<int>(n));
    m.table.resize(n);
    for (long long i = 0; i < n; ++i) m.table[i] = static_cast<int>(i);
    red.theta.push_back(std::move(m));
  }
  for (int s = 0; s < problem.horizon; ++s) {
    long long n = problem.head_count(s + 1);
    std::vector<int> f(n);
    for (long long i = 0; i < n; ++i) f[i] = static_cast<int>(i);
    red.dynamics.push_back(std::move(f));
  }
  return red;
}

std::optional<ReductionCounterexample> check_dhd_reduction(
    const DhdProblem& problem, const DhdReduction& reduction) {
  int S = problem.horizon;
  if (reduction.theta.size() != static_cast<size_t>(S + 1) ||
      reduction.dynamics.size() != static_cast<size_t>(S))
    fail(ErrorKind::incomplete_reduction,
         "reduction must declare theta per stage and f per step");
  for (int s = 0; s <= S; ++s) {
    if (reduction.theta[s].stage != s)
      fail(ErrorKind::incomplete_reduction, "theta stage mismatch");
    if (static_cast<long long>(reduction.theta[s].table.size()) !=
        problem.head_count(s))
      fail(ErrorKind::incomplete_reduction,
           "theta table size mismatch at stage " + std::to_string(s));
  }
  for (int s = 0; s < S; ++s) {
    int nuh = problem.head_controls[s].size;
    int nw = problem.uncertainties[s].size;
    int nut = problem.tail_controls[s].size;
    long long stepN = static_cast<long long>(nuh) * nw * nut;
    if (static_cast<long long>(reduction.dynamics[s].size()) !=
        reduction.theta[s].state_space.size * stepN)
      fail(ErrorKind::incomplete_reduction,
           "dynamics table size mismatch at stage " + std::to_string(s));
    long long hN = problem.head_count(s);
    for (long long h = 0; h < hN; ++h) {
      int x = reduction.theta[s].table[h];
      for (int uh = 0; uh < nuh; ++uh)
        for (int w = 0; w < nw; ++w)
          for (int ut = 0; ut < nut; ++ut) {
            long long step = (static_cast<long long>(uh) * nw + w) * nut + ut;
            int lhs =
                reduction.theta[s + 1]
                    .table[problem.step_index(s, h, uh, w, ut)];
            int rhs = reduction.dynamics[s][x * stepN + step];
            if (lhs != rhs)
              return ReductionCounterexample{
                  s, h, step, -1,
                  "theta_{s+1}(h,step) = " + std::to_string(lhs) +
                      " but f(theta_s(h), step) = " + std::to_string(rhs)};
          }
    }
  }
  return std::nullopt;
}

DhdDeriveResult derive_dhd_kernels(const DhdProblem& problem,
                                   const DhdReduction& reduction,
                                   double tolerance) {
  int S = problem.horizon;
  std::vector<std::vector<Distribution>> rows;
  for (int s = 1; s <= S; ++s) {
    int xN = reduction.theta[s - 1].state_space.size;
    std::vector<std::optional<Distribution>> group(xN);
    std::vector<long long> owner(xN, -1);
    long long hN = problem.head_count(s - 1);
    for (long long h = 0; h < hN; ++h) {
      int x = reduction.theta[s - 1].table[h];
      const Distribution& row = problem.kernel_row(s, h);
      if (!group[x]) {
        group[x] = row;
        owner[x] = h;
      } else if (total_variation(*group[x], row) > tolerance) {
        return DhdDeriveResult{
            std::nullopt,
            ReductionCounterexample{s - 1, owner[x], -1, h,
                                    "kernel rows differ at stage " +
                                        std::to_string(s)}};
      }
    }
    std::vector<Distribution> dense;
    dense.reserve(group.size());
    for (auto& g : group)
      dense.push_back(g ? std::move(*g)
                        : Distribution::uniform(
                              problem.uncertainties[s - 1].size));
    rows.push_back(std::move(dense));
  }
  return DhdDeriveResult{std::move(rows), std::nullopt};
}

std::vector<DhdValueFunction> solve_dhd(const DhdProblem& problem,
                                        const DhdReduction& reduction,
                                        std::span<const Cost> reduced_criterion,
                                        bool check_factorization) {
  problem.validate();
  if (auto ce = check_dhd_reduction(problem, reduction))
    fail(ErrorKind::validation,
         "not a state reduction (stage " + std::to_string(ce->block) +
             "): " + ce->detail);
  auto derived = derive_dhd_kernels(problem, reduction);
  if (!derived.ok())
    fail(ErrorKind::validation,
         "incompatible kernels: " + derived.counterexample->detail);

  int S = problem.horizon;
  bool additive = problem.criterion.rep == DhdCriterion::Rep::additive;
  std::span<const Cost> terminal = reduced_criterion;
  if (additive) {
    for (int s = 0; s <= S; ++s)
      if (problem.criterion.theta[s] != reduction.theta[s].table ||
          problem.criterion.state_sizes[s] !=
              reduction.theta[s].state_space.size)
        fail(ErrorKind::representation,
             "additive criterion state maps must match the reduction");
    terminal = problem.criterion.final_cost;
  } else {
    if (static_cast<int>(reduced_criterion.size()) !=
        reduction.theta[S].state_space.size)
      fail(ErrorKind::instance_mismatch, "reduced criterion size != |X_S|");
    if (check_factorization) {
      long long hN = problem.head_count(S);
      for (long long h = 0; h < hN; ++h)
        if (cost_gap(problem.criterion.full[h],
                     reduced_criterion[reduction.theta[S].table[h]]) > 1e-9)
          fail(ErrorKind::factorization,
               "criterion does not factor through theta_S at history " +
                   std::to_string(h));
    }
  }

  std::vector<DhdValueFunction> out(S + 1);
  out[S].stage = S;
  out[S].values.assign(terminal.begin(), terminal.end());
  for (int s = S - 1; s >= 0; --s) {
    int xN = reduction.theta[s].state_space.size;
    int nuh = problem.head_controls[s].size;
    int nw = problem.uncertainties[s].size;
    int nut = problem.tail_controls[s].size;
    std::vector<char> reached(xN, 0);
    for (int x : reduction.theta[s].table) reached[x] = 1;
    const auto& f = reduction.dynamics[s];
    long long stepN = static_cast<long long>(nuh) * nw * nut;
    DhdValueFunction vf;
    vf.stage = s;
    vf.values.resize(xN);
    vf.head_argmin.assign(xN, 0);
    vf.tail_argmin.assign(static_cast<long long>(xN) * nuh * nw, 0);
    for (int x = 0; x < xN; ++x) {
      if (!reached[x]) {
        vf.values[x] = Cost::inf();
        continue;
      }
      const Distribution& row = (*derived.rows)[s][x];
      Cost best = Cost::inf();
      int best_uh = 0;
      for (int uh = 0; uh < nuh; ++uh) {
        Cost acc(0.0);
        for (int w = 0; w < nw; ++w) {
          Cost inner = Cost::inf();
          int inner_ut = 0;
          for (int ut = 0; ut < nut; ++ut) {
            long long step = (static_cast<long long>(uh) * nw + w) * nut + ut;
            Cost c = out[s + 1].values[f[x * stepN + step]];
            if (additive)
              c += problem.criterion.stage_costs[s][x * stepN + step];
            if (ut == 0 || c < inner) {
              inner = c;
              inner_ut = ut;
            }
          }
          vf.tail_argmin[(static_cast<long long>(x) * nuh + uh) * nw + w] =
              inner_ut;
          acc += inner.scaled(row[w]);
        }
        if (uh == 0 || acc < best) {
          best = acc;
          best_uh = uh;
        }
      }
      vf.values[x] = best;
      vf.head_argmin[x] = best_uh;
    }
    out[s] = std::move(vf);
  }
  return out;
}

TwoScaleProblem embed_dhd(const DhdProblem& problem) {
  problem.validate();
  int S = problem.horizon;
  StageSpaces spaces;
  spaces.uncertainties.push_back(problem.head_uncertainty);
  for (int d = 0; d < S; ++d) {
    spaces.controls.push_back(problem.head_controls[d]);
    spaces.uncertainties.push_back(problem.uncertainties[d]);
    spaces.controls.push_back(problem.tail_controls[d]);
    // Spurious uncertainty at the next day boundary: a singleton, so flat
    // histories at day boundaries index identically to head histories.
    spaces.uncertainties.push_back(FiniteSpace(1));
  }

  std::vector<StochasticKernel> kernels;
  for (int d = 0; d < S; ++d) {
    const DhdKernel& k = problem.kernels[d];
    if (k.white) {
      kernels.push_back(StochasticKernel::white(2 * d + 1, k.rows[0]));
    } else {
      kernels.push_back(StochasticKernel::full(2 * d + 1, k.rows));
    }
    kernels.push_back(
        StochasticKernel::white(2 * d + 2, Distribution::dirac(1, 0)));
  }

  long long terminalN = problem.head_count(S);
  std::vector<Cost> table(terminalN, Cost(0.0));
  for (long long i = 0; i < terminalN; ++i)
    table[i] = problem.criterion_value(i);

  ProblemSpec flat{std::move(spaces), std::move(kernels),
                   Criterion::from_table(std::move(table))};
  return make_two_scale_problem(TwoScaleClock{S - 1, 1}, std::move(flat));
}

namespace {

void validate_dam_params(const DamParams& p) {
  if (p.x_max < 0) fail(ErrorKind::grid, "x_max must be >= 0");
  if (p.inflows.empty()) fail(ErrorKind::grid, "need at least one period");
  size_t S = p.inflows.size();
  if (p.turbine_grid.empty()) fail(ErrorKind::grid, "empty turbine grid");
  for (int q : p.turbine_grid)
    if (q < 0 || q > p.x_max)
      fail(ErrorKind::grid, "turbine volume off the stock grid");
  if (p.period_cost.size() != S)
    fail(ErrorKind::grid, "need one cost row per period");
  for (const auto& row : p.period_cost)
    if (row.size() != p.turbine_grid.size())
      fail(ErrorKind::grid, "cost row width != turbine grid size");
  if (static_cast<int>(p.final_cost.size()) != p.x_max + 1)
    fail(ErrorKind::grid, "final cost must cover the stock grid");
}

int clamp_stock(int v, int x_max) { return std::clamp(v, 0, x_max); }

}  // namespace

DamFlat build_dam_flat(const DamParams& params) {
  validate_dam_params(params);
  int S = static_cast<int>(params.inflows.size());
  int nx = params.x_max + 1;
  int nq = static_cast<int>(params.turbine_grid.size());

  StageSpaces spaces;
  spaces.uncertainties.push_back(FiniteSpace(nx));  // initial stock
  for (int s = 0; s < S; ++s) {
    spaces.controls.push_back(FiniteSpace(nq));
    spaces.uncertainties.push_back(FiniteSpace(params.inflows[s].size()));
  }

  std::vector<StochasticKernel> kernels;
  for (int s = 0; s < S; ++s)
    kernels.push_back(StochasticKernel::white(s + 1, params.inflows[s]));

  // Stock recursion x' = min{x_max, x - q + a}, with q > x infeasible
  // (charged +infinity below; the trajectory is clamped to stay on grid).
  auto next_stock = [&](int x, int u, int a) {
    int q = params.turbine_grid[u];
    return clamp_stock(std::min(params.x_max, x - q + a), params.x_max);
  };

  UnitReduction reduction;
  for (int s = 0; s <= S; ++s)
    reduction.theta.push_back(ReductionMap::from_rule(
        spaces, s, nx, [&](const History& h) {
          int x = h.entries[0];
          for (int k = 0; 2 * k + 2 < static_cast<int>(h.entries.size()); ++k)
            x = next_stock(x, h.entries[2 * k + 1], h.entries[2 * k + 2]);
          return x;
        }));
  Criterion criterion;
  criterion.rep = Criterion::Rep::additive;
  for (int s = 0; s < S; ++s) {
    int na = params.inflows[s].size();
    std::vector<int> f(static_cast<size_t>(nx) * nq * na);
    std::vector<Cost> cost(f.size(), Cost(0.0));
    for (int x = 0; x < nx; ++x)
      for (int u = 0; u < nq; ++u)
        for (int a = 0; a < na; ++a) {
          long long cell = (static_cast<long long>(x) * nq + u) * na + a;
          f[cell] = next_stock(x, u, a);
          cost[cell] = params.turbine_grid[u] > x
                           ? Cost::inf()
                           : Cost(params.period_cost[s][u]);
        }
    reduction.dynamics.push_back(std::move(f));
    criterion.stage_costs.push_back(std::move(cost));
  }
  for (int s = 0; s <= S; ++s) {
    criterion.theta.push_back(reduction.theta[s].table);
    criterion.state_sizes.push_back(nx);
  }
  for (double k : params.final_cost) criterion.final_cost.push_back(Cost(k));

  DamFlat out;
  out.problem =
      ProblemSpec{std::move(spaces), std::move(kernels), std::move(criterion)};
  out.reduction = std::move(reduction);
  return out;
}

DamDhd build_dam_dhd(const DamParams& params) {
  validate_dam_params(params);
  int S = static_cast<int>(params.inflows.size());
  int nx = params.x_max + 1;
  int nq = static_cast<int>(params.turbine_grid.size());

  DhdProblem problem;
  problem.horizon = S;
  problem.head_uncertainty = FiniteSpace(nx);
  for (int s = 0; s < S; ++s) {
    int na = params.inflows[s].size();
    problem.head_controls.push_back(FiniteSpace(nq));
    problem.uncertainties.push_back(FiniteSpace(na));
    // Spill r in {0..a_max}: enough to drain any overflow, since
    // x - q + a <= x_max + a_max whenever q is feasible.
    problem.tail_controls.push_back(FiniteSpace(na));
    problem.kernels.push_back(DhdKernel{true, {params.inflows[s]}});
  }

  // Stock recursion x' = x - q + a - r, feasible iff q <= x and x' on grid;
  // the trajectory is clamped so theta stays on grid.
  auto feasible = [&](int x, int u, int a, int r) {
    int q = params.turbine_grid[u];
    int xn = x - q + a - r;
    return q <= x && xn >= 0 && xn <= params.x_max;
  };
  auto next_stock = [&](int x, int u, int a, int r) {
    int q = params.turbine_grid[u];
    return clamp_stock(x - q + a - r, params.x_max);
  };

  DhdReduction reduction;
  for (int s = 0; s <= S; ++s) {
    DhdReductionMap m;
    m.stage = s;
    m.state_space = FiniteSpace(nx);
    long long n = problem.head_count(s);
    m.table.resize(n);
    for (long long i = 0; i < n; ++i) {
      std::vector<int> e = problem.head_entries(s, i);
      int x = e[0];
      for (int k = 0; k < s; ++k)
        x = next_stock(x, e[1 + 3 * k], e[2 + 3 * k], e[3 + 3 * k]);
      m.table[i] = x;
    }
    reduction.theta.push_back(std::move(m));
  }

  DhdCriterion criterion;
  criterion.rep = DhdCriterion::Rep::additive;
  for (int s = 0; s < S; ++s) {
    int na = params.inflows[s].size();
    long long stepN = static_cast<long long>(nq) * na * na;
    std::vector<int> f(nx * stepN);
    std::vector<Cost> cost(f.size(), Cost(0.0));
    for (int x = 0; x < nx; ++x)
      for (int u = 0; u < nq; ++u)
        for (int a = 0; a < na; ++a)
          for (int r = 0; r < na; ++r) {
            long long cell =
                x * stepN + (static_cast<long long>(u) * na + a) * na + r;
            f[cell] = next_stock(x, u, a, r);
            cost[cell] = feasible(x, u, a, r)
                             ? Cost(params.period_cost[s][u])
                             : Cost::inf();
          }
    reduction.dynamics.push_back(std::move(f));
    criterion.stage_costs.push_back(std::move(cost));
  }
  for (int s = 0; s <= S; ++s) {
    criterion.theta.push_back(reduction.theta[s].table);
    criterion.state_sizes.push_back(nx);
  }
  for (double k : params.final_cost) criterion.final_cost.push_back(Cost(k));
  problem.criterion = std::move(criterion);

  DamDhd out;
  out.reduced_criterion = problem.criterion.final_cost;
  out.problem = std::move(problem);
  out.reduction = std::move(reduction);
  return out;
}

}  // namespace tbdp
