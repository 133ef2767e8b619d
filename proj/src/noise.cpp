#include "tbdp/noise.hpp"

#include <cmath>
#include <functional>

namespace tbdp {

namespace {

constexpr long long kJointPathCap = 100'000;

long long product_of_sizes(const std::vector<FiniteSpace>& spaces, int from,
                           int to) {
  long long n = 1;
  for (int k = from; k <= to; ++k) n *= spaces[k].size;
  return n;
}

// Mixed-radix index of the uncertainty entries of h at stages [from, to].
long long uncertainty_prefix_index(const std::vector<FiniteSpace>& spaces,
                                   const History& h, int from, int to) {
  long long idx = 0;
  for (int k = from; k <= to; ++k) idx = idx * spaces[k].size + h.entries[2 * k];
  return idx;
}

// Conditional rows of a joint table: coords has one size per coordinate,
// table is path-lex over them. Returns, for coordinate k, one row per
// prefix of coordinates < k. Zero-probability prefixes get a uniform row.
std::vector<std::vector<Distribution>> conditionals_of_joint(
    const std::vector<int>& coords, const std::vector<double>& table,
    bool* zero_flag) {
  int n = static_cast<int>(coords.size());
  std::vector<std::vector<Distribution>> out(n);
  long long total = 1;
  for (int c : coords) total *= c;
  for (int k = 0; k < n; ++k) {
    long long prefixN = 1;
    for (int j = 0; j < k; ++j) prefixN *= coords[j];
    long long suffixN = total / (prefixN * coords[k]);
    std::vector<std::vector<double>> mass(
        prefixN, std::vector<double>(coords[k], 0.0));
    for (long long path = 0; path < total; ++path) {
      long long rest = path / suffixN;
      long long w = rest % coords[k];
      long long prefix = rest / coords[k];
      mass[prefix][w] += table[path];
    }
    for (long long p = 0; p < prefixN; ++p) {
      double sum = 0;
      for (double m : mass[p]) sum += m;
      if (sum <= 0.0) {
        if (zero_flag) *zero_flag = true;
        out[k].push_back(Distribution::uniform(coords[k]));
      } else {
        for (double& m : mass[p]) m /= sum;
        out[k].push_back(Distribution(std::move(mass[p])));
      }
    }
  }
  return out;
}

void check_table_is_distribution(const std::vector<double>& table,
                                 const std::string& what) {
  double sum = 0;
  for (double p : table) {
    if (!(p >= 0.0))
      fail(ErrorKind::validation, what + " has a negative entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > Distribution::kNormTolerance)
    fail(ErrorKind::validation,
         what + " sums to " + std::to_string(sum) +
             ", outside tolerance 1e-12");
}

}  // namespace

long long NoiseProcessSpec::path_count() const {
  return product_of_sizes(spaces, 0, static_cast<int>(spaces.size()) - 1);
}

void NoiseProcessSpec::validate() const {
  if (spaces.size() < 2)
    fail(ErrorKind::validation, "noise process needs stages 0..T with T >= 1");
  switch (rep) {
    case Rep::joint_table:
      if (path_count() > kJointPathCap)
        fail(ErrorKind::capacity, "joint table exceeds the path-count cap");
      if (static_cast<long long>(joint.size()) != path_count())
        fail(ErrorKind::validation, "joint table size != number of paths");
      check_table_is_distribution(joint, "joint table");
      break;
    case Rep::white_noise:
      if (marginals.size() != spaces.size())
        fail(ErrorKind::validation, "need one marginal per stage");
      for (size_t s = 0; s < spaces.size(); ++s)
        if (marginals[s].size() != spaces[s].size)
          fail(ErrorKind::validation,
               "marginal width mismatch at stage " + std::to_string(s));
      break;
    case Rep::day_independent: {
      clock.validate();
      if (static_cast<int>(spaces.size()) != clock.flat_horizon() + 1)
        fail(ErrorKind::validation, "noise stages must match the clock span");
      if (static_cast<int>(day_joint.size()) != clock.days + 1)
        fail(ErrorKind::validation, "need one joint block per day");
      for (int d = 0; d <= clock.days; ++d) {
        long long n = product_of_sizes(spaces, clock.lex_index(d, 0) + 1,
                                       clock.lex_index(d + 1, 0));
        if (static_cast<long long>(day_joint[d].size()) != n)
          fail(ErrorKind::validation,
               "day " + std::to_string(d) + " block size mismatch");
        check_table_is_distribution(day_joint[d],
                                    "day " + std::to_string(d) + " block");
      }
      break;
    }
  }
}

NoiseKernels kernels_from_noise_process(const NoiseProcessSpec& spec) {
  spec.validate();
  NoiseKernels out;
  int T = static_cast<int>(spec.spaces.size()) - 1;
  switch (spec.rep) {
    case NoiseProcessSpec::Rep::white_noise:
      for (int s = 1; s <= T; ++s)
        out.kernels.push_back(StochasticKernel::white(s, spec.marginals[s]));
      break;
    case NoiseProcessSpec::Rep::joint_table: {
      std::vector<int> coords;
      for (const FiniteSpace& sp : spec.spaces) coords.push_back(sp.size);
      auto cond = conditionals_of_joint(coords, spec.joint,
                                        &out.zero_probability_rows);
      std::vector<FiniteSpace> spaces = spec.spaces;
      for (int s = 1; s <= T; ++s) {
        int stage = s;
        out.kernels.push_back(StochasticKernel::via_map(
            s,
            [spaces, stage](const StageSpaces&, const History& h) {
              return uncertainty_prefix_index(spaces, h, 0, stage - 1);
            },
            cond[s]));
      }
      break;
    }
    case NoiseProcessSpec::Rep::day_independent: {
      std::vector<FiniteSpace> spaces = spec.spaces;
      int M = spec.clock.minutes;
      for (int d = 0; d <= spec.clock.days; ++d) {
        int first = spec.clock.lex_index(d, 0) + 1;  // flat stage of coord 0
        std::vector<int> coords;
        for (int k = 0; k <= M; ++k) coords.push_back(spaces[first + k].size);
        auto cond = conditionals_of_joint(coords, spec.day_joint[d],
                                          &out.zero_probability_rows);
        for (int k = 0; k <= M; ++k) {
          int stage = first + k;
          out.kernels.push_back(StochasticKernel::via_map(
              stage,
              [spaces, first, stage](const StageSpaces&, const History& h) {
                return uncertainty_prefix_index(spaces, h, first, stage - 1);
              },
              cond[k]));
        }
      }
      break;
    }
  }
  return out;
}

Cost adapted_value_oracle(int t, const History& h_t,
                          const ProblemSpec& problem,
                          const SolveOptions& options) {
  const StageSpaces& spaces = problem.spaces;
  spaces.check_history(h_t);
  if (h_t.stage != t) fail(ErrorKind::instance_mismatch, "history stage != t");
  int T = problem.horizon();

  // One decision cell per (stage s, observed noise w_{t+1..s}); the control
  // there may not depend on past controls.
  std::vector<long long> domain(T - t, 1);
  double combos = 1.0;
  std::vector<long long> cell_offset(T - t, 0);
  long long cells = 0;
  for (int s = t; s < T; ++s) {
    if (s > t) domain[s - t] = domain[s - t - 1] * spaces.uncertainty_size(s);
    combos *= std::pow(static_cast<double>(spaces.control_size(s)),
                       static_cast<double>(domain[s - t]));
    cell_offset[s - t] = cells;
    cells += domain[s - t];
    if (combos > static_cast<double>(options.enumeration_cap))
      fail(ErrorKind::capacity,
           "noise-feedback enumeration cap exceeded at stage " +
               std::to_string(s));
  }

  std::vector<int> choice(cells, 0);
  std::function<Cost(int, const History&, long long)> walk =
      [&](int s, const History& h, long long noise_idx) -> Cost {
    if (s == T) return problem.criterion_value(h);
    int u = choice[cell_offset[s - t] + noise_idx];
    const Distribution& row = problem.kernel(s + 1).row(spaces, h);
    Cost acc(0.0);
    int nw = spaces.uncertainty_size(s + 1);
    for (int w = 0; w < nw; ++w) {
      Cost sub = walk(s + 1, spaces.extend(h, u, w), noise_idx * nw + w);
      acc += sub.scaled(row[w]);
    }
    return acc;
  };

  Cost best = Cost::inf();
  bool first = true;
  while (true) {
    Cost v = walk(t, h_t, 0);
    if (first || v < best) best = v;
    first = false;
    // Odometer over all decision cells.
    long long i = 0;
    for (; i < cells; ++i) {
      int s = t;
      while (i >= cell_offset[s - t] + domain[s - t]) ++s;
      if (++choice[i] < spaces.control_size(s)) break;
      choice[i] = 0;
    }
    if (i == cells) break;
  }
  return best;
}

namespace {

// Image of theta_0 = W_0 pushed forward through the per-stage dynamics; the
// direct recursions assign +infinity outside it so they match the grouped
// unit-block solver exactly.
std::vector<std::vector<char>> forward_reachable(
    const std::vector<int>& state_sizes,
    const std::function<void(int t, int x, std::vector<char>& next)>& push,
    int horizon) {
  std::vector<std::vector<char>> reach(horizon + 1);
  reach[0].assign(state_sizes[0], 1);
  for (int t = 0; t < horizon; ++t) {
    reach[t + 1].assign(state_sizes[t + 1], 0);
    for (int x = 0; x < state_sizes[t]; ++x)
      if (reach[t][x]) push(t, x, reach[t + 1]);
  }
  return reach;
}

void require_identity_on_w0(const std::vector<int>& table, int w0_size) {
  bool ok = static_cast<int>(table.size()) == w0_size;
  for (int i = 0; ok && i < w0_size; ++i) ok = table[i] == i;
  if (!ok)
    fail(ErrorKind::representation,
         "white-noise recursion requires X_0 = W_0 with theta_0 = identity");
}

}  // namespace

std::vector<ValueFunction> solve_white_noise_dp(const ProblemSpec& problem,
                                                const UnitReduction& reduction,
                                                WhiteNoiseMode mode) {
  problem.validate();
  const StageSpaces& spaces = problem.spaces;
  int T = problem.horizon();
  for (int s = 1; s <= T; ++s)
    if (problem.kernel(s).rep() != StochasticKernel::Rep::white_noise)
      fail(ErrorKind::representation,
           "white-noise recursion requires white kernels (stage " +
               std::to_string(s) + ")");
  require_identity_on_w0(reduction.theta.at(0).table,
                         spaces.uncertainty_size(0));

  std::vector<Cost> terminal;
  bool additive = mode == WhiteNoiseMode::additive;
  if (additive) {
    if (problem.criterion.rep != Criterion::Rep::additive)
      fail(ErrorKind::representation, "additive mode needs an additive criterion");
    for (int s = 0; s <= T; ++s)
      if (problem.criterion.theta[s] != reduction.theta[s].table)
        fail(ErrorKind::representation,
             "additive criterion state maps must match the reduction");
    terminal = problem.criterion.final_cost;
  } else {
    if (problem.criterion.rep != Criterion::Rep::final_state)
      fail(ErrorKind::representation,
           "final-cost mode needs a final-state criterion");
    if (problem.criterion.theta_final != reduction.theta[T].table)
      fail(ErrorKind::representation,
           "criterion final-state map must match the reduction");
    terminal = problem.criterion.final_values;
  }

  std::vector<int> state_sizes;
  for (int s = 0; s <= T; ++s)
    state_sizes.push_back(reduction.theta[s].state_space.size);
  auto reach = forward_reachable(
      state_sizes,
      [&](int t, int x, std::vector<char>& next) {
        int nu = spaces.control_size(t);
        int nw = spaces.uncertainty_size(t + 1);
        for (int u = 0; u < nu; ++u)
          for (int w = 0; w < nw; ++w)
            next[reduction.dynamics[t]
                     [(static_cast<long long>(x) * nu + u) * nw + w]] = 1;
      },
      T);

  std::vector<ValueFunction> out(T + 1);
  out[T].stage = T;
  out[T].domain = ValueFunction::Domain::reduced_state;
  out[T].values = std::move(terminal);
  for (int t = T - 1; t >= 0; --t) {
    const Distribution& row =
        problem.kernel(t + 1).row(spaces, spaces.history_at(t, 0));
    int nu = spaces.control_size(t);
    int nw = spaces.uncertainty_size(t + 1);
    ValueFunction vf;
    vf.stage = t;
    vf.domain = ValueFunction::Domain::reduced_state;
    vf.values.resize(state_sizes[t]);
    vf.argmin.assign(state_sizes[t], 0);
    for (int x = 0; x < state_sizes[t]; ++x) {
      if (!reach[t][x]) {
        vf.values[x] = Cost::inf();
        continue;
      }
      Cost best = Cost::inf();
      int best_u = 0;
      for (int u = 0; u < nu; ++u) {
        Cost acc(0.0);
        for (int w = 0; w < nw; ++w) {
          long long cell = (static_cast<long long>(x) * nu + u) * nw + w;
          Cost c = out[t + 1].values[reduction.dynamics[t][cell]];
          if (additive) c += problem.stage_cost(t, x, u, w);
          acc += c.scaled(row[w]);
        }
        if (u == 0 || acc < best) {
          best = acc;
          best_u = u;
        }
      }
      vf.values[x] = best;
      vf.argmin[x] = best_u;
    }
    out[t] = std::move(vf);
  }
  return out;
}

ReducedSolve solve_white_noise_2ts(const TwoScaleProblem& problem,
                                   const NoiseProcessSpec& spec,
                                   const Reduction& reduction,
                                   std::span<const Cost> reduced_criterion) {
  problem.validate();
  spec.validate();
  const StageSpaces& spaces = problem.flat.spaces;
  const TwoScaleClock& clock = problem.clock;
  int M = clock.minutes;
  int D = clock.days;

  // Per-day joint noise blocks, either declared or factored out of a full
  // joint table (independence across days required).
  std::vector<std::vector<double>> blocks;
  if (spec.rep == NoiseProcessSpec::Rep::day_independent) {
    if (spec.clock.days != D || spec.clock.minutes != M)
      fail(ErrorKind::instance_mismatch, "noise clock != problem clock");
    blocks = spec.day_joint;
  } else if (spec.rep == NoiseProcessSpec::Rep::joint_table) {
    long long total = spec.path_count();
    blocks.assign(D + 1, {});
    // Marginalize each day block, then verify the product form.
    long long w0N = spec.spaces[0].size;
    std::vector<long long> block_sizes(D + 1);
    for (int d = 0; d <= D; ++d)
      block_sizes[d] = product_of_sizes(spec.spaces, clock.lex_index(d, 0) + 1,
                                        clock.lex_index(d + 1, 0));
    std::vector<double> w0_marginal(w0N, 0.0);
    for (int d = 0; d <= D; ++d) blocks[d].assign(block_sizes[d], 0.0);
    for (long long path = 0; path < total; ++path) {
      // Path-lex order: w0 most significant, then day blocks in day order.
      long long rest = path;
      std::vector<long long> part(D + 2);
      for (int d = D; d >= 0; --d) {
        part[d + 1] = rest % block_sizes[d];
        rest /= block_sizes[d];
      }
      part[0] = rest;
      double p = spec.joint[path];
      w0_marginal[part[0]] += p;
      for (int d = 0; d <= D; ++d) blocks[d][part[d + 1]] += p;
    }
    for (long long path = 0; path < total; ++path) {
      long long rest = path;
      double prod = 1.0;
      for (int d = D; d >= 0; --d) {
        prod *= blocks[d][rest % block_sizes[d]];
        rest /= block_sizes[d];
      }
      prod *= w0_marginal[rest];
      if (std::abs(prod - spec.joint[path]) > 1e-9)
        fail(ErrorKind::independence,
             "joint table does not factor into independent day blocks");
    }
  } else {
    // White noise is day-independent with product blocks.
    blocks.assign(D + 1, {});
    for (int d = 0; d <= D; ++d) {
      int first = clock.lex_index(d, 0) + 1;
      std::vector<double> table{1.0};
      for (int k = 0; k <= M; ++k) {
        const Distribution& marg = spec.marginals[first + k];
        std::vector<double> next;
        next.reserve(table.size() * marg.size());
        for (double a : table)
          for (int w = 0; w < marg.size(); ++w) next.push_back(a * marg[w]);
        table = std::move(next);
      }
      blocks[d] = std::move(table);
    }
  }

  BlockSchedule schedule = day_boundary_schedule(clock);
  if (auto ce = check_state_reduction(reduction, schedule, problem.flat))
    fail(ErrorKind::validation, "not a state reduction: " + ce->detail);

  bool zero_flag = false;
  std::vector<std::vector<std::vector<Distribution>>> cond(D + 1);
  for (int d = 0; d <= D; ++d) {
    std::vector<int> coords;
    for (int k = 0; k <= M; ++k)
      coords.push_back(spaces.uncertainty_size(clock.lex_index(d, 0) + 1 + k));
    cond[d] = conditionals_of_joint(coords, blocks[d], &zero_flag);
  }

  int T = problem.flat.horizon();
  ReducedSolve out;
  out.boundary_values.resize(D + 2);
  out.policy.controls.resize(D + 1);
  ValueFunction vT;
  vT.stage = T;
  vT.domain = ValueFunction::Domain::reduced_state;
  vT.values.assign(reduced_criterion.begin(), reduced_criterion.end());
  out.boundary_values[D + 1] = std::move(vT);

  for (int d = D; d >= 0; --d) {
    int xN = reduction.theta[d].state_space.size;
    int a = clock.lex_index(d, 0);
    long long segN = spaces.segment_count(a + 1, a + M + 1);
    std::vector<char> reached(xN, 0);
    for (int v : reduction.theta[d].table) reached[v] = 1;
    ValueFunction vf;
    vf.stage = a;
    vf.domain = ValueFunction::Domain::reduced_state;
    vf.values.resize(xN);
    vf.argmin.assign(xN, 0);
    out.policy.controls[d].resize(M + 1);
    for (int k = 0; k <= M; ++k)
      out.policy.controls[d][k].assign(
          static_cast<size_t>(xN) * spaces.segment_count(a + 1, a + k), 0);
    for (int x = 0; x < xN; ++x) {
      if (!reached[x]) {
        vf.values[x] = Cost::inf();
        continue;
      }
      // Adapted scenario tree: the control at minute k sees the day's noise
      // observed so far (and the boundary state), nothing else.
      std::function<Cost(int, long long, long long)> node =
          [&](int k, long long seg, long long noise) -> Cost {
        if (k == M + 1) {
          int xn = reduction.dynamics[d][x * segN + seg];
          return xn >= 0 ? out.boundary_values[d + 1].values[xn]
                         : Cost::inf();
        }
        int s = a + k;
        int nu = spaces.control_size(s);
        int nw = spaces.uncertainty_size(s + 1);
        const Distribution& row = cond[d][k][noise];
        Cost best = Cost::inf();
        int best_u = 0;
        for (int u = 0; u < nu; ++u) {
          Cost acc(0.0);
          for (int w = 0; w < nw; ++w)
            acc += node(k + 1, (seg * nu + u) * nw + w, noise * nw + w)
                       .scaled(row[w]);
          if (u == 0 || acc < best) {
            best = acc;
            best_u = u;
          }
        }
        long long pN = spaces.segment_count(a + 1, s);
        out.policy.controls[d][k][x * pN + seg] = best_u;
        return best;
      };
      vf.values[x] = node(0, 0, 0);
      vf.argmin[x] = out.policy.controls[d][0][x];
    }
    out.boundary_values[d] = std::move(vf);
  }
  return out;
}

std::vector<DhdValueFunction> solve_white_noise_dhd(
    const DhdProblem& problem, const DhdReduction& reduction,
    std::span<const Cost> reduced_criterion) {
  problem.validate();
  int S = problem.horizon;
  for (int s = 0; s < S; ++s)
    if (!problem.kernels[s].white)
      fail(ErrorKind::representation,
           "white-noise recursion requires white kernels (stage " +
               std::to_string(s + 1) + ")");
  if (auto ce = check_dhd_reduction(problem, reduction))
    fail(ErrorKind::validation, "not a state reduction: " + ce->detail);
  require_identity_on_w0(reduction.theta[0].table,
                         problem.head_uncertainty.size);

  bool additive = problem.criterion.rep == DhdCriterion::Rep::additive;
  std::span<const Cost> terminal = reduced_criterion;
  if (additive) {
    for (int s = 0; s <= S; ++s)
      if (problem.criterion.theta[s] != reduction.theta[s].table)
        fail(ErrorKind::representation,
             "additive criterion state maps must match the reduction");
    terminal = problem.criterion.final_cost;
  } else if (static_cast<int>(reduced_criterion.size()) !=
             reduction.theta[S].state_space.size) {
    fail(ErrorKind::instance_mismatch, "reduced criterion size != |X_S|");
  }

  std::vector<int> state_sizes;
  for (int s = 0; s <= S; ++s)
    state_sizes.push_back(reduction.theta[s].state_space.size);
  auto reach = forward_reachable(
      state_sizes,
      [&](int s, int x, std::vector<char>& next) {
        long long stepN = static_cast<long long>(problem.head_controls[s].size) *
                          problem.uncertainties[s].size *
                          problem.tail_controls[s].size;
        for (long long step = 0; step < stepN; ++step)
          next[reduction.dynamics[s][x * stepN + step]] = 1;
      },
      S);

  std::vector<DhdValueFunction> out(S + 1);
  out[S].stage = S;
  out[S].values.assign(terminal.begin(), terminal.end());
  for (int s = S - 1; s >= 0; --s) {
    int xN = state_sizes[s];
    int nuh = problem.head_controls[s].size;
    int nw = problem.uncertainties[s].size;
    int nut = problem.tail_controls[s].size;
    long long stepN = static_cast<long long>(nuh) * nw * nut;
    const Distribution& row = problem.kernels[s].rows[0];
    DhdValueFunction vf;
    vf.stage = s;
    vf.values.resize(xN);
    vf.head_argmin.assign(xN, 0);
    vf.tail_argmin.assign(static_cast<long long>(xN) * nuh * nw, 0);
    for (int x = 0; x < xN; ++x) {
      if (!reach[s][x]) {
        vf.values[x] = Cost::inf();
        continue;
      }
      Cost best = Cost::inf();
      int best_uh = 0;
      for (int uh = 0; uh < nuh; ++uh) {
        Cost acc(0.0);
        for (int w = 0; w < nw; ++w) {
          Cost inner = Cost::inf();
          int inner_ut = 0;
          for (int ut = 0; ut < nut; ++ut) {
            long long step = (static_cast<long long>(uh) * nw + w) * nut + ut;
            Cost c = out[s + 1].values[reduction.dynamics[s][x * stepN + step]];
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

}  // namespace tbdp
