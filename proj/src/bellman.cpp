#include "tbdp/bellman.hpp"

#include <thread>

namespace tbdp {

namespace {

void check_history_domain(const ValueFunction& vf, int stage,
                          const ProblemSpec& problem) {
  if (vf.stage != stage || vf.domain != ValueFunction::Domain::history)
    fail(ErrorKind::instance_mismatch,
         "expected a history value function at stage " +
             std::to_string(stage));
  if (static_cast<long long>(vf.values.size()) !=
      problem.spaces.history_count(stage))
    fail(ErrorKind::instance_mismatch, "value table size != |H_t|");
}

}  // namespace

ValueFunction apply_bellman(int t, const ValueFunction& phi,
                            const ProblemSpec& problem,
                            const SolveOptions& opts) {
  check_history_domain(phi, t + 1, problem);
  const auto& spaces = problem.spaces;
  long long n = spaces.history_count(t);
  int nu = spaces.control_size(t);
  int nw = spaces.uncertainty_size(t + 1);
  const auto& kernel = problem.kernel(t + 1);

  ValueFunction out;
  out.stage = t;
  out.domain = ValueFunction::Domain::history;
  out.values.resize(n);
  out.argmin.resize(n);

  auto solve_row = [&](long long i) {
    History h = spaces.history_at(t, i);
    const Distribution& row = kernel.row(spaces, h);
    Cost best = Cost::inf();
    int best_u = 0;
    for (int u = 0; u < nu; ++u) {
      Cost acc(0.0);
      for (int w = 0; w < nw; ++w) {
        long long child = (i * nu + u) * nw + w;
        acc += phi.values[child].scaled(row[w]);
      }
      if (u == 0 || acc < best) {
        best = acc;
        best_u = u;
      }
    }
    out.values[i] = best;
    out.argmin[i] = best_u;
  };

  if (opts.threads > 1 && n > 1) {
    int nthreads = static_cast<int>(std::min<long long>(opts.threads, n));
    std::vector<std::thread> pool;
    for (int k = 0; k < nthreads; ++k)
      pool.emplace_back([&, k] {
        for (long long i = k; i < n; i += nthreads) solve_row(i);
      });
    for (auto& th : pool) th.join();
  } else {
    for (long long i = 0; i < n; ++i) solve_row(i);
  }
  return out;
}

ValueFunction compose_bellman(int r, int t, const ValueFunction& phi,
                              const ProblemSpec& problem,
                              const SolveOptions& opts) {
  if (r > t) fail(ErrorKind::invalid_range, "compose_bellman requires r <= t");
  check_history_domain(phi, t, problem);
  ValueFunction v = phi;
  for (int s = t - 1; s >= r; --s) v = apply_bellman(s, v, problem, opts);
  return v;
}

ValueFunction terminal_value(const ProblemSpec& problem) {
  int T = problem.horizon();
  long long n = problem.spaces.history_count(T);
  ValueFunction v;
  v.stage = T;
  v.domain = ValueFunction::Domain::history;
  v.values.resize(n);
  for (long long i = 0; i < n; ++i)
    v.values[i] = problem.criterion_value(problem.spaces.history_at(T, i));
  return v;
}

std::vector<ValueFunction> solve_history_dp(const ProblemSpec& problem,
                                            const SolveOptions& opts) {
  int T = problem.horizon();
  long long total = 0;
  for (int t = 0; t <= T; ++t) {
    total += problem.spaces.history_count(t);
    if (total > opts.table_budget)
      fail(ErrorKind::capacity,
           "history table budget exceeded at stage " + std::to_string(t));
  }
  std::vector<ValueFunction> vfs(T + 1);
  vfs[T] = terminal_value(problem);
  for (int t = T - 1; t >= 0; --t)
    vfs[t] = apply_bellman(t, vfs[t + 1], problem, opts);
  return vfs;
}

Cost evaluate_feedback(int t, const History& h_t, const Feedback& gamma,
                       const ProblemSpec& problem) {
  int T = problem.horizon();
  if (!gamma.covers(t, T - 1))
    fail(ErrorKind::feedback_domain, "feedback does not cover [t, T-1]");
  HistoryDistribution rho = compose_feedback_kernel_row(
      problem.spaces, problem.kernels, t, T, gamma, h_t);
  Cost acc(0.0);
  for (const auto& [idx, p] : rho.mass) {
    History h = problem.spaces.history_at(T, idx);
    acc += problem.criterion_value(h).scaled(p);
  }
  return acc;
}

Cost brute_force_value(int t, const History& h_t, const ProblemSpec& problem,
                       const SolveOptions& opts) {
  const auto& spaces = problem.spaces;
  spaces.check_history(h_t);
  int T = problem.horizon();
  if (t == T) return problem.criterion_value(h_t);

  // Reachable histories per stage, in lexicographic order. The feedback's
  // choices outside this set cannot change the value, since rho^gamma only
  // charges flow-visited histories.
  std::vector<std::vector<History>> nodes(T - t);
  nodes[0] = {h_t};
  for (int s = t; s < T - 1; ++s) {
    for (const auto& h : nodes[s - t])
      for (int u = 0; u < spaces.control_size(s); ++u)
        for (int w = 0; w < spaces.uncertainty_size(s + 1); ++w)
          nodes[s - t + 1].push_back(spaces.extend(h, u, w));
  }

  double count = 1.0;
  std::vector<int> radixes;  // control choice per node, odometer order
  for (int s = t; s < T; ++s) {
    int nu = spaces.control_size(s);
    for (size_t i = 0; i < nodes[s - t].size(); ++i) {
      radixes.push_back(nu);
      count *= nu;
      if (count > static_cast<double>(opts.enumeration_cap))
        fail(ErrorKind::capacity,
             "feedback enumeration cap exceeded at stage " +
                 std::to_string(s));
    }
  }

  // Stage offsets into the flat choice vector, plus per-stage index maps.
  std::vector<size_t> offset(T - t + 1, 0);
  std::vector<std::map<long long, size_t>> pos(T - t);
  for (int s = t; s < T; ++s) {
    offset[s - t + 1] = offset[s - t] + nodes[s - t].size();
    for (size_t i = 0; i < nodes[s - t].size(); ++i)
      pos[s - t][spaces.index_of(nodes[s - t][i])] = i;
  }

  std::vector<int> choice(radixes.size(), 0);
  Cost best = Cost::inf();
  bool first = true;
  while (true) {
    // Evaluate the candidate policy: expected criterion over noise paths.
    std::function<Cost(const History&, double)> walk =
        [&](const History& h, double) -> Cost {
      size_t node = offset[h.stage - t] + pos[h.stage - t].at(
                                              spaces.index_of(h));
      int u = choice[node];
      const auto& row = problem.kernel(h.stage + 1).row(spaces, h);
      Cost acc(0.0);
      for (int w = 0; w < row.size(); ++w) {
        double pw = row[w];
        if (pw == 0.0) continue;
        History child = spaces.extend(h, u, w);
        Cost sub = (child.stage == T) ? problem.criterion_value(child)
                                      : walk(child, pw);
        acc += sub.scaled(pw);
      }
      return acc;
    };
    Cost v = walk(h_t, 1.0);
    if (first || v < best) best = v;
    first = false;

    // Odometer step.
    size_t k = 0;
    while (k < choice.size()) {
      if (++choice[k] < radixes[k]) break;
      choice[k] = 0;
      ++k;
    }
    if (k == choice.size()) break;
  }
  return best;
}

Feedback argmin_feedback(const ProblemSpec& problem,
                         const std::vector<ValueFunction>& vfs) {
  int T = problem.horizon();
  Feedback fb;
  fb.from_stage = 0;
  fb.to_stage = T - 1;
  for (int t = 0; t < T; ++t) {
    if (vfs.at(t).argmin.empty())
      fail(ErrorKind::instance_mismatch, "value function has no argmin table");
    fb.tables.push_back(vfs[t].argmin);
  }
  return fb;
}

}  // namespace tbdp
