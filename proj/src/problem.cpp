#include "tbdp/problem.hpp"

namespace tbdp {

Criterion Criterion::from_table(std::vector<Cost> values) {
  Criterion c;
  c.rep = Rep::full_table;
  c.full = std::move(values);
  return c;
}

Criterion Criterion::from_final_state(std::vector<int> theta_T, int state_size,
                                      std::vector<Cost> values) {
  Criterion c;
  c.rep = Rep::final_state;
  c.theta_final = std::move(theta_T);
  c.final_state_size = state_size;
  c.final_values = std::move(values);
  return c;
}

void ProblemSpec::validate() const {
  spaces.validate();
  int T = horizon();
  if (static_cast<int>(kernels.size()) != T)
    fail(ErrorKind::validation, "kernel coverage gap: need stages 1..T");
  std::vector<bool> seen(T + 1, false);
  for (const auto& k : kernels) {
    k.validate(spaces);
    if (seen[k.stage()])
      fail(ErrorKind::validation,
           "duplicate kernel for stage " + std::to_string(k.stage()));
    seen[k.stage()] = true;
  }
  for (int s = 1; s <= T; ++s)
    if (!seen[s])
      fail(ErrorKind::validation,
           "kernel coverage gap at stage " + std::to_string(s));

  switch (criterion.rep) {
    case Criterion::Rep::full_table:
      if (static_cast<long long>(criterion.full.size()) !=
          spaces.history_count(T))
        fail(ErrorKind::validation, "criterion table size != |H_T|");
      break;
    case Criterion::Rep::final_state:
      if (static_cast<long long>(criterion.theta_final.size()) !=
          spaces.history_count(T))
        fail(ErrorKind::validation, "final-state theta table size != |H_T|");
      if (static_cast<int>(criterion.final_values.size()) !=
          criterion.final_state_size)
        fail(ErrorKind::validation, "final-state value table size != |X_T|");
      for (int x : criterion.theta_final)
        if (x < 0 || x >= criterion.final_state_size)
          fail(ErrorKind::validation, "final-state theta out of range");
      break;
    case Criterion::Rep::additive: {
      if (static_cast<int>(criterion.theta.size()) != T + 1 ||
          static_cast<int>(criterion.state_sizes.size()) != T + 1 ||
          static_cast<int>(criterion.stage_costs.size()) != T)
        fail(ErrorKind::validation, "additive criterion tables incomplete");
      for (int t = 0; t <= T; ++t)
        if (static_cast<long long>(criterion.theta[t].size()) !=
            spaces.history_count(t))
          fail(ErrorKind::validation,
               "additive theta table size != |H_t| at stage " +
                   std::to_string(t));
      for (int t = 0; t < T; ++t) {
        long long expected = static_cast<long long>(criterion.state_sizes[t]) *
                             spaces.control_size(t) *
                             spaces.uncertainty_size(t + 1);
        if (static_cast<long long>(criterion.stage_costs[t].size()) !=
            expected)
          fail(ErrorKind::validation,
               "stage cost table size mismatch at stage " + std::to_string(t));
      }
      if (static_cast<int>(criterion.final_cost.size()) !=
          criterion.state_sizes[T])
        fail(ErrorKind::validation, "final cost table size != |X_T|");
      break;
    }
  }
}

int ProblemSpec::additive_state(int t, const History& h_t) const {
  return criterion.theta.at(t).at(spaces.index_of(h_t));
}

Cost ProblemSpec::stage_cost(int t, int x, int u, int w) const {
  long long idx =
      (static_cast<long long>(x) * spaces.control_size(t) + u) *
          spaces.uncertainty_size(t + 1) +
      w;
  return criterion.stage_costs.at(t).at(idx);
}

Cost ProblemSpec::criterion_value(const History& h_T) const {
  int T = horizon();
  if (h_T.stage != T)
    fail(ErrorKind::instance_mismatch, "criterion expects a stage-T history");
  switch (criterion.rep) {
    case Criterion::Rep::full_table:
      return criterion.full.at(spaces.index_of(h_T));
    case Criterion::Rep::final_state:
      return criterion.final_values.at(
          criterion.theta_final.at(spaces.index_of(h_T)));
    case Criterion::Rep::additive: {
      Cost acc(0.0);
      for (int t = 0; t < T; ++t) {
        History h_t(t, std::vector<int>(h_T.entries.begin(),
                                        h_T.entries.begin() + 2 * t + 1));
        int u = h_T.entries[2 * t + 1];
        int w = h_T.entries[2 * t + 2];
        acc += stage_cost(t, additive_state(t, h_t), u, w);
      }
      acc += criterion.final_cost.at(additive_state(T, h_T));
      return acc;
    }
  }
  fail(ErrorKind::representation, "unknown criterion representation");
}

}  // namespace tbdp
