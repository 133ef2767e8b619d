#include "tbdp/kernels.hpp"

namespace tbdp {

StochasticKernel StochasticKernel::white(int stage, Distribution row) {
  return StochasticKernel(stage, Rep::white_noise, {std::move(row)});
}

StochasticKernel StochasticKernel::markov(int stage,
                                          std::vector<Distribution> rows) {
  return StochasticKernel(stage, Rep::markov1, std::move(rows));
}

StochasticKernel StochasticKernel::full(int stage,
                                        std::vector<Distribution> rows) {
  return StochasticKernel(stage, Rep::full_table, std::move(rows));
}

StochasticKernel StochasticKernel::via_map(
    int stage,
    std::function<long long(const StageSpaces&, const History&)> key,
    std::vector<Distribution> rows) {
  StochasticKernel k(stage, Rep::reduced_via_map, std::move(rows));
  k.key_ = std::move(key);
  return k;
}

const Distribution& StochasticKernel::row(const StageSpaces& spaces,
                                          const History& h) const {
  if (h.stage != stage_ - 1)
    fail(ErrorKind::instance_mismatch,
         "kernel for stage " + std::to_string(stage_) +
             " queried with a history of stage " + std::to_string(h.stage));
  switch (rep_) {
    case Rep::white_noise:
      return rows_[0];
    case Rep::markov1:
      return rows_.at(h.entries.back());
    case Rep::full_table:
      return rows_.at(spaces.index_of(h));
    case Rep::reduced_via_map:
      return rows_.at(key_(spaces, h));
  }
  fail(ErrorKind::representation, "unknown kernel representation");
}

void StochasticKernel::validate(const StageSpaces& spaces) const {
  if (stage_ < 1 || stage_ > spaces.horizon())
    fail(ErrorKind::validation, "kernel stage out of range 1..T");
  int width = spaces.uncertainty_size(stage_);
  for (const auto& r : rows_)
    if (r.size() != width)
      fail(ErrorKind::validation,
           "kernel row width does not match uncertainty space at stage " +
               std::to_string(stage_));
  if (rep_ == Rep::white_noise && rows_.size() != 1)
    fail(ErrorKind::validation, "white-noise kernel must have one row");
  if (rep_ == Rep::markov1 &&
      static_cast<int>(rows_.size()) != spaces.uncertainty_size(stage_ - 1))
    fail(ErrorKind::validation,
         "markov1 kernel needs one row per previous uncertainty");
  if (rep_ == Rep::full_table &&
      static_cast<long long>(rows_.size()) != spaces.history_count(stage_ - 1))
    fail(ErrorKind::validation,
         "full-table kernel needs one row per stage-" +
             std::to_string(stage_ - 1) + " history");
  if (rep_ == Rep::reduced_via_map && !key_)
    fail(ErrorKind::validation, "reduced_via_map kernel without a key map");
}

int Feedback::control(const StageSpaces& spaces, const History& h) const {
  if (h.stage < from_stage || h.stage > to_stage)
    fail(ErrorKind::feedback_domain,
         "feedback does not cover stage " + std::to_string(h.stage));
  return tables[h.stage - from_stage].at(spaces.index_of(h));
}

Feedback Feedback::from_rule(const StageSpaces& spaces, int from, int to,
                             const std::function<int(const History&)>& rule) {
  Feedback fb;
  fb.from_stage = from;
  fb.to_stage = to;
  for (int s = from; s <= to; ++s) {
    long long n = spaces.history_count(s);
    std::vector<int> table(n);
    for (long long i = 0; i < n; ++i)
      table[i] = rule(spaces.history_at(s, i));
    fb.tables.push_back(std::move(table));
  }
  return fb;
}

double HistoryDistribution::total() const {
  double s = 0.0;
  for (const auto& [_, p] : mass) s += p;
  return s;
}

const StochasticKernel& kernel_for_stage(
    const std::vector<StochasticKernel>& kernels, int s) {
  for (const auto& k : kernels)
    if (k.stage() == s) return k;
  fail(ErrorKind::instance_mismatch,
       "no kernel for stage " + std::to_string(s));
}

History compute_flow(const StageSpaces& spaces, int r, int t,
                     const Feedback& gamma, const History& h_r,
                     std::span<const int> noise) {
  if (r > t) fail(ErrorKind::invalid_range, "flow requires r <= t");
  if (h_r.stage != r)
    fail(ErrorKind::instance_mismatch, "flow start history not at stage r");
  if (static_cast<int>(noise.size()) != t - r)
    fail(ErrorKind::instance_mismatch, "noise path must have t - r entries");
  if (!gamma.covers(r, t - 1))
    fail(ErrorKind::feedback_domain, "feedback does not cover [r, t-1]");
  History h = h_r;
  for (int s = r; s < t; ++s)
    h = spaces.extend(h, gamma.control(spaces, h), noise[s - r]);
  return h;
}

HistoryDistribution compose_feedback_kernel_row(
    const StageSpaces& spaces, const std::vector<StochasticKernel>& kernels,
    int r, int t, const Feedback& gamma, const History& h_r) {
  if (r > t) fail(ErrorKind::invalid_range, "composition requires r <= t");
  if (h_r.stage != r)
    fail(ErrorKind::instance_mismatch, "row history not at stage r");
  HistoryDistribution out;
  out.stage = t;
  if (r == t) {
    out.mass[spaces.index_of(h_r)] = 1.0;
    return out;
  }
  if (!gamma.covers(r, t - 1))
    fail(ErrorKind::feedback_domain, "feedback does not cover [r, t-1]");

  // Depth-first in lexicographic noise order.
  std::function<void(const History&, double)> walk = [&](const History& h,
                                                         double p) {
    if (h.stage == t) {
      out.mass[spaces.index_of(h)] += p;
      return;
    }
    const auto& row = kernel_for_stage(kernels, h.stage + 1).row(spaces, h);
    int u = gamma.control(spaces, h);
    for (int w = 0; w < row.size(); ++w) {
      double pw = row[w];
      if (pw == 0.0) continue;
      walk(spaces.extend(h, u, w), p * pw);
    }
  };
  walk(h_r, 1.0);
  return out;
}

std::vector<HistoryDistribution> compose_feedback_kernel(
    const StageSpaces& spaces, const std::vector<StochasticKernel>& kernels,
    int r, int t, const Feedback& gamma) {
  long long n = spaces.history_count(r);
  std::vector<HistoryDistribution> rows;
  rows.reserve(n);
  for (long long i = 0; i < n; ++i)
    rows.push_back(compose_feedback_kernel_row(spaces, kernels, r, t, gamma,
                                               spaces.history_at(r, i)));
  return rows;
}

}  // namespace tbdp
