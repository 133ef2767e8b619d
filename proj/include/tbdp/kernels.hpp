#pragma once

#include <functional>
#include <map>
#include <vector>

#include "tbdp/core.hpp"

namespace tbdp {

/// Per-stage map from a history h_{s-1} to a distribution over W_s.
///
/// H_{s-1} is exponential in s, so structured representations are first
/// class: white_noise stores one row, markov1 one row per last uncertainty,
/// reduced_via_map one row per user-declared key. full_table stores an
/// explicit row per history and is only feasible for tiny horizons.
class StochasticKernel {
 public:
  enum class Rep { full_table, white_noise, markov1, reduced_via_map };

  static StochasticKernel white(int stage, Distribution row);
  static StochasticKernel markov(int stage, std::vector<Distribution> rows);
  static StochasticKernel full(int stage, std::vector<Distribution> rows);
  static StochasticKernel via_map(int stage,
                                  std::function<long long(const StageSpaces&,
                                                          const History&)> key,
                                  std::vector<Distribution> rows);

  int stage() const { return stage_; }
  Rep rep() const { return rep_; }

  const Distribution& row(const StageSpaces& spaces, const History& h) const;
  const std::vector<Distribution>& all_rows() const { return rows_; }

  /// Checks row widths and, for full_table, the row count against H_{s-1}.
  void validate(const StageSpaces& spaces) const;

 private:
  StochasticKernel(int stage, Rep rep, std::vector<Distribution> rows)
      : stage_(stage), rep_(rep), rows_(std::move(rows)) {}

  int stage_;
  Rep rep_;
  std::vector<Distribution> rows_;
  std::function<long long(const StageSpaces&, const History&)> key_;
};

/// A policy fragment: for each stage s in [from_stage, to_stage], a dense
/// table over H_s giving the chosen control.
struct Feedback {
  int from_stage = 0;
  int to_stage = -1;  // empty when to < from
  std::vector<std::vector<int>> tables;  // tables[s - from_stage]

  bool covers(int r, int t) const {
    return r > t || (from_stage <= r && t <= to_stage);
  }

  int control(const StageSpaces& spaces, const History& h) const;

  /// Builds a feedback from a per-history rule on [from, to].
  static Feedback from_rule(
      const StageSpaces& spaces, int from, int to,
      const std::function<int(const History&)>& rule);
};

/// Sparse distribution over stage-t histories, keyed by dense history index.
struct HistoryDistribution {
  int stage = 0;
  std::map<long long, double> mass;

  double total() const;
};

/// The flow Phi^gamma_{r:t}: the stage-t history visited from h_r when
/// controls come from gamma along the given noise path w_{r+1:t}.
/// For r == t returns h_r unchanged.
History compute_flow(const StageSpaces& spaces, int r, int t,
                     const Feedback& gamma, const History& h_r,
                     std::span<const int> noise);

/// The feedback-induced kernel rho^gamma_{r:t} evaluated at h_r: supported
/// only on flow-visited histories, with path probabilities multiplied along
/// the way and summed in lexicographic noise order. For r == t this is the
/// Dirac at h_r.
HistoryDistribution compose_feedback_kernel_row(
    const StageSpaces& spaces, const std::vector<StochasticKernel>& kernels,
    int r, int t, const Feedback& gamma, const History& h_r);

/// All rows of rho^gamma_{r:t}, indexed by dense H_r index.
std::vector<HistoryDistribution> compose_feedback_kernel(
    const StageSpaces& spaces, const std::vector<StochasticKernel>& kernels,
    int r, int t, const Feedback& gamma);

/// Looks up the kernel for a target stage s in a family covering 1..T.
const StochasticKernel& kernel_for_stage(
    const std::vector<StochasticKernel>& kernels, int s);

}  // namespace tbdp
