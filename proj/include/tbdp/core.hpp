#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tbdp/errors.hpp"

namespace tbdp {

/// A finite set, addressed by element index. Optional labels for display.
struct FiniteSpace {
  int size = 1;
  std::vector<std::string> labels;

  FiniteSpace() = default;
  explicit FiniteSpace(int n) : size(n) { validate(); }
  FiniteSpace(int n, std::vector<std::string> lbl)
      : size(n), labels(std::move(lbl)) {
    validate();
  }

  void validate() const;
};

/// Nonnegative extended cost, +inf allowed, NaN rejected.
/// Scaling follows the measure-theoretic convention 0 * inf = 0 so that
/// infinite costs on zero-probability branches do not contaminate
/// expectations.
class Cost {
 public:
  Cost() : v_(0.0) {}
  explicit Cost(double v) : v_(v) {
    if (std::isnan(v_)) fail(ErrorKind::validation, "cost is NaN");
    if (v_ < 0.0) fail(ErrorKind::validation, "cost is negative");
  }

  static Cost inf() { return Cost(std::numeric_limits<double>::infinity()); }

  double value() const { return v_; }
  bool is_inf() const { return std::isinf(v_); }

  /// p * cost with 0 * inf = 0. Requires p >= 0.
  Cost scaled(double p) const {
    if (p == 0.0) return Cost(0.0);
    return Cost(p * v_);
  }

  friend Cost operator+(Cost a, Cost b) { return Cost(a.v_ + b.v_); }
  Cost& operator+=(Cost o) {
    v_ += o.v_;
    return *this;
  }
  friend bool operator<(Cost a, Cost b) { return a.v_ < b.v_; }
  friend bool operator<=(Cost a, Cost b) { return a.v_ <= b.v_; }
  friend bool operator==(Cost a, Cost b) { return a.v_ == b.v_; }

 private:
  double v_;
};

/// Absolute difference treating inf == inf as zero gap.
double cost_gap(Cost a, Cost b);

/// Probability distribution over a finite space of the given size.
/// Rejected (not renormalized) when the mass is off by more than 1e-12.
class Distribution {
 public:
  static constexpr double kNormTolerance = 1e-12;

  explicit Distribution(std::vector<double> probs);

  int size() const { return static_cast<int>(probs_.size()); }
  double operator[](int i) const { return probs_[i]; }
  const std::vector<double>& probs() const { return probs_; }

  static Distribution uniform(int n);
  static Distribution dirac(int n, int at);

 private:
  std::vector<double> probs_;
};

/// Total-variation distance, i.e. half the L1 gap.
double total_variation(const Distribution& a, const Distribution& b);

/// Sum_i p_i * v_i with 0 * inf = 0; +inf iff some positive-mass entry is
/// +inf. Accumulated in index order.
Cost expectation(const Distribution& d, std::span<const Cost> values);

/// A realized alternating record (w0, u0, w1, ..., u_{t-1}, w_t) of indices.
struct History {
  int stage = 0;
  std::vector<int> entries;  // length 2*stage + 1

  History() : entries{0} {}
  History(int t, std::vector<int> e);
};

/// The [r:s]-history subpart (u_{r-1}, w_r, ..., u_{s-1}, w_s), r >= 1.
struct HistorySegment {
  int from_stage = 1;
  int to_stage = 1;
  std::vector<int> entries;  // length 2*(to-from+1); empty segment has to<from

  HistorySegment() : from_stage(1), to_stage(0) {}
  HistorySegment(int r, int s, std::vector<int> e);

  bool empty() const { return to_stage < from_stage; }
};

/// Per-stage control and uncertainty spaces plus all history/segment
/// index arithmetic. Histories of stage t are enumerated lexicographically
/// in their entries; the dense index is the mixed-radix value of the entry
/// sequence with radices (|W_0|, |U_0|, |W_1|, ..., |U_{t-1}|, |W_t|).
struct StageSpaces {
  std::vector<FiniteSpace> controls;       // stages 0..T-1
  std::vector<FiniteSpace> uncertainties;  // stages 0..T

  int horizon() const { return static_cast<int>(controls.size()); }

  void validate() const;

  int control_size(int t) const { return controls.at(t).size; }
  int uncertainty_size(int t) const { return uncertainties.at(t).size; }

  long long history_count(int t) const;
  long long index_of(const History& h) const;
  History history_at(int t, long long index) const;

  /// Canonical dynamics h_{t+1} = (h_t, u, w).
  History extend(const History& h, int u, int w) const;

  /// h = (h_r, h_{r+1:t}); the segment is empty when r == h.stage.
  std::pair<History, HistorySegment> split(const History& h, int r) const;

  History concat(const History& prefix, const HistorySegment& seg) const;

  /// Segments of H_{r:s}; count is 1 for the empty segment (s < r).
  long long segment_count(int r, int s) const;
  long long segment_index(const HistorySegment& seg) const;
  HistorySegment segment_at(int r, int s, long long index) const;

  void check_history(const History& h) const;
};

}  // namespace tbdp
