#include "tbdp/core.hpp"

#include <algorithm>
#include <unordered_set>

namespace tbdp {

void FiniteSpace::validate() const {
  if (size < 1) fail(ErrorKind::validation, "finite space must have size >= 1");
  if (!labels.empty()) {
    if (static_cast<int>(labels.size()) != size)
      fail(ErrorKind::validation, "label count does not match space size");
    std::unordered_set<std::string> seen(labels.begin(), labels.end());
    if (static_cast<int>(seen.size()) != size)
      fail(ErrorKind::validation, "labels are not pairwise distinct");
  }
}

double cost_gap(Cost a, Cost b) {
  if (a.is_inf() && b.is_inf()) return 0.0;
  if (a.is_inf() || b.is_inf()) return std::numeric_limits<double>::infinity();
  return std::abs(a.value() - b.value());
}

Distribution::Distribution(std::vector<double> probs)
    : probs_(std::move(probs)) {
  if (probs_.empty()) fail(ErrorKind::validation, "empty distribution");
  double sum = 0.0;
  for (double p : probs_) {
    if (std::isnan(p) || p < 0.0)
      fail(ErrorKind::validation, "distribution entry is negative or NaN");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kNormTolerance)
    fail(ErrorKind::validation,
         "distribution mass off by more than 1e-12 (sum = " +
             std::to_string(sum) + ")");
}

Distribution Distribution::uniform(int n) {
  return Distribution(std::vector<double>(n, 1.0 / n));
}

Distribution Distribution::dirac(int n, int at) {
  std::vector<double> p(n, 0.0);
  p.at(at) = 1.0;
  return Distribution(std::move(p));
}

double total_variation(const Distribution& a, const Distribution& b) {
  if (a.size() != b.size())
    fail(ErrorKind::instance_mismatch, "distributions over different spaces");
  double l1 = 0.0;
  for (int i = 0; i < a.size(); ++i) l1 += std::abs(a[i] - b[i]);
  return 0.5 * l1;
}

Cost expectation(const Distribution& d, std::span<const Cost> values) {
  if (static_cast<int>(values.size()) != d.size())
    fail(ErrorKind::instance_mismatch,
         "expectation: value vector length does not match distribution");
  Cost acc(0.0);
  for (int i = 0; i < d.size(); ++i) acc += values[i].scaled(d[i]);
  return acc;
}

History::History(int t, std::vector<int> e) : stage(t), entries(std::move(e)) {
  if (t < 0) fail(ErrorKind::validation, "negative history stage");
  if (static_cast<int>(entries.size()) != 2 * t + 1)
    fail(ErrorKind::validation, "history at stage " + std::to_string(t) +
                                    " must have " + std::to_string(2 * t + 1) +
                                    " entries");
}

HistorySegment::HistorySegment(int r, int s, std::vector<int> e)
    : from_stage(r), to_stage(s), entries(std::move(e)) {
  if (r < 1) fail(ErrorKind::validation, "segment from_stage must be >= 1");
  int expected = s < r ? 0 : 2 * (s - r + 1);
  if (static_cast<int>(entries.size()) != expected)
    fail(ErrorKind::validation, "segment [" + std::to_string(r) + ":" +
                                    std::to_string(s) + "] must have " +
                                    std::to_string(expected) + " entries");
}

void StageSpaces::validate() const {
  if (uncertainties.size() != controls.size() + 1)
    fail(ErrorKind::validation,
         "need one uncertainty space per stage 0..T and one control space "
         "per stage 0..T-1");
  for (const auto& s : controls) s.validate();
  for (const auto& s : uncertainties) s.validate();
}

namespace {

// Radix of entry position p within a history: w0 at 0, then (u_k, w_{k+1}).
int position_radix(const StageSpaces& sp, int p) {
  if (p == 0) return sp.uncertainty_size(0);
  int k = (p - 1) / 2;
  return (p % 2 == 1) ? sp.control_size(k) : sp.uncertainty_size(k + 1);
}

}  // namespace

long long StageSpaces::history_count(int t) const {
  if (t < 0 || t > horizon())
    fail(ErrorKind::invalid_range, "history stage out of range");
  long long n = 1;
  for (int p = 0; p <= 2 * t; ++p) n *= position_radix(*this, p);
  return n;
}

void StageSpaces::check_history(const History& h) const {
  if (h.stage > horizon())
    fail(ErrorKind::instance_mismatch, "history stage exceeds horizon");
  for (int p = 0; p <= 2 * h.stage; ++p) {
    int e = h.entries[p];
    if (e < 0 || e >= position_radix(*this, p))
      fail(ErrorKind::instance_mismatch,
           "history entry out of bounds at position " + std::to_string(p));
  }
}

long long StageSpaces::index_of(const History& h) const {
  check_history(h);
  long long idx = 0;
  for (int p = 0; p <= 2 * h.stage; ++p)
    idx = idx * position_radix(*this, p) + h.entries[p];
  return idx;
}

History StageSpaces::history_at(int t, long long index) const {
  long long n = history_count(t);
  if (index < 0 || index >= n)
    fail(ErrorKind::invalid_range, "history index out of range");
  std::vector<int> e(2 * t + 1);
  for (int p = 2 * t; p >= 0; --p) {
    int radix = position_radix(*this, p);
    e[p] = static_cast<int>(index % radix);
    index /= radix;
  }
  return History(t, std::move(e));
}

History StageSpaces::extend(const History& h, int u, int w) const {
  if (h.stage >= horizon())
    fail(ErrorKind::horizon_exceeded,
         "cannot extend a history already at the horizon");
  if (u < 0 || u >= control_size(h.stage))
    fail(ErrorKind::instance_mismatch, "control index out of bounds");
  if (w < 0 || w >= uncertainty_size(h.stage + 1))
    fail(ErrorKind::instance_mismatch, "uncertainty index out of bounds");
  std::vector<int> e = h.entries;
  e.push_back(u);
  e.push_back(w);
  return History(h.stage + 1, std::move(e));
}

std::pair<History, HistorySegment> StageSpaces::split(const History& h,
                                                      int r) const {
  if (r < 0 || r > h.stage)
    fail(ErrorKind::invalid_split, "split stage outside [0, h.stage]");
  History prefix(r, std::vector<int>(h.entries.begin(),
                                     h.entries.begin() + 2 * r + 1));
  HistorySegment seg(r + 1, h.stage,
                     std::vector<int>(h.entries.begin() + 2 * r + 1,
                                      h.entries.end()));
  return {std::move(prefix), std::move(seg)};
}

History StageSpaces::concat(const History& prefix,
                            const HistorySegment& seg) const {
  if (!seg.empty() && seg.from_stage != prefix.stage + 1)
    fail(ErrorKind::instance_mismatch,
         "segment does not start where the prefix ends");
  std::vector<int> e = prefix.entries;
  e.insert(e.end(), seg.entries.begin(), seg.entries.end());
  int stage = seg.empty() ? prefix.stage : seg.to_stage;
  return History(stage, std::move(e));
}

long long StageSpaces::segment_count(int r, int s) const {
  if (s < r) return 1;
  long long n = 1;
  for (int k = r; k <= s; ++k)
    n *= static_cast<long long>(control_size(k - 1)) * uncertainty_size(k);
  return n;
}

long long StageSpaces::segment_index(const HistorySegment& seg) const {
  long long idx = 0;
  for (int k = seg.from_stage; k <= seg.to_stage; ++k) {
    int j = k - seg.from_stage;
    idx = idx * control_size(k - 1) + seg.entries[2 * j];
    idx = idx * uncertainty_size(k) + seg.entries[2 * j + 1];
  }
  return idx;
}

HistorySegment StageSpaces::segment_at(int r, int s, long long index) const {
  if (s < r) {
    if (index != 0)
      fail(ErrorKind::invalid_range, "empty segment has a single index");
    return HistorySegment(r, s, {});
  }
  std::vector<int> e(2 * (s - r + 1));
  for (int k = s; k >= r; --k) {
    int j = k - r;
    int wr = uncertainty_size(k);
    e[2 * j + 1] = static_cast<int>(index % wr);
    index /= wr;
    int ur = control_size(k - 1);
    e[2 * j] = static_cast<int>(index % ur);
    index /= ur;
  }
  if (index != 0) fail(ErrorKind::invalid_range, "segment index out of range");
  return HistorySegment(r, s, std::move(e));
}

}  // namespace tbdp
