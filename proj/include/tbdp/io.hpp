#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tbdp/dhd.hpp"
#include "tbdp/noise.hpp"

namespace tbdp {

// A parsed problem file. Exactly one family is populated; for the flat
// family exactly one of {kernels, noise process} was declared.
struct ProblemFile {
  enum class Family { flat, two_scale, dhd };

  int version = 1;
  Family family = Family::flat;

  std::optional<ProblemSpec> flat;  // flat and two_scale families
  std::optional<TwoScaleClock> clock;
  std::optional<DhdProblem> dhd;

  std::optional<NoiseProcessSpec> noise_process;
  bool noise_zero_rows = false;  // conventional uniform rows were installed

  std::optional<BlockSchedule> schedule;
  std::optional<Reduction> reduction;
  std::optional<DhdReduction> dhd_reduction;
  std::optional<std::vector<Cost>> reduced_criterion;
};

ProblemFile parse_problem_text(const std::string& text);
ProblemFile parse_problem(const std::string& path);

// Canonical form: sorted keys, stable number formatting, "inf" for
// infinite costs. parse -> serialize -> parse is the identity on it.
std::string serialize_problem(const ProblemFile& file);

// FNV-1a over the canonical serialization.
std::string instance_digest(const ProblemFile& file);

struct CommandOptions {
  std::string command;
  std::string problem_path;
  std::string problem_text;  // used instead of the path when non-empty
  std::string out_path;      // empty: stdout
  bool full = false;
  unsigned long long seed = 0;
  int threads = 1;
  long long budget = 1'000'000;
  double tolerance = 1e-9;
};

struct CommandResult {
  int exit_status = 0;
  std::string report;
};

// Dispatches one CLI command; never throws (errors become exit statuses:
// 1 verification failure, 2 usage, 3 capacity).
CommandResult run_command(const CommandOptions& options);

}  // namespace tbdp
