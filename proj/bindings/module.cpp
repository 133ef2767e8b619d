#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tbdp/bellman.hpp"
#include "tbdp/io.hpp"

namespace py = pybind11;

namespace {

// Runs a CLI command on an in-memory problem text; returns (exit status,
// report text).
std::pair<int, std::string> run(const std::string& problem_text,
                                const std::string& command, bool full,
                                double tolerance, long long budget,
                                int threads) {
  tbdp::CommandOptions options;
  options.command = command;
  options.problem_text = problem_text;
  options.full = full;
  options.tolerance = tolerance;
  options.budget = budget;
  options.threads = threads;
  tbdp::CommandResult result = tbdp::run_command(options);
  return {result.exit_status, result.report};
}

std::vector<double> solve_history_values(const std::string& problem_text,
                                         int stage) {
  tbdp::ProblemFile file = tbdp::parse_problem_text(problem_text);
  if (!file.flat) tbdp::fail(tbdp::ErrorKind::usage, "flat problem required");
  auto vfs = tbdp::solve_history_dp(*file.flat);
  std::vector<double> out;
  for (tbdp::Cost c : vfs.at(stage).values) out.push_back(c.value());
  return out;
}

}  // namespace

PYBIND11_MODULE(_tbdp, m) {
  m.doc() = "Finite-space multistage stochastic DP over history spaces";

  py::register_exception<tbdp::SolverError>(m, "SolverError");

  m.def("run_command", &run, py::arg("problem_text"), py::arg("command"),
        py::arg("full") = false, py::arg("tolerance") = 1e-9,
        py::arg("budget") = 10'000'000LL, py::arg("threads") = 1,
        "Run a solver command on problem text; returns (exit_status, "
        "report_json).");
  m.def("canonicalize", [](const std::string& text) {
    return tbdp::serialize_problem(tbdp::parse_problem_text(text));
  });
  m.def("digest", [](const std::string& text) {
    return tbdp::instance_digest(tbdp::parse_problem_text(text));
  });
  m.def("solve_history_values", &solve_history_values,
        py::arg("problem_text"), py::arg("stage"),
        "Value table of the history DP at the given stage.");
  m.def("lex_index", [](int days, int minutes, int d, int m) {
    return tbdp::TwoScaleClock{days, minutes}.lex_index(d, m);
  });
  m.def("lex_pair", [](int days, int minutes, int flat) {
    return tbdp::TwoScaleClock{days, minutes}.lex_pair(flat);
  });
}
