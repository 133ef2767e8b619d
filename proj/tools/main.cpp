#include <cstdio>

#include <CLI11.hpp>

#include "tbdp/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Finite-space multistage stochastic DP solver"};
  app.failure_message(CLI::FailureMessage::simple);

  tbdp::CommandOptions options;
  app.add_option("--problem", options.problem_path, "Problem file path")
      ->required();
  app.add_option("--command", options.command,
                 "One of: solve-history, solve-reduced, solve-2ts, solve-dhd, "
                 "check-reduction, oracle, report")
      ->required();
  app.add_option("--out", options.out_path, "Write the report to this file");
  app.add_flag("--full", options.full, "Emit full value tables");
  app.add_option("--seed", options.seed, "Seed for generated fixtures");
  app.add_option("--threads", options.threads, "Worker threads for solves");
  app.add_option("--budget", options.budget,
                 "Table/enumeration budget in entries");
  app.add_option("--tolerance", options.tolerance,
                 "Verification tolerance (default 1e-9)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  tbdp::CommandResult result = tbdp::run_command(options);
  if (options.out_path.empty()) std::fputs(result.report.c_str(), stdout);
  return result.exit_status;
}
