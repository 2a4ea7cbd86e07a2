#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spe {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOptimal = 0,
  kExitOther = 1,  // unbounded or numerical trouble
  kExitTimeLimit = 2,
  kExitInfeasible = 3,
  kExitInputError = 4,
};

struct RunConfig {
  std::string command;
  std::string instance;
  std::string formulation = "duality";
  double time_limit = 600.0;
  double gap = 1e-4;
  std::uint64_t seed = 1;
  double threshold = 0.5;
  int k = 10;
  std::string output;
  std::string samples;
  std::string log;
  int log_every = 1;
  int workers = 1;
  bool heuristic = true;
  bool force = false;
  int nodes = 10, arcs = 15;
  double step = 1.0;
};

/// Runs one command. Human-readable lines and JSON go to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spe
