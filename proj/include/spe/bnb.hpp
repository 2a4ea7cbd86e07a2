#pragma once

#include "spe/reformulate.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace spe {

struct BnbConfig {
  double gap = 1e-4;             // relative target
  double time_limit = 600.0;     // seconds, wall clock
  long long node_limit = -1;     // < 0: none
  double int_tol = 1e-9;
  double compl_tol = 1e-8;
  double verify_tol = 1e-8;
  bool root_probing = true;
  int probing_rounds = 4;
  bool probe_pairs = true;  // root probing also covers violated complementarity pairs
  bool root_local_search = true;  // flip and swap search on the integers at the root
  long long local_search_max_solves = 15;
  int workers = 1;
  std::ostream* log = nullptr;
  int log_every = 1;
};

enum class BnbStatus { OptimalWithinGap, TimeLimit, NodeLimit, Infeasible, Unbounded };

std::string to_string(BnbStatus s);

struct IncumbentEvent {
  long long node = 0;
  double value = 0.0;
  std::string source;  // "relaxation", "probe", "local", "completion", "heuristic"
  Vec point;
};

struct BnbResult {
  BnbStatus status = BnbStatus::Infeasible;
  bool has_incumbent = false;
  Vec incumbent;
  double objective = 0.0;   // ObjVal
  double bound = 0.0;       // ObjBnd
  double gap = 0.0;
  long long nodes = 0;
  double root_relax = 0.0;
  QpStatus root_status = QpStatus::NumericalFailure;
  long long probe_solves = 0;
  long long local_search_solves = 0;
  long long qp_solves = 0;
  long long heuristic_calls = 0;
  long long heuristic_rejected = 0;
  long long numerical_failures = 0;
  long long unbounded_node = -1;
  double seconds = 0.0;
  std::vector<IncumbentEvent> incumbents;
  std::vector<std::string> events;
};

/// gap = (bound − incumbent)/max(1, |incumbent|).
double relative_gap(double bound, double incumbent);

struct NodeContext {
  long long node = 0;
  int depth = 0;
  const Vec* point = nullptr;  // node relaxation solution
  double relaxation = 0.0;
  double global_bound = 0.0;
  int incumbents = 0;
  double incumbent_value = 0.0;
  bool forced = false;  // root improvement: the callback skips its invocation policy
};

/// Candidate canonical point or nothing. Every candidate is re-verified before acceptance.
using HeuristicFn = std::function<std::optional<Vec>(const NodeContext&)>;

struct BranchDecision {
  BranchFixing::Kind kind = BranchFixing::Kind::Integer;
  int index = -1;        // variable or pair
  double score = 0.0;    // fractionality or product violation
  std::array<BranchFixing, 2> children;
};

/// Binary closest to 0.5 first, then the complementarity pair with the largest product; ties to the lowest index.
std::optional<BranchDecision> select_branch(const Vec& v, const SingleLevelModel& m, double int_tol = 1e-9,
                                            double compl_tol = 1e-8);

/// Feasibility of a full point for the single-level model (constraints, complementarity, integrality).
bool verify_point(const SingleLevelModel& m, const Vec& v, double tol = 1e-8);

BnbResult solve(const SingleLevelModel& m, const BnbConfig& cfg = {}, const HeuristicFn& heuristic = {});

/// JSON mirror of the result; wall-clock fields are left out so that runs compare byte for byte.
std::string bnb_result_json(const SingleLevelModel& m, const BnbResult& r);

}  // namespace spe
