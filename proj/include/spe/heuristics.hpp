#pragma once

#include "spe/bnb.hpp"
#include "spe/follower.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace spe {

struct RhConfig {
  double threshold = 0.5;
  int always_until = 2;  // run at every node until this many incumbents exist
  double p = 0.05;       // then with this probability
  std::uint64_t seed = 1;
  double tol = 1e-8;
  bool price_face_fallback = true;  // on a negative dual price, search the optimal dual face for π ≥ 0

  static RhConfig efl() { return {}; }
  static RhConfig rgup() {
    RhConfig c;
    c.always_until = 1;
    c.p = 0.0;
    c.price_face_fallback = false;
    return c;
  }
};

enum class RhFailure { None, LeaderInfeasible, FollowerInfeasible, NegativePrice, KktResidual };

std::string to_string(RhFailure f);

struct RhCandidate {
  RhFailure failure = RhFailure::None;
  Vec z, x;
  Vec point;            // canonical model point
  double objective = 0; // Duality objective
  double kkt_residual = 0;
  double min_price = 0;
  long long qp_solves = 0;
  std::vector<int> failed_blocks;

  bool ok() const { return failure == RhFailure::None; }
};

/// x_j is gated by z_i when some leader row reads a·x_j − b·z_i ≤ 0 with a, b > 0 and nothing else.
std::vector<int> gating_binary(const BilevelSpeProblem& p);

/// Threshold rounding of z, zeroing of x gated by closed binaries, proportional scaling of x into P̄,
/// then the follower primal and dual solves at the rounded point.
RhCandidate round_and_repair(const BilevelSpeProblem& p, const Vec& z_hat, const Vec& x_hat, const RhConfig& cfg);

/// Per-sample variant: exactly one primal and one dual solve per scenario block, no dual-face search.
RhCandidate round_and_repair_rgup(const BilevelSpeProblem& p, const Vec& z_hat, const Vec& x_hat,
                                  const RhConfig& cfg);

struct RhStats {
  long long invocations = 0;
  long long candidates = 0;
  long long qp_solves = 0;
  std::vector<long long> failures = std::vector<long long>(5, 0);
  std::vector<RhCandidate> accepted;  // every candidate handed to the search
};

/// B&B callback with the invocation policy of `cfg`. `p` must outlive the callback; `stats` may be null.
HeuristicFn make_rh_callback(const BilevelSpeProblem& p, const SingleLevelModel& m, const RhConfig& cfg,
                             bool per_sample, std::shared_ptr<RhStats> stats = nullptr);

}  // namespace spe
