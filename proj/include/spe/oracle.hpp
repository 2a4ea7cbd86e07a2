#pragma once

#include "spe/problem.hpp"

#include <optional>
#include <stdexcept>

namespace spe {

class TooLarge : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct OracleOptions {
  int max_binaries = 8;
  long long max_points = 1000000;
  double tol = 1e-8;  // leader rows and price signs
};

struct OracleResult {
  bool feasible = false;
  double value = 0;  // leader objective at the best grid point
  Vec z, x;
  long long points = 0;       // grid size
  long long evaluations = 0;  // follower solves
  double lipschitz = 0;       // Σ_j max |ΔV / Δx_j| over neighbouring grid points
  double resolution = 0;      // lipschitz · step: distance bound between the grid best and the optimum
};

/// Enumerates integer z and a grid of x (0, step, 2·step, …, x̄), solving the follower at every
/// leader-feasible point and keeping points whose prices are nonnegative.
OracleResult grid_oracle(const BilevelSpeProblem& p, double step, const OracleOptions& opt = {});

/// Leader objective at (z, x) with the optimistic equilibrium price; nullopt when the follower is
/// infeasible or the price is negative.
std::optional<double> leader_value(const BilevelSpeProblem& p, const Vec& z, const Vec& x, double tol = 1e-8);

}  // namespace spe
