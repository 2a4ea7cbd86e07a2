#pragma once

#include "spe/problem.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace spe {

class TooManyArcs : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct EflArc {
  int i = 0, j = 0;  // tail, head
  double alpha0 = 0, alpha1 = 0;
};

/// Equilibrium facility location instance. Demand coefficients are indexed like `demand`,
/// supply coefficients like `supply`, facility data like `candidates`.
struct EflInstance {
  int n_nodes = 0;
  std::vector<EflArc> arcs;
  std::vector<int> candidates, demand, supply;
  Vec beta0, beta1;
  Vec gamma0, gamma1;
  Vec open_cost, unit_cost, capacity;
  double q_max = kInf;
  std::uint64_t seed = 0;

  int n_arcs() const { return static_cast<int>(arcs.size()); }
};

/// Random instance: arcs drawn without replacement from ordered pairs, subsets of sizes
/// ⌊3n/4⌋, ⌊n/2⌋, ⌊n/2⌋ drawn independently.
EflInstance generate_efl(int n_nodes, int n_arcs, std::uint64_t seed);

/// Lists problems with the instance; empty when valid.
std::vector<std::string> check_efl(const EflInstance& inst);

/// y = (f, d, s); one π0 row per candidate node, one π1 row per other node; x = q, z = opening.
/// x̄ᵢ = min(q̄ᵢ, q_max); the budget row is kept only when it is not implied by x̄.
BilevelSpeProblem efl_to_bilevel(const EflInstance& inst);

/// Row of node `node` in G = (G0; G1) as produced by efl_to_bilevel.
int efl_node_row(const EflInstance& inst, int node);

void write_efl(const EflInstance& inst, const std::string& dir);
EflInstance read_efl(const std::string& dir);

}  // namespace spe
