#pragma once

#include "spe/problem.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace spe {

class ZeroLoadRating : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class GeneratorBidRange : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Undirected line after merging. Arcs 2ℓ = (from → to) and 2ℓ+1 = (to → from).
struct RgupLine {
  int from = 0, to = 0;  // bus indices
  double reactance = 0, capacity = 0;
};

/// DC network with elastic loads, bid-curve generators and candidate renewable buses.
/// Load data is indexed like `loads`, generator data like `gens`, facility data like `candidates`.
struct RgupNetwork {
  std::vector<int> bus_ids;  // external labels; everything else uses positions in this list
  std::vector<RgupLine> lines;
  std::vector<int> loads;
  Vec load_mw;
  Vec beta0, beta1;
  std::vector<int> gens;
  Vec s_max, gamma0, gamma1;
  std::vector<int> candidates;
  Vec open_cost, unit_cost, capacity;

  int raw_lines = 0;  // before merging
  std::vector<std::string> warnings;

  int n_buses() const { return static_cast<int>(bus_ids.size()); }
  int n_lines() const { return static_cast<int>(lines.size()); }
  int n_arcs() const { return 2 * n_lines(); }
  int bus_index(int id) const;  // throws std::out_of_range
};

struct UncertaintySamples {
  Mat xi;  // K × |candidates|, entries in [0, 1]

  int K() const { return static_cast<int>(xi.rows()); }
};

/// Folder layout:
///   upper.csv                  bus, c, v, qbar
///   lower/buses.csv            bus
///   lower/lines.csv            from, to, reactance, capacity
///   lower/generators.csv       bus, smax, gamma0, gamma1
///   lower/loads.csv            bus, mw
/// Parallel lines are merged (reactance 1/Σ(1/x), capacity Σ). Demand slopes are filled in.
RgupNetwork load_ieee(const std::string& dir);

/// Lists problems with the network; empty when valid.
std::vector<std::string> check_rgup(const RgupNetwork& net);

/// β⁰ = 40 and β¹ = 10 / rating for every load; generator bids checked against 10 < γ⁰ < 33, 0.03 < γ¹ < 0.70.
void build_demand_slopes(RgupNetwork& net);

/// Fundamental cycles of a BFS spanning forest, one row per non-tree line, columns over arcs.
/// The entry of arc (i, j) is +s·x and of (j, i) is −s·x so the law binds net line flow.
/// `root` picks the bus the first tree is grown from.
Mat cycle_basis(const RgupNetwork& net, int root = 0);

UncertaintySamples generate_samples(int n_candidates, int K, std::uint64_t seed);
void write_samples(const RgupNetwork& net, const UncertaintySamples& s, const std::string& path);
UncertaintySamples read_samples(const RgupNetwork& net, const std::string& path);

/// K follower copies with y = (d, s), w = f. Block rows: candidate buses (π0, injection diag(ξ⟨k⟩) q),
/// other buses, then the loop rows (price free). Block weights 1/K. Leader rows qᵢ − q̄ᵢzᵢ ≤ 0 only.
BilevelSpeProblem rgup_to_bilevel(const RgupNetwork& net, const UncertaintySamples& samples, int loop_root = 0);

}  // namespace spe
