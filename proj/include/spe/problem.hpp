#pragma once

#include <Eigen/Dense>

#include <limits>
#include <string>
#include <vector>

namespace spe {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Extended-real +infinity used for unbounded follower variables.
inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline bool is_finite_bound(double v) { return v < kInf; }

/// Bilevel program with a spatial-price-equilibrium follower.
///
/// Leader:   max  Σ_j ω_j π0_j (E x)_j − c_xᵀx − c_zᵀz
///           s.t. A_P (z, x) ≤ b_P,  0 ≤ z ≤ z̄,  0 ≤ x ≤ x̄,  π = ψ(x) ≥ 0
/// Follower: min  ½yᵀRy + rᵀy
///           s.t. G0 y + H0 w − E x = h0   [π0]
///                G1 y + H1 w       = h1   [π1]
///                0 ≤ y ≤ ȳ,  0 ≤ w ≤ w̄   (ȳ, w̄ may be +∞)
///
/// Scenario blocks partition the follower variables and rows into independent
/// copies (one per sample in a sample-average model). Block b carries weight
/// ω_b in the leader objective. An instance with empty block vectors is a
/// single block of weight 1.
struct BilevelSpeProblem {
  // Leader.
  std::vector<bool> integer_z;
  std::vector<bool> integer_x;
  Vec c_z;
  Vec c_x;
  Vec ub_z;
  Vec ub_x;
  Mat leader_A;  // columns: z then x
  Vec leader_b;

  // Follower constraints.
  Mat G0, G1, H0, H1;
  Vec h0, h1;
  Mat coupling;  // E, rows(G0) × n_x
  Vec ub_y;
  Vec ub_w;
  std::vector<bool> price_free_row1;  // π1 rows exempt from π ≥ 0

  // Affine VI cost Φ(y) = R y + r.
  Mat R;
  Vec r;

  // Scenario blocks.
  std::vector<int> block_y, block_w, block_row0, block_row1;
  std::vector<double> block_weight;

  std::vector<std::string> z_names, x_names;

  int n_z() const { return static_cast<int>(c_z.size()); }
  int n_x() const { return static_cast<int>(c_x.size()); }
  int n_y() const { return static_cast<int>(ub_y.size()); }
  int n_w() const { return static_cast<int>(ub_w.size()); }
  int n_row0() const { return static_cast<int>(h0.size()); }
  int n_row1() const { return static_cast<int>(h1.size()); }
  int n_leader_rows() const { return static_cast<int>(leader_b.size()); }
  int n_blocks() const { return block_weight.empty() ? 1 : static_cast<int>(block_weight.size()); }

  int y_block(int i) const { return block_y.empty() ? 0 : block_y[i]; }
  int w_block(int i) const { return block_w.empty() ? 0 : block_w[i]; }
  int row0_block(int i) const { return block_row0.empty() ? 0 : block_row0[i]; }
  int row1_block(int i) const { return block_row1.empty() ? 0 : block_row1[i]; }
  double weight(int block) const { return block_weight.empty() ? 1.0 : block_weight[block]; }
  bool row1_price_free(int i) const { return !price_free_row1.empty() && price_free_row1[i]; }

  Mat G() const;  // (G0; G1)
  Mat H() const;  // (H0; H1)
  Vec h() const;  // (h0; h1)

  /// Right-hand side of the follower equalities for leader decision x: (E x + h0; h1).
  Vec follower_rhs(const Vec& x) const;

  /// Φ(y) = R y + r.
  Vec vi_cost(const Vec& y) const { return R * y + r; }

  /// Fill defaults for optional members (identity coupling, empty masks).
  void finalize();
};

/// ∞/finite index partition of the follower upper bounds, ascending.
struct BoundPartition {
  std::vector<int> inf_y, fin_y;
  std::vector<int> inf_w, fin_w;

  friend bool operator==(const BoundPartition&, const BoundPartition&) = default;
};

struct ValidationReport {
  std::vector<std::string> errors;

  bool ok() const { return errors.empty(); }
  bool mentions(const std::string& fragment) const;
};

/// Checks the standing assumptions: finite nonnegative leader bounds, ȳ, w̄
/// nonnegative or +∞, R symmetric positive definite, consistent dimensions and
/// block structure.
ValidationReport validate(const BilevelSpeProblem& problem);

BoundPartition partition_bounds(const BilevelSpeProblem& problem);

/// Extract scenario block b as a single-block problem sharing the leader data.
BilevelSpeProblem extract_block(const BilevelSpeProblem& problem, int block);

/// Indices belonging to block b in each follower family.
struct BlockIndex {
  std::vector<int> y, w, row0, row1;
};
BlockIndex block_index(const BilevelSpeProblem& problem, int block);

}  // namespace spe
