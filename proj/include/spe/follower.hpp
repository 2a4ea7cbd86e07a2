#pragma once

#include "spe/problem.hpp"
#include "spe/qp.hpp"

namespace spe {

inline constexpr double kTolFeas = 1e-8;

struct FollowerPrimalSolution {
  QpStatus status = QpStatus::NumericalFailure;
  Vec y, w;
  double objective = 0.0;  // Σ_blocks ½yᵀRy + rᵀy
  // Multipliers reported by the primal QP, same signs as the dual program.
  Vec pi0, pi1, mu_y, mu_w, theta_y, theta_w;

  bool ok() const { return status == QpStatus::Optimal; }
};

/// θ vectors are full length; entries at +∞ bounds are always zero.
struct FollowerDualSolution {
  QpStatus status = QpStatus::NumericalFailure;
  Vec pi0, pi1;
  Vec mu_y, mu_w;
  Vec theta_y, theta_w;
  Vec y;                   // y of the dual program, equal to the primal y at optimality
  double objective = 0.0;  // −½yᵀRy − hᵀπ − π0ᵀEx − ȳᵀθʸ − w̄ᵀθʷ

  bool ok() const { return status == QpStatus::Optimal; }
};

/// Throws std::invalid_argument if x is outside [0, x̄].
FollowerPrimalSolution solve_follower_primal(const BilevelSpeProblem& p, const Vec& x);
FollowerDualSolution solve_follower_dual(const BilevelSpeProblem& p, const Vec& x);

/// The primal QP's multipliers as a dual solution (objective evaluated at the primal y).
FollowerDualSolution primal_multipliers(const BilevelSpeProblem& p, const Vec& x, const FollowerPrimalSolution& primal);

/// Reduced costs recomputed at the primal point: μ, θ become the positive and negative parts of
/// Ry + r + Gᵀπ (Hᵀπ for w), θ only where the bound is finite. Objective re-evaluated at the primal y.
FollowerDualSolution realign_dual(const BilevelSpeProblem& p, const Vec& x, const FollowerPrimalSolution& primal,
                                  const FollowerDualSolution& dual);

struct PriceResult {
  QpStatus status = QpStatus::NumericalFailure;
  FollowerPrimalSolution primal;
  FollowerDualSolution dual;  // selected point of the optimal dual face
  bool multiple = false;      // dual face not a singleton in π
  bool negative_price = false;

  Vec pi0() const { return dual.pi0; }
  Vec pi1() const { return dual.pi1; }
};

struct PriceOptions {
  bool check_multiplicity = false;
};

/// ψ(x): optimistic selection on the optimal dual face, preferring π ≥ 0 and then maximal Σ_b ω_b π0ᵀEx.
PriceResult equilibrium_prices(const BilevelSpeProblem& p, const Vec& x, const PriceOptions& opt = {});

struct KktResidualReport {
  // Absolute maxima.
  double primal = 0;            // equalities and bounds on (y, w)
  double dual = 0;              // μ, θ ≥ 0
  double stationarity = 0;
  double complementarity = 0;   // max |product|
  double price_sign = 0;        // max(0, −π) over sign-constrained rows; not part of max_abs/max_rel
  // Row-scaled versions: residual / max(1, largest term in the row); complementarity as min(|a|, |b|).
  double primal_rel = 0;
  double stationarity_rel = 0;
  double complementarity_rel = 0;

  double max_abs() const;
  double max_rel() const;
};

KktResidualReport check_kkt(const BilevelSpeProblem& p, const Vec& x, const FollowerPrimalSolution& primal,
                            const FollowerDualSolution& dual);

/// Primal value φ_p(y) = Σ ½yᵀRy + rᵀy.
double follower_primal_value(const BilevelSpeProblem& p, const Vec& y);

}  // namespace spe
