#pragma once

#include "spe/problem.hpp"
#include "spe/qp.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace spe {

enum class VarKind { Z, X, Y, W, Pi0, Pi1, MuY, MuW, ThetaY, ThetaW };

std::string to_string(VarKind k);

/// Offsets of the canonical variable blocks (z, x, y, w, π0, π1, μʸ, μʷ, θʸ_fin, θʷ_fin).
struct ModelLayout {
  int z = 0, x = 0, y = 0, w = 0, pi0 = 0, pi1 = 0, mu_y = 0, mu_w = 0, th_y = 0, th_w = 0, n = 0;
  std::vector<int> fin_y, fin_w;  // θ slot k belongs to y index fin_y[k]

  static ModelLayout of(const BilevelSpeProblem& p);
};

struct ModelVar {
  VarKind kind;
  int index;  // position within its family
  std::string name;
};

/// SOS1 pair: (constant + coef·v[first]) ≥ 0, v[second] ≥ 0, product zero.
struct ComplementarityPair {
  int first = 0;
  double coef = 1.0;
  double constant = 0.0;
  int second = 0;

  double first_value(const Vec& v) const { return constant + coef * v[first]; }
};

enum class Formulation { Kkt, Duality };

/// Single-level model in canonical order. Objective is maximised: vᵀQv + qᵀv + constant.
struct SingleLevelModel {
  Formulation formulation = Formulation::Duality;
  ModelLayout layout;
  std::vector<ModelVar> vars;
  Vec lb, ub;
  Mat A_eq;
  Vec b_eq;
  Mat A_in;
  Vec b_in;
  std::vector<int> integers;  // integer-restricted variables (z and x masks)
  std::vector<ComplementarityPair> pairs;
  Mat Q;
  Vec q;
  double constant = 0.0;

  int n() const { return static_cast<int>(vars.size()); }
  double objective(const Vec& v) const { return v.dot(Q * v) + q.dot(v) + constant; }
  bool nonconvex() const { return formulation == Formulation::Kkt; }
};

struct BuildOptions {
  /// Coefficient tightening of leader rows that contain exactly one binary.
  bool strengthen_leader_rows = true;
};

SingleLevelModel build_kkt_model(const BilevelSpeProblem& p, const BuildOptions& opt = {});
SingleLevelModel build_duality_model(const BilevelSpeProblem& p, const BuildOptions& opt = {});

/// Bound change produced by branching. Integer: var ≤ bound (down) or var ≥ bound (up).
/// Complementarity: first quantity pinned to zero (side 0) or second variable pinned to zero (side 1).
struct BranchFixing {
  enum class Kind { Integer, Complementarity };
  Kind kind = Kind::Integer;
  int var = -1;
  bool up = false;
  double bound = 0.0;
  int pair = -1;
  int side = 0;

  static BranchFixing integer(int var, bool up, double bound) { return {Kind::Integer, var, up, bound, -1, 0}; }
  static BranchFixing complementarity(int pair, int side) { return {Kind::Complementarity, -1, false, 0.0, pair, side}; }
  std::string describe(const SingleLevelModel& m) const;
};

struct Relaxation {
  QpProblem qp;            // minimise −objective
  double constant = 0.0;   // model value = −qp objective + constant
  bool nonconvex = false;

  double model_value(double qp_objective) const { return -qp_objective + constant; }
};

/// Drops complementarity and integrality and applies the fixings as bound pins.
Relaxation build_relaxation(const SingleLevelModel& m, const std::vector<BranchFixing>& fixings = {});

struct ModelViolation {
  double linear = 0;           // row-scaled equality / inequality residual
  double bounds = 0;
  double complementarity = 0;  // max over pairs of min(first, second)
  double integrality = 0;

  double max() const;
};

ModelViolation model_violation(const SingleLevelModel& m, const Vec& v);

class NotKktFeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// KKT-model and Duality-model objectives at a canonical point.
double kkt_objective(const BilevelSpeProblem& p, const Vec& v);
double duality_objective(const BilevelSpeProblem& p, const Vec& v);

/// Σ_b ω_b (π0ᵀEx − dual expression); nonnegative on the relaxed constraint set.
double weak_duality_gap(const BilevelSpeProblem& p, const Vec& v);

/// |obj_KKT − obj_dual| at a point satisfying the single-level constraints to 1e-6.
double theorem1_gap(const BilevelSpeProblem& p, const Vec& v);

/// Canonical point assembled from leader decisions and follower primal/dual vectors.
Vec assemble_point(const BilevelSpeProblem& p, const Vec& z, const Vec& x, const Vec& y, const Vec& w,
                   const Vec& pi0, const Vec& pi1, const Vec& mu_y, const Vec& mu_w, const Vec& theta_y,
                   const Vec& theta_w);

/// Plain-text listing: header, var/eq/le/pair lines, then obj lines.
std::string dump_model(const SingleLevelModel& m);
/// The same listing without objective lines.
std::string serialize_constraints(const SingleLevelModel& m);

/// Leader rows after optional coefficient tightening (columns z then x).
void leader_rows(const BilevelSpeProblem& p, bool strengthen, Mat& A, Vec& b);

}  // namespace spe
