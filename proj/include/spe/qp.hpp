#pragma once

#include "spe/problem.hpp"

#include <string>

namespace spe {

/// minimize ½vᵀQv + qᵀv  s.t.  A_eq v = b_eq,  A_in v ≤ b_in,  lb ≤ v ≤ ub.
/// Bounds may be ±∞. An empty Q means Q = 0.
struct QpProblem {
  Mat Q;
  Vec q;
  Mat A_eq;
  Vec b_eq;
  Mat A_in;
  Vec b_in;
  Vec lb;
  Vec ub;

  int n() const { return static_cast<int>(q.size()); }
  int m_eq() const { return static_cast<int>(b_eq.size()); }
  int m_in() const { return static_cast<int>(b_in.size()); }

  /// Resize empty members to consistent zero-row shapes and default bounds to (−∞, +∞).
  void normalize();
  double objective(const Vec& v) const;
};

enum class QpStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

std::string to_string(QpStatus s);

/// Duals follow  Qv + q + A_eqᵀy_eq + A_inᵀy_in − z_lb + z_ub = 0,  y_in, z_lb, z_ub ≥ 0.
struct QpSolution {
  QpStatus status = QpStatus::NumericalFailure;
  Vec v;
  Vec y_eq, y_in, z_lb, z_ub;
  double objective = 0.0;
  double dual_objective = 0.0;
  int iterations = 0;
  bool polished = false;

  Vec ray;                      // Unbounded: A_eq d = 0, A_in d ≤ 0, Qd = 0, qᵀd < 0
  Vec farkas_eq, farkas_in;     // Infeasible: multipliers of the elastic feasibility LP
  double infeasibility = 0.0;   // Infeasible: optimal elastic violation

  bool optimal() const { return status == QpStatus::Optimal; }
};

struct QpOptions {
  double tol = 1e-9;
  int max_iter = 200;
  bool polish = true;
  bool classify = true;
};

QpSolution solve_qp(const QpProblem& qp, const QpOptions& opt = {});
/// Same as solve_qp with Q ignored; uses independent primal and dual step lengths.
QpSolution solve_lp(const QpProblem& qp, const QpOptions& opt = {});

struct QpResiduals {
  double primal = 0, dual = 0, complementarity = 0, sign = 0;
  double max() const;
};
QpResiduals kkt_residuals(const QpProblem& qp, const QpSolution& sol);

/// Eigenvalue check λ_min(Q) ≥ −tol·max(1, ‖Q‖).
bool is_psd(const Mat& Q, double tol = 1e-10);

/// Top-level solve_qp / solve_lp calls made on this thread.
long long qp_solve_count();
void reset_qp_solve_count();

}  // namespace spe
