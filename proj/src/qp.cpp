#include "spe/qp.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace spe {

namespace {

thread_local long long g_solve_count = 0;

constexpr double kDivergence = 1e12;
constexpr double kStepFactor = 0.995;

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

// min ½uᵀHu + cᵀu  s.t.  A u = b,  l ≤ u ≤ h.
struct StdForm {
  Mat H;
  Vec c;
  Mat A;
  Vec b;
  Vec l, h;
  bool lp = false;
};

enum class IpmStatus { Converged, Diverged, Stalled, IterationLimit };

struct IpmResult {
  IpmStatus status = IpmStatus::IterationLimit;
  Vec u, y, zl, zu;
  int iterations = 0;
};

// Mehrotra predictor-corrector on StdForm. Stationarity: Hu + c − Aᵀy − zl + zu = 0.
IpmResult ipm(const StdForm& f, const QpOptions& opt, double start_scale = 0.0) {
  const int n = static_cast<int>(f.c.size());
  const int m = static_cast<int>(f.b.size());
  std::vector<char> has_l(n), has_h(n);
  int n_bounds = 0;
  double l_scale = 0, h_scale = 0;
  for (int i = 0; i < n; ++i) {
    has_l[i] = std::isfinite(f.l[i]);
    has_h[i] = std::isfinite(f.h[i]);
    n_bounds += has_l[i] + has_h[i];
    if (has_l[i]) l_scale = std::max(l_scale, std::abs(f.l[i]));
    if (has_h[i]) h_scale = std::max(h_scale, std::abs(f.h[i]));
  }
  const double b_scale = 1.0 + inf_norm(f.b);
  const double c_scale = 1.0 + inf_norm(f.c);
  const double bound_scale = 1.0 + std::max(l_scale, h_scale);

  // Unit start, or one sized to the data on a retry.
  const double x0 = start_scale > 0 ? start_scale : 1.0;
  const double z0 = x0;
  IpmResult res;
  Vec u(n), xl = Vec::Zero(n), xu = Vec::Zero(n), zl = Vec::Zero(n), zu = Vec::Zero(n);
  Vec y = Vec::Zero(m);
  for (int i = 0; i < n; ++i) {
    double v = 0.0;
    if (has_l[i] && has_h[i]) {
      v = 0.5 * (f.l[i] + f.h[i]);
    } else if (has_l[i]) {
      v = std::max(0.0, f.l[i]);
    } else if (has_h[i]) {
      v = std::min(0.0, f.h[i]);
    }
    u[i] = v;
    if (has_l[i]) {
      xl[i] = std::max(u[i] - f.l[i], x0);
      zl[i] = z0;
    }
    if (has_h[i]) {
      xu[i] = std::max(f.h[i] - u[i], x0);
      zu[i] = z0;
    }
  }

  const double dp = 1e-10, dd = 1e-10;
  Mat M(n + m, n + m);
  Mat M0(n + m, n + m);
  double best_merit = kInf;
  int best_iter = 0;

  for (int it = 0; it < opt.max_iter; ++it) {
    res.iterations = it;
    Vec rd = f.H * u + f.c - f.A.transpose() * y - zl + zu;
    Vec rp = f.A * u - f.b;
    Vec rl = Vec::Zero(n), ru = Vec::Zero(n);
    double comp = 0.0;
    for (int i = 0; i < n; ++i) {
      if (has_l[i]) {
        rl[i] = u[i] - xl[i] - f.l[i];
        comp += xl[i] * zl[i];
      }
      if (has_h[i]) {
        ru[i] = u[i] + xu[i] - f.h[i];
        comp += xu[i] * zu[i];
      }
    }
    const double pobj = 0.5 * u.dot(f.H * u) + f.c.dot(u);
    const double pres = std::max(inf_norm(rp) / b_scale, std::max(inf_norm(rl), inf_norm(ru)) / bound_scale);
    const double dres = inf_norm(rd) / c_scale;
    const double gap = comp / (1.0 + std::abs(pobj));
    if (pres < opt.tol && dres < opt.tol && gap < opt.tol) {
      res.status = IpmStatus::Converged;
      break;
    }
    const double pnorm = std::max({inf_norm(u), inf_norm(xl), inf_norm(xu)});
    const double dnorm = std::max({inf_norm(y), inf_norm(zl), inf_norm(zu)});
    if (pnorm > kDivergence * bound_scale * b_scale || dnorm > kDivergence * c_scale) {
      res.status = IpmStatus::Diverged;
      break;
    }
    const double merit = std::max({pres, dres, gap});
    if (std::getenv("SPE_QP_DEBUG")) std::fprintf(stderr, "it %d pres %.3e dres %.3e gap %.3e pobj %.6e\n", it, pres, dres, gap, pobj);
    if (merit < 0.5 * best_merit) {
      best_merit = merit;
      best_iter = it;
    } else if (it - best_iter > 30) {
      res.status = IpmStatus::Stalled;
      break;
    }
    const double mu = n_bounds > 0 ? comp / n_bounds : 0.0;

    // Assemble and factor the quasi-definite system.
    Vec d = Vec::Zero(n);
    for (int i = 0; i < n; ++i) {
      if (has_l[i]) d[i] += zl[i] / xl[i];
      if (has_h[i]) d[i] += zu[i] / xu[i];
    }
    M0.setZero();
    M0.topLeftCorner(n, n) = f.H;
    M0.topLeftCorner(n, n).diagonal() += d;
    M0.topRightCorner(n, m) = f.A.transpose();
    M0.bottomLeftCorner(m, n) = f.A;
    M = M0;
    M.topLeftCorner(n, n).diagonal().array() += dp;
    M.bottomRightCorner(m, m).diagonal().array() -= dd;
    Eigen::PartialPivLU<Mat> lu(M);

    auto solve_newton = [&](const Vec& rcl, const Vec& rcu, Vec& du, Vec& dy, Vec& dxl, Vec& dxu, Vec& dzl,
                            Vec& dzu) {
      Vec rhs(n + m);
      for (int i = 0; i < n; ++i) {
        double r1 = -rd[i];
        if (has_l[i]) r1 += (-rcl[i] - zl[i] * rl[i]) / xl[i];
        if (has_h[i]) r1 -= (-rcu[i] + zu[i] * ru[i]) / xu[i];
        rhs[i] = r1;
      }
      rhs.tail(m) = -rp;
      Vec sol = lu.solve(rhs);
      for (int k = 0; k < 2; ++k) sol += lu.solve(rhs - M0 * sol);
      du = sol.head(n);
      dy = -sol.tail(m);
      dxl.setZero(n);
      dxu.setZero(n);
      dzl.setZero(n);
      dzu.setZero(n);
      for (int i = 0; i < n; ++i) {
        if (has_l[i]) {
          dxl[i] = du[i] + rl[i];
          dzl[i] = (-rcl[i] - zl[i] * dxl[i]) / xl[i];
        }
        if (has_h[i]) {
          dxu[i] = -ru[i] - du[i];
          dzu[i] = (-rcu[i] - zu[i] * dxu[i]) / xu[i];
        }
      }
    };
    auto max_step = [&](const Vec& x, const Vec& dx, const std::vector<char>& mask) {
      double a = kInf;
      for (int i = 0; i < n; ++i)
        if (mask[i] && dx[i] < 0) a = std::min(a, -x[i] / dx[i]);
      return a;
    };

    Vec du, dy, dxl, dxu, dzl, dzu;
    Vec rcl = Vec::Zero(n), rcu = Vec::Zero(n);
    for (int i = 0; i < n; ++i) {
      if (has_l[i]) rcl[i] = xl[i] * zl[i];
      if (has_h[i]) rcu[i] = xu[i] * zu[i];
    }
    solve_newton(rcl, rcu, du, dy, dxl, dxu, dzl, dzu);

    if (n_bounds > 0) {
      double ap = std::min({1.0, max_step(xl, dxl, has_l), max_step(xu, dxu, has_h)});
      double ad = std::min({1.0, max_step(zl, dzl, has_l), max_step(zu, dzu, has_h)});
      if (!f.lp) ap = ad = std::min(ap, ad);
      double comp_aff = 0.0;
      for (int i = 0; i < n; ++i) {
        if (has_l[i]) comp_aff += (xl[i] + ap * dxl[i]) * (zl[i] + ad * dzl[i]);
        if (has_h[i]) comp_aff += (xu[i] + ap * dxu[i]) * (zu[i] + ad * dzu[i]);
      }
      const double sigma = std::pow(std::max(0.0, comp_aff / n_bounds) / mu, 3);
      for (int i = 0; i < n; ++i) {
        if (has_l[i]) rcl[i] = xl[i] * zl[i] + dxl[i] * dzl[i] - sigma * mu;
        if (has_h[i]) rcu[i] = xu[i] * zu[i] + dxu[i] * dzu[i] - sigma * mu;
      }
      solve_newton(rcl, rcu, du, dy, dxl, dxu, dzl, dzu);
    }

    double ap = std::min(1.0, kStepFactor * std::min(max_step(xl, dxl, has_l), max_step(xu, dxu, has_h)));
    double ad = std::min(1.0, kStepFactor * std::min(max_step(zl, dzl, has_l), max_step(zu, dzu, has_h)));
    if (!std::isfinite(ap + ad) || !du.allFinite() || !dy.allFinite()) {
      res.status = IpmStatus::Stalled;
      break;
    }
    if (!f.lp) ap = ad = std::min(ap, ad);
    u += ap * du;
    xl += ap * dxl;
    xu += ap * dxu;
    y += ad * dy;
    zl += ad * dzl;
    zu += ad * dzu;
    for (int i = 0; i < n; ++i) {
      if (!has_l[i]) xl[i] = zl[i] = 0;
      if (!has_h[i]) xu[i] = zu[i] = 0;
    }
    res.iterations = it + 1;
  }
  res.u = u;
  res.y = y;
  res.zl = zl;
  res.zu = zu;
  return res;
}

// Multipliers for a fixed primal point when the reduced system leaves them undetermined:
// find y free, z ≥ 0 on the active bounds with Aᵀy + z_l − z_u = Hu + c.
bool fit_duals(const StdForm& f, const Vec& u, const std::vector<int>& side, double tol, Vec& y, Vec& zl, Vec& zu) {
  const int n = static_cast<int>(f.c.size());
  const int m = static_cast<int>(f.b.size());
  std::vector<int> act;
  for (int i = 0; i < n; ++i)
    if (side[i] != 0) act.push_back(i);
  const int na = static_cast<int>(act.size());
  StdForm d;
  d.lp = true;
  d.H = Mat::Zero(m + na, m + na);
  d.c = Vec::Zero(m + na);
  d.A = Mat::Zero(n, m + na);
  d.A.leftCols(m) = f.A.transpose();
  for (int k = 0; k < na; ++k) d.A(act[k], m + k) = side[act[k]] < 0 ? 1.0 : -1.0;
  d.b = f.H * u + f.c;
  d.l = Vec::Constant(m + na, -kInf);
  d.l.tail(na).setZero();
  d.h = Vec::Constant(m + na, kInf);
  QpOptions o;
  o.tol = tol;
  IpmResult r = ipm(d, o);
  if (r.status != IpmStatus::Converged) return false;
  y = r.u.head(m);
  zl.setZero(n);
  zu.setZero(n);
  for (int k = 0; k < na; ++k) {
    const double v = std::max(0.0, r.u[m + k]);
    if (side[act[k]] < 0) zl[act[k]] = v;
    else zu[act[k]] = v;
  }
  return true;
}

// Solve the equality-constrained problem given by the active bounds of an IPM point.
bool polish(const StdForm& f, IpmResult& r, double tol) {
  const int n = static_cast<int>(f.c.size());
  const int m = static_cast<int>(f.b.size());
  std::vector<int> fixed_side(n, 0);  // −1 lower, +1 upper
  std::vector<int> free_idx;
  Vec uf = Vec::Zero(n);
  for (int i = 0; i < n; ++i) {
    const bool hl = std::isfinite(f.l[i]), hh = std::isfinite(f.h[i]);
    const double sl = hl ? r.u[i] - f.l[i] : kInf;
    const double su = hh ? f.h[i] - r.u[i] : kInf;
    if (hl && sl < r.zl[i] && sl <= su) {
      fixed_side[i] = -1;
      uf[i] = f.l[i];
    } else if (hh && su < r.zu[i]) {
      fixed_side[i] = 1;
      uf[i] = f.h[i];
    } else {
      free_idx.push_back(i);
    }
  }
  const int nf = static_cast<int>(free_idx.size());
  Mat K = Mat::Zero(nf + m, nf + m);
  Vec rhs(nf + m);
  Vec hu_fixed = f.H * uf;
  Vec au_fixed = f.A * uf;
  for (int a = 0; a < nf; ++a) {
    const int i = free_idx[a];
    for (int b2 = 0; b2 < nf; ++b2) K(a, b2) = f.H(i, free_idx[b2]);
    for (int k = 0; k < m; ++k) {
      K(a, nf + k) = f.A(k, i);
      K(nf + k, a) = f.A(k, i);
    }
    rhs[a] = -f.c[i] - hu_fixed[i];
  }
  rhs.tail(m) = f.b - au_fixed;
  Eigen::FullPivLU<Mat> lu(K);
  Vec sol;
  if (lu.isInvertible()) {
    sol = lu.solve(rhs);
  } else {
    // Singular system: take the solution nearest the interior point.
    Vec sol0(nf + m);
    for (int a = 0; a < nf; ++a) sol0[a] = r.u[free_idx[a]];
    sol0.tail(m) = -r.y;
    sol = sol0 + K.completeOrthogonalDecomposition().solve(rhs - K * sol0);
  }
  if (!sol.allFinite()) return false;
  Vec u = uf;
  for (int a = 0; a < nf; ++a) u[free_idx[a]] = sol[a];
  // y here is −(multiplier of the K system) because K carries +Aᵀ.
  Vec y = -sol.tail(m);

  const double b_scale = 1.0 + inf_norm(f.b);
  const double c_scale = 1.0 + inf_norm(f.c);
  if (inf_norm(f.A * u - f.b) > tol * b_scale) return false;
  for (int a = 0; a < nf; ++a) {
    const int i = free_idx[a];
    const double s = tol * (1.0 + std::abs(u[i]));
    if (std::isfinite(f.l[i]) && u[i] < f.l[i] - s) return false;
    if (std::isfinite(f.h[i]) && u[i] > f.h[i] + s) return false;
  }
  Vec g = f.H * u + f.c - f.A.transpose() * y;
  Vec zl = Vec::Zero(n), zu = Vec::Zero(n);
  bool duals_ok = true;
  for (int i = 0; i < n && duals_ok; ++i) {
    if (fixed_side[i] == 0) {
      duals_ok = std::abs(g[i]) <= tol * c_scale;
    } else if (fixed_side[i] < 0) {
      duals_ok = g[i] >= -tol * c_scale;
      zl[i] = std::max(0.0, g[i]);
    } else {
      duals_ok = g[i] <= tol * c_scale;
      zu[i] = std::max(0.0, -g[i]);
    }
  }
  if (!duals_ok && !fit_duals(f, u, fixed_side, tol, y, zl, zu)) return false;
  const double obj_new = 0.5 * u.dot(f.H * u) + f.c.dot(u);
  const double obj_old = 0.5 * r.u.dot(f.H * r.u) + f.c.dot(r.u);
  if (obj_new > obj_old + 1e-7 * (1.0 + std::abs(obj_old))) return false;
  for (int i = 0; i < n; ++i) {
    if (std::isfinite(f.l[i])) u[i] = std::max(u[i], f.l[i]);
    if (std::isfinite(f.h[i])) u[i] = std::min(u[i], f.h[i]);
  }
  r.u = u;
  r.y = y;
  r.zl = zl;
  r.zu = zu;
  return true;
}

StdForm to_std(const QpProblem& p, bool lp) {
  const int n = p.n(), me = p.m_eq(), mi = p.m_in();
  StdForm f;
  f.lp = lp;
  f.H = Mat::Zero(n + mi, n + mi);
  if (!lp && p.Q.size() > 0) f.H.topLeftCorner(n, n) = p.Q;
  f.c = Vec::Zero(n + mi);
  f.c.head(n) = p.q;
  f.A = Mat::Zero(me + mi, n + mi);
  f.A.topLeftCorner(me, n) = p.A_eq;
  f.A.bottomLeftCorner(mi, n) = p.A_in;
  f.A.bottomRightCorner(mi, mi).setIdentity();
  f.b.resize(me + mi);
  f.b << p.b_eq, p.b_in;
  f.l = Vec::Zero(n + mi);
  f.h = Vec::Constant(n + mi, kInf);
  f.l.head(n) = p.lb;
  f.h.head(n) = p.ub;
  return f;
}

// Removes fixed variables and all-zero rows.
struct Presolved {
  QpProblem qp;
  std::vector<int> var_map;   // reduced → original
  std::vector<int> eq_map, in_map;
  Vec fixed_values;           // original size, valid where fixed
  std::vector<char> fixed;
  bool infeasible = false;
};

Presolved presolve(const QpProblem& p, bool lp) {
  Presolved ps;
  const int n = p.n();
  ps.fixed.assign(n, 0);
  ps.fixed_values = Vec::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (p.lb[i] > p.ub[i] + 1e-9 * (1.0 + std::abs(p.ub[i]))) ps.infeasible = true;
    if (std::isfinite(p.lb[i]) && p.ub[i] - p.lb[i] <= 1e-12 * (1.0 + std::abs(p.lb[i]))) {
      ps.fixed[i] = 1;
      ps.fixed_values[i] = p.lb[i];
    } else {
      ps.var_map.push_back(i);
    }
  }
  const int nr = static_cast<int>(ps.var_map.size());
  Vec vfix = ps.fixed_values;
  Vec q = p.q;
  if (!lp && p.Q.size() > 0) q += p.Q * vfix;
  Vec b_eq = p.b_eq - p.A_eq * vfix;
  Vec b_in = p.b_in - p.A_in * vfix;
  auto row_empty = [&](const Mat& A, int k) {
    for (int j : ps.var_map)
      if (A(k, j) != 0.0) return false;
    return true;
  };
  for (int k = 0; k < p.m_eq(); ++k) {
    if (row_empty(p.A_eq, k)) {
      if (std::abs(b_eq[k]) > 1e-9 * (1.0 + std::abs(p.b_eq[k]))) ps.infeasible = true;
    } else {
      ps.eq_map.push_back(k);
    }
  }
  for (int k = 0; k < p.m_in(); ++k) {
    if (row_empty(p.A_in, k)) {
      if (b_in[k] < -1e-9 * (1.0 + std::abs(p.b_in[k]))) ps.infeasible = true;
    } else {
      ps.in_map.push_back(k);
    }
  }
  QpProblem& r = ps.qp;
  r.Q = Mat::Zero(nr, nr);
  r.q.resize(nr);
  r.lb.resize(nr);
  r.ub.resize(nr);
  for (int a = 0; a < nr; ++a) {
    const int i = ps.var_map[a];
    r.q[a] = q[i];
    r.lb[a] = p.lb[i];
    r.ub[a] = p.ub[i];
    if (!lp && p.Q.size() > 0)
      for (int b2 = 0; b2 < nr; ++b2) r.Q(a, b2) = p.Q(i, ps.var_map[b2]);
  }
  r.A_eq.resize(ps.eq_map.size(), nr);
  r.b_eq.resize(ps.eq_map.size());
  for (size_t k = 0; k < ps.eq_map.size(); ++k) {
    for (int a = 0; a < nr; ++a) r.A_eq(k, a) = p.A_eq(ps.eq_map[k], ps.var_map[a]);
    r.b_eq[k] = b_eq[ps.eq_map[k]];
  }
  r.A_in.resize(ps.in_map.size(), nr);
  r.b_in.resize(ps.in_map.size());
  for (size_t k = 0; k < ps.in_map.size(); ++k) {
    for (int a = 0; a < nr; ++a) r.A_in(k, a) = p.A_in(ps.in_map[k], ps.var_map[a]);
    r.b_in[k] = b_in[ps.in_map[k]];
  }
  return ps;
}

void fill_objectives(const QpProblem& p, QpSolution& s, bool lp) {
  const Vec Qv = (!lp && p.Q.size() > 0) ? Vec(p.Q * s.v) : Vec(Vec::Zero(p.n()));
  s.objective = 0.5 * s.v.dot(Qv) + p.q.dot(s.v);
  double d = -0.5 * s.v.dot(Qv) - p.b_eq.dot(s.y_eq) - p.b_in.dot(s.y_in);
  for (int i = 0; i < p.n(); ++i) {
    if (s.z_lb[i] != 0.0) d += p.lb[i] * s.z_lb[i];
    if (s.z_ub[i] != 0.0) d -= p.ub[i] * s.z_ub[i];
  }
  s.dual_objective = d;
}

QpSolution solve_reduced(const QpProblem& p, const QpOptions& opt, bool lp);

// Elastic feasibility LP: min Σ violation of the equality and inequality rows.
QpSolution elastic(const QpProblem& p, const QpOptions& opt) {
  const int n = p.n(), me = p.m_eq(), mi = p.m_in();
  QpProblem e;
  const int ne = n + 2 * me + mi;
  e.q = Vec::Zero(ne);
  e.q.tail(2 * me + mi).setOnes();
  e.A_eq = Mat::Zero(me, ne);
  e.A_eq.leftCols(n) = p.A_eq;
  e.A_eq.block(0, n, me, me).setIdentity();
  e.A_eq.block(0, n + me, me, me) = -Mat::Identity(me, me);
  e.b_eq = p.b_eq;
  e.A_in = Mat::Zero(mi, ne);
  e.A_in.leftCols(n) = p.A_in;
  e.A_in.rightCols(mi) = -Mat::Identity(mi, mi);
  e.b_in = p.b_in;
  e.lb = Vec::Zero(ne);
  e.ub = Vec::Constant(ne, kInf);
  e.lb.head(n) = p.lb;
  e.ub.head(n) = p.ub;
  QpOptions o = opt;
  o.classify = false;
  return solve_reduced(e, o, true);
}

// Improving recession direction: min qᵀd over the normalised recession cone with Qd = 0.
QpSolution ray_lp(const QpProblem& p, bool lp, const QpOptions& opt) {
  const int n = p.n();
  QpProblem r;
  r.q = p.q;
  Mat rows_q(0, n);
  if (!lp && p.Q.size() > 0 && n > 0) {
    Eigen::SelfAdjointEigenSolver<Mat> es(p.Q);
    const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    std::vector<int> keep;
    for (int k = 0; k < n; ++k)
      if (es.eigenvalues()[k] > 1e-9 * scale) keep.push_back(k);
    rows_q.resize(keep.size(), n);
    for (size_t k = 0; k < keep.size(); ++k) rows_q.row(k) = es.eigenvectors().col(keep[k]).transpose();
  }
  r.A_eq.resize(p.m_eq() + rows_q.rows(), n);
  r.A_eq << p.A_eq, rows_q;
  r.b_eq = Vec::Zero(r.A_eq.rows());
  r.A_in = p.A_in;
  r.b_in = Vec::Zero(p.m_in());
  r.lb = Vec::Constant(n, -1.0);
  r.ub = Vec::Constant(n, 1.0);
  for (int i = 0; i < n; ++i) {
    if (std::isfinite(p.lb[i])) r.lb[i] = 0.0;
    if (std::isfinite(p.ub[i])) r.ub[i] = 0.0;
  }
  QpOptions o = opt;
  o.classify = false;
  return solve_reduced(r, o, true);
}

QpSolution solve_reduced(const QpProblem& p, const QpOptions& opt, bool lp) {
  const int n = p.n();
  QpSolution s;
  StdForm f = to_std(p, lp);
  IpmResult r = ipm(f, opt);
  if (r.status != IpmStatus::Converged) {
    const double scale = std::sqrt((1.0 + inf_norm(f.b)) * (1.0 + inf_norm(f.c)));
    IpmResult retry = ipm(f, opt, std::max(10.0, scale));
    retry.iterations += r.iterations;
    if (retry.status == IpmStatus::Converged) r = retry;
  }
  s.iterations = r.iterations;
  if (r.status == IpmStatus::Converged) {
    if (opt.polish) s.polished = polish(f, r, 1e-9);
    s.status = QpStatus::Optimal;
    s.v = r.u.head(n);
    s.y_eq = -r.y.head(p.m_eq());
    s.z_lb = r.zl.head(n);
    s.z_ub = r.zu.head(n);
    // Inequality duals are the slack lower-bound multipliers.
    s.y_in = r.zl.tail(p.m_in());
    for (int i = 0; i < n; ++i) {
      if (!std::isfinite(p.lb[i])) s.z_lb[i] = 0;
      if (!std::isfinite(p.ub[i])) s.z_ub[i] = 0;
    }
    fill_objectives(p, s, lp);
    return s;
  }
  s.v = r.u.head(n);
  s.y_eq = Vec::Zero(p.m_eq());
  s.y_in = Vec::Zero(p.m_in());
  s.z_lb = Vec::Zero(n);
  s.z_ub = Vec::Zero(n);
  s.status = QpStatus::NumericalFailure;
  if (!opt.classify) return s;

  QpSolution el = elastic(p, opt);
  if (!el.optimal()) return s;
  const double scale = 1.0 + std::max(inf_norm(p.b_eq), inf_norm(p.b_in));
  if (el.objective > 1e-7 * scale) {
    s.status = QpStatus::Infeasible;
    s.infeasibility = el.objective;
    s.farkas_eq = el.y_eq;
    s.farkas_in = el.y_in;
    return s;
  }
  QpSolution ray = ray_lp(p, lp, opt);
  if (ray.optimal() && ray.objective < -1e-9 * (1.0 + inf_norm(p.q))) {
    s.status = QpStatus::Unbounded;
    s.ray = ray.v;
    s.v = el.v.head(n);
    return s;
  }
  return s;
}

QpSolution solve_impl(const QpProblem& in, const QpOptions& opt, bool lp) {
  QpProblem p = in;
  p.normalize();
  const int n = p.n();
  Presolved ps = presolve(p, lp);
  QpSolution out;
  out.v = Vec::Zero(n);
  out.y_eq = Vec::Zero(p.m_eq());
  out.y_in = Vec::Zero(p.m_in());
  out.z_lb = Vec::Zero(n);
  out.z_ub = Vec::Zero(n);
  if (ps.infeasible) {
    out.status = QpStatus::Infeasible;
    return out;
  }
  QpSolution red = solve_reduced(ps.qp, opt, lp);
  out.status = red.status;
  out.iterations = red.iterations;
  out.polished = red.polished;
  out.infeasibility = red.infeasibility;
  out.v = ps.fixed_values;
  for (size_t a = 0; a < ps.var_map.size(); ++a) out.v[ps.var_map[a]] = red.v[a];
  if (red.status == QpStatus::Unbounded) {
    out.ray = Vec::Zero(n);
    for (size_t a = 0; a < ps.var_map.size(); ++a) out.ray[ps.var_map[a]] = red.ray[a];
  }
  if (red.status == QpStatus::Infeasible) {
    out.farkas_eq = Vec::Zero(p.m_eq());
    out.farkas_in = Vec::Zero(p.m_in());
    for (size_t k = 0; k < ps.eq_map.size(); ++k) out.farkas_eq[ps.eq_map[k]] = red.farkas_eq[k];
    for (size_t k = 0; k < ps.in_map.size(); ++k) out.farkas_in[ps.in_map[k]] = red.farkas_in[k];
  }
  if (red.status != QpStatus::Optimal) return out;
  for (size_t k = 0; k < ps.eq_map.size(); ++k) out.y_eq[ps.eq_map[k]] = red.y_eq[k];
  for (size_t k = 0; k < ps.in_map.size(); ++k) out.y_in[ps.in_map[k]] = red.y_in[k];
  for (size_t a = 0; a < ps.var_map.size(); ++a) {
    out.z_lb[ps.var_map[a]] = red.z_lb[a];
    out.z_ub[ps.var_map[a]] = red.z_ub[a];
  }
  // Fixed variables take whatever bound multiplier closes stationarity.
  Vec g = p.q + p.A_eq.transpose() * out.y_eq + p.A_in.transpose() * out.y_in;
  if (!lp && p.Q.size() > 0) g += p.Q * out.v;
  for (int i = 0; i < n; ++i) {
    if (!ps.fixed[i]) continue;
    if (g[i] >= 0) {
      out.z_lb[i] = g[i];
    } else {
      out.z_ub[i] = -g[i];
    }
  }
  fill_objectives(p, out, lp);
  return out;
}

}  // namespace

void QpProblem::normalize() {
  const int n = this->n();
  if (Q.size() == 0) Q.resize(0, 0);
  if (A_eq.size() == 0) A_eq.resize(b_eq.size(), n);
  if (A_in.size() == 0) A_in.resize(b_in.size(), n);
  if (A_eq.rows() == 0) A_eq.resize(0, n);
  if (A_in.rows() == 0) A_in.resize(0, n);
  if (lb.size() == 0) lb = Vec::Constant(n, -kInf);
  if (ub.size() == 0) ub = Vec::Constant(n, kInf);
}

double QpProblem::objective(const Vec& v) const {
  double o = q.dot(v);
  if (Q.size() > 0) o += 0.5 * v.dot(Q * v);
  return o;
}

std::string to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "Optimal";
    case QpStatus::Infeasible: return "Infeasible";
    case QpStatus::Unbounded: return "Unbounded";
    case QpStatus::NumericalFailure: return "NumericalFailure";
  }
  return "?";
}

QpSolution solve_qp(const QpProblem& qp, const QpOptions& opt) {
  ++g_solve_count;
  const bool lp = qp.Q.size() == 0 || qp.Q.cwiseAbs().maxCoeff() == 0.0;
  return solve_impl(qp, opt, lp);
}

QpSolution solve_lp(const QpProblem& qp, const QpOptions& opt) {
  ++g_solve_count;
  return solve_impl(qp, opt, true);
}

double QpResiduals::max() const { return std::max({primal, dual, complementarity, sign}); }

QpResiduals kkt_residuals(const QpProblem& in, const QpSolution& s) {
  QpProblem p = in;
  p.normalize();
  QpResiduals r;
  const Vec& v = s.v;
  const double bs = 1.0 + std::max(inf_norm(p.b_eq), inf_norm(p.b_in));
  r.primal = inf_norm(p.A_eq * v - p.b_eq) / bs;
  if (p.m_in() > 0) r.primal = std::max(r.primal, std::max(0.0, (p.A_in * v - p.b_in).maxCoeff()) / bs);
  for (int i = 0; i < p.n(); ++i) {
    if (std::isfinite(p.lb[i])) r.primal = std::max(r.primal, std::max(0.0, p.lb[i] - v[i]) / (1.0 + std::abs(p.lb[i])));
    if (std::isfinite(p.ub[i])) r.primal = std::max(r.primal, std::max(0.0, v[i] - p.ub[i]) / (1.0 + std::abs(p.ub[i])));
  }
  Vec g = p.q + p.A_eq.transpose() * s.y_eq + p.A_in.transpose() * s.y_in - s.z_lb + s.z_ub;
  if (p.Q.size() > 0) g += p.Q * v;
  r.dual = inf_norm(g) / (1.0 + inf_norm(p.q));
  double sign = 0.0;
  if (s.y_in.size() > 0) sign = std::max(sign, -s.y_in.minCoeff());
  if (s.z_lb.size() > 0) sign = std::max(sign, -s.z_lb.minCoeff());
  if (s.z_ub.size() > 0) sign = std::max(sign, -s.z_ub.minCoeff());
  r.sign = sign;
  double comp = 0.0;
  for (int k = 0; k < p.m_in(); ++k) comp = std::max(comp, std::abs(s.y_in[k] * (p.b_in[k] - p.A_in.row(k).dot(v))));
  for (int i = 0; i < p.n(); ++i) {
    if (std::isfinite(p.lb[i])) comp = std::max(comp, std::abs(s.z_lb[i] * (v[i] - p.lb[i])));
    if (std::isfinite(p.ub[i])) comp = std::max(comp, std::abs(s.z_ub[i] * (p.ub[i] - v[i])));
  }
  r.complementarity = comp / (1.0 + std::abs(s.objective));
  return r;
}

bool is_psd(const Mat& Q, double tol) {
  if (Q.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (Q + Q.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol * std::max(1.0, Q.cwiseAbs().maxCoeff());
}

long long qp_solve_count() { return g_solve_count; }
void reset_qp_solve_count() { g_solve_count = 0; }

}  // namespace spe
