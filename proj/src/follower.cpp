#include "spe/follower.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spe {

namespace {

void check_x(const BilevelSpeProblem& p, const Vec& x) {
  if (x.size() != p.n_x()) throw std::invalid_argument("leader vector has wrong length");
  for (int i = 0; i < p.n_x(); ++i) {
    const double tol = 1e-9 * (1.0 + p.ub_x[i]);
    if (!(x[i] >= -tol && x[i] <= p.ub_x[i] + tol)) throw std::invalid_argument("leader vector outside [0, x_ub]");
  }
}

template <typename F>
void for_blocks(const BilevelSpeProblem& p, F&& f) {
  if (p.n_blocks() == 1) {
    f(p, BlockIndex{}, true);
    return;
  }
  for (int b = 0; b < p.n_blocks(); ++b) f(extract_block(p, b), block_index(p, b), false);
}

void scatter(Vec& dst, const Vec& src, const std::vector<int>& idx, bool whole) {
  if (whole) {
    dst = src;
    return;
  }
  for (size_t k = 0; k < idx.size(); ++k) dst[idx[k]] = src[k];
}

FollowerPrimalSolution primal_single(const BilevelSpeProblem& p, const Vec& x) {
  const int ny = p.n_y(), nw = p.n_w();
  QpProblem qp;
  qp.Q = Mat::Zero(ny + nw, ny + nw);
  qp.Q.topLeftCorner(ny, ny) = p.R;
  qp.q = Vec::Zero(ny + nw);
  qp.q.head(ny) = p.r;
  qp.A_eq.resize(p.n_row0() + p.n_row1(), ny + nw);
  qp.A_eq << p.G(), p.H();
  qp.b_eq = p.follower_rhs(x);
  qp.lb = Vec::Zero(ny + nw);
  qp.ub.resize(ny + nw);
  qp.ub << p.ub_y, p.ub_w;
  QpSolution s = solve_qp(qp);
  FollowerPrimalSolution out;
  out.status = s.status;
  out.y = s.v.head(ny);
  out.w = s.v.tail(nw);
  out.objective = 0.5 * out.y.dot(p.R * out.y) + p.r.dot(out.y);
  if (s.optimal()) {
    out.pi0 = s.y_eq.head(p.n_row0());
    out.pi1 = s.y_eq.tail(p.n_row1());
    out.mu_y = s.z_lb.head(ny);
    out.mu_w = s.z_lb.tail(nw);
    out.theta_y = s.z_ub.head(ny);
    out.theta_w = s.z_ub.tail(nw);
  } else {
    out.pi0 = Vec::Zero(p.n_row0());
    out.pi1 = Vec::Zero(p.n_row1());
    out.mu_y = out.theta_y = Vec::Zero(ny);
    out.mu_w = out.theta_w = Vec::Zero(nw);
  }
  return out;
}

// Dual program with the fin/∞ partition: θ only on finite bounds.
FollowerDualSolution dual_single(const BilevelSpeProblem& p, const Vec& x) {
  const int ny = p.n_y(), nw = p.n_w(), m0 = p.n_row0(), m1 = p.n_row1(), m = m0 + m1;
  const BoundPartition part = partition_bounds(p);
  const int nfy = static_cast<int>(part.fin_y.size()), nfw = static_cast<int>(part.fin_w.size());
  // Variables: y | π | μʸ | μʷ | θʸ_fin | θʷ_fin
  const int oy = 0, opi = ny, omy = opi + m, omw = omy + ny, oty = omw + nw, otw = oty + nfy, n = otw + nfw;
  QpProblem qp;
  qp.Q = Mat::Zero(n, n);
  qp.Q.block(oy, oy, ny, ny) = p.R;
  qp.q = Vec::Zero(n);
  qp.q.segment(opi, m0) = p.coupling * x + p.h0;
  qp.q.segment(opi + m0, m1) = p.h1;
  for (int k = 0; k < nfy; ++k) qp.q[oty + k] = p.ub_y[part.fin_y[k]];
  for (int k = 0; k < nfw; ++k) qp.q[otw + k] = p.ub_w[part.fin_w[k]];
  qp.A_eq = Mat::Zero(ny + nw, n);
  qp.b_eq = Vec::Zero(ny + nw);
  const Mat G = p.G(), H = p.H();
  qp.A_eq.block(0, oy, ny, ny) = p.R;
  qp.A_eq.block(0, opi, ny, m) = G.transpose();
  qp.A_eq.block(0, omy, ny, ny) = -Mat::Identity(ny, ny);
  for (int k = 0; k < nfy; ++k) qp.A_eq(part.fin_y[k], oty + k) = 1.0;
  qp.b_eq.head(ny) = -p.r;
  qp.A_eq.block(ny, opi, nw, m) = H.transpose();
  qp.A_eq.block(ny, omw, nw, nw) = -Mat::Identity(nw, nw);
  for (int k = 0; k < nfw; ++k) qp.A_eq(ny + part.fin_w[k], otw + k) = 1.0;
  qp.lb = Vec::Constant(n, -kInf);
  qp.ub = Vec::Constant(n, kInf);
  qp.lb.tail(n - omy).setZero();
  QpSolution s = solve_qp(qp);

  FollowerDualSolution out;
  out.status = s.status;
  out.y = s.v.segment(oy, ny);
  out.pi0 = s.v.segment(opi, m0);
  out.pi1 = s.v.segment(opi + m0, m1);
  out.mu_y = s.v.segment(omy, ny);
  out.mu_w = s.v.segment(omw, nw);
  out.theta_y = Vec::Zero(ny);
  out.theta_w = Vec::Zero(nw);
  for (int k = 0; k < nfy; ++k) out.theta_y[part.fin_y[k]] = s.v[oty + k];
  for (int k = 0; k < nfw; ++k) out.theta_w[part.fin_w[k]] = s.v[otw + k];
  out.objective = -s.objective;
  return out;
}

FollowerDualSolution empty_dual(const BilevelSpeProblem& p) {
  FollowerDualSolution d;
  d.status = QpStatus::Optimal;
  d.pi0 = Vec::Zero(p.n_row0());
  d.pi1 = Vec::Zero(p.n_row1());
  d.mu_y = Vec::Zero(p.n_y());
  d.mu_w = Vec::Zero(p.n_w());
  d.theta_y = Vec::Zero(p.n_y());
  d.theta_w = Vec::Zero(p.n_w());
  d.y = Vec::Zero(p.n_y());
  return d;
}

void merge_status(QpStatus& acc, QpStatus s) {
  if (acc == QpStatus::Optimal) acc = s;
}

// LP over the optimal dual face at the primal point (y*, w*).
FollowerDualSolution face_lp(const BilevelSpeProblem& p, const Vec& x, const FollowerPrimalSolution& prim,
                             bool nonneg_prices, const Vec& objective_pi, QpStatus& status) {
  const int ny = p.n_y(), nw = p.n_w(), m0 = p.n_row0(), m1 = p.n_row1(), m = m0 + m1;
  const int opi = 0, omy = m, omw = omy + ny, oty = omw + nw, otw = oty + ny, n = otw + nw;
  const Vec phi = p.R * prim.y + p.r;
  QpProblem lp;
  lp.q = Vec::Zero(n);
  lp.q.segment(opi, m) = objective_pi;
  lp.A_eq = Mat::Zero(ny + nw, n);
  lp.b_eq = Vec::Zero(ny + nw);
  const Mat G = p.G(), H = p.H();
  lp.A_eq.block(0, opi, ny, m) = G.transpose();
  lp.A_eq.block(0, omy, ny, ny) = -Mat::Identity(ny, ny);
  lp.A_eq.block(0, oty, ny, ny) = Mat::Identity(ny, ny);
  lp.b_eq.head(ny) = -phi;
  lp.A_eq.block(ny, opi, nw, m) = H.transpose();
  lp.A_eq.block(ny, omw, nw, nw) = -Mat::Identity(nw, nw);
  lp.A_eq.block(ny, otw, nw, nw) = Mat::Identity(nw, nw);
  lp.lb = Vec::Zero(n);
  lp.ub = Vec::Constant(n, kInf);
  for (int k = 0; k < m; ++k) {
    const bool free_row = k >= m0 && p.row1_price_free(k - m0);
    if (!nonneg_prices || free_row) lp.lb[k] = -kInf;
  }
  auto pin = [&](int var, bool active) {
    if (!active) lp.ub[var] = 0.0;
  };
  for (int i = 0; i < ny; ++i) {
    const double tol = 1e-7 * (1.0 + std::abs(prim.y[i]));
    pin(omy + i, prim.y[i] <= tol);
    pin(oty + i, is_finite_bound(p.ub_y[i]) && prim.y[i] >= p.ub_y[i] - 1e-7 * (1.0 + p.ub_y[i]));
  }
  for (int i = 0; i < nw; ++i) {
    const double tol = 1e-7 * (1.0 + std::abs(prim.w[i]));
    pin(omw + i, prim.w[i] <= tol);
    pin(otw + i, is_finite_bound(p.ub_w[i]) && prim.w[i] >= p.ub_w[i] - 1e-7 * (1.0 + p.ub_w[i]));
  }
  QpSolution s = solve_lp(lp);
  status = s.status;
  FollowerDualSolution d;
  d.status = s.status;
  if (!s.optimal()) return d;
  d.y = prim.y;
  d.pi0 = s.v.segment(opi, m0);
  d.pi1 = s.v.segment(opi + m0, m1);
  d.mu_y = s.v.segment(omy, ny);
  d.mu_w = s.v.segment(omw, nw);
  d.theta_y = s.v.segment(oty, ny);
  d.theta_w = s.v.segment(otw, nw);
  Vec pi(m);
  pi << d.pi0, d.pi1;
  d.objective = -0.5 * prim.y.dot(p.R * prim.y) - p.h().dot(pi) - d.pi0.dot(p.coupling * x);
  for (int i = 0; i < ny; ++i)
    if (is_finite_bound(p.ub_y[i])) d.objective -= p.ub_y[i] * d.theta_y[i];
  for (int i = 0; i < nw; ++i)
    if (is_finite_bound(p.ub_w[i])) d.objective -= p.ub_w[i] * d.theta_w[i];
  return d;
}

}  // namespace

double follower_primal_value(const BilevelSpeProblem& p, const Vec& y) {
  return 0.5 * y.dot(p.R * y) + p.r.dot(y);
}

FollowerPrimalSolution solve_follower_primal(const BilevelSpeProblem& p, const Vec& x) {
  check_x(p, x);
  FollowerPrimalSolution out;
  out.status = QpStatus::Optimal;
  out.y = Vec::Zero(p.n_y());
  out.w = Vec::Zero(p.n_w());
  out.pi0 = Vec::Zero(p.n_row0());
  out.pi1 = Vec::Zero(p.n_row1());
  out.mu_y = out.theta_y = Vec::Zero(p.n_y());
  out.mu_w = out.theta_w = Vec::Zero(p.n_w());
  for_blocks(p, [&](const BilevelSpeProblem& b, const BlockIndex& idx, bool whole) {
    FollowerPrimalSolution s = primal_single(b, x);
    merge_status(out.status, s.status);
    scatter(out.y, s.y, idx.y, whole);
    scatter(out.w, s.w, idx.w, whole);
    scatter(out.pi0, s.pi0, idx.row0, whole);
    scatter(out.pi1, s.pi1, idx.row1, whole);
    scatter(out.mu_y, s.mu_y, idx.y, whole);
    scatter(out.mu_w, s.mu_w, idx.w, whole);
    scatter(out.theta_y, s.theta_y, idx.y, whole);
    scatter(out.theta_w, s.theta_w, idx.w, whole);
  });
  out.objective = follower_primal_value(p, out.y);
  return out;
}

FollowerDualSolution solve_follower_dual(const BilevelSpeProblem& p, const Vec& x) {
  check_x(p, x);
  FollowerDualSolution out = empty_dual(p);
  out.objective = 0.0;
  for_blocks(p, [&](const BilevelSpeProblem& b, const BlockIndex& idx, bool whole) {
    FollowerDualSolution s = dual_single(b, x);
    merge_status(out.status, s.status);
    scatter(out.y, s.y, idx.y, whole);
    scatter(out.pi0, s.pi0, idx.row0, whole);
    scatter(out.pi1, s.pi1, idx.row1, whole);
    scatter(out.mu_y, s.mu_y, idx.y, whole);
    scatter(out.mu_w, s.mu_w, idx.w, whole);
    scatter(out.theta_y, s.theta_y, idx.y, whole);
    scatter(out.theta_w, s.theta_w, idx.w, whole);
    out.objective += s.objective;
  });
  return out;
}

PriceResult equilibrium_prices(const BilevelSpeProblem& p, const Vec& x, const PriceOptions& opt) {
  PriceResult res;
  res.primal = solve_follower_primal(p, x);
  if (!res.primal.ok()) {
    res.status = res.primal.status;
    return res;
  }
  const int m0 = p.n_row0(), m = m0 + p.n_row1();
  Vec gain = Vec::Zero(m);
  const Vec ex = p.coupling * x;
  for (int k = 0; k < m0; ++k) gain[k] = -p.weight(p.row0_block(k)) * ex[k];

  QpStatus st;
  FollowerDualSolution d = face_lp(p, x, res.primal, true, gain, st);
  bool nonneg = true;
  if (st == QpStatus::Infeasible) {
    nonneg = false;
    d = face_lp(p, x, res.primal, false, gain, st);
  }
  if (st == QpStatus::Unbounded) {
    // π0ᵀEx unbounded on the face cannot happen for an optimal primal; fall back to the dual program.
    d = solve_follower_dual(p, x);
    st = d.status;
  }
  res.status = st;
  res.dual = d;
  if (st != QpStatus::Optimal) return res;
  double min_pi = 0.0;
  for (int k = 0; k < m; ++k) {
    const bool free_row = k >= m0 && p.row1_price_free(k - m0);
    if (free_row) continue;
    const double v = k < m0 ? d.pi0[k] : d.pi1[k - m0];
    min_pi = std::min(min_pi, v);
  }
  res.negative_price = !nonneg || min_pi < -kTolFeas;

  if (opt.check_multiplicity) {
    // Spread of a fixed generic weighting of π over the selected face.
    Vec wgt(m);
    for (int k = 0; k < m; ++k) wgt[k] = 1.0 + 0.1 * ((k * 7919) % 13);
    QpStatus s1, s2;
    FollowerDualSolution lo = face_lp(p, x, res.primal, nonneg, wgt, s1);
    FollowerDualSolution hi = face_lp(p, x, res.primal, nonneg, -wgt, s2);
    if (s1 != QpStatus::Optimal || s2 != QpStatus::Optimal) {
      res.multiple = true;
    } else {
      Vec pl(m), ph(m);
      pl << lo.pi0, lo.pi1;
      ph << hi.pi0, hi.pi1;
      res.multiple = (ph - pl).cwiseAbs().maxCoeff() > 1e-6 * (1.0 + ph.cwiseAbs().maxCoeff());
    }
  }
  return res;
}

FollowerDualSolution primal_multipliers(const BilevelSpeProblem& p, const Vec& x, const FollowerPrimalSolution& primal) {
  FollowerDualSolution d;
  d.status = primal.status;
  d.pi0 = primal.pi0;
  d.pi1 = primal.pi1;
  d.mu_y = primal.mu_y;
  d.mu_w = primal.mu_w;
  d.theta_y = primal.theta_y;
  d.theta_w = primal.theta_w;
  return realign_dual(p, x, primal, d);
}

FollowerDualSolution realign_dual(const BilevelSpeProblem& p, const Vec& x, const FollowerPrimalSolution& primal,
                                  const FollowerDualSolution& dual) {
  FollowerDualSolution d = dual;
  Vec pi(p.n_row0() + p.n_row1());
  pi << dual.pi0, dual.pi1;
  const Vec gy = p.R * primal.y + p.r + p.G().transpose() * pi;
  const Vec gw = p.H().transpose() * pi;
  auto split = [](const Vec& g, const Vec& ub, Vec& mu, Vec& th) {
    for (int i = 0; i < g.size(); ++i) {
      if (is_finite_bound(ub[i])) {
        mu[i] = std::max(0.0, g[i]);
        th[i] = std::max(0.0, -g[i]);
      } else {
        mu[i] = g[i];
        th[i] = 0.0;
      }
    }
  };
  split(gy, p.ub_y, d.mu_y, d.theta_y);
  split(gw, p.ub_w, d.mu_w, d.theta_w);
  d.y = primal.y;
  double obj = 0.0;
  const Vec ex = p.coupling * x;
  for (int i = 0; i < p.n_y(); ++i) {
    obj -= 0.5 * primal.y[i] * (p.R.row(i).dot(primal.y));
    if (is_finite_bound(p.ub_y[i])) obj -= p.ub_y[i] * d.theta_y[i];
  }
  for (int i = 0; i < p.n_w(); ++i)
    if (is_finite_bound(p.ub_w[i])) obj -= p.ub_w[i] * d.theta_w[i];
  for (int k = 0; k < p.n_row0(); ++k) obj -= dual.pi0[k] * (p.h0[k] + ex[k]);
  for (int k = 0; k < p.n_row1(); ++k) obj -= dual.pi1[k] * p.h1[k];
  d.objective = obj;
  return d;
}

double KktResidualReport::max_abs() const {
  return std::max({primal, dual, stationarity, complementarity});
}

double KktResidualReport::max_rel() const {
  return std::max({primal_rel, dual, stationarity_rel, complementarity_rel});
}

KktResidualReport check_kkt(const BilevelSpeProblem& p, const Vec& x, const FollowerPrimalSolution& primal,
                            const FollowerDualSolution& dual) {
  KktResidualReport rep;
  const int ny = p.n_y(), nw = p.n_w(), m0 = p.n_row0(), m1 = p.n_row1();
  const Vec& y = primal.y;
  const Vec& w = primal.w;
  const Mat G = p.G(), H = p.H();
  const Vec rhs = p.follower_rhs(x);
  for (int k = 0; k < m0 + m1; ++k) {
    double lhs = 0.0, scale = std::abs(rhs[k]);
    for (int i = 0; i < ny; ++i) {
      lhs += G(k, i) * y[i];
      scale = std::max(scale, std::abs(G(k, i) * y[i]));
    }
    for (int i = 0; i < nw; ++i) {
      lhs += H(k, i) * w[i];
      scale = std::max(scale, std::abs(H(k, i) * w[i]));
    }
    const double r = std::abs(lhs - rhs[k]);
    rep.primal = std::max(rep.primal, r);
    rep.primal_rel = std::max(rep.primal_rel, r / std::max(1.0, scale));
  }
  auto bound_viol = [&](const Vec& v, const Vec& ub) {
    for (int i = 0; i < v.size(); ++i) {
      double r = std::max(0.0, -v[i]);
      if (is_finite_bound(ub[i])) r = std::max(r, v[i] - ub[i]);
      rep.primal = std::max(rep.primal, r);
      rep.primal_rel = std::max(rep.primal_rel, r / std::max(1.0, std::abs(v[i])));
    }
  };
  bound_viol(y, p.ub_y);
  bound_viol(w, p.ub_w);

  auto neg = [&](const Vec& v) {
    for (int i = 0; i < v.size(); ++i) rep.dual = std::max(rep.dual, -v[i]);
  };
  neg(dual.mu_y);
  neg(dual.mu_w);
  neg(dual.theta_y);
  neg(dual.theta_w);
  for (int i = 0; i < ny; ++i)
    if (!is_finite_bound(p.ub_y[i])) rep.dual = std::max(rep.dual, std::abs(dual.theta_y[i]));
  for (int i = 0; i < nw; ++i)
    if (!is_finite_bound(p.ub_w[i])) rep.dual = std::max(rep.dual, std::abs(dual.theta_w[i]));
  for (int k = 0; k < m0; ++k) rep.price_sign = std::max(rep.price_sign, -dual.pi0[k]);
  for (int k = 0; k < m1; ++k)
    if (!p.row1_price_free(k)) rep.price_sign = std::max(rep.price_sign, -dual.pi1[k]);

  Vec pi(m0 + m1);
  pi << dual.pi0, dual.pi1;
  for (int i = 0; i < ny; ++i) {
    double s = p.r[i], scale = std::abs(p.r[i]);
    for (int j = 0; j < ny; ++j) {
      s += p.R(i, j) * y[j];
      scale = std::max(scale, std::abs(p.R(i, j) * y[j]));
    }
    for (int k = 0; k < m0 + m1; ++k) {
      s += G(k, i) * pi[k];
      scale = std::max(scale, std::abs(G(k, i) * pi[k]));
    }
    s += -dual.mu_y[i] + dual.theta_y[i];
    scale = std::max({scale, std::abs(dual.mu_y[i]), std::abs(dual.theta_y[i])});
    rep.stationarity = std::max(rep.stationarity, std::abs(s));
    rep.stationarity_rel = std::max(rep.stationarity_rel, std::abs(s) / std::max(1.0, scale));
  }
  for (int i = 0; i < nw; ++i) {
    double s = 0.0, scale = 0.0;
    for (int k = 0; k < m0 + m1; ++k) {
      s += H(k, i) * pi[k];
      scale = std::max(scale, std::abs(H(k, i) * pi[k]));
    }
    s += -dual.mu_w[i] + dual.theta_w[i];
    scale = std::max({scale, std::abs(dual.mu_w[i]), std::abs(dual.theta_w[i])});
    rep.stationarity = std::max(rep.stationarity, std::abs(s));
    rep.stationarity_rel = std::max(rep.stationarity_rel, std::abs(s) / std::max(1.0, scale));
  }

  auto pair = [&](double a, double b) {
    rep.complementarity = std::max(rep.complementarity, std::abs(a * b));
    rep.complementarity_rel = std::max(rep.complementarity_rel, std::min(std::abs(a), std::abs(b)));
  };
  for (int i = 0; i < ny; ++i) {
    pair(y[i], dual.mu_y[i]);
    if (is_finite_bound(p.ub_y[i])) pair(p.ub_y[i] - y[i], dual.theta_y[i]);
  }
  for (int i = 0; i < nw; ++i) {
    pair(w[i], dual.mu_w[i]);
    if (is_finite_bound(p.ub_w[i])) pair(p.ub_w[i] - w[i], dual.theta_w[i]);
  }
  return rep;
}

}  // namespace spe
