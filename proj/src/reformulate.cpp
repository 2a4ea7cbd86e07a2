#include "spe/reformulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace spe {

namespace {

std::string num(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string var_name(const BilevelSpeProblem& p, VarKind k, int i) {
  if (k == VarKind::Z && !p.z_names.empty()) return "z:" + p.z_names[i];
  if (k == VarKind::X && !p.x_names.empty()) return "x:" + p.x_names[i];
  return to_string(k) + "[" + std::to_string(i) + "]";
}

SingleLevelModel build_common(const BilevelSpeProblem& p, const BuildOptions& opt) {
  SingleLevelModel m;
  const ModelLayout L = ModelLayout::of(p);
  m.layout = L;
  const int nz = p.n_z(), nx = p.n_x(), ny = p.n_y(), nw = p.n_w(), m0 = p.n_row0(), m1 = p.n_row1();
  const int nfy = static_cast<int>(L.fin_y.size()), nfw = static_cast<int>(L.fin_w.size());
  m.vars.reserve(L.n);
  auto add = [&](VarKind k, int count) {
    for (int i = 0; i < count; ++i) m.vars.push_back({k, i, var_name(p, k, i)});
  };
  add(VarKind::Z, nz);
  add(VarKind::X, nx);
  add(VarKind::Y, ny);
  add(VarKind::W, nw);
  add(VarKind::Pi0, m0);
  add(VarKind::Pi1, m1);
  add(VarKind::MuY, ny);
  add(VarKind::MuW, nw);
  for (int k = 0; k < nfy; ++k) m.vars.push_back({VarKind::ThetaY, L.fin_y[k], var_name(p, VarKind::ThetaY, L.fin_y[k])});
  for (int k = 0; k < nfw; ++k) m.vars.push_back({VarKind::ThetaW, L.fin_w[k], var_name(p, VarKind::ThetaW, L.fin_w[k])});

  const int n = L.n;
  m.lb = Vec::Zero(n);
  m.ub = Vec::Constant(n, kInf);
  m.ub.segment(L.z, nz) = p.ub_z;
  m.ub.segment(L.x, nx) = p.ub_x;
  m.ub.segment(L.y, ny) = p.ub_y;
  m.ub.segment(L.w, nw) = p.ub_w;
  for (int k = 0; k < m1; ++k)
    if (p.row1_price_free(k)) m.lb[L.pi1 + k] = -kInf;

  Mat A;
  Vec b;
  leader_rows(p, opt.strengthen_leader_rows, A, b);
  m.A_in = Mat::Zero(A.rows(), n);
  m.A_in.middleCols(L.z, nz) = A.leftCols(nz);
  m.A_in.middleCols(L.x, nx) = A.rightCols(nx);
  m.b_in = b;

  const int rows = m0 + m1 + ny + nw;
  m.A_eq = Mat::Zero(rows, n);
  m.b_eq = Vec::Zero(rows);
  int r = 0;
  m.A_eq.block(r, L.y, m0, ny) = p.G0;
  m.A_eq.block(r, L.w, m0, nw) = p.H0;
  m.A_eq.block(r, L.x, m0, nx) = -p.coupling;
  m.b_eq.segment(r, m0) = p.h0;
  r += m0;
  m.A_eq.block(r, L.y, m1, ny) = p.G1;
  m.A_eq.block(r, L.w, m1, nw) = p.H1;
  m.b_eq.segment(r, m1) = p.h1;
  r += m1;
  const Mat G = p.G(), H = p.H();
  m.A_eq.block(r, L.y, ny, ny) = p.R;
  m.A_eq.block(r, L.pi0, ny, m0 + m1) = G.transpose();
  m.A_eq.block(r, L.mu_y, ny, ny) = -Mat::Identity(ny, ny);
  for (int k = 0; k < nfy; ++k) m.A_eq(r + L.fin_y[k], L.th_y + k) = 1.0;
  m.b_eq.segment(r, ny) = -p.r;
  r += ny;
  m.A_eq.block(r, L.pi0, nw, m0 + m1) = H.transpose();
  m.A_eq.block(r, L.mu_w, nw, nw) = -Mat::Identity(nw, nw);
  for (int k = 0; k < nfw; ++k) m.A_eq(r + L.fin_w[k], L.th_w + k) = 1.0;

  int ky = 0;
  for (int i = 0; i < ny; ++i) {
    m.pairs.push_back({L.y + i, 1.0, 0.0, L.mu_y + i});
    if (ky < nfy && L.fin_y[ky] == i) {
      m.pairs.push_back({L.y + i, -1.0, p.ub_y[i], L.th_y + ky});
      ++ky;
    }
  }
  int kw = 0;
  for (int i = 0; i < nw; ++i) {
    m.pairs.push_back({L.w + i, 1.0, 0.0, L.mu_w + i});
    if (kw < nfw && L.fin_w[kw] == i) {
      m.pairs.push_back({L.w + i, -1.0, p.ub_w[i], L.th_w + kw});
      ++kw;
    }
  }
  for (int i = 0; i < nz; ++i)
    if (!p.integer_z.empty() && p.integer_z[i]) m.integers.push_back(L.z + i);
  for (int i = 0; i < nx; ++i)
    if (!p.integer_x.empty() && p.integer_x[i]) m.integers.push_back(L.x + i);

  m.Q = Mat::Zero(n, n);
  m.q = Vec::Zero(n);
  m.q.segment(L.z, nz) = -p.c_z;
  m.q.segment(L.x, nx) = -p.c_x;
  return m;
}

double weighted_pi0_ex(const BilevelSpeProblem& p, const ModelLayout& L, const Vec& v) {
  const Vec ex = p.coupling * v.segment(L.x, p.n_x());
  double s = 0.0;
  for (int k = 0; k < p.n_row0(); ++k) s += p.weight(p.row0_block(k)) * v[L.pi0 + k] * ex[k];
  return s;
}

double weighted_dual_expr(const BilevelSpeProblem& p, const ModelLayout& L, const Vec& v) {
  const Vec y = v.segment(L.y, p.n_y());
  const Vec ry = p.R * y;
  double s = 0.0;
  for (int i = 0; i < p.n_y(); ++i) s -= p.weight(p.y_block(i)) * (ry[i] + p.r[i]) * y[i];
  for (size_t k = 0; k < L.fin_y.size(); ++k)
    s -= p.weight(p.y_block(L.fin_y[k])) * p.ub_y[L.fin_y[k]] * v[L.th_y + k];
  for (size_t k = 0; k < L.fin_w.size(); ++k)
    s -= p.weight(p.w_block(L.fin_w[k])) * p.ub_w[L.fin_w[k]] * v[L.th_w + k];
  for (int k = 0; k < p.n_row0(); ++k) s -= p.weight(p.row0_block(k)) * p.h0[k] * v[L.pi0 + k];
  for (int k = 0; k < p.n_row1(); ++k) s -= p.weight(p.row1_block(k)) * p.h1[k] * v[L.pi1 + k];
  return s;
}

double leader_cost(const BilevelSpeProblem& p, const ModelLayout& L, const Vec& v) {
  return p.c_z.dot(v.segment(L.z, p.n_z())) + p.c_x.dot(v.segment(L.x, p.n_x()));
}

}  // namespace

std::string to_string(VarKind k) {
  switch (k) {
    case VarKind::Z: return "z";
    case VarKind::X: return "x";
    case VarKind::Y: return "y";
    case VarKind::W: return "w";
    case VarKind::Pi0: return "pi0";
    case VarKind::Pi1: return "pi1";
    case VarKind::MuY: return "mu_y";
    case VarKind::MuW: return "mu_w";
    case VarKind::ThetaY: return "theta_y";
    case VarKind::ThetaW: return "theta_w";
  }
  return "?";
}

ModelLayout ModelLayout::of(const BilevelSpeProblem& p) {
  ModelLayout L;
  const BoundPartition part = partition_bounds(p);
  L.fin_y = part.fin_y;
  L.fin_w = part.fin_w;
  L.z = 0;
  L.x = L.z + p.n_z();
  L.y = L.x + p.n_x();
  L.w = L.y + p.n_y();
  L.pi0 = L.w + p.n_w();
  L.pi1 = L.pi0 + p.n_row0();
  L.mu_y = L.pi1 + p.n_row1();
  L.mu_w = L.mu_y + p.n_y();
  L.th_y = L.mu_w + p.n_w();
  L.th_w = L.th_y + static_cast<int>(L.fin_y.size());
  L.n = L.th_w + static_cast<int>(L.fin_w.size());
  return L;
}

void leader_rows(const BilevelSpeProblem& p, bool strengthen, Mat& A, Vec& b) {
  A = p.leader_A;
  b = p.leader_b;
  if (!strengthen) return;
  const int nz = p.n_z(), nx = p.n_x();
  auto ub = [&](int j) { return j < nz ? p.ub_z[j] : p.ub_x[j - nz]; };
  auto is_binary = [&](int j) {
    const bool integer = j < nz ? (!p.integer_z.empty() && p.integer_z[j]) : (!p.integer_x.empty() && p.integer_x[j - nz]);
    return integer && ub(j) == 1.0;
  };
  for (int r = 0; r < A.rows(); ++r) {
    int bin = -1, count = 0;
    for (int j = 0; j < nz + nx; ++j) {
      if (A(r, j) != 0.0 && is_binary(j)) {
        bin = j;
        ++count;
      }
    }
    if (count != 1) continue;
    double maxact = 0.0;
    for (int j = 0; j < nz + nx; ++j)
      if (j != bin) maxact += std::max(0.0, A(r, j)) * ub(j);
    const double a = A(r, bin);
    if (a < 0 && maxact > b[r] && maxact + a < b[r]) {
      A(r, bin) = b[r] - maxact;
    } else if (a > 0 && maxact < b[r] && maxact + a > b[r]) {
      const double d = b[r] - maxact;
      A(r, bin) = a - d;
      b[r] = maxact;
    }
  }
}

SingleLevelModel build_kkt_model(const BilevelSpeProblem& p, const BuildOptions& opt) {
  SingleLevelModel m = build_common(p, opt);
  m.formulation = Formulation::Kkt;
  const ModelLayout& L = m.layout;
  for (int k = 0; k < p.n_row0(); ++k) {
    const double w = p.weight(p.row0_block(k));
    for (int j = 0; j < p.n_x(); ++j) {
      const double e = p.coupling(k, j);
      if (e == 0.0) continue;
      m.Q(L.pi0 + k, L.x + j) += 0.5 * w * e;
      m.Q(L.x + j, L.pi0 + k) += 0.5 * w * e;
    }
  }
  return m;
}

SingleLevelModel build_duality_model(const BilevelSpeProblem& p, const BuildOptions& opt) {
  SingleLevelModel m = build_common(p, opt);
  m.formulation = Formulation::Duality;
  const ModelLayout& L = m.layout;
  for (int i = 0; i < p.n_y(); ++i) {
    const double w = p.weight(p.y_block(i));
    for (int j = 0; j < p.n_y(); ++j)
      if (p.R(i, j) != 0.0) m.Q(L.y + i, L.y + j) = -w * p.R(i, j);
    m.q[L.y + i] = -w * p.r[i];
  }
  for (size_t k = 0; k < L.fin_y.size(); ++k)
    m.q[L.th_y + k] = -p.weight(p.y_block(L.fin_y[k])) * p.ub_y[L.fin_y[k]];
  for (size_t k = 0; k < L.fin_w.size(); ++k)
    m.q[L.th_w + k] = -p.weight(p.w_block(L.fin_w[k])) * p.ub_w[L.fin_w[k]];
  for (int k = 0; k < p.n_row0(); ++k) m.q[L.pi0 + k] = -p.weight(p.row0_block(k)) * p.h0[k];
  for (int k = 0; k < p.n_row1(); ++k) m.q[L.pi1 + k] = -p.weight(p.row1_block(k)) * p.h1[k];
  return m;
}

std::string BranchFixing::describe(const SingleLevelModel& m) const {
  std::ostringstream os;
  if (kind == Kind::Integer) {
    os << m.vars[var].name << (up ? " >= " : " <= ") << num(bound);
  } else {
    const auto& pr = m.pairs[pair];
    if (side == 0) {
      os << "pair " << pair << ": " << (pr.constant != 0.0 ? num(pr.constant) + " - " : "") << m.vars[pr.first].name
         << " = 0";
    } else {
      os << "pair " << pair << ": " << m.vars[pr.second].name << " = 0";
    }
  }
  return os.str();
}

Relaxation build_relaxation(const SingleLevelModel& m, const std::vector<BranchFixing>& fixings) {
  Relaxation r;
  r.nonconvex = m.nonconvex();
  r.constant = m.constant;
  QpProblem& qp = r.qp;
  qp.Q = -2.0 * m.Q;
  qp.q = -m.q;
  qp.A_eq = m.A_eq;
  qp.b_eq = m.b_eq;
  qp.A_in = m.A_in;
  qp.b_in = m.b_in;
  qp.lb = m.lb;
  qp.ub = m.ub;
  auto pin = [&](int j, double v) {
    qp.lb[j] = v;
    qp.ub[j] = v;
  };
  for (const auto& f : fixings) {
    if (f.kind == BranchFixing::Kind::Integer) {
      if (f.up) qp.lb[f.var] = std::max(qp.lb[f.var], f.bound);
      else qp.ub[f.var] = std::min(qp.ub[f.var], f.bound);
    } else {
      const auto& pr = m.pairs[f.pair];
      if (f.side == 0) pin(pr.first, -pr.constant / pr.coef);
      else pin(pr.second, 0.0);
    }
  }
  return r;
}

double ModelViolation::max() const { return std::max({linear, bounds, complementarity, integrality}); }

ModelViolation model_violation(const SingleLevelModel& m, const Vec& v) {
  ModelViolation out;
  auto row_check = [&](const Mat& A, const Vec& b, bool eq) {
    for (int k = 0; k < A.rows(); ++k) {
      double s = 0.0, scale = std::abs(b[k]);
      for (int j = 0; j < A.cols(); ++j) {
        if (A(k, j) == 0.0) continue;
        s += A(k, j) * v[j];
        scale = std::max(scale, std::abs(A(k, j) * v[j]));
      }
      const double r = eq ? std::abs(s - b[k]) : std::max(0.0, s - b[k]);
      out.linear = std::max(out.linear, r / std::max(1.0, scale));
    }
  };
  row_check(m.A_eq, m.b_eq, true);
  row_check(m.A_in, m.b_in, false);
  for (int j = 0; j < m.n(); ++j) {
    if (std::isfinite(m.lb[j])) out.bounds = std::max(out.bounds, (m.lb[j] - v[j]) / std::max(1.0, std::abs(m.lb[j])));
    if (std::isfinite(m.ub[j])) out.bounds = std::max(out.bounds, (v[j] - m.ub[j]) / std::max(1.0, std::abs(m.ub[j])));
  }
  for (const auto& pr : m.pairs)
    out.complementarity = std::max(out.complementarity, std::min(std::abs(pr.first_value(v)), std::abs(v[pr.second])));
  for (int j : m.integers) out.integrality = std::max(out.integrality, std::abs(v[j] - std::round(v[j])));
  return out;
}

double kkt_objective(const BilevelSpeProblem& p, const Vec& v) {
  const ModelLayout L = ModelLayout::of(p);
  return weighted_pi0_ex(p, L, v) - leader_cost(p, L, v);
}

double duality_objective(const BilevelSpeProblem& p, const Vec& v) {
  const ModelLayout L = ModelLayout::of(p);
  return weighted_dual_expr(p, L, v) - leader_cost(p, L, v);
}

double weak_duality_gap(const BilevelSpeProblem& p, const Vec& v) {
  const ModelLayout L = ModelLayout::of(p);
  return weighted_pi0_ex(p, L, v) - weighted_dual_expr(p, L, v);
}

double theorem1_gap(const BilevelSpeProblem& p, const Vec& v) {
  const SingleLevelModel m = build_kkt_model(p, {.strengthen_leader_rows = false});
  ModelViolation viol = model_violation(m, v);
  viol.integrality = 0.0;
  if (viol.max() > 1e-6) {
    std::ostringstream os;
    os << "point violates the single-level constraints (linear " << viol.linear << ", bounds " << viol.bounds
       << ", complementarity " << viol.complementarity << ")";
    throw NotKktFeasible(os.str());
  }
  return std::abs(kkt_objective(p, v) - duality_objective(p, v));
}

Vec assemble_point(const BilevelSpeProblem& p, const Vec& z, const Vec& x, const Vec& y, const Vec& w,
                   const Vec& pi0, const Vec& pi1, const Vec& mu_y, const Vec& mu_w, const Vec& theta_y,
                   const Vec& theta_w) {
  const ModelLayout L = ModelLayout::of(p);
  Vec v = Vec::Zero(L.n);
  v.segment(L.z, p.n_z()) = z;
  v.segment(L.x, p.n_x()) = x;
  v.segment(L.y, p.n_y()) = y;
  v.segment(L.w, p.n_w()) = w;
  v.segment(L.pi0, p.n_row0()) = pi0;
  v.segment(L.pi1, p.n_row1()) = pi1;
  v.segment(L.mu_y, p.n_y()) = mu_y;
  v.segment(L.mu_w, p.n_w()) = mu_w;
  for (size_t k = 0; k < L.fin_y.size(); ++k) v[L.th_y + k] = theta_y[L.fin_y[k]];
  for (size_t k = 0; k < L.fin_w.size(); ++k) v[L.th_w + k] = theta_w[L.fin_w[k]];
  return v;
}

std::string serialize_constraints(const SingleLevelModel& m) {
  std::ostringstream os;
  os << "# spe-model 1\n";
  os << "vars " << m.n() << "\n";
  std::vector<char> is_int(m.n(), 0);
  for (int j : m.integers) is_int[j] = 1;
  for (int j = 0; j < m.n(); ++j)
    os << "var " << j << " " << m.vars[j].name << " " << num(m.lb[j]) << " " << num(m.ub[j]) << (is_int[j] ? " int" : "")
       << "\n";
  auto rows = [&](const char* tag, const Mat& A, const Vec& b, const char* rel) {
    for (int k = 0; k < A.rows(); ++k) {
      os << tag << " " << k << ":";
      for (int j = 0; j < A.cols(); ++j)
        if (A(k, j) != 0.0) os << " " << num(A(k, j)) << " " << m.vars[j].name;
      os << " " << rel << " " << num(b[k]) << "\n";
    }
  };
  rows("eq", m.A_eq, m.b_eq, "=");
  rows("le", m.A_in, m.b_in, "<=");
  for (size_t k = 0; k < m.pairs.size(); ++k) {
    const auto& pr = m.pairs[k];
    os << "pair " << k << ": " << num(pr.constant) << " + " << num(pr.coef) << " " << m.vars[pr.first].name << " ; "
       << m.vars[pr.second].name << "\n";
  }
  return os.str();
}

std::string dump_model(const SingleLevelModel& m) {
  std::ostringstream os;
  os << serialize_constraints(m);
  os << "sense max\n";
  os << "formulation " << (m.formulation == Formulation::Kkt ? "kkt" : "duality") << "\n";
  os << "obj const " << num(m.constant) << "\n";
  for (int j = 0; j < m.n(); ++j)
    if (m.q[j] != 0.0) os << "obj lin " << m.vars[j].name << " " << num(m.q[j]) << "\n";
  for (int i = 0; i < m.n(); ++i)
    for (int j = i; j < m.n(); ++j) {
      const double c = i == j ? m.Q(i, i) : m.Q(i, j) + m.Q(j, i);
      if (c != 0.0) os << "obj quad " << m.vars[i].name << " " << m.vars[j].name << " " << num(c) << "\n";
    }
  return os.str();
}

}  // namespace spe
