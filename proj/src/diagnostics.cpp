#include "spe/diagnostics.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace spe {

namespace {

// Rows of the relaxed constraint set acting on the follower part (columns L.y .. L.n), x dropped.
Mat recession_rows(const SingleLevelModel& m) {
  const int off = m.layout.y;
  return m.A_eq.rightCols(m.n() - off);
}

double growth_of(const BilevelSpeProblem& p, const ModelLayout& L, const Vec& ray, const Vec& x) {
  const Vec ex = p.coupling * x;
  double g = 0.0;
  for (int k = 0; k < p.n_row0(); ++k) g += p.weight(p.row0_block(k)) * ray[L.pi0 + k] * ex[k];
  return g;
}

void check_witness(const BilevelSpeProblem& p, const LeaderPoint& w) {
  if (w.z.size() != p.n_z() || w.x.size() != p.n_x()) throw InvalidWitness("witness has wrong dimensions");
  const double tol = 1e-9;
  for (int j = 0; j < p.n_z(); ++j)
    if (w.z[j] < -tol || w.z[j] > p.ub_z[j] + tol) throw InvalidWitness("witness z outside [0, ub]");
  for (int j = 0; j < p.n_x(); ++j)
    if (w.x[j] < -tol || w.x[j] > p.ub_x[j] + tol) throw InvalidWitness("witness x outside [0, ub]");
  if (p.n_leader_rows() > 0) {
    Vec zx(p.n_z() + p.n_x());
    zx << w.z, w.x;
    const Vec act = p.leader_A * zx - p.leader_b;
    for (int k = 0; k < act.size(); ++k)
      if (act[k] > tol * std::max(1.0, std::abs(p.leader_b[k]))) throw InvalidWitness("witness violates the leader polyhedron");
  }
}

}  // namespace

Vec UnboundedRayCertificate::part(const BilevelSpeProblem& p, VarKind k) const {
  const ModelLayout L = ModelLayout::of(p);
  switch (k) {
    case VarKind::Y: return ray.segment(L.y, p.n_y());
    case VarKind::W: return ray.segment(L.w, p.n_w());
    case VarKind::Pi0: return ray.segment(L.pi0, p.n_row0());
    case VarKind::Pi1: return ray.segment(L.pi1, p.n_row1());
    case VarKind::MuY: return ray.segment(L.mu_y, p.n_y());
    case VarKind::MuW: return ray.segment(L.mu_w, p.n_w());
    case VarKind::ThetaY: return ray.segment(L.th_y, L.fin_y.size());
    case VarKind::ThetaW: return ray.segment(L.th_w, L.fin_w.size());
    case VarKind::Z: return witness.z;
    case VarKind::X: return witness.x;
  }
  return {};
}

LeaderPoint default_witness(const BilevelSpeProblem& p) {
  const int nz = p.n_z(), nx = p.n_x();
  // Variables (z, t): maximise t subject to A_z z + t A_x x̄ ≤ b.
  QpProblem lp;
  lp.q = Vec::Zero(nz + 1);
  lp.q[nz] = -1.0;
  lp.lb = Vec::Zero(nz + 1);
  lp.ub = Vec(nz + 1);
  lp.ub << p.ub_z, 1.0;
  lp.A_in = Mat(p.n_leader_rows(), nz + 1);
  lp.A_in << p.leader_A.leftCols(nz), p.leader_A.rightCols(nx) * p.ub_x;
  lp.b_in = p.leader_b;
  lp.normalize();
  QpSolution s = solve_lp(lp);
  LeaderPoint w;
  if (!s.optimal()) {
    w.z = Vec::Zero(nz);
    w.x = Vec::Zero(nx);
    return w;
  }
  w.z = s.v.head(nz).cwiseMax(0.0).cwiseMin(p.ub_z);
  w.x = std::clamp(s.v[nz], 0.0, 1.0) * p.ub_x;
  // Back off slightly if rounding put the point outside P̄.
  try {
    check_witness(p, w);
  } catch (const InvalidWitness&) {
    w.x *= 1.0 - 1e-9;
  }
  return w;
}

std::optional<UnboundedRayCertificate> find_unbounded_ray(const BilevelSpeProblem& p, const LeaderPoint& witness) {
  check_witness(p, witness);
  const SingleLevelModel m = build_kkt_model(p);
  const ModelLayout& L = m.layout;
  const int off = L.y, n = L.n - off;

  QpProblem lp;
  lp.A_eq = recession_rows(m);
  lp.b_eq = Vec::Zero(lp.A_eq.rows());
  lp.lb = Vec::Zero(n);
  lp.ub = Vec::Constant(n, kInf);
  for (int i : L.fin_y) lp.ub[L.y - off + i] = 0.0;
  for (int i : L.fin_w) lp.ub[L.w - off + i] = 0.0;
  Vec norm = Vec::Ones(n);
  for (int k = 0; k < p.n_row1(); ++k) {
    if (!p.row1_price_free(k)) continue;
    lp.lb[L.pi1 - off + k] = -1.0;
    lp.ub[L.pi1 - off + k] = 1.0;
    norm[L.pi1 - off + k] = 0.0;
  }
  lp.A_in = norm.transpose();
  lp.b_in = Vec::Ones(1);
  lp.q = Vec::Zero(n);
  const Vec ex = p.coupling * witness.x;
  for (int k = 0; k < p.n_row0(); ++k) lp.q[L.pi0 - off + k] = -p.weight(p.row0_block(k)) * ex[k];
  lp.normalize();

  QpSolution s = solve_lp(lp);
  if (!s.optimal() || -s.objective <= 1e-6) return std::nullopt;
  UnboundedRayCertificate c;
  c.witness = witness;
  c.ray = Vec::Zero(L.n);
  c.ray.tail(n) = s.v;
  // Clean IPM dust off the sign-restricted entries.
  for (int j = 0; j < n; ++j)
    if (lp.lb[j] == 0.0 && c.ray[off + j] < 0.0) c.ray[off + j] = 0.0;
  c.growth = growth_of(p, L, c.ray, witness.x);
  return c;
}

CertificateCheck check_certificate(const BilevelSpeProblem& p, const UnboundedRayCertificate& c) {
  const SingleLevelModel m = build_kkt_model(p);
  const ModelLayout& L = m.layout;
  CertificateCheck out;
  const Vec tail = c.ray.tail(L.n - L.y);
  out.residual = (recession_rows(m) * tail).cwiseAbs().maxCoeff();
  if (tail.size() == 0) out.residual = 0.0;
  for (int j = L.y; j < L.n; ++j) {
    if (m.lb[j] == 0.0) out.sign = std::max(out.sign, -c.ray[j]);
  }
  for (int i : L.fin_y) out.bounded_part = std::max(out.bounded_part, std::abs(c.ray[L.y + i]));
  for (int i : L.fin_w) out.bounded_part = std::max(out.bounded_part, std::abs(c.ray[L.w + i]));
  out.growth = growth_of(p, L, c.ray, c.witness.x);
  return out;
}

UnboundedRayCertificate make_certificate(const BilevelSpeProblem& p, const LeaderPoint& witness, const Vec& y,
                                         const Vec& w, const Vec& pi0, const Vec& pi1, const Vec& mu_y,
                                         const Vec& mu_w, const Vec& theta_y, const Vec& theta_w) {
  UnboundedRayCertificate c;
  c.witness = witness;
  c.ray = assemble_point(p, Vec::Zero(p.n_z()), Vec::Zero(p.n_x()), y, w, pi0, pi1, mu_y, mu_w, theta_y, theta_w);
  c.growth = growth_of(p, ModelLayout::of(p), c.ray, witness.x);
  return c;
}

std::vector<RayFamilyPoint> simulate_ray_family(const BilevelSpeProblem& p, const UnboundedRayCertificate& c,
                                                const std::vector<double>& rhos) {
  const SingleLevelModel m = build_kkt_model(p, {.strengthen_leader_rows = false});
  const ModelLayout& L = m.layout;
  Relaxation r = build_relaxation(m);
  QpProblem lp = r.qp;
  lp.Q = Mat();
  lp.q = Vec::Zero(m.n());
  for (int j = 0; j < p.n_z(); ++j) lp.lb[L.z + j] = lp.ub[L.z + j] = c.witness.z[j];
  for (int j = 0; j < p.n_x(); ++j) lp.lb[L.x + j] = lp.ub[L.x + j] = c.witness.x[j];
  // Small pull towards the origin keeps the base point finite.
  for (int j = L.y; j < L.n; ++j) lp.q[j] = 1e-3;
  for (int k = 0; k < p.n_row1(); ++k)
    if (p.row1_price_free(k)) lp.q[L.pi1 + k] = 0.0;
  QpSolution s = solve_lp(lp);
  if (!s.optimal()) return {};
  const Vec v0 = s.v;
  const double f0 = kkt_objective(p, v0);
  std::vector<RayFamilyPoint> out;
  for (double rho : rhos) {
    const Vec v = v0 + rho * c.ray;
    const ModelViolation viol = model_violation(m, v);
    out.push_back({rho, std::max(viol.linear, viol.bounds), kkt_objective(p, v), f0 + rho * c.growth});
  }
  return out;
}

BoundednessReport check_duality_bounded(const BilevelSpeProblem& p) {
  const bool h_zero = (p.h0.size() == 0 || p.h0.cwiseAbs().maxCoeff() == 0.0) &&
                      (p.h1.size() == 0 || p.h1.cwiseAbs().maxCoeff() == 0.0);
  if (h_zero) return {Boundedness::Bounded, "h=0 and <Phi(y),y> coercive (R PD)"};
  return {Boundedness::Unknown, "h != 0: sufficient condition does not apply"};
}

std::string certificate_json(const BilevelSpeProblem& p, const UnboundedRayCertificate& c) {
  auto arr = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  const CertificateCheck chk = check_certificate(p, c);
  nlohmann::json j;
  j["witness"] = {{"z", arr(c.witness.z)}, {"x", arr(c.witness.x)}};
  j["ray"] = {{"y", arr(c.part(p, VarKind::Y))},         {"w", arr(c.part(p, VarKind::W))},
              {"pi0", arr(c.part(p, VarKind::Pi0))},     {"pi1", arr(c.part(p, VarKind::Pi1))},
              {"mu_y", arr(c.part(p, VarKind::MuY))},    {"mu_w", arr(c.part(p, VarKind::MuW))},
              {"theta_y", arr(c.part(p, VarKind::ThetaY))}, {"theta_w", arr(c.part(p, VarKind::ThetaW))}};
  j["growth"] = c.growth;
  j["check"] = {{"residual", chk.residual}, {"sign", chk.sign}, {"valid", chk.valid()}};
  return j.dump(2);
}

std::vector<Vec> sample_relaxation_points(const SingleLevelModel& m, int count, unsigned long long seed) {
  const Relaxation base = build_relaxation(m);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // Target scale follows the finite bounds where there are any.
  double scale = 1.0;
  for (int j = 0; j < m.n(); ++j)
    if (std::isfinite(m.ub[j])) scale = std::max(scale, m.ub[j]);
  for (int k = 0; k < m.b_eq.size(); ++k) scale = std::max(scale, std::abs(m.b_eq[k]));
  std::normal_distribution<double> g(0.0, scale);

  const int anchors = std::min(count, 24);
  std::vector<Vec> pts;
  for (int t = 0; t < anchors; ++t) {
    QpProblem qp = base.qp;
    Vec target(m.n());
    for (int j = 0; j < m.n(); ++j) target[j] = g(rng);
    qp.Q = Mat::Identity(m.n(), m.n());
    qp.q = -target;
    QpSolution s = solve_qp(qp);
    if (s.optimal()) pts.push_back(s.v);
  }
  if (pts.empty()) return {};
  std::vector<Vec> out = pts;
  while (static_cast<int>(out.size()) < count) {
    Vec v = Vec::Zero(m.n());
    double tot = 0.0;
    for (const auto& q : pts) {
      const double a = -std::log(1.0 - u(rng));
      v += a * q;
      tot += a;
    }
    out.push_back(v / tot);
  }
  out.resize(count);
  return out;
}

}  // namespace spe
