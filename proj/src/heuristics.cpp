#include "spe/heuristics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace spe {

namespace {

double min_sign_price(const BilevelSpeProblem& p, const Vec& pi0, const Vec& pi1) {
  double m = kInf;
  for (int k = 0; k < pi0.size(); ++k) m = std::min(m, pi0[k]);
  for (int k = 0; k < pi1.size(); ++k)
    if (!p.row1_price_free(k)) m = std::min(m, pi1[k]);
  return m == kInf ? 0.0 : m;
}

// Largest s ∈ [0, 1] with A_z z + s A_x x ≤ b; negative when no s works.
double leader_scale(const BilevelSpeProblem& p, const Vec& z, const Vec& x, double tol) {
  const int nz = p.n_z(), nx = p.n_x();
  double s = 1.0;
  for (int r = 0; r < p.n_leader_rows(); ++r) {
    const double az = p.leader_A.row(r).head(nz).dot(z);
    const double ax = p.leader_A.row(r).tail(nx).dot(x);
    const double slack = p.leader_b[r] - az;
    const double t = tol * std::max(1.0, std::abs(p.leader_b[r]));
    if (slack < -t) return -1.0;
    if (ax > 0 && ax > slack) s = std::min(s, std::max(0.0, slack) / ax);
  }
  return s;
}

RhCandidate rh_impl(const BilevelSpeProblem& p, const Vec& z_hat, const Vec& x_hat, const RhConfig& cfg,
                    bool face_fallback) {
  const long long solves0 = qp_solve_count();
  RhCandidate c;
  const int nz = p.n_z(), nx = p.n_x();
  c.z = Vec(nz);
  for (int i = 0; i < nz; ++i) {
    const bool integer = !p.integer_z.empty() && p.integer_z[i];
    if (integer && p.ub_z[i] == 1.0) c.z[i] = z_hat[i] > cfg.threshold ? 1.0 : 0.0;
    else if (integer) c.z[i] = std::clamp(std::round(z_hat[i]), 0.0, p.ub_z[i]);
    else c.z[i] = std::clamp(z_hat[i], 0.0, p.ub_z[i]);
  }
  const std::vector<int> gate = gating_binary(p);
  c.x = Vec(nx);
  for (int j = 0; j < nx; ++j) {
    double v = std::clamp(x_hat[j], 0.0, p.ub_x[j]);
    if (gate[j] >= 0 && c.z[gate[j]] == 0.0) v = 0.0;
    if (!p.integer_x.empty() && p.integer_x[j]) v = std::floor(v + 1e-9);
    c.x[j] = v;
  }
  const double s = leader_scale(p, c.z, c.x, cfg.tol);
  if (s < 0) {
    c.failure = RhFailure::LeaderInfeasible;
    return c;
  }
  if (s < 1.0) {
    c.x *= s;
    for (int j = 0; j < nx; ++j)
      if (!p.integer_x.empty() && p.integer_x[j]) c.x[j] = std::floor(c.x[j]);
  }

  FollowerPrimalSolution prim = solve_follower_primal(p, c.x);
  if (!prim.ok()) {
    c.failure = RhFailure::FollowerInfeasible;
    c.qp_solves = qp_solve_count() - solves0;
    return c;
  }
  FollowerDualSolution dual = solve_follower_dual(p, c.x);
  if (!dual.ok()) {
    c.failure = RhFailure::FollowerInfeasible;
    c.qp_solves = qp_solve_count() - solves0;
    return c;
  }
  // Dual QP prices first, then the primal QP's own multipliers; both at the primal y.
  const FollowerDualSolution options[2] = {realign_dual(p, c.x, prim, dual), primal_multipliers(p, c.x, prim)};
  int pick = -1;
  c.min_price = -kInf;
  c.kkt_residual = kInf;
  for (int k = 0; k < 2 && pick < 0; ++k) {
    const double mp = min_sign_price(p, options[k].pi0, options[k].pi1);
    const double res = check_kkt(p, c.x, prim, options[k]).max_rel();
    if (mp >= -cfg.tol && res <= cfg.tol) pick = k;
    if (k == 0 || mp > c.min_price) {
      c.min_price = mp;
      c.kkt_residual = res;
    }
  }
  if (pick < 0 && face_fallback && c.min_price < -cfg.tol) {
    PriceResult pr = equilibrium_prices(p, c.x);
    if (pr.status == QpStatus::Optimal) {
      prim = pr.primal;
      dual = realign_dual(p, c.x, prim, pr.dual);
      c.min_price = min_sign_price(p, dual.pi0, dual.pi1);
      c.kkt_residual = check_kkt(p, c.x, prim, dual).max_rel();
      if (c.min_price >= -cfg.tol && c.kkt_residual <= cfg.tol) pick = 2;
    }
  } else if (pick >= 0) {
    dual = options[pick];
    c.min_price = min_sign_price(p, dual.pi0, dual.pi1);
    c.kkt_residual = check_kkt(p, c.x, prim, dual).max_rel();
  }
  c.qp_solves = qp_solve_count() - solves0;
  if (pick < 0) {
    if (c.min_price < -cfg.tol) {
      c.failure = RhFailure::NegativePrice;
      const FollowerDualSolution& d = options[0];
      for (int k = 0; k < d.pi0.size(); ++k)
        if (d.pi0[k] < -cfg.tol) c.failed_blocks.push_back(p.row0_block(k));
      for (int k = 0; k < d.pi1.size(); ++k)
        if (!p.row1_price_free(k) && d.pi1[k] < -cfg.tol) c.failed_blocks.push_back(p.row1_block(k));
      std::sort(c.failed_blocks.begin(), c.failed_blocks.end());
      c.failed_blocks.erase(std::unique(c.failed_blocks.begin(), c.failed_blocks.end()), c.failed_blocks.end());
    } else {
      c.failure = RhFailure::KktResidual;
    }
    return c;
  }
  c.point = assemble_point(p, c.z, c.x, prim.y, prim.w, dual.pi0, dual.pi1, dual.mu_y, dual.mu_w, dual.theta_y,
                           dual.theta_w);
  c.objective = duality_objective(p, c.point);
  return c;
}

}  // namespace

std::string to_string(RhFailure f) {
  switch (f) {
    case RhFailure::None: return "none";
    case RhFailure::LeaderInfeasible: return "leader-infeasible";
    case RhFailure::FollowerInfeasible: return "follower-infeasible";
    case RhFailure::NegativePrice: return "negative-price";
    case RhFailure::KktResidual: return "kkt-residual";
  }
  return "?";
}

std::vector<int> gating_binary(const BilevelSpeProblem& p) {
  const int nz = p.n_z(), nx = p.n_x();
  std::vector<int> gate(nx, -1);
  for (int r = 0; r < p.n_leader_rows(); ++r) {
    int zi = -1, xj = -1, count = 0;
    for (int c = 0; c < nz + nx; ++c) {
      if (p.leader_A(r, c) == 0.0) continue;
      ++count;
      if (c < nz && p.leader_A(r, c) < 0) zi = c;
      if (c >= nz && p.leader_A(r, c) > 0) xj = c - nz;
    }
    if (count == 2 && zi >= 0 && xj >= 0 && p.leader_b[r] <= 0.0 && gate[xj] < 0) gate[xj] = zi;
  }
  return gate;
}

RhCandidate round_and_repair(const BilevelSpeProblem& p, const Vec& z_hat, const Vec& x_hat, const RhConfig& cfg) {
  return rh_impl(p, z_hat, x_hat, cfg, cfg.price_face_fallback);
}

RhCandidate round_and_repair_rgup(const BilevelSpeProblem& p, const Vec& z_hat, const Vec& x_hat,
                                  const RhConfig& cfg) {
  return rh_impl(p, z_hat, x_hat, cfg, false);
}

HeuristicFn make_rh_callback(const BilevelSpeProblem& p, const SingleLevelModel& m, const RhConfig& cfg,
                             bool per_sample, std::shared_ptr<RhStats> stats) {
  auto rng = std::make_shared<std::mt19937_64>(cfg.seed);
  if (!stats) stats = std::make_shared<RhStats>();
  const ModelLayout L = m.layout;
  return [&p, cfg, per_sample, rng, stats, L](const NodeContext& ctx) -> std::optional<Vec> {
    if (!ctx.forced && ctx.incumbents >= cfg.always_until) {
      if (cfg.p <= 0.0) return std::nullopt;
      std::bernoulli_distribution coin(cfg.p);
      if (!coin(*rng)) return std::nullopt;
    }
    ++stats->invocations;
    const Vec& v = *ctx.point;
    const Vec z = v.segment(L.z, p.n_z()), x = v.segment(L.x, p.n_x());
    RhCandidate c = per_sample ? round_and_repair_rgup(p, z, x, cfg) : round_and_repair(p, z, x, cfg);
    stats->qp_solves += c.qp_solves;
    if (!c.ok()) {
      ++stats->failures[static_cast<int>(c.failure)];
      return std::nullopt;
    }
    ++stats->candidates;
    Vec point = c.point;
    stats->accepted.push_back(std::move(c));
    return point;
  };
}

}  // namespace spe
