#include "doctest.h"

#include "spe/qp.hpp"

#include <random>

using namespace spe;

namespace {

// Brute force over {lower, upper, interior} patterns for a box-constrained QP with Q PD.
double box_oracle(const Mat& Q, const Vec& q, const Vec& lb, const Vec& ub, Vec& best) {
  const int n = static_cast<int>(q.size());
  int total = 1;
  for (int i = 0; i < n; ++i) total *= 3;
  double best_val = kInf;
  for (int code = 0; code < total; ++code) {
    std::vector<int> pat(n);
    int c = code;
    for (int i = 0; i < n; ++i) {
      pat[i] = c % 3;
      c /= 3;
    }
    Vec v = Vec::Zero(n);
    std::vector<int> free_idx;
    for (int i = 0; i < n; ++i) {
      if (pat[i] == 0) v[i] = lb[i];
      else if (pat[i] == 1) v[i] = ub[i];
      else free_idx.push_back(i);
    }
    const int nf = static_cast<int>(free_idx.size());
    if (nf > 0) {
      Mat K(nf, nf);
      Vec rhs(nf);
      for (int a = 0; a < nf; ++a) {
        rhs[a] = -q[free_idx[a]];
        for (int j = 0; j < n; ++j)
          if (pat[j] != 2) rhs[a] -= Q(free_idx[a], j) * v[j];
        for (int b = 0; b < nf; ++b) K(a, b) = Q(free_idx[a], free_idx[b]);
      }
      Vec s = K.ldlt().solve(rhs);
      for (int a = 0; a < nf; ++a) v[free_idx[a]] = s[a];
    }
    bool ok = true;
    for (int i = 0; i < n; ++i) ok = ok && v[i] >= lb[i] - 1e-12 && v[i] <= ub[i] + 1e-12;
    if (!ok) continue;
    const double val = 0.5 * v.dot(Q * v) + q.dot(v);
    if (val < best_val) {
      best_val = val;
      best = v;
    }
  }
  return best_val;
}

}  // namespace

TEST_CASE("infeasible equality against bound") {
  QpProblem p;
  p.q = Vec::Zero(1);
  p.A_eq = Mat::Ones(1, 1);
  p.b_eq = Vec::Ones(1);
  p.A_in = Mat::Ones(1, 1);
  p.b_in = Vec::Zero(1);
  auto s = solve_qp(p);
  CHECK(s.status == QpStatus::Infeasible);
  CHECK(s.infeasibility > 0.5);
}

TEST_CASE("unbounded with ray") {
  QpProblem p;
  p.q = -Vec::Ones(1);
  p.lb = Vec::Zero(1);
  auto s = solve_qp(p);
  REQUIRE(s.status == QpStatus::Unbounded);
  CHECK(s.ray[0] > 0);
  CHECK(p.q.dot(s.ray) < 0);
}

TEST_CASE("empty lp") {
  QpProblem p;
  p.q = Vec::Zero(2);
  auto s = solve_lp(p);
  CHECK(s.optimal());
  CHECK(s.objective == doctest::Approx(0.0));
}

TEST_CASE("box lp picks sign-pattern vertex") {
  QpProblem p;
  p.q = Vec(3);
  p.q << -1, 2, -3;  // min −v0 + 2v1 − 3v2 over [−1,1]^3
  p.lb = -Vec::Ones(3);
  p.ub = Vec::Ones(3);
  auto s = solve_lp(p);
  REQUIRE(s.optimal());
  CHECK(s.v[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(s.v[1] == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(s.v[2] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(s.objective == doctest::Approx(-6.0));
}

TEST_CASE("unbounded concave-free direction in qp") {
  // min ½v0² − v1  with v1 ≥ 0 free above: ray along v1.
  QpProblem p;
  p.Q = Mat::Zero(2, 2);
  p.Q(0, 0) = 1;
  p.q = Vec(2);
  p.q << 0, -1;
  p.lb = Vec(2);
  p.lb << -kInf, 0;
  auto s = solve_qp(p);
  REQUIRE(s.status == QpStatus::Unbounded);
  CHECK(std::abs(s.ray[0]) < 1e-8);
  CHECK(s.ray[1] > 0);
}

TEST_CASE("equality qp with inequality and duals") {
  // min ½‖v‖² s.t. v0 + v1 = 2, v0 ≤ 0.5
  QpProblem p;
  p.Q = Mat::Identity(2, 2);
  p.q = Vec::Zero(2);
  p.A_eq = Mat::Ones(1, 2);
  p.b_eq = Vec::Constant(1, 2.0);
  p.A_in = Mat(1, 2);
  p.A_in << 1, 0;
  p.b_in = Vec::Constant(1, 0.5);
  auto s = solve_qp(p);
  REQUIRE(s.optimal());
  CHECK(s.v[0] == doctest::Approx(0.5));
  CHECK(s.v[1] == doctest::Approx(1.5));
  CHECK(s.y_eq[0] == doctest::Approx(-1.5));
  CHECK(s.y_in[0] == doctest::Approx(1.0));
  CHECK(kkt_residuals(p, s).max() < 1e-8);
  CHECK(s.objective == doctest::Approx(s.dual_objective).epsilon(1e-7));
}

TEST_CASE("fixed variables are presolved and get bound duals") {
  QpProblem p;
  p.Q = Mat::Identity(2, 2);
  p.q = Vec(2);
  p.q << -3, 1;
  p.lb = Vec(2);
  p.lb << 0, 2;
  p.ub = Vec(2);
  p.ub << 10, 2;
  auto s = solve_qp(p);
  REQUIRE(s.optimal());
  CHECK(s.v[0] == doctest::Approx(3.0));
  CHECK(s.v[1] == 2.0);
  CHECK(s.z_lb[1] == doctest::Approx(3.0));
  CHECK(kkt_residuals(p, s).max() < 1e-8);
}

TEST_CASE("psd check") {
  Mat a = Mat::Identity(2, 2);
  CHECK(is_psd(a));
  a(1, 1) = -1e-3;
  CHECK_FALSE(is_psd(a));
  CHECK(is_psd(Mat()));
}

TEST_CASE("random box qps match active-set enumeration") {
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> dim(2, 4);
  int worst_trial = -1;
  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    const int n = dim(rng);
    Mat B(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) B(i, j) = u(rng);
    Mat Q = B * B.transpose() + 0.1 * Mat::Identity(n, n);
    Vec q(n), lb(n), ub(n);
    for (int i = 0; i < n; ++i) {
      q[i] = 3.0 * u(rng);
      lb[i] = -1.0 + 0.5 * u(rng);
      ub[i] = lb[i] + 0.2 + std::abs(u(rng));
    }
    Vec vo;
    const double ov = box_oracle(Q, q, lb, ub, vo);
    QpProblem p;
    p.Q = Q;
    p.q = q;
    p.lb = lb;
    p.ub = ub;
    auto s = solve_qp(p);
    REQUIRE(s.optimal());
    const double err = std::max((s.v - vo).cwiseAbs().maxCoeff(), std::abs(s.objective - ov) / (1 + std::abs(ov)));
    if (err > worst) {
      worst = err;
      worst_trial = t;
    }
    CHECK(s.objective == doctest::Approx(s.dual_objective).epsilon(1e-7));
  }
  INFO("worst trial " << worst_trial);
  CHECK(worst < 1e-7);
}

TEST_CASE("determinism") {
  QpProblem p;
  p.Q = Mat::Identity(3, 3);
  p.q = Vec(3);
  p.q << 1, -2, 0.5;
  p.A_in = Mat::Ones(1, 3);
  p.b_in = Vec::Constant(1, 0.7);
  p.lb = Vec::Zero(3);
  auto a = solve_qp(p), b = solve_qp(p);
  CHECK(a.v == b.v);
  CHECK(a.y_in == b.y_in);
}

TEST_CASE("solve counter counts top-level calls only") {
  reset_qp_solve_count();
  QpProblem p;
  p.q = -Vec::Ones(1);
  p.lb = Vec::Zero(1);
  solve_qp(p);  // unbounded: runs auxiliary LPs internally
  solve_lp(p);
  CHECK(qp_solve_count() == 2);
}
