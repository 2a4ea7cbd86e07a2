#include "doctest.h"

#include "fixtures.hpp"
#include "spe/follower.hpp"

#include <random>
#include <stdexcept>

using namespace spe;

namespace {

Vec x1(double v) { return Vec::Constant(1, v); }

}  // namespace

TEST_CASE("toy primal at x = 2.375 matches enumeration") {
  auto p = fixtures::toy();
  auto o = fixtures::enumerate_kkt(p.R, p.r, p.G(), p.follower_rhs(x1(2.375)));
  REQUIRE(o.found);
  auto s = solve_follower_primal(p, x1(2.375));
  REQUIRE(s.ok());
  CHECK((s.y - o.y).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(s.objective == doctest::Approx(o.value).epsilon(1e-10));
  CHECK(s.y[0] == doctest::Approx(2.375));
  CHECK(s.y[1] == doctest::Approx(2.375));
  CHECK(std::abs(s.y[2]) < 1e-10);
  CHECK(std::abs(s.y[3]) < 1e-10);
}

TEST_CASE("toy primal at x = 0 is the zero flow") {
  auto p = fixtures::toy();
  auto o = fixtures::enumerate_kkt(p.R, p.r, p.G(), p.follower_rhs(x1(0.0)));
  auto s = solve_follower_primal(p, x1(0.0));
  REQUIRE(s.ok());
  CHECK(s.y.cwiseAbs().maxCoeff() < 1e-9);
  CHECK(o.y.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("toy dual at x = 2.375") {
  auto p = fixtures::toy();
  auto d = solve_follower_dual(p, x1(2.375));
  REQUIRE(d.ok());
  CHECK(d.pi0[0] == doctest::Approx(5.25));
  CHECK(d.pi1[0] == doctest::Approx(17.625));
  Vec mu(4);
  mu << 0, 0, 4.75, 2.375;
  CHECK((d.mu_y - mu).cwiseAbs().maxCoeff() < 1e-8);
  auto s = solve_follower_primal(p, x1(2.375));
  CHECK(std::abs(s.objective - d.objective) <= 1e-6 * (1 + std::abs(s.objective)));
}

TEST_CASE("leader vector outside the box is a precondition error") {
  auto p = fixtures::toy();
  CHECK_THROWS_AS(solve_follower_dual(p, x1(8.0)), std::invalid_argument);
  CHECK_THROWS_AS(solve_follower_primal(p, x1(-1.0)), std::invalid_argument);
}

TEST_CASE("equilibrium prices on the toy") {
  auto p = fixtures::toy();
  auto a = equilibrium_prices(p, x1(2.375));
  REQUIRE(a.status == QpStatus::Optimal);
  CHECK(a.pi0()[0] == doctest::Approx(5.25));
  CHECK_FALSE(a.negative_price);

  auto b = equilibrium_prices(p, x1(7.5));
  REQUIRE(b.status == QpStatus::Optimal);
  CHECK(b.negative_price);
  CHECK(b.pi0()[0] == doctest::Approx(-5.0));

  auto c = equilibrium_prices(p, x1(0.0), {.check_multiplicity = true});
  CHECK(c.pi0()[0] == doctest::Approx(10.0));
  CHECK(c.pi1()[0] == doctest::Approx(20.0));
  CHECK_FALSE(c.multiple);
}

TEST_CASE("closed-form price line on the toy") {
  // With y_c = y_d = 0, π0 = 10 − 2x.
  auto p = fixtures::toy();
  for (double x : {0.5, 1.0, 2.0, 3.0, 4.5}) {
    auto r = equilibrium_prices(p, x1(x));
    CHECK(r.pi0()[0] == doctest::Approx(10 - 2 * x));
  }
}

TEST_CASE("kkt residual report") {
  auto p = fixtures::toy();
  FollowerPrimalSolution prim;
  prim.y = Vec(4);
  prim.y << 2.375, 2.375, 0, 0;
  prim.w = Vec::Zero(0);
  FollowerDualSolution d;
  d.pi0 = x1(5.25);
  d.pi1 = x1(17.625);
  d.mu_y = Vec(4);
  d.mu_y << 0, 0, 4.75, 2.375;
  d.mu_w = d.theta_w = Vec::Zero(0);
  d.theta_y = Vec::Zero(4);
  auto rep = check_kkt(p, x1(2.375), prim, d);
  CHECK(rep.max_abs() <= 1e-8);

  d.mu_y[0] += 1.0;
  CHECK(check_kkt(p, x1(2.375), prim, d).stationarity == doctest::Approx(1.0));

  FollowerPrimalSolution zero;
  zero.y = Vec::Zero(4);
  zero.w = Vec::Zero(0);
  CHECK(check_kkt(p, x1(1.0), zero, d).primal == doctest::Approx(1.0));
}

TEST_CASE("finite upper bounds produce theta and strong duality") {
  auto p = fixtures::toy();
  p.ub_y << kInf, 2.6, kInf, kInf;
  p.r[1] = -40;
  auto s = solve_follower_primal(p, x1(2.375));
  auto d = solve_follower_dual(p, x1(2.375));
  REQUIRE(s.ok());
  REQUIRE(d.ok());
  CHECK(s.y[1] == doctest::Approx(2.6));
  CHECK(d.theta_y[1] > 0);
  CHECK(std::abs(s.objective - d.objective) <= 1e-6 * (1 + std::abs(s.objective)));
  CHECK(check_kkt(p, x1(2.375), s, d).max_rel() <= 1e-8);
}

TEST_CASE("random follower QPs: uniqueness, strong duality, weak duality") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto p = fixtures::toy();
  for (int t = 0; t < 40; ++t) {
    Mat B(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) B(i, j) = u(rng) - 0.5;
    p.R = B * B.transpose() + 0.2 * Mat::Identity(4, 4);
    for (int i = 0; i < 4; ++i) p.r[i] = 40 * (u(rng) - 0.5);
    const Vec x = x1(7.5 * u(rng));
    auto s1 = solve_follower_primal(p, x);
    auto s2 = solve_follower_primal(p, x);
    auto d = solve_follower_dual(p, x);
    INFO("trial " << t << " dual " << to_string(d.status));
    REQUIRE(s1.ok());
    REQUIRE(d.ok());
    CHECK((s1.y - s2.y).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(std::abs(s1.objective - d.objective) <= 1e-6 * (1 + std::abs(s1.objective)));
    CHECK(check_kkt(p, x, s1, d).max_rel() <= 1e-8);
    auto o = fixtures::enumerate_kkt(p.R, p.r, p.G(), p.follower_rhs(x));
    REQUIRE(o.found);
    CHECK(std::abs(o.value - s1.objective) <= 1e-6 * (1 + std::abs(o.value)));

    // Weak duality: any dual-feasible point stays below φ_p.
    FollowerDualSolution dd = d;
    dd.pi0[0] += 1.0;
    dd.mu_y = p.R * d.y + p.r + p.G().transpose() * Vec((Vec(2) << dd.pi0[0], dd.pi1[0]).finished());
    if (dd.mu_y.minCoeff() >= 0) {
      const double val = -0.5 * d.y.dot(p.R * d.y) - dd.pi0[0] * x[0];
      CHECK(val <= s1.objective + 1e-9);
    }
  }
}
