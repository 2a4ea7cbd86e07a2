#include "doctest.h"

#include "fixtures.hpp"
#include "spe/bnb.hpp"

#include <random>
#include <sstream>

using namespace spe;

namespace {

// Maximum over every binary assignment and every side choice of every pair.
double enumerate_model(const SingleLevelModel& m) {
  const int nb = static_cast<int>(m.integers.size()), np = static_cast<int>(m.pairs.size());
  double best = -kInf;
  for (int bm = 0; bm < (1 << nb); ++bm) {
    for (int pm = 0; pm < (1 << np); ++pm) {
      std::vector<BranchFixing> fx;
      for (int k = 0; k < nb; ++k) {
        const double v = bm >> k & 1;
        fx.push_back(BranchFixing::integer(m.integers[k], false, v));
        fx.push_back(BranchFixing::integer(m.integers[k], true, v));
      }
      for (int k = 0; k < np; ++k) fx.push_back(BranchFixing::complementarity(k, pm >> k & 1));
      Relaxation r = build_relaxation(m, fx);
      QpSolution s = solve_qp(r.qp);
      if (s.optimal()) best = std::max(best, r.model_value(s.objective));
    }
  }
  return best;
}

BilevelSpeProblem random_toy(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto p = fixtures::toy();
  Mat B(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) B(i, j) = u(rng) - 0.5;
  p.R = B * B.transpose() + 0.3 * Mat::Identity(4, 4);
  p.r << 5 + 10 * u(rng), -10 - 20 * u(rng), 5 + 10 * u(rng), 10 + 20 * u(rng);
  p.c_x[0] = 3 * u(rng);
  p.c_z[0] = 5 * u(rng);
  return p;
}

}  // namespace

TEST_CASE("toy solves at the root") {
  auto p = fixtures::toy();
  auto m = build_duality_model(p);
  std::ostringstream log;
  BnbConfig cfg;
  cfg.log = &log;
  auto r = solve(m, cfg);
  CHECK(r.status == BnbStatus::OptimalWithinGap);
  CHECK(r.objective == doctest::Approx(10.78125).epsilon(1e-5));
  CHECK(r.root_relax == doctest::Approx(11.12347).epsilon(1e-4 / 11.12347));
  CHECK(r.nodes == 1);
  CHECK(r.gap <= 1e-4);
  CHECK(r.incumbent[m.layout.x] == doctest::Approx(2.375).epsilon(1e-6));
  CHECK(log.str().rfind("node=1 bound=", 0) == 0);
  CHECK(verify_point(m, r.incumbent));
}

TEST_CASE("toy without probing branches but reaches the same optimum") {
  auto p = fixtures::toy();
  auto m = build_duality_model(p);
  BnbConfig cfg;
  cfg.root_probing = false;
  cfg.gap = 0.0;
  std::ostringstream log;
  cfg.log = &log;
  auto r = solve(m, cfg);
  CHECK(r.status == BnbStatus::OptimalWithinGap);
  CHECK(r.objective == doctest::Approx(10.78125).epsilon(1e-6));
  CHECK(r.nodes > 1);
  // Best bound never increases.
  std::istringstream in(log.str());
  std::string line;
  double last = kInf;
  while (std::getline(in, line)) {
    const auto a = line.find("bound=") + 6;
    const double b = std::stod(line.substr(a, line.find(' ', a) - a));
    CHECK(b <= last + 1e-12);
    last = b;
  }
  CHECK(last == doctest::Approx(10.78125).epsilon(1e-6));
}

TEST_CASE("seeded incumbent fathoms against the gap") {
  auto p = fixtures::toy();
  auto m = build_duality_model(p);
  int calls = 0;
  Vec opt;
  {
    auto r = solve(m);
    opt = r.incumbent;
  }
  BnbConfig cfg;
  cfg.root_probing = false;
  auto r = solve(m, cfg, [&](const NodeContext&) -> std::optional<Vec> {
    ++calls;
    return opt;
  });
  CHECK(r.objective == doctest::Approx(10.78125).epsilon(1e-6));
  CHECK(r.incumbents.front().source == "heuristic");
  CHECK(r.bound >= r.objective);
  CHECK(r.gap <= 1e-4);
}

TEST_CASE("bad heuristic candidates are rejected") {
  auto p = fixtures::toy();
  auto m = build_duality_model(p);
  auto r = solve(m, {}, [&](const NodeContext& ctx) -> std::optional<Vec> {
    Vec v = *ctx.point;
    v[m.layout.y] += 1.0;  // breaks flow conservation
    return v;
  });
  CHECK(r.heuristic_rejected == r.heuristic_calls);
  CHECK(r.heuristic_calls >= 1);
  CHECK(r.objective == doctest::Approx(10.78125).epsilon(1e-5));
}

TEST_CASE("infeasible leader set") {
  auto p = fixtures::toy();
  p.leader_A.conservativeResize(2, 2);
  p.leader_A.row(1) << 0, -1;
  p.leader_b.conservativeResize(2);
  p.leader_b[1] = -8.0;
  auto r = solve(build_duality_model(p));
  CHECK(r.status == BnbStatus::Infeasible);
  CHECK_FALSE(r.has_incumbent);
}

TEST_CASE("select_branch rules") {
  auto p = fixtures::toy();
  auto m = build_duality_model(p);
  const auto& L = m.layout;
  Vec v = Vec::Zero(m.n());
  v[L.z] = 0.5;
  // pair 0: y_a·μ_a = 0.1, pair 1: y_b·μ_b = 3.2
  v[L.y] = 0.1;
  v[L.mu_y] = 1.0;
  v[L.y + 1] = 1.6;
  v[L.mu_y + 1] = 2.0;
  auto d = select_branch(v, m);
  REQUIRE(d);
  CHECK(d->kind == BranchFixing::Kind::Integer);
  CHECK(d->index == L.z);

  v[L.z] = 1.0;
  d = select_branch(v, m);
  REQUIRE(d);
  CHECK(d->kind == BranchFixing::Kind::Complementarity);
  CHECK(d->index == 1);

  v[L.mu_y] = v[L.mu_y + 1] = 0.0;
  CHECK_FALSE(select_branch(v, m));

  // Equal products: lowest pair index wins.
  v[L.mu_y] = 1.0;
  v[L.y] = 2.0;
  v[L.y + 1] = 1.0;
  v[L.mu_y + 1] = 2.0;
  d = select_branch(v, m);
  REQUIRE(d);
  CHECK(d->index == 0);
}

TEST_CASE("bound validity against enumeration") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 12; ++t) {
    auto p = random_toy(rng);
    auto m = build_duality_model(p);
    const double truth = enumerate_model(m);
    BnbConfig cfg;
    cfg.gap = 0.0;
    auto r = solve(m, cfg);
    INFO("trial " << t);
    REQUIRE(r.status == BnbStatus::OptimalWithinGap);
    CHECK(r.objective == doctest::Approx(truth).epsilon(1e-6));
    CHECK(r.root_relax >= truth - 1e-7);
    CHECK(r.bound >= truth - 1e-7);
  }
}

TEST_CASE("single worker runs are reproducible") {
  auto p = fixtures::toy();
  auto m = build_duality_model(p);
  BnbConfig cfg;
  cfg.root_probing = false;
  const auto a = bnb_result_json(m, solve(m, cfg));
  const auto b = bnb_result_json(m, solve(m, cfg));
  CHECK(a == b);
  cfg.workers = 3;
  auto par = solve(m, cfg);
  CHECK(par.objective == doctest::Approx(10.78125).epsilon(1e-6));
}
