#include "doctest.h"

#include "efl_fixtures.hpp"
#include "fixtures.hpp"
#include "spe/csv.hpp"
#include "spe/follower.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace spe;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("spe_test_" + name);
  std::filesystem::remove_all(d);
  return d.string();
}

}  // namespace

TEST_CASE("generator sizes and determinism") {
  auto a = generate_efl(10, 15, 42);
  CHECK(a.n_nodes == 10);
  CHECK(a.n_arcs() == 15);
  CHECK(a.candidates.size() == 7);
  CHECK(a.demand.size() == 5);
  CHECK(a.supply.size() == 5);
  std::set<std::pair<int, int>> seen;
  for (const auto& arc : a.arcs) {
    CHECK(arc.i != arc.j);
    seen.insert({arc.i, arc.j});
    CHECK(arc.alpha0 >= 0);
    CHECK(arc.alpha0 <= 3);
    CHECK(arc.alpha1 > 0);
    CHECK(arc.alpha1 <= 2);
  }
  CHECK(seen.size() == 15);
  CHECK(a.beta0.minCoeff() >= 1300);
  CHECK(a.beta0.maxCoeff() <= 1500);
  CHECK(a.beta1.minCoeff() >= 3);
  CHECK(a.gamma0.minCoeff() >= 1);
  CHECK(a.gamma1.maxCoeff() <= 1);
  CHECK(a.open_cost.minCoeff() >= 150);
  CHECK(a.unit_cost.maxCoeff() <= 5);
  CHECK(a.capacity.minCoeff() >= 100);
  CHECK(a.q_max == doctest::Approx(350.0 * 7 / 4));
  CHECK(check_efl(a).empty());

  const auto da = temp_dir("gen_a"), db = temp_dir("gen_b");
  write_efl(a, da);
  write_efl(generate_efl(10, 15, 42), db);
  for (const char* f : {"nodes.csv", "arcs.csv", "demand.csv", "supply.csv", "candidates.csv", "meta.csv"})
    CHECK(slurp(da + "/" + f) == slurp(db + "/" + f));
  CHECK(slurp(da + "/arcs.csv") != [&] {
    const auto dc = temp_dir("gen_c");
    write_efl(generate_efl(10, 15, 43), dc);
    return slurp(dc + "/arcs.csv");
  }());
}

TEST_CASE("arc count limits") {
  CHECK(generate_efl(4, 12, 3).n_arcs() == 12);
  CHECK_THROWS_AS(generate_efl(4, 13, 3), TooManyArcs);
  CHECK_THROWS_AS(generate_efl(4, 2, 3), std::invalid_argument);
}

TEST_CASE("csv round trip is exact") {
  auto a = generate_efl(12, 20, 5);
  const auto d = temp_dir("rt");
  write_efl(a, d);
  auto b = read_efl(d);
  CHECK(b.seed == a.seed);
  CHECK(b.q_max == a.q_max);
  auto pa = efl_to_bilevel(a), pb = efl_to_bilevel(b);
  CHECK(pa.R == pb.R);
  CHECK(pa.r == pb.r);
  CHECK(pa.G0 == pb.G0);
  CHECK(pa.G1 == pb.G1);
  CHECK(pa.leader_A == pb.leader_A);
  CHECK(pa.c_x == pb.c_x);
  CHECK(pa.ub_x == pb.ub_x);
}

TEST_CASE("missing file is a parse error") {
  const auto d = temp_dir("empty");
  std::filesystem::create_directories(d);
  CHECK_THROWS_AS(read_efl(d), ParseError);
}

TEST_CASE("toy viewed as a one-candidate instance") {
  auto p = efl_to_bilevel(fixtures::toy_efl());
  auto t = fixtures::toy();
  CHECK(p.G0 == t.G0);
  CHECK(p.G1 == t.G1);
  CHECK(p.R == t.R);
  CHECK(p.r == t.r);
  CHECK(p.h0 == t.h0);
  CHECK(p.h1 == t.h1);
  CHECK(p.ub_x == t.ub_x);
  CHECK(p.ub_z == t.ub_z);
  CHECK(p.c_x == t.c_x);
  CHECK(p.c_z == t.c_z);
  CHECK(p.leader_A == t.leader_A);
  CHECK(p.leader_b == t.leader_b);
  CHECK(p.ub_y == t.ub_y);
  CHECK(p.integer_z == t.integer_z);
  CHECK(validate(p).ok());
}

TEST_CASE("demand column sign and budget row") {
  auto e = generate_efl(10, 15, 42);
  auto p = efl_to_bilevel(e);
  REQUIRE(validate(p).ok());
  const Mat G = p.G();
  const int na = e.n_arcs();
  for (size_t k = 0; k < e.demand.size(); ++k) {
    CHECK(G(efl_node_row(e, e.demand[k]), na + k) == 1.0);
    CHECK(G.col(na + k).sum() == 1.0);
  }
  for (size_t k = 0; k < e.supply.size(); ++k) CHECK(G(efl_node_row(e, e.supply[k]), na + e.demand.size() + k) == -1.0);
  for (int k = 0; k < na; ++k) CHECK(G.col(k).sum() == 0.0);
  // Seven candidates with capacities ≥ 100 exceed q_max = 612.5: the budget row is present.
  CHECK(p.n_leader_rows() == 8);
  CHECK(p.leader_b[7] == doctest::Approx(612.5));
  CHECK(partition_bounds(p).fin_y.empty());
}

TEST_CASE("random instance strong duality at zero production") {
  for (std::uint64_t seed : {1, 2, 3}) {
    auto p = efl_to_bilevel(generate_efl(10, 15, seed));
    const Vec x = Vec::Zero(p.n_x());
    auto s = solve_follower_primal(p, x);
    auto d = solve_follower_dual(p, x);
    REQUIRE(s.ok());
    REQUIRE(d.ok());
    CHECK(std::abs(s.objective - d.objective) <= 1e-6 * (1 + std::abs(s.objective)));
    // Degenerate at x = 0: the dual QP is only √gap accurate, the primal QP's multipliers are exact.
    CHECK(check_kkt(p, x, s, d).max_rel() <= 1e-6);
    CHECK(check_kkt(p, x, s, realign_dual(p, x, s, d)).max_rel() <= 1e-6);
    CHECK(check_kkt(p, x, s, primal_multipliers(p, x, s)).max_rel() <= 1e-8);
    // Flow conservation.
    CHECK((p.G() * s.y - p.follower_rhs(x)).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("equilibrium semantics on used arcs") {
  auto e = generate_efl(10, 20, 8);
  auto p = efl_to_bilevel(e);
  // Produce only where the output can be consumed locally.
  Vec x = Vec::Zero(p.n_x());
  for (size_t i = 0; i < e.candidates.size(); ++i)
    if (std::count(e.demand.begin(), e.demand.end(), e.candidates[i])) x[i] = 0.3 * p.ub_x[i];
  REQUIRE(x.sum() > 0);
  auto pr = equilibrium_prices(p, x);
  REQUIRE(pr.status == QpStatus::Optimal);
  const Vec pi = (Vec(p.n_row0() + p.n_row1()) << pr.pi0(), pr.pi1()).finished();
  for (int k = 0; k < e.n_arcs(); ++k) {
    if (pr.primal.y[k] <= 1e-6) continue;
    const auto& a = e.arcs[k];
    // Head price = tail price + congestion cost.
    const double cost = a.alpha0 + a.alpha1 * pr.primal.y[k];
    CHECK(pi[efl_node_row(e, a.j)] - pi[efl_node_row(e, a.i)] == doctest::Approx(cost).epsilon(1e-7));
  }
}
