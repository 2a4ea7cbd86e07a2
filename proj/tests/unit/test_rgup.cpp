#include "doctest.h"

#include "spe/csv.hpp"
#include "spe/follower.hpp"
#include "spe/heuristics.hpp"
#include "spe/rgup.hpp"

#include <filesystem>
#include <fstream>

using namespace spe;

namespace {

const std::string kData = SPE_TEST_DATA;

std::string temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("spe_test_" + name);
  std::filesystem::remove_all(d);
  return d.string();
}

void write_file(const std::string& path, const std::string& text) {
  std::filesystem::create_directories(std::filesystem::path(path).parent_path());
  std::ofstream(path) << text;
}

// Triangle 1-2-3 with a chosen line list; generators at 1 and 2, loads at 2 and 3, candidate 3.
std::string triangle(const std::string& name, const std::string& lines) {
  const auto d = temp_dir(name);
  write_file(d + "/lower/buses.csv", "bus\n1\n2\n3\n");
  write_file(d + "/lower/lines.csv", "from,to,reactance,capacity\n" + lines);
  write_file(d + "/lower/generators.csv", "bus,smax,gamma0,gamma1\n1,150,15,0.05\n2,100,25,0.3\n");
  write_file(d + "/lower/loads.csv", "bus,mw\n2,60\n3,80\n");
  write_file(d + "/upper.csv", "bus,c,v,qbar\n3,0,0,100\n");
  return d;
}

int rank(const Mat& m) {
  if (m.rows() == 0) return 0;
  Eigen::ColPivHouseholderQR<Mat> qr(m);
  return static_cast<int>(qr.rank());
}

}  // namespace

TEST_CASE("ieee14 counts") {
  auto net = load_ieee(kData + "/ieee14");
  CHECK(net.n_buses() == 14);
  CHECK(net.n_lines() == 20);
  CHECK(net.loads.size() == 11);
  CHECK(net.gens.size() == 2);
  CHECK(net.candidates.size() == 5);
  CHECK(net.warnings.empty());
  CHECK(check_rgup(net).empty());
  const Mat L = cycle_basis(net);
  CHECK(L.rows() == 7);
  CHECK(rank(L) == 7);
}

TEST_CASE("ieee30 counts") {
  auto net = load_ieee(kData + "/ieee30");
  CHECK(net.n_lines() == 41);
  CHECK(net.loads.size() == 21);
  CHECK(net.gens.size() == 2);
  CHECK(net.candidates.size() == 10);
  CHECK(net.warnings.empty());
  CHECK(rank(cycle_basis(net)) == 41 - 30 + 1);
}

TEST_CASE("empty folder is a parse error") {
  const auto d = temp_dir("rgup_empty");
  std::filesystem::create_directories(d);
  CHECK_THROWS_AS(load_ieee(d), ParseError);
}

TEST_CASE("demand slopes") {
  RgupNetwork net = load_ieee(kData + "/bus3");
  net.load_mw << 50, 10;
  build_demand_slopes(net);
  CHECK(net.beta0[0] == 40.0);
  CHECK(net.beta1[0] == doctest::Approx(0.2));
  CHECK(net.beta1[1] == doctest::Approx(1.0));
  net.load_mw[1] = 0;
  CHECK_THROWS_AS(build_demand_slopes(net), ZeroLoadRating);
  net.load_mw[1] = 10;
  net.gamma0[0] = 35;
  CHECK_THROWS_AS(build_demand_slopes(net), GeneratorBidRange);
}

TEST_CASE("parallel lines merge") {
  auto net = load_ieee(triangle("rgup_par", "1,2,0.2,60\n2,1,0.2,40\n2,3,0.1,100\n1,3,0.1,40\n"));
  CHECK(net.raw_lines == 4);
  REQUIRE(net.n_lines() == 3);
  CHECK(net.lines[0].reactance == doctest::Approx(0.1));
  CHECK(net.lines[0].capacity == 100.0);
}

TEST_CASE("generator on a candidate bus is rejected") {
  const auto d = triangle("rgup_bad", "1,2,0.1,100\n2,3,0.1,100\n1,3,0.1,40\n");
  write_file(d + "/upper.csv", "bus,c,v,qbar\n2,0,0,100\n");
  CHECK_THROWS_AS(load_ieee(d), ParseError);
}

TEST_CASE("triangle loop row") {
  auto net = load_ieee(kData + "/bus3");
  const Mat L = cycle_basis(net);
  REQUIRE(L.rows() == 1);
  // Net flow coefficient of each line: entries on the two arcs are opposite.
  Vec net_coef(3);
  for (int l = 0; l < 3; ++l) {
    CHECK(L(0, 2 * l) == -L(0, 2 * l + 1));
    net_coef[l] = L(0, 2 * l) / net.lines[l].reactance;
  }
  CHECK(net_coef.cwiseAbs().minCoeff() == 1.0);
  // Lines 1-2, 2-3 traversed forward, 1-3 backward (up to orientation).
  CHECK(net_coef[0] * net_coef[1] == 1.0);
  CHECK(net_coef[0] * net_coef[2] == -1.0);
}

TEST_CASE("tree network has no loops") {
  auto net = load_ieee(triangle("rgup_tree", "1,2,0.1,100\n2,3,0.1,100\n"));
  CHECK(cycle_basis(net).rows() == 0);
}

TEST_CASE("samples io and range") {
  auto net = load_ieee(kData + "/ieee14");
  auto s = generate_samples(5, 10, 1);
  CHECK(s.K() == 10);
  CHECK(s.xi.minCoeff() >= 0.0);
  CHECK(s.xi.maxCoeff() <= 1.0);
  const auto d = temp_dir("rgup_samples");
  write_samples(net, s, d + "/samples_K10.csv");
  auto t = read_samples(net, d + "/samples_K10.csv");
  CHECK(t.xi == s.xi);
  CHECK(generate_samples(5, 10, 1).xi == s.xi);
  CHECK(generate_samples(5, 10, 2).xi != s.xi);
}

TEST_CASE("lowering structure") {
  auto net = load_ieee(kData + "/ieee14");
  auto s = generate_samples(5, 3, 7);
  auto p = rgup_to_bilevel(net, s);
  REQUIRE(validate(p).ok());
  CHECK(p.n_blocks() == 3);
  CHECK(p.weight(2) == doctest::Approx(1.0 / 3));
  CHECK(p.n_leader_rows() == 5);
  CHECK(p.n_w() == 3 * 40);
  CHECK(p.n_row1() == 3 * (9 + 7));
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 5; ++i) CHECK(p.coupling(5 * k + i, i) == s.xi(k, i));
  int free_rows = 0;
  for (int i = 0; i < p.n_row1(); ++i) free_rows += p.row1_price_free(i);
  CHECK(free_rows == 21);
  const auto part = partition_bounds(p);
  CHECK(part.fin_y.size() == 3 * 2);
  CHECK(part.inf_w.empty());
}

TEST_CASE("kirchhoff and balance at follower optima") {
  auto net = load_ieee(kData + "/ieee14");
  auto p = rgup_to_bilevel(net, generate_samples(5, 2, 3));
  const Mat L = cycle_basis(net);
  const Vec x = 0.6 * p.ub_x;
  auto prim = solve_follower_primal(p, x);
  REQUIRE(prim.ok());
  for (int k = 0; k < 2; ++k) CHECK((L * prim.w.segment(40 * k, 40)).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((p.G() * prim.y + p.H() * prim.w - p.follower_rhs(x)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("spanning tree choice does not change the equilibrium") {
  auto net = load_ieee(kData + "/ieee14");
  auto s = generate_samples(5, 1, 4);
  const Vec x = Vec::Constant(5, 30.0);
  auto a = solve_follower_primal(rgup_to_bilevel(net, s, 0), x);
  auto b = solve_follower_primal(rgup_to_bilevel(net, s, 9), x);
  REQUIRE(a.ok());
  REQUIRE(b.ok());
  CHECK(cycle_basis(net, 0) != cycle_basis(net, 9));
  CHECK((a.y - b.y).cwiseAbs().maxCoeff() <= 1e-7);
  CHECK(std::abs(a.objective - b.objective) <= 1e-7 * (1 + std::abs(a.objective)));
}

TEST_CASE("sample decomposability") {
  auto net = load_ieee(kData + "/ieee14");
  auto s = generate_samples(5, 4, 8);
  auto p = rgup_to_bilevel(net, s);
  const Vec x = 0.5 * p.ub_x;
  auto pr = equilibrium_prices(p, x);
  REQUIRE(pr.status == QpStatus::Optimal);
  const Vec ex = p.coupling * x;
  double saa = 0;
  for (int k = 0; k < p.n_row0(); ++k) saa += p.weight(p.row0_block(k)) * pr.pi0()[k] * ex[k];
  double mean = 0, phi = 0;
  for (int k = 0; k < 4; ++k) {
    UncertaintySamples one;
    one.xi = s.xi.row(k);
    auto q = rgup_to_bilevel(net, one);
    auto r = equilibrium_prices(q, x);
    REQUIRE(r.status == QpStatus::Optimal);
    mean += 0.25 * r.pi0().dot(q.coupling * x);
    phi += r.primal.objective;
  }
  CHECK(std::abs(saa - mean) <= 1e-8 * (1 + std::abs(mean)));
  CHECK(std::abs(pr.primal.objective - phi) <= 1e-8 * (1 + std::abs(phi)));
}

TEST_CASE("raising xi never lowers the injection") {
  auto net = load_ieee(kData + "/bus3");
  const Vec x = Vec::Constant(1, 60.0);
  double last = -1;
  for (double xi : {0.0, 0.25, 0.5, 1.0}) {
    UncertaintySamples s;
    s.xi = Mat::Constant(1, 1, xi);
    auto p = rgup_to_bilevel(net, s);
    auto prim = solve_follower_primal(p, x);
    REQUIRE(prim.ok());
    const double inj = (p.G0 * prim.y + p.H0 * prim.w)[0];
    CHECK(inj == doctest::Approx(xi * 60.0).epsilon(1e-9));
    CHECK(inj >= last);
    last = inj;
  }
}

TEST_CASE("duplicated sample keeps the optimum") {
  auto net = load_ieee(kData + "/bus3");
  UncertaintySamples one, two;
  one.xi = Mat::Constant(1, 1, 0.7);
  two.xi = Mat::Constant(2, 1, 0.7);
  BnbConfig cfg;
  cfg.time_limit = 30;
  auto p1 = rgup_to_bilevel(net, one), p2 = rgup_to_bilevel(net, two);
  auto r1 = solve(build_duality_model(p1), cfg);
  auto r2 = solve(build_duality_model(p2), cfg);
  REQUIRE(r1.status == BnbStatus::OptimalWithinGap);
  REQUIRE(r2.status == BnbStatus::OptimalWithinGap);
  CHECK(r1.objective == doctest::Approx(r2.objective).epsilon(1e-6));

  // Unit samples reproduce the deterministic single follower.
  one.xi.setOnes();
  auto p = rgup_to_bilevel(net, one);
  CHECK(p.coupling == Mat::Identity(1, 1));
  CHECK(p.weight(0) == 1.0);
}

TEST_CASE("per-sample heuristic does two solves per sample") {
  auto net = load_ieee(kData + "/ieee14");
  for (int K : {1, 3}) {
    auto p = rgup_to_bilevel(net, generate_samples(5, K, 2));
    auto c = round_and_repair_rgup(p, Vec::Constant(5, 0.7), 0.4 * p.ub_x, RhConfig::rgup());
    CHECK(c.ok());
    CHECK(c.qp_solves == 2 * K);
    CHECK(c.kkt_residual <= 1e-8);
    CHECK(verify_point(build_duality_model(p), c.point));
  }
}
