#include "doctest.h"

#include "fixtures.hpp"

#include <random>

using namespace spe;

TEST_CASE("toy instance validates") {
  auto p = fixtures::toy();
  auto rep = validate(p);
  CHECK(rep.ok());
}

TEST_CASE("zero R is rejected") {
  auto p = fixtures::toy();
  p.R.setZero();
  auto rep = validate(p);
  CHECK_FALSE(rep.ok());
  CHECK(rep.mentions("R not positive definite"));
}

TEST_CASE("nearly singular R fails the pivot threshold") {
  auto p = fixtures::toy();
  p.R(3, 3) = 1e-11;
  CHECK(validate(p).mentions("positive definite"));
}

TEST_CASE("G0 row count must match the coupling rows") {
  auto p = fixtures::toy();
  p.G0 = Mat::Zero(2, 4);
  auto rep = validate(p);
  CHECK_FALSE(rep.ok());
  CHECK(rep.mentions("dimension mismatch"));
}

TEST_CASE("negative or infinite leader bound is rejected") {
  auto p = fixtures::toy();
  p.ub_x[0] = kInf;
  CHECK_FALSE(validate(p).ok());
  p = fixtures::toy();
  p.ub_z[0] = -1;
  CHECK_FALSE(validate(p).ok());
}

TEST_CASE("bound partition") {
  auto p = fixtures::toy();
  auto part = partition_bounds(p);
  CHECK(part.inf_y == std::vector<int>{0, 1, 2, 3});
  CHECK(part.fin_y.empty());

  p.ub_y = Vec::Constant(4, 3.0);
  CHECK(partition_bounds(p).inf_y.empty());

  BilevelSpeProblem q;
  q.ub_y = Vec(3);
  q.ub_y << kInf, 5, kInf;
  q.ub_w = Vec::Zero(0);
  auto pq = partition_bounds(q);
  CHECK(pq.inf_y == std::vector<int>{0, 2});
  CHECK(pq.fin_y == std::vector<int>{1});
  CHECK(partition_bounds(q) == pq);
}

TEST_CASE("random mixed partitions are exact and idempotent") {
  std::mt19937 rng(3);
  for (int t = 0; t < 50; ++t) {
    BilevelSpeProblem q;
    const int n = 1 + static_cast<int>(rng() % 12);
    q.ub_y = Vec(n);
    q.ub_w = Vec(n / 2);
    for (int i = 0; i < n; ++i) q.ub_y[i] = rng() % 2 ? kInf : double(rng() % 5);
    for (int i = 0; i < n / 2; ++i) q.ub_w[i] = rng() % 2 ? kInf : 1.0;
    auto a = partition_bounds(q);
    CHECK(a == partition_bounds(q));
    std::vector<int> all = a.inf_y;
    all.insert(all.end(), a.fin_y.begin(), a.fin_y.end());
    std::sort(all.begin(), all.end());
    CHECK(static_cast<int>(all.size()) == n);
    for (int i = 0; i < n; ++i) CHECK(all[i] == i);
    CHECK(a.inf_w.size() + a.fin_w.size() == static_cast<size_t>(n / 2));
  }
}

TEST_CASE("vi cost is strictly monotone for validated problems") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  auto p = fixtures::toy();
  Mat B(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) B(i, j) = g(rng);
  p.R = B * B.transpose() + 0.05 * Mat::Identity(4, 4);
  REQUIRE(validate(p).ok());
  for (int t = 0; t < 100; ++t) {
    Vec a(4), b(4);
    for (int i = 0; i < 4; ++i) {
      a[i] = g(rng);
      b[i] = g(rng);
    }
    CHECK((p.vi_cost(a) - p.vi_cost(b)).dot(a - b) > 0);
  }
}

TEST_CASE("block structure checks and extraction") {
  auto p = fixtures::toy();
  // Two copies of the toy follower, second one with half weight.
  BilevelSpeProblem q = p;
  q.G0 = Mat::Zero(2, 8);
  q.G0.block(0, 0, 1, 4) = p.G0;
  q.G0.block(1, 4, 1, 4) = p.G0;
  q.G1 = Mat::Zero(2, 8);
  q.G1.block(0, 0, 1, 4) = p.G1;
  q.G1.block(1, 4, 1, 4) = p.G1;
  q.h0 = Vec::Zero(2);
  q.h1 = Vec::Zero(2);
  q.H0 = Mat::Zero(2, 0);
  q.H1 = Mat::Zero(2, 0);
  q.coupling = Mat::Ones(2, 1);
  q.ub_y = Vec::Constant(8, kInf);
  q.R = Mat::Identity(8, 8);
  q.r = Vec(8);
  q.r << p.r, p.r;
  q.block_y = {0, 0, 0, 0, 1, 1, 1, 1};
  q.block_row0 = {0, 1};
  q.block_row1 = {0, 1};
  q.block_weight = {0.5, 0.5};
  CHECK(validate(q).ok());
  auto b1 = extract_block(q, 1);
  CHECK(validate(b1).ok());
  CHECK(b1.G0 == p.G0);
  CHECK(b1.r == p.r);

  q.R(0, 5) = q.R(5, 0) = 0.1;
  CHECK(validate(q).mentions("couples different blocks"));
}
