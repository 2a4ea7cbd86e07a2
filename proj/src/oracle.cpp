#include "spe/oracle.hpp"

#include "spe/follower.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace spe {

std::optional<double> leader_value(const BilevelSpeProblem& p, const Vec& z, const Vec& x, double tol) {
  const PriceResult pr = equilibrium_prices(p, x);
  if (pr.status != QpStatus::Optimal) return std::nullopt;
  const Vec pi0 = pr.pi0(), pi1 = pr.pi1();
  if (pi0.size() > 0 && pi0.minCoeff() < -tol) return std::nullopt;
  for (int k = 0; k < pi1.size(); ++k)
    if (!p.row1_price_free(k) && pi1[k] < -tol) return std::nullopt;
  const Vec ex = p.coupling * x;
  double rev = 0;
  for (int k = 0; k < p.n_row0(); ++k) rev += p.weight(p.row0_block(k)) * pi0[k] * ex[k];
  return rev - p.c_x.dot(x) - p.c_z.dot(z);
}

OracleResult grid_oracle(const BilevelSpeProblem& p, double step, const OracleOptions& opt) {
  if (!(step > 0)) throw std::invalid_argument("grid step must be positive");
  const int nz = p.n_z(), nx = p.n_x();
  if (nz > opt.max_binaries) throw TooLarge(std::to_string(nz) + " binaries exceed the oracle limit");
  for (int i = 0; i < nz; ++i)
    if (p.integer_z.empty() || !p.integer_z[i]) throw std::invalid_argument("oracle needs integer z");

  std::vector<std::vector<double>> grid(nx);
  OracleResult res;
  double total = 1;
  for (int i = 0; i < nz; ++i) total *= p.ub_z[i] + 1;
  for (int j = 0; j < nx; ++j) {
    const double ub = p.ub_x[j];
    const long long n = static_cast<long long>(std::floor(ub / step + 1e-9));
    for (long long k = 0; k <= n; ++k) grid[j].push_back(k * step);
    if (grid[j].back() < ub - 1e-12 * std::max(1.0, ub)) grid[j].push_back(ub);
    total *= static_cast<double>(grid[j].size());
  }
  if (total > static_cast<double>(opt.max_points))
    throw TooLarge("grid of " + std::to_string(static_cast<long long>(total)) + " points exceeds the limit");
  res.points = static_cast<long long>(total);

  long long nxg = 1;
  std::vector<long long> stride(nx);
  for (int j = 0; j < nx; ++j) {
    stride[j] = nxg;
    nxg *= static_cast<long long>(grid[j].size());
  }
  // Follower part of the value per x grid point: NaN = not computed, −∞ = infeasible.
  const double kUnset = std::nan("");
  std::vector<double> rev(nxg, kUnset);
  auto x_at = [&](long long flat) {
    Vec x(nx);
    for (int j = 0; j < nx; ++j) x[j] = grid[j][(flat / stride[j]) % grid[j].size()];
    return x;
  };

  Vec z = Vec::Zero(nz);
  bool more = true;
  while (more) {
    for (long long flat = 0; flat < nxg; ++flat) {
      const Vec x = x_at(flat);
      Vec zx(nz + nx);
      zx << z, x;
      if (p.n_leader_rows() > 0) {
        const Vec slack = p.leader_A * zx - p.leader_b;
        bool ok = true;
        for (int r = 0; r < slack.size() && ok; ++r) ok = slack[r] <= opt.tol * std::max(1.0, std::abs(p.leader_b[r]));
        if (!ok) continue;
      }
      if (std::isnan(rev[flat])) {
        ++res.evaluations;
        auto v = leader_value(p, Vec::Zero(nz), x, opt.tol);
        rev[flat] = v ? *v + p.c_x.dot(x) : -kInf;
      }
      if (rev[flat] == -kInf) continue;
      const double value = rev[flat] - p.c_x.dot(x) - p.c_z.dot(z);
      if (!res.feasible || value > res.value) {
        res.feasible = true;
        res.value = value;
        res.z = z;
        res.x = x;
      }
    }
    more = false;
    for (int i = 0; i < nz; ++i) {
      if (z[i] < p.ub_z[i]) {
        z[i] += 1;
        more = true;
        break;
      }
      z[i] = 0;
    }
  }

  for (int j = 0; j < nx; ++j) {
    double lj = 0, sj = 0;
    for (size_t k = 1; k < grid[j].size(); ++k) sj = std::max(sj, grid[j][k] - grid[j][k - 1]);
    for (long long flat = 0; flat < nxg; ++flat) {
      const long long k = (flat / stride[j]) % grid[j].size();
      if (k + 1 >= static_cast<long long>(grid[j].size())) continue;
      const double a = rev[flat], b = rev[flat + stride[j]];
      if (std::isnan(a) || std::isnan(b) || a == -kInf || b == -kInf) continue;
      const double dx = grid[j][k + 1] - grid[j][k];
      lj = std::max(lj, std::abs((b - p.c_x[j] * grid[j][k + 1]) - (a - p.c_x[j] * grid[j][k])) / dx);
    }
    res.lipschitz += lj;
    res.resolution += lj * sj;
  }
  return res;
}

}  // namespace spe
