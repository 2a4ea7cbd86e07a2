#pragma once

#include "spe/problem.hpp"

#include <Eigen/Dense>

#include <vector>

namespace fixtures {

using spe::Mat;
using spe::Vec;

// The four-variable instance: one candidate facility, market y = (a, b, c, d).
inline spe::BilevelSpeProblem toy() {
  spe::BilevelSpeProblem p;
  p.integer_z = {true};
  p.integer_x = {false};
  p.c_z = Vec::Constant(1, 0.5);
  p.c_x = Vec::Constant(1, 0.5);
  p.ub_z = Vec::Ones(1);
  p.ub_x = Vec::Constant(1, 7.5);
  p.leader_A = Mat(1, 2);
  p.leader_A << -10, 1;
  p.leader_b = Vec::Zero(1);
  p.G0 = Mat(1, 4);
  p.G0 << 1, 0, -1, 0;
  p.G1 = Mat(1, 4);
  p.G1 << -1, 1, 0, -1;
  p.h0 = Vec::Zero(1);
  p.h1 = Vec::Zero(1);
  p.ub_y = Vec::Constant(4, spe::kInf);
  p.ub_w = Vec::Zero(0);
  p.R = Mat::Identity(4, 4);
  p.r = Vec(4);
  p.r << 10, -20, 10, 20;
  p.z_names = {"z"};
  p.x_names = {"x"};
  p.finalize();
  return p;
}

struct OracleKkt {
  bool found = false;
  Vec y, pi, mu;
  double value = 0;
};

// min ½yᵀRy + rᵀy  s.t.  G y = b, y ≥ 0, by enumerating the zero set (small n only).
// pi and mu are reliable only when the optimum is nondegenerate.
inline OracleKkt enumerate_kkt(const Mat& R, const Vec& r, const Mat& G, const Vec& b) {
  const int n = static_cast<int>(r.size()), m = static_cast<int>(b.size());
  OracleKkt best;
  best.value = spe::kInf;
  for (int mask = 0; mask < (1 << n); ++mask) {
    std::vector<int> fr;
    for (int i = 0; i < n; ++i)
      if (!(mask >> i & 1)) fr.push_back(i);
    const int nf = static_cast<int>(fr.size());
    Mat K = Mat::Zero(nf + m, nf + m);
    Vec rhs(nf + m);
    for (int a = 0; a < nf; ++a) {
      for (int c = 0; c < nf; ++c) K(a, c) = R(fr[a], fr[c]);
      for (int k = 0; k < m; ++k) K(a, nf + k) = K(nf + k, a) = G(k, fr[a]);
      rhs[a] = -r[fr[a]];
    }
    rhs.tail(m) = b;
    Vec s = K.completeOrthogonalDecomposition().solve(rhs);
    if ((K * s - rhs).cwiseAbs().maxCoeff() > 1e-9 * (1 + rhs.cwiseAbs().maxCoeff())) continue;
    Vec y = Vec::Zero(n);
    for (int a = 0; a < nf; ++a) y[fr[a]] = s[a];
    if (y.minCoeff() < -1e-12) continue;
    // Multipliers may be non-unique; the primal minimum over stationary candidates is the optimum.
    Vec pi = s.tail(m);
    Vec mu = R * y + r + G.transpose() * pi;
    const double v = 0.5 * y.dot(R * y) + r.dot(y);
    if (v < best.value) {
      best.found = true;
      best.value = v;
      best.y = y;
      best.pi = pi;
      best.mu = mu;
    }
  }
  return best;
}

}  // namespace fixtures
