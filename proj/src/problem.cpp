#include "spe/problem.hpp"

#include <cmath>
#include <sstream>

namespace spe {

namespace {

constexpr double kPivotTol = 1e-10;

// Plain Cholesky with an absolute pivot threshold.
bool cholesky_pd(const Mat& a) {
  const Eigen::Index n = a.rows();
  Mat l = Mat::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > kPivotTol)) return false;
    l(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
  }
  return true;
}

std::string dims(const Mat& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

template <typename T>
void check_size(ValidationReport& rep, const std::vector<T>& v, size_t n, const char* what) {
  if (!v.empty() && v.size() != n) {
    rep.errors.push_back(std::string("dimension mismatch: ") + what + " has " + std::to_string(v.size()) +
                         " entries, expected " + std::to_string(n));
  }
}

}  // namespace

Mat BilevelSpeProblem::G() const {
  Mat g(G0.rows() + G1.rows(), n_y());
  g << G0, G1;
  return g;
}

Mat BilevelSpeProblem::H() const {
  Mat g(H0.rows() + H1.rows(), n_w());
  if (n_w() > 0) g << H0, H1;
  return g;
}

Vec BilevelSpeProblem::h() const {
  Vec v(n_row0() + n_row1());
  v << h0, h1;
  return v;
}

Vec BilevelSpeProblem::follower_rhs(const Vec& x) const {
  Vec v(n_row0() + n_row1());
  v << coupling * x + h0, h1;
  return v;
}

void BilevelSpeProblem::finalize() {
  if (coupling.size() == 0 && h0.size() == c_x.size()) coupling = Mat::Identity(h0.size(), c_x.size());
  if (H0.size() == 0) H0 = Mat::Zero(h0.size(), ub_w.size());
  if (H1.size() == 0) H1 = Mat::Zero(h1.size(), ub_w.size());
  if (leader_A.size() == 0) leader_A = Mat::Zero(leader_b.size(), c_z.size() + c_x.size());
  if (integer_z.empty()) integer_z.assign(c_z.size(), false);
  if (integer_x.empty()) integer_x.assign(c_x.size(), false);
}

bool ValidationReport::mentions(const std::string& fragment) const {
  for (const auto& e : errors) {
    if (e.find(fragment) != std::string::npos) return true;
  }
  return false;
}

ValidationReport validate(const BilevelSpeProblem& p) {
  ValidationReport rep;
  const int nz = p.n_z(), nx = p.n_x(), ny = p.n_y(), nw = p.n_w();
  const int m0 = p.n_row0(), m1 = p.n_row1();

  auto expect = [&](const Mat& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
    if (m.rows() != rows || m.cols() != cols) {
      rep.errors.push_back(std::string("dimension mismatch: ") + name + " is " + dims(m) + ", expected " +
                           std::to_string(rows) + "x" + std::to_string(cols));
    }
  };
  if (p.ub_z.size() != nz) rep.errors.push_back("dimension mismatch: ub_z length differs from c_z");
  if (p.ub_x.size() != nx) rep.errors.push_back("dimension mismatch: ub_x length differs from c_x");
  check_size(rep, p.integer_z, nz, "integer_z");
  check_size(rep, p.integer_x, nx, "integer_x");
  expect(p.leader_A, p.leader_b.size(), nz + nx, "leader_A");
  expect(p.G0, m0, ny, "G0");
  expect(p.G1, m1, ny, "G1");
  expect(p.H0, m0, nw, "H0");
  expect(p.H1, m1, nw, "H1");
  expect(p.coupling, m0, nx, "coupling");
  expect(p.R, ny, ny, "R");
  if (p.r.size() != ny) rep.errors.push_back("dimension mismatch: r length differs from n_y");
  check_size(rep, p.price_free_row1, static_cast<size_t>(m1), "price_free_row1");
  check_size(rep, p.z_names, static_cast<size_t>(nz), "z_names");
  check_size(rep, p.x_names, static_cast<size_t>(nx), "x_names");
  if (!rep.ok()) return rep;

  for (int i = 0; i < nz; ++i) {
    if (!std::isfinite(p.ub_z[i]) || p.ub_z[i] < 0) rep.errors.push_back("ub_z[" + std::to_string(i) + "] must be finite and >= 0");
  }
  for (int i = 0; i < nx; ++i) {
    if (!std::isfinite(p.ub_x[i]) || p.ub_x[i] < 0) rep.errors.push_back("ub_x[" + std::to_string(i) + "] must be finite and >= 0");
  }
  for (int i = 0; i < ny; ++i) {
    if (std::isnan(p.ub_y[i]) || p.ub_y[i] < 0) rep.errors.push_back("ub_y[" + std::to_string(i) + "] must be >= 0 or inf");
  }
  for (int i = 0; i < nw; ++i) {
    if (std::isnan(p.ub_w[i]) || p.ub_w[i] < 0) rep.errors.push_back("ub_w[" + std::to_string(i) + "] must be >= 0 or inf");
  }

  const double sym_tol = 1e-12 * std::max(1.0, p.R.cwiseAbs().maxCoeff());
  if (ny > 0 && (p.R - p.R.transpose()).cwiseAbs().maxCoeff() > sym_tol) {
    rep.errors.push_back("R not symmetric");
  } else if (ny > 0 && !cholesky_pd(p.R)) {
    rep.errors.push_back("R not positive definite");
  }

  // Block structure: every coupling entry must stay inside one block.
  const bool blocked = !(p.block_y.empty() && p.block_w.empty() && p.block_row0.empty() && p.block_row1.empty() &&
                         p.block_weight.empty());
  if (blocked) {
    const size_t nb = p.block_weight.size();
    auto check_ids = [&](const std::vector<int>& ids, size_t n, const char* what) {
      if (ids.size() != n) {
        rep.errors.push_back(std::string("dimension mismatch: block ids for ") + what);
        return;
      }
      for (int b : ids) {
        if (b < 0 || static_cast<size_t>(b) >= nb) rep.errors.push_back(std::string("block id out of range in ") + what);
      }
    };
    check_ids(p.block_y, ny, "y");
    check_ids(p.block_w, nw, "w");
    check_ids(p.block_row0, m0, "row0");
    check_ids(p.block_row1, m1, "row1");
    for (double w : p.block_weight) {
      if (!(w > 0)) rep.errors.push_back("block weight must be positive");
    }
    if (!rep.ok()) return rep;
    for (int i = 0; i < ny; ++i)
      for (int j = 0; j < ny; ++j)
        if (p.R(i, j) != 0 && p.block_y[i] != p.block_y[j]) rep.errors.push_back("R couples different blocks");
    for (int k = 0; k < m0; ++k) {
      for (int i = 0; i < ny; ++i)
        if (p.G0(k, i) != 0 && p.block_row0[k] != p.block_y[i]) rep.errors.push_back("G0 couples different blocks");
      for (int i = 0; i < nw; ++i)
        if (p.H0(k, i) != 0 && p.block_row0[k] != p.block_w[i]) rep.errors.push_back("H0 couples different blocks");
    }
    for (int k = 0; k < m1; ++k) {
      for (int i = 0; i < ny; ++i)
        if (p.G1(k, i) != 0 && p.block_row1[k] != p.block_y[i]) rep.errors.push_back("G1 couples different blocks");
      for (int i = 0; i < nw; ++i)
        if (p.H1(k, i) != 0 && p.block_row1[k] != p.block_w[i]) rep.errors.push_back("H1 couples different blocks");
    }
  }
  return rep;
}

BoundPartition partition_bounds(const BilevelSpeProblem& p) {
  BoundPartition part;
  for (int i = 0; i < p.n_y(); ++i) (is_finite_bound(p.ub_y[i]) ? part.fin_y : part.inf_y).push_back(i);
  for (int i = 0; i < p.n_w(); ++i) (is_finite_bound(p.ub_w[i]) ? part.fin_w : part.inf_w).push_back(i);
  return part;
}

BlockIndex block_index(const BilevelSpeProblem& p, int block) {
  BlockIndex idx;
  for (int i = 0; i < p.n_y(); ++i)
    if (p.y_block(i) == block) idx.y.push_back(i);
  for (int i = 0; i < p.n_w(); ++i)
    if (p.w_block(i) == block) idx.w.push_back(i);
  for (int i = 0; i < p.n_row0(); ++i)
    if (p.row0_block(i) == block) idx.row0.push_back(i);
  for (int i = 0; i < p.n_row1(); ++i)
    if (p.row1_block(i) == block) idx.row1.push_back(i);
  return idx;
}

BilevelSpeProblem extract_block(const BilevelSpeProblem& p, int block) {
  const BlockIndex idx = block_index(p, block);
  auto take = [](const Mat& m, const std::vector<int>& rows, const std::vector<int>& cols) {
    Mat out(rows.size(), cols.size());
    for (size_t i = 0; i < rows.size(); ++i)
      for (size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
    return out;
  };
  auto take_rows = [](const Mat& m, const std::vector<int>& rows) {
    Mat out(rows.size(), m.cols());
    for (size_t i = 0; i < rows.size(); ++i) out.row(i) = m.row(rows[i]);
    return out;
  };
  auto take_vec = [](const Vec& v, const std::vector<int>& ids) {
    Vec out(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) out[i] = v[ids[i]];
    return out;
  };

  BilevelSpeProblem b;
  b.integer_z = p.integer_z;
  b.integer_x = p.integer_x;
  b.c_z = p.c_z;
  b.c_x = p.c_x;
  b.ub_z = p.ub_z;
  b.ub_x = p.ub_x;
  b.leader_A = p.leader_A;
  b.leader_b = p.leader_b;
  b.z_names = p.z_names;
  b.x_names = p.x_names;
  b.G0 = take(p.G0, idx.row0, idx.y);
  b.G1 = take(p.G1, idx.row1, idx.y);
  b.H0 = take(p.H0, idx.row0, idx.w);
  b.H1 = take(p.H1, idx.row1, idx.w);
  b.h0 = take_vec(p.h0, idx.row0);
  b.h1 = take_vec(p.h1, idx.row1);
  b.coupling = take_rows(p.coupling, idx.row0);
  b.ub_y = take_vec(p.ub_y, idx.y);
  b.ub_w = take_vec(p.ub_w, idx.w);
  b.R = take(p.R, idx.y, idx.y);
  b.r = take_vec(p.r, idx.y);
  if (!p.price_free_row1.empty()) {
    for (int i : idx.row1) b.price_free_row1.push_back(p.price_free_row1[i]);
  }
  return b;
}

}  // namespace spe
