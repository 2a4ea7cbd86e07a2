#include "spe/instance_io.hpp"

#include "spe/csv.hpp"
#include "spe/efl.hpp"
#include "spe/rgup.hpp"

#include <algorithm>
#include <filesystem>
#include <map>

namespace spe {

namespace fs = std::filesystem;

namespace {

void write_sparse(CsvWriter& w, const char* name, const Mat& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (m(i, j) != 0.0) {
        w.cell(std::string(name)).cell(static_cast<int>(i)).cell(static_cast<int>(j)).cell(m(i, j));
        w.end_row();
      }
}

bool has_blocks(const BilevelSpeProblem& p) { return !p.block_weight.empty(); }

int checked_index(const CsvTable& t, int r, int c, int limit) {
  const int v = t.integer(r, c);
  if (v < 0 || v >= limit) throw ParseError(t.path, r + 1, c + 1, "index out of range");
  return v;
}

}  // namespace

void write_problem(const BilevelSpeProblem& p, const std::string& dir) {
  fs::create_directories(dir);
  const std::string d = dir + "/";
  const int nz = p.n_z(), nx = p.n_x();
  auto name = [&](int col) {
    if (col < nz) return p.z_names.empty() ? "z" + std::to_string(col) : p.z_names[col];
    return p.x_names.empty() ? "x" + std::to_string(col - nz) : p.x_names[col - nz];
  };
  {
    CsvWriter w(d + "leader.csv", {"name", "kind", "integer", "cost", "ub"});
    for (int i = 0; i < nz; ++i) {
      w.cell(name(i)).cell(std::string("z")).cell(static_cast<int>(p.integer_z[i])).cell(p.c_z[i]).cell(p.ub_z[i]);
      w.end_row();
    }
    for (int j = 0; j < nx; ++j) {
      w.cell(name(nz + j)).cell(std::string("x")).cell(static_cast<int>(p.integer_x[j])).cell(p.c_x[j]).cell(p.ub_x[j]);
      w.end_row();
    }
  }
  {
    CsvWriter w(d + "leader_constraints.csv", {"row", "var", "coeff", "rhs"});
    for (int r = 0; r < p.n_leader_rows(); ++r) {
      bool any = false;
      for (int c = 0; c < nz + nx; ++c) {
        if (p.leader_A(r, c) == 0.0) continue;
        any = true;
        w.cell(r).cell(name(c)).cell(p.leader_A(r, c)).cell(p.leader_b[r]);
        w.end_row();
      }
      if (!any) {
        w.cell(r).cell(std::string()).cell(0.0).cell(p.leader_b[r]);
        w.end_row();
      }
    }
  }
  {
    CsvWriter w(d + "follower_matrices.csv", {"block", "row", "col", "value"});
    write_sparse(w, "G0", p.G0);
    write_sparse(w, "G1", p.G1);
    write_sparse(w, "H0", p.H0);
    write_sparse(w, "H1", p.H1);
  }
  {
    CsvWriter w(d + "follower_rhs.csv", {"family", "row", "value", "price_free", "scenario"});
    for (int k = 0; k < p.n_row0(); ++k) {
      w.cell(std::string("h0")).cell(k).cell(p.h0[k]).cell(0).cell(p.row0_block(k));
      w.end_row();
    }
    for (int k = 0; k < p.n_row1(); ++k) {
      w.cell(std::string("h1")).cell(k).cell(p.h1[k]).cell(static_cast<int>(p.row1_price_free(k))).cell(p.row1_block(k));
      w.end_row();
    }
  }
  {
    CsvWriter w(d + "vi_cost.csv", {"kind", "row", "col", "value"});
    write_sparse(w, "R", p.R);
    for (int i = 0; i < p.n_y(); ++i) {
      w.cell(std::string("r")).cell(i).cell(std::string()).cell(p.r[i]);
      w.end_row();
    }
  }
  {
    CsvWriter w(d + "follower_bounds.csv", {"family", "index", "ub", "scenario"});
    for (int i = 0; i < p.n_y(); ++i) {
      w.cell(std::string("y")).cell(i).cell(p.ub_y[i]).cell(p.y_block(i));
      w.end_row();
    }
    for (int i = 0; i < p.n_w(); ++i) {
      w.cell(std::string("w")).cell(i).cell(p.ub_w[i]).cell(p.w_block(i));
      w.end_row();
    }
  }
  const bool identity = p.coupling.rows() == p.coupling.cols() && p.coupling.isIdentity(0.0);
  if (!identity) {
    CsvWriter w(d + "coupling.csv", {"row", "col", "value"});
    for (Eigen::Index i = 0; i < p.coupling.rows(); ++i)
      for (Eigen::Index j = 0; j < p.coupling.cols(); ++j)
        if (p.coupling(i, j) != 0.0) {
          w.cell(static_cast<int>(i)).cell(static_cast<int>(j)).cell(p.coupling(i, j));
          w.end_row();
        }
  } else {
    fs::remove(d + "coupling.csv");
  }
  if (has_blocks(p)) {
    CsvWriter w(d + "scenarios.csv", {"scenario", "weight"});
    for (int b = 0; b < p.n_blocks(); ++b) {
      w.cell(b).cell(p.block_weight[b]);
      w.end_row();
    }
  } else {
    fs::remove(d + "scenarios.csv");
  }
}

BilevelSpeProblem read_problem(const std::string& dir) {
  const std::string d = dir + "/";
  BilevelSpeProblem p;
  std::map<std::string, int> col_of;

  const CsvTable lead = read_csv(d + "leader.csv");
  {
    const int cn = lead.column("name"), ck = lead.column("kind"), ci = lead.column("integer"), cc = lead.column("cost"),
              cu = lead.column("ub");
    std::vector<int> zr, xr;
    for (size_t r = 0; r < lead.rows.size(); ++r) {
      const std::string& k = lead.text(r, ck);
      if (k == "z") zr.push_back(r);
      else if (k == "x") xr.push_back(r);
      else throw ParseError(lead.path, r + 1, ck + 1, "kind must be z or x");
    }
    auto fill = [&](const std::vector<int>& rows, Vec& cost, Vec& ub, std::vector<bool>& integer,
                    std::vector<std::string>& names, int offset) {
      cost = Vec(rows.size());
      ub = Vec(rows.size());
      for (size_t a = 0; a < rows.size(); ++a) {
        const int r = rows[a];
        cost[a] = lead.number(r, cc);
        ub[a] = lead.number(r, cu);
        integer.push_back(lead.integer(r, ci) != 0);
        names.push_back(lead.text(r, cn));
        if (!col_of.emplace(names.back(), offset + static_cast<int>(a)).second)
          throw ParseError(lead.path, r + 1, cn + 1, "duplicate variable name");
      }
    };
    fill(zr, p.c_z, p.ub_z, p.integer_z, p.z_names, 0);
    fill(xr, p.c_x, p.ub_x, p.integer_x, p.x_names, static_cast<int>(zr.size()));
  }
  const int nz = p.n_z(), nx = p.n_x();

  {
    const CsvTable t = read_csv(d + "leader_constraints.csv");
    const int cr = t.column("row"), cv = t.column("var"), cc = t.column("coeff"), cb = t.column("rhs");
    int rows = 0;
    for (size_t r = 0; r < t.rows.size(); ++r) rows = std::max(rows, t.integer(r, cr) + 1);
    p.leader_A = Mat::Zero(rows, nz + nx);
    p.leader_b = Vec::Zero(rows);
    for (size_t r = 0; r < t.rows.size(); ++r) {
      const int row = checked_index(t, r, cr, rows);
      p.leader_b[row] = t.number(r, cb);
      const std::string& v = t.text(r, cv);
      if (v.empty()) continue;
      auto it = col_of.find(v);
      if (it == col_of.end()) throw ParseError(t.path, r + 1, cv + 1, "unknown variable " + v);
      p.leader_A(row, it->second) = t.number(r, cc);
    }
  }

  {
    const CsvTable t = read_csv(d + "follower_bounds.csv");
    const int cf = t.column("family"), ci = t.column("index"), cu = t.column("ub"), cs = t.column("scenario");
    int ny = 0, nw = 0;
    for (size_t r = 0; r < t.rows.size(); ++r) (t.text(r, cf) == "y" ? ny : nw)++;
    p.ub_y = Vec(ny);
    p.ub_w = Vec(nw);
    p.block_y.assign(ny, 0);
    p.block_w.assign(nw, 0);
    for (size_t r = 0; r < t.rows.size(); ++r) {
      const std::string& f = t.text(r, cf);
      if (f != "y" && f != "w") throw ParseError(t.path, r + 1, cf + 1, "family must be y or w");
      const bool y = f == "y";
      const int i = checked_index(t, r, ci, y ? ny : nw);
      (y ? p.ub_y : p.ub_w)[i] = t.number(r, cu);
      (y ? p.block_y : p.block_w)[i] = t.integer(r, cs);
    }
  }

  {
    const CsvTable t = read_csv(d + "follower_rhs.csv");
    const int cf = t.column("family"), cr = t.column("row"), cv = t.column("value"), cp = t.column("price_free"),
              cs = t.column("scenario");
    int m0 = 0, m1 = 0;
    for (size_t r = 0; r < t.rows.size(); ++r) (t.text(r, cf) == "h0" ? m0 : m1)++;
    p.h0 = Vec(m0);
    p.h1 = Vec(m1);
    p.block_row0.assign(m0, 0);
    p.block_row1.assign(m1, 0);
    p.price_free_row1.assign(m1, false);
    for (size_t r = 0; r < t.rows.size(); ++r) {
      const std::string& f = t.text(r, cf);
      if (f != "h0" && f != "h1") throw ParseError(t.path, r + 1, cf + 1, "family must be h0 or h1");
      if (f == "h0") {
        const int i = checked_index(t, r, cr, m0);
        p.h0[i] = t.number(r, cv);
        p.block_row0[i] = t.integer(r, cs);
        if (t.integer(r, cp) != 0) throw ParseError(t.path, r + 1, cp + 1, "h0 rows carry a signed price");
      } else {
        const int i = checked_index(t, r, cr, m1);
        p.h1[i] = t.number(r, cv);
        p.block_row1[i] = t.integer(r, cs);
        p.price_free_row1[i] = t.integer(r, cp) != 0;
      }
    }
  }
  const int ny = p.n_y(), nw = p.n_w(), m0 = p.n_row0(), m1 = p.n_row1();

  {
    const CsvTable t = read_csv(d + "follower_matrices.csv");
    const int cb = t.column("block"), cr = t.column("row"), cc = t.column("col"), cv = t.column("value");
    p.G0 = Mat::Zero(m0, ny);
    p.G1 = Mat::Zero(m1, ny);
    p.H0 = Mat::Zero(m0, nw);
    p.H1 = Mat::Zero(m1, nw);
    for (size_t r = 0; r < t.rows.size(); ++r) {
      const std::string& b = t.text(r, cb);
      Mat* m = b == "G0" ? &p.G0 : b == "G1" ? &p.G1 : b == "H0" ? &p.H0 : b == "H1" ? &p.H1 : nullptr;
      if (!m) throw ParseError(t.path, r + 1, cb + 1, "block must be G0, G1, H0 or H1");
      const int i = checked_index(t, r, cr, m->rows());
      const int j = checked_index(t, r, cc, m->cols());
      (*m)(i, j) = t.number(r, cv);
    }
  }

  {
    const CsvTable t = read_csv(d + "vi_cost.csv");
    const int ck = t.column("kind"), cr = t.column("row"), cc = t.column("col"), cv = t.column("value");
    p.R = Mat::Zero(ny, ny);
    p.r = Vec::Zero(ny);
    for (size_t r = 0; r < t.rows.size(); ++r) {
      const std::string& k = t.text(r, ck);
      const int i = checked_index(t, r, cr, ny);
      if (k == "R") p.R(i, checked_index(t, r, cc, ny)) = t.number(r, cv);
      else if (k == "r") p.r[i] = t.number(r, cv);
      else throw ParseError(t.path, r + 1, ck + 1, "kind must be R or r");
    }
  }

  if (fs::exists(d + "coupling.csv")) {
    const CsvTable t = read_csv(d + "coupling.csv");
    const int cr = t.column("row"), cc = t.column("col"), cv = t.column("value");
    p.coupling = Mat::Zero(m0, nx);
    for (size_t r = 0; r < t.rows.size(); ++r)
      p.coupling(checked_index(t, r, cr, m0), checked_index(t, r, cc, nx)) = t.number(r, cv);
  }

  if (fs::exists(d + "scenarios.csv")) {
    const CsvTable t = read_csv(d + "scenarios.csv");
    const int cs = t.column("scenario"), cw = t.column("weight");
    p.block_weight.assign(t.rows.size(), 0.0);
    for (size_t r = 0; r < t.rows.size(); ++r)
      p.block_weight[checked_index(t, r, cs, t.rows.size())] = t.number(r, cw);
  } else {
    p.block_y.clear();
    p.block_w.clear();
    p.block_row0.clear();
    p.block_row1.clear();
  }
  if (std::none_of(p.price_free_row1.begin(), p.price_free_row1.end(), [](bool b) { return b; }))
    p.price_free_row1.clear();
  p.finalize();
  return p;
}

InstanceKind detect_instance(const std::string& dir) {
  if (fs::exists(dir + "/leader.csv")) return InstanceKind::Generic;
  if (fs::exists(dir + "/arcs.csv")) return InstanceKind::Efl;
  if (fs::exists(dir + "/lower")) return InstanceKind::Rgup;
  return InstanceKind::Unknown;
}

BilevelSpeProblem load_instance(const std::string& dir, const std::string& samples) {
  switch (detect_instance(dir)) {
    case InstanceKind::Generic: return read_problem(dir);
    case InstanceKind::Efl: return efl_to_bilevel(read_efl(dir));
    case InstanceKind::Rgup: {
      const RgupNetwork net = load_ieee(dir);
      std::string path = samples;
      if (path.empty()) {
        std::vector<std::string> found;
        for (const auto& e : fs::directory_iterator(dir)) {
          const std::string f = e.path().filename().string();
          if (f.rfind("samples_K", 0) == 0 && e.path().extension() == ".csv") found.push_back(e.path().string());
        }
        std::sort(found.begin(), found.end());
        if (found.empty()) throw ParseError(dir, 0, 0, "no sample file (samples_K*.csv)");
        path = found.front();
      }
      return rgup_to_bilevel(net, read_samples(net, path));
    }
    case InstanceKind::Unknown: break;
  }
  throw ParseError(dir, 0, 0, "not an instance folder");
}

}  // namespace spe
