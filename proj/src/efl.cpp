#include "spe/efl.hpp"

#include "spe/csv.hpp"

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>

namespace spe {

namespace {

std::vector<int> sample_subset(int n, int k, std::mt19937_64& rng) {
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

Vec draw(int n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

}  // namespace

EflInstance generate_efl(int n_nodes, int n_arcs, std::uint64_t seed) {
  if (n_nodes < 2) throw std::invalid_argument("need at least two nodes");
  if (n_arcs < n_nodes - 1) throw std::invalid_argument("need at least n_nodes - 1 arcs");
  if (static_cast<long long>(n_arcs) > static_cast<long long>(n_nodes) * (n_nodes - 1))
    throw TooManyArcs("more arcs than ordered node pairs");
  std::mt19937_64 rng(seed);
  EflInstance inst;
  inst.n_nodes = n_nodes;
  inst.seed = seed;

  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n_nodes; ++i)
    for (int j = 0; j < n_nodes; ++j)
      if (i != j) pairs.emplace_back(i, j);
  std::shuffle(pairs.begin(), pairs.end(), rng);
  pairs.resize(n_arcs);
  std::sort(pairs.begin(), pairs.end());

  inst.candidates = sample_subset(n_nodes, 3 * n_nodes / 4, rng);
  inst.demand = sample_subset(n_nodes, n_nodes / 2, rng);
  inst.supply = sample_subset(n_nodes, n_nodes / 2, rng);

  const Vec a0 = draw(n_arcs, 0, 3, rng), a1 = draw(n_arcs, 0, 2, rng);
  for (int k = 0; k < n_arcs; ++k) inst.arcs.push_back({pairs[k].first, pairs[k].second, a0[k], a1[k]});
  const int nd = static_cast<int>(inst.demand.size()), ns = static_cast<int>(inst.supply.size());
  const int nc = static_cast<int>(inst.candidates.size());
  inst.beta0 = draw(nd, 1300, 1500, rng);
  inst.beta1 = draw(nd, 3, 4, rng);
  inst.gamma0 = draw(ns, 1, 2, rng);
  inst.gamma1 = draw(ns, 0, 1, rng);
  inst.open_cost = draw(nc, 150, 200, rng);
  inst.unit_cost = draw(nc, 3, 5, rng);
  inst.capacity = draw(nc, 100, 200, rng);
  inst.q_max = 350.0 * nc / 4.0;
  return inst;
}

std::vector<std::string> check_efl(const EflInstance& inst) {
  std::vector<std::string> err;
  const int n = inst.n_nodes;
  auto in_range = [&](const std::vector<int>& s, const char* name) {
    for (int i : s)
      if (i < 0 || i >= n) err.push_back(std::string(name) + " node out of range");
    if (!std::is_sorted(s.begin(), s.end()) || std::adjacent_find(s.begin(), s.end()) != s.end())
      err.push_back(std::string(name) + " not strictly increasing");
  };
  in_range(inst.candidates, "candidate");
  in_range(inst.demand, "demand");
  in_range(inst.supply, "supply");
  if (inst.n_arcs() < n - 1) err.push_back("fewer than n - 1 arcs");
  for (const auto& a : inst.arcs) {
    if (a.i < 0 || a.i >= n || a.j < 0 || a.j >= n || a.i == a.j) err.push_back("bad arc endpoints");
    if (!(a.alpha1 > 0)) err.push_back("arc slope alpha1 must be positive");
  }
  if (inst.beta0.size() != static_cast<long>(inst.demand.size()) ||
      inst.beta1.size() != static_cast<long>(inst.demand.size()))
    err.push_back("demand coefficient count mismatch");
  else if (inst.beta1.size() > 0 && !(inst.beta1.minCoeff() > 0))
    err.push_back("demand slope beta1 must be positive");
  if (inst.gamma0.size() != static_cast<long>(inst.supply.size()) ||
      inst.gamma1.size() != static_cast<long>(inst.supply.size()))
    err.push_back("supply coefficient count mismatch");
  else if (inst.gamma1.size() > 0 && !(inst.gamma1.minCoeff() > 0))
    err.push_back("supply slope gamma1 must be positive");
  const long nc = static_cast<long>(inst.candidates.size());
  if (inst.open_cost.size() != nc || inst.unit_cost.size() != nc || inst.capacity.size() != nc)
    err.push_back("candidate data count mismatch");
  else if (nc > 0 && inst.capacity.minCoeff() < 0)
    err.push_back("negative capacity");
  return err;
}

int efl_node_row(const EflInstance& inst, int node) {
  const auto it = std::lower_bound(inst.candidates.begin(), inst.candidates.end(), node);
  if (it != inst.candidates.end() && *it == node) return static_cast<int>(it - inst.candidates.begin());
  // Non-candidates follow in ascending order.
  const int before = static_cast<int>(it - inst.candidates.begin());
  return static_cast<int>(inst.candidates.size()) + node - before;
}

BilevelSpeProblem efl_to_bilevel(const EflInstance& inst) {
  const auto errs = check_efl(inst);
  if (!errs.empty()) throw std::invalid_argument("invalid EFL instance: " + errs.front());
  const int n = inst.n_nodes, na = inst.n_arcs();
  const int nd = static_cast<int>(inst.demand.size()), ns = static_cast<int>(inst.supply.size());
  const int nc = static_cast<int>(inst.candidates.size());
  const int ny = na + nd + ns;

  Mat G = Mat::Zero(n, ny);
  for (int k = 0; k < na; ++k) {
    G(efl_node_row(inst, inst.arcs[k].i), k) += 1.0;
    G(efl_node_row(inst, inst.arcs[k].j), k) -= 1.0;
  }
  for (int k = 0; k < nd; ++k) G(efl_node_row(inst, inst.demand[k]), na + k) = 1.0;
  for (int k = 0; k < ns; ++k) G(efl_node_row(inst, inst.supply[k]), na + nd + k) = -1.0;

  BilevelSpeProblem p;
  p.integer_z.assign(nc, true);
  p.integer_x.assign(nc, false);
  p.c_z = inst.open_cost;
  p.c_x = inst.unit_cost;
  p.ub_z = Vec::Ones(nc);
  p.ub_x = inst.capacity.cwiseMin(inst.q_max);

  const bool budget = nc > 0 && p.ub_x.sum() > inst.q_max;
  p.leader_A = Mat::Zero(nc + (budget ? 1 : 0), 2 * nc);
  p.leader_b = Vec::Zero(p.leader_A.rows());
  for (int i = 0; i < nc; ++i) {
    p.leader_A(i, i) = -inst.capacity[i];
    p.leader_A(i, nc + i) = 1.0;
  }
  if (budget) {
    p.leader_A.row(nc).tail(nc).setOnes();
    p.leader_b[nc] = inst.q_max;
  }

  p.G0 = G.topRows(nc);
  p.G1 = G.bottomRows(n - nc);
  p.h0 = Vec::Zero(nc);
  p.h1 = Vec::Zero(n - nc);
  p.ub_y = Vec::Constant(ny, kInf);
  p.ub_w = Vec::Zero(0);
  p.R = Mat::Zero(ny, ny);
  p.r = Vec(ny);
  for (int k = 0; k < na; ++k) {
    p.R(k, k) = inst.arcs[k].alpha1;
    p.r[k] = inst.arcs[k].alpha0;
  }
  for (int k = 0; k < nd; ++k) {
    p.R(na + k, na + k) = inst.beta1[k];
    p.r[na + k] = -inst.beta0[k];
  }
  for (int k = 0; k < ns; ++k) {
    p.R(na + nd + k, na + nd + k) = inst.gamma1[k];
    p.r[na + nd + k] = inst.gamma0[k];
  }
  for (int i = 0; i < nc; ++i) {
    p.z_names.push_back("open_" + std::to_string(inst.candidates[i]));
    p.x_names.push_back("q_" + std::to_string(inst.candidates[i]));
  }
  p.finalize();
  return p;
}

void write_efl(const EflInstance& inst, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::string d = dir + "/";
  {
    CsvWriter w(d + "nodes.csv", {"node"});
    for (int i = 0; i < inst.n_nodes; ++i) {
      w.cell(i);
      w.end_row();
    }
  }
  {
    CsvWriter w(d + "arcs.csv", {"i", "j", "alpha0", "alpha1"});
    for (const auto& a : inst.arcs) {
      w.cell(a.i).cell(a.j).cell(a.alpha0).cell(a.alpha1);
      w.end_row();
    }
  }
  {
    CsvWriter w(d + "demand.csv", {"i", "beta0", "beta1"});
    for (size_t k = 0; k < inst.demand.size(); ++k) {
      w.cell(inst.demand[k]).cell(inst.beta0[k]).cell(inst.beta1[k]);
      w.end_row();
    }
  }
  {
    CsvWriter w(d + "supply.csv", {"j", "gamma0", "gamma1"});
    for (size_t k = 0; k < inst.supply.size(); ++k) {
      w.cell(inst.supply[k]).cell(inst.gamma0[k]).cell(inst.gamma1[k]);
      w.end_row();
    }
  }
  {
    CsvWriter w(d + "candidates.csv", {"i", "c", "v", "qbar"});
    for (size_t k = 0; k < inst.candidates.size(); ++k) {
      w.cell(inst.candidates[k]).cell(inst.open_cost[k]).cell(inst.unit_cost[k]).cell(inst.capacity[k]);
      w.end_row();
    }
  }
  {
    CsvWriter w(d + "meta.csv", {"key", "value"});
    w.cell("n_nodes").cell(inst.n_nodes);
    w.end_row();
    w.cell("q_max").cell(inst.q_max);
    w.end_row();
    w.cell("seed").cell(std::to_string(inst.seed));
    w.end_row();
  }
}

EflInstance read_efl(const std::string& dir) {
  const std::string d = dir + "/";
  EflInstance inst;
  const CsvTable meta = read_csv(d + "meta.csv");
  const int kc = meta.column("key"), vc = meta.column("value");
  bool have_n = false;
  for (int r = 0; r < static_cast<int>(meta.rows.size()); ++r) {
    const std::string& key = meta.text(r, kc);
    if (key == "n_nodes") {
      inst.n_nodes = meta.integer(r, vc);
      have_n = true;
    } else if (key == "q_max") {
      inst.q_max = meta.number(r, vc);
    } else if (key == "seed") {
      try {
        inst.seed = std::stoull(meta.text(r, vc));
      } catch (const std::exception&) {
        throw ParseError(meta.path, r + 1, vc + 1, "bad seed");
      }
    }
  }
  if (!have_n) {
    const CsvTable nodes = read_csv(d + "nodes.csv");
    inst.n_nodes = static_cast<int>(nodes.rows.size());
  }

  const CsvTable arcs = read_csv(d + "arcs.csv");
  {
    const int ci = arcs.column("i"), cj = arcs.column("j"), c0 = arcs.column("alpha0"), c1 = arcs.column("alpha1");
    for (int r = 0; r < static_cast<int>(arcs.rows.size()); ++r)
      inst.arcs.push_back({arcs.integer(r, ci), arcs.integer(r, cj), arcs.number(r, c0), arcs.number(r, c1)});
  }
  auto load = [&](const std::string& file, const char* id, const char* a, const char* b, std::vector<int>& nodes,
                  Vec& va, Vec& vb) {
    const CsvTable t = read_csv(d + file);
    const int ci = t.column(id), ca = t.column(a), cb = t.column(b);
    const int n = static_cast<int>(t.rows.size());
    va.resize(n);
    vb.resize(n);
    for (int r = 0; r < n; ++r) {
      nodes.push_back(t.integer(r, ci));
      va[r] = t.number(r, ca);
      vb[r] = t.number(r, cb);
    }
  };
  load("demand.csv", "i", "beta0", "beta1", inst.demand, inst.beta0, inst.beta1);
  load("supply.csv", "j", "gamma0", "gamma1", inst.supply, inst.gamma0, inst.gamma1);
  {
    const CsvTable t = read_csv(d + "candidates.csv");
    const int ci = t.column("i"), cc = t.column("c"), cv = t.column("v"), cq = t.column("qbar");
    const int n = static_cast<int>(t.rows.size());
    inst.open_cost.resize(n);
    inst.unit_cost.resize(n);
    inst.capacity.resize(n);
    for (int r = 0; r < n; ++r) {
      inst.candidates.push_back(t.integer(r, ci));
      inst.open_cost[r] = t.number(r, cc);
      inst.unit_cost[r] = t.number(r, cv);
      inst.capacity[r] = t.number(r, cq);
    }
  }
  return inst;
}

}  // namespace spe
