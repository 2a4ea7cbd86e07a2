#include "spe/rgup.hpp"

#include "spe/csv.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <queue>
#include <random>

namespace spe {

namespace {

struct ReferenceCounts {
  int buses, lines, loads, gens, candidates;
};

// Published sizes of the standard IEEE cases.
constexpr ReferenceCounts kReference[] = {
    {14, 20, 11, 2, 5}, {30, 41, 21, 2, 10}, {57, 80, 42, 4, 20}, {118, 186, 91, 19, 40}, {300, 411, 188, 56, 80},
};

std::string bus_label(const RgupNetwork& net, int b) { return std::to_string(net.bus_ids[b]); }

}  // namespace

int RgupNetwork::bus_index(int id) const {
  auto it = std::find(bus_ids.begin(), bus_ids.end(), id);
  if (it == bus_ids.end()) throw std::out_of_range("unknown bus " + std::to_string(id));
  return static_cast<int>(it - bus_ids.begin());
}

void build_demand_slopes(RgupNetwork& net) {
  const int nd = static_cast<int>(net.loads.size());
  net.beta0 = Vec::Constant(nd, 40.0);
  net.beta1 = Vec(nd);
  for (int k = 0; k < nd; ++k) {
    if (!(net.load_mw[k] > 0)) throw ZeroLoadRating("load at bus " + bus_label(net, net.loads[k]) + " has no MW rating");
    net.beta1[k] = (40.0 - 30.0) / net.load_mw[k];
  }
  for (size_t k = 0; k < net.gens.size(); ++k) {
    if (!(net.gamma0[k] > 10 && net.gamma0[k] < 33) || !(net.gamma1[k] > 0.03 && net.gamma1[k] < 0.70))
      throw GeneratorBidRange("generator at bus " + bus_label(net, net.gens[k]) + " has a bid outside the admitted ranges");
  }
}

RgupNetwork load_ieee(const std::string& dir) {
  const std::string lo = dir + "/lower/";
  RgupNetwork net;

  const CsvTable buses = read_csv(lo + "buses.csv");
  const int cb = buses.column("bus");
  for (size_t r = 0; r < buses.rows.size(); ++r) {
    const int id = buses.integer(r, cb);
    if (std::count(net.bus_ids.begin(), net.bus_ids.end(), id))
      throw ParseError(buses.path, r + 1, cb + 1, "duplicate bus " + std::to_string(id));
    net.bus_ids.push_back(id);
  }
  auto index = [&](const CsvTable& t, int r, int c) {
    const int id = t.integer(r, c);
    auto it = std::find(net.bus_ids.begin(), net.bus_ids.end(), id);
    if (it == net.bus_ids.end()) throw ParseError(t.path, r + 1, c + 1, "unknown bus " + std::to_string(id));
    return static_cast<int>(it - net.bus_ids.begin());
  };

  const CsvTable lines = read_csv(lo + "lines.csv");
  {
    const int cf = lines.column("from"), ct = lines.column("to"), cx = lines.column("reactance"),
              cc = lines.column("capacity");
    std::map<std::pair<int, int>, std::pair<double, double>> merged;  // (1/x sum, capacity sum)
    std::vector<std::pair<int, int>> order;
    for (size_t r = 0; r < lines.rows.size(); ++r) {
      int a = index(lines, r, cf), b = index(lines, r, ct);
      if (a == b) throw ParseError(lines.path, r + 1, ct + 1, "line is a self loop");
      const double x = lines.number(r, cx), cap = lines.number(r, cc);
      if (!(x > 0)) throw ParseError(lines.path, r + 1, cx + 1, "reactance must be positive");
      if (!(cap >= 0)) throw ParseError(lines.path, r + 1, cc + 1, "capacity must be nonnegative");
      const auto key = std::minmax(a, b);
      auto [it, fresh] = merged.try_emplace({key.first, key.second}, 0.0, 0.0);
      if (fresh) order.push_back(it->first);
      it->second.first += 1.0 / x;
      it->second.second += cap;
    }
    net.raw_lines = static_cast<int>(lines.rows.size());
    for (const auto& key : order) {
      const auto& v = merged[key];
      net.lines.push_back({key.first, key.second, 1.0 / v.first, v.second});
    }
  }

  const CsvTable gens = read_csv(lo + "generators.csv");
  {
    const int cb2 = gens.column("bus"), cs = gens.column("smax"), c0 = gens.column("gamma0"), c1 = gens.column("gamma1");
    const int n = static_cast<int>(gens.rows.size());
    net.s_max = Vec(n);
    net.gamma0 = Vec(n);
    net.gamma1 = Vec(n);
    for (int r = 0; r < n; ++r) {
      net.gens.push_back(index(gens, r, cb2));
      net.s_max[r] = gens.number(r, cs);
      net.gamma0[r] = gens.number(r, c0);
      net.gamma1[r] = gens.number(r, c1);
    }
  }

  const CsvTable loads = read_csv(lo + "loads.csv");
  {
    const int cb2 = loads.column("bus"), cm = loads.column("mw");
    const int n = static_cast<int>(loads.rows.size());
    net.load_mw = Vec(n);
    for (int r = 0; r < n; ++r) {
      net.loads.push_back(index(loads, r, cb2));
      net.load_mw[r] = loads.number(r, cm);
    }
  }

  const CsvTable upper = read_csv(dir + "/upper.csv");
  {
    const int cb2 = upper.column("bus"), cc = upper.column("c"), cv = upper.column("v"), cq = upper.column("qbar");
    const int n = static_cast<int>(upper.rows.size());
    net.open_cost = Vec(n);
    net.unit_cost = Vec(n);
    net.capacity = Vec(n);
    for (int r = 0; r < n; ++r) {
      net.candidates.push_back(index(upper, r, cb2));
      net.open_cost[r] = upper.number(r, cc);
      net.unit_cost[r] = upper.number(r, cv);
      net.capacity[r] = upper.number(r, cq);
    }
  }

  build_demand_slopes(net);
  const auto errs = check_rgup(net);
  if (!errs.empty()) throw ParseError(dir, 0, 0, errs.front());

  for (const auto& ref : kReference) {
    if (ref.buses != net.n_buses()) continue;
    auto note = [&](const char* what, int got, int want) {
      if (got != want)
        net.warnings.push_back("InconsistentCounts: " + std::string(what) + " " + std::to_string(got) +
                               " vs reference " + std::to_string(want));
    };
    note("lines", net.n_lines(), ref.lines);
    note("loads", static_cast<int>(net.loads.size()), ref.loads);
    note("generators", static_cast<int>(net.gens.size()), ref.gens);
    note("candidates", static_cast<int>(net.candidates.size()), ref.candidates);
  }
  return net;
}

std::vector<std::string> check_rgup(const RgupNetwork& net) {
  std::vector<std::string> errs;
  for (int c : net.candidates) {
    if (std::count(net.gens.begin(), net.gens.end(), c)) errs.push_back("candidate bus " + bus_label(net, c) + " hosts a generator");
  }
  auto unique = [&](std::vector<int> v, const char* what) {
    std::sort(v.begin(), v.end());
    if (std::adjacent_find(v.begin(), v.end()) != v.end()) errs.push_back(std::string("repeated bus in ") + what);
  };
  unique(net.loads, "loads");
  unique(net.gens, "generators");
  unique(net.candidates, "candidates");
  if (net.beta1.size() != static_cast<Eigen::Index>(net.loads.size())) errs.push_back("demand slopes missing");
  for (Eigen::Index k = 0; k < net.beta1.size(); ++k)
    if (!(net.beta1[k] > 0)) errs.push_back("demand slope must be positive");
  for (Eigen::Index k = 0; k < net.gamma1.size(); ++k)
    if (!(net.gamma1[k] > 0)) errs.push_back("supply slope must be positive");
  for (Eigen::Index k = 0; k < net.s_max.size(); ++k)
    if (!(net.s_max[k] >= 0)) errs.push_back("generator capacity must be nonnegative");
  for (Eigen::Index k = 0; k < net.capacity.size(); ++k)
    if (!(net.capacity[k] >= 0) || !std::isfinite(net.capacity[k])) errs.push_back("candidate capacity must be finite");
  return errs;
}

Mat cycle_basis(const RgupNetwork& net, int root) {
  const int n = net.n_buses(), nl = net.n_lines();
  std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbour, line)
  for (int l = 0; l < nl; ++l) {
    adj[net.lines[l].from].push_back({net.lines[l].to, l});
    adj[net.lines[l].to].push_back({net.lines[l].from, l});
  }
  std::vector<int> parent(n, -1), parent_line(n, -1), depth(n, -1);
  std::vector<bool> tree(nl, false);
  std::vector<int> starts{root};
  for (int b = 0; b < n; ++b) starts.push_back(b);
  for (int s : starts) {
    if (depth[s] >= 0) continue;
    depth[s] = 0;
    std::queue<int> q;
    q.push(s);
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (auto [v, l] : adj[u]) {
        if (depth[v] >= 0) continue;
        depth[v] = depth[u] + 1;
        parent[v] = u;
        parent_line[v] = l;
        tree[l] = true;
        q.push(v);
      }
    }
  }

  std::vector<Eigen::RowVectorXd> rows;
  for (int l = 0; l < nl; ++l) {
    if (tree[l]) continue;
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(2 * nl);
    // Walk the loop from → to along the line, then back through the tree.
    auto add = [&](int line, int a, int b) {
      const double s = (net.lines[line].from == a && net.lines[line].to == b) ? 1.0 : -1.0;
      row[2 * line] += s * net.lines[line].reactance;
      row[2 * line + 1] -= s * net.lines[line].reactance;
    };
    int a = net.lines[l].from, b = net.lines[l].to;
    add(l, a, b);
    // Path b → a: climb both ends to their common ancestor.
    std::vector<std::pair<int, int>> up_b, up_a;  // (line, child)
    while (a != b) {
      if (depth[b] >= depth[a]) {
        add(parent_line[b], b, parent[b]);
        b = parent[b];
      } else {
        up_a.push_back({parent_line[a], a});
        a = parent[a];
      }
    }
    for (auto it = up_a.rbegin(); it != up_a.rend(); ++it) add(it->first, parent[it->second], it->second);
    rows.push_back(row);
  }
  Mat L(rows.size(), 2 * nl);
  for (size_t k = 0; k < rows.size(); ++k) L.row(k) = rows[k];
  return L;
}

UncertaintySamples generate_samples(int n_candidates, int K, std::uint64_t seed) {
  if (K < 1 || n_candidates < 0) throw std::invalid_argument("sample count must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  UncertaintySamples s;
  s.xi = Mat(K, n_candidates);
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < n_candidates; ++i) s.xi(k, i) = u(rng);
  return s;
}

void write_samples(const RgupNetwork& net, const UncertaintySamples& s, const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::vector<std::string> header{"k"};
  for (int c : net.candidates) header.push_back("xi_" + bus_label(net, c));
  CsvWriter w(path, header);
  for (int k = 0; k < s.K(); ++k) {
    w.cell(k);
    for (Eigen::Index i = 0; i < s.xi.cols(); ++i) w.cell(s.xi(k, i));
    w.end_row();
  }
}

UncertaintySamples read_samples(const RgupNetwork& net, const std::string& path) {
  const CsvTable t = read_csv(path);
  const int nc = static_cast<int>(net.candidates.size());
  std::vector<int> cols;
  for (int c : net.candidates) cols.push_back(t.column("xi_" + bus_label(net, c)));
  UncertaintySamples s;
  s.xi = Mat(t.rows.size(), nc);
  for (size_t r = 0; r < t.rows.size(); ++r) {
    for (int i = 0; i < nc; ++i) {
      const double v = t.number(r, cols[i]);
      if (!(v >= 0.0 && v <= 1.0)) throw ParseError(t.path, r + 1, cols[i] + 1, "sample outside [0, 1]");
      s.xi(r, i) = v;
    }
  }
  if (s.K() == 0) throw ParseError(t.path, 0, 0, "no samples");
  return s;
}

BilevelSpeProblem rgup_to_bilevel(const RgupNetwork& net, const UncertaintySamples& samples, int loop_root) {
  const auto errs = check_rgup(net);
  if (!errs.empty()) throw std::invalid_argument("invalid RGUP network: " + errs.front());
  const int nc = static_cast<int>(net.candidates.size());
  if (samples.xi.cols() != nc) throw std::invalid_argument("sample width differs from the candidate count");
  const int K = samples.K();
  const int n = net.n_buses(), na = net.n_arcs();
  const int nd = static_cast<int>(net.loads.size()), ns = static_cast<int>(net.gens.size());
  const int ny = nd + ns;
  const Mat L = cycle_basis(net, loop_root);
  const int nloop = static_cast<int>(L.rows());

  // Node rows: candidates first (in candidate order), then the other buses ascending.
  std::vector<int> row_of(n, -1);
  for (int i = 0; i < nc; ++i) row_of[net.candidates[i]] = i;
  for (int b = 0, next = nc; b < n; ++b)
    if (row_of[b] < 0) row_of[b] = next++;
  Mat Gn = Mat::Zero(n, ny), Hn = Mat::Zero(n, na);
  for (int l = 0; l < net.n_lines(); ++l) {
    const int a = net.lines[l].from, b = net.lines[l].to;
    Hn(row_of[a], 2 * l) += 1.0;
    Hn(row_of[b], 2 * l) -= 1.0;
    Hn(row_of[b], 2 * l + 1) += 1.0;
    Hn(row_of[a], 2 * l + 1) -= 1.0;
  }
  for (int k = 0; k < nd; ++k) Gn(row_of[net.loads[k]], k) = 1.0;
  for (int k = 0; k < ns; ++k) Gn(row_of[net.gens[k]], nd + k) = -1.0;

  const int m0 = nc, m1 = n - nc + nloop;
  BilevelSpeProblem p;
  p.integer_z.assign(nc, true);
  p.integer_x.assign(nc, false);
  p.c_z = net.open_cost;
  p.c_x = net.unit_cost;
  p.ub_z = Vec::Ones(nc);
  p.ub_x = net.capacity;
  p.leader_A = Mat::Zero(nc, 2 * nc);
  p.leader_b = Vec::Zero(nc);
  for (int i = 0; i < nc; ++i) {
    p.leader_A(i, i) = -net.capacity[i];
    p.leader_A(i, nc + i) = 1.0;
  }

  p.G0 = Mat::Zero(K * m0, K * ny);
  p.H0 = Mat::Zero(K * m0, K * na);
  p.G1 = Mat::Zero(K * m1, K * ny);
  p.H1 = Mat::Zero(K * m1, K * na);
  p.h0 = Vec::Zero(K * m0);
  p.h1 = Vec::Zero(K * m1);
  p.coupling = Mat::Zero(K * m0, nc);
  p.ub_y = Vec(K * ny);
  p.ub_w = Vec(K * na);
  p.R = Mat::Zero(K * ny, K * ny);
  p.r = Vec(K * ny);
  p.price_free_row1.assign(K * m1, false);
  for (int k = 0; k < K; ++k) {
    const int y0 = k * ny, w0 = k * na, r0 = k * m0, r1 = k * m1;
    p.G0.block(r0, y0, m0, ny) = Gn.topRows(m0);
    p.H0.block(r0, w0, m0, na) = Hn.topRows(m0);
    p.G1.block(r1, y0, n - nc, ny) = Gn.bottomRows(n - nc);
    p.H1.block(r1, w0, n - nc, na) = Hn.bottomRows(n - nc);
    p.H1.block(r1 + n - nc, w0, nloop, na) = L;
    for (int j = 0; j < nloop; ++j) p.price_free_row1[r1 + n - nc + j] = true;
    for (int i = 0; i < nc; ++i) p.coupling(r0 + i, i) = samples.xi(k, i);
    for (int d = 0; d < nd; ++d) {
      p.ub_y[y0 + d] = kInf;
      p.R(y0 + d, y0 + d) = net.beta1[d];
      p.r[y0 + d] = -net.beta0[d];
    }
    for (int s = 0; s < ns; ++s) {
      p.ub_y[y0 + nd + s] = net.s_max[s];
      p.R(y0 + nd + s, y0 + nd + s) = net.gamma1[s];
      p.r[y0 + nd + s] = net.gamma0[s];
    }
    for (int l = 0; l < net.n_lines(); ++l) p.ub_w[w0 + 2 * l] = p.ub_w[w0 + 2 * l + 1] = net.lines[l].capacity;
    for (int i = 0; i < ny; ++i) p.block_y.push_back(k);
    for (int i = 0; i < na; ++i) p.block_w.push_back(k);
    for (int i = 0; i < m0; ++i) p.block_row0.push_back(k);
    for (int i = 0; i < m1; ++i) p.block_row1.push_back(k);
    p.block_weight.push_back(1.0 / K);
  }
  for (int i = 0; i < nc; ++i) {
    p.z_names.push_back("open_" + bus_label(net, net.candidates[i]));
    p.x_names.push_back("q_" + bus_label(net, net.candidates[i]));
  }
  p.finalize();
  return p;
}

}  // namespace spe
