#include "spe/bnb.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <ostream>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace spe {

namespace {

struct Node {
  long long id = 0;
  int depth = 0;
  double bound = kInf;
  std::vector<BranchFixing> fixings;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound < b.bound;
    return a.id > b.id;
  }
};

struct NodeSolve {
  QpStatus status = QpStatus::NumericalFailure;
  Vec v;
  double value = -kInf;
};

NodeSolve solve_node(const SingleLevelModel& m, const std::vector<BranchFixing>& fx) {
  const Relaxation r = build_relaxation(m, fx);
  QpSolution s = solve_qp(r.qp);
  if (s.status == QpStatus::NumericalFailure) s = solve_qp(r.qp, {.tol = 1e-9, .max_iter = 500});
  NodeSolve out;
  out.status = s.status;
  if (s.optimal()) {
    out.v = s.v;
    out.value = r.model_value(s.objective);
  }
  return out;
}

// Re-solve with the second member of every pair pinned where the first is positive. The relaxation
// optimum in y is unique, so this keeps the node value whenever complementary multipliers exist.
std::optional<Vec> complementary_completion(const SingleLevelModel& m, std::vector<BranchFixing> fx, Vec v,
                                            double compl_tol, long long& solves) {
  std::vector<char> pinned(m.pairs.size(), 0);
  for (const auto& f : fx)
    if (f.kind == BranchFixing::Kind::Complementarity) pinned[f.pair] = 1;
  for (int round = 0; round < 3; ++round) {
    bool added = false;
    for (size_t k = 0; k < m.pairs.size(); ++k) {
      const auto& pr = m.pairs[k];
      if (pinned[k] || std::abs(pr.first_value(v)) <= compl_tol || std::abs(v[pr.second]) <= compl_tol) continue;
      fx.push_back(BranchFixing::complementarity(static_cast<int>(k), 1));
      pinned[k] = 1;
      added = true;
    }
    if (!added) return v;
    NodeSolve s = solve_node(m, fx);
    ++solves;
    if (s.status != QpStatus::Optimal) return std::nullopt;
    v = s.v;
  }
  return std::nullopt;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

std::string to_string(BnbStatus s) {
  switch (s) {
    case BnbStatus::OptimalWithinGap: return "OptimalWithinGap";
    case BnbStatus::TimeLimit: return "TimeLimit";
    case BnbStatus::NodeLimit: return "NodeLimit";
    case BnbStatus::Infeasible: return "Infeasible";
    case BnbStatus::Unbounded: return "Unbounded";
  }
  return "?";
}

double relative_gap(double bound, double incumbent) {
  return (bound - incumbent) / std::max(1.0, std::abs(incumbent));
}

std::optional<BranchDecision> select_branch(const Vec& v, const SingleLevelModel& m, double int_tol,
                                            double compl_tol) {
  std::optional<BranchDecision> best;
  for (int j : m.integers) {
    const double f = v[j] - std::floor(v[j]);
    if (f <= int_tol || f >= 1.0 - int_tol) continue;
    const double score = std::abs(f - 0.5);
    if (!best || score < best->score || (score == best->score && j < best->index)) {
      BranchDecision d;
      d.kind = BranchFixing::Kind::Integer;
      d.index = j;
      d.score = score;
      d.children = {BranchFixing::integer(j, false, std::floor(v[j])), BranchFixing::integer(j, true, std::ceil(v[j]))};
      best = d;
    }
  }
  if (best) return best;
  for (int k = 0; k < static_cast<int>(m.pairs.size()); ++k) {
    const auto& pr = m.pairs[k];
    const double a = pr.first_value(v), b = v[pr.second];
    if (std::min(std::abs(a), std::abs(b)) <= compl_tol) continue;
    const double score = std::abs(a * b);
    if (!best || score > best->score) {
      BranchDecision d;
      d.kind = BranchFixing::Kind::Complementarity;
      d.index = k;
      d.score = score;
      d.children = {BranchFixing::complementarity(k, 0), BranchFixing::complementarity(k, 1)};
      best = d;
    }
  }
  return best;
}

bool verify_point(const SingleLevelModel& m, const Vec& v, double tol) {
  if (v.size() != m.n() || !v.allFinite()) return false;
  return model_violation(m, v).max() <= tol;
}

BnbResult solve(const SingleLevelModel& m, const BnbConfig& cfg, const HeuristicFn& heuristic) {
  if (m.nonconvex()) throw std::invalid_argument("branch-and-bound needs a concave objective (duality model)");
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - t0).count(); };

  BnbResult res;
  double inc = -kInf;
  double pruned_max = -kInf;  // largest bound discarded within the gap tolerance
  double global_bound = kInf;

  auto within_gap = [&](double bound) {
    return inc > -kInf && bound - inc <= cfg.gap * std::max(1.0, std::abs(inc));
  };
  auto discard = [&](double bound) {
    if (bound > inc) pruned_max = std::max(pruned_max, bound);
  };
  auto offer = [&](const Vec& v, long long node, const char* source) {
    if (!verify_point(m, v, cfg.verify_tol)) return false;
    const double val = m.objective(v);
    if (val > inc) {
      inc = val;
      res.has_incumbent = true;
      res.incumbent = v;
      res.incumbents.push_back({node, val, source, v});
      res.events.push_back("incumbent node=" + std::to_string(node) + " value=" + fmt(val) + " source=" + source);
    }
    return true;
  };

  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  long long next_id = 1;
  bool unbounded = false;

  auto current_bound = [&](double extra) {
    double b = std::max({inc, pruned_max, extra});
    if (!open.empty()) b = std::max(b, open.top().bound);
    global_bound = std::min(global_bound, b);
    return global_bound;
  };
  auto log_line = [&](const Node& nd) {
    if (!cfg.log || cfg.log_every <= 0 || res.nodes % cfg.log_every != 0) return;
    const double b = global_bound;
    *cfg.log << "node=" << res.nodes << " bound=" << fmt(b) << " incumbent=" << (inc > -kInf ? fmt(inc) : "none")
             << " gap=" << (inc > -kInf ? fmt(relative_gap(b, inc)) : "inf") << " depth=" << nd.depth << "\n";
  };

  // Bound, heuristic and branching for a node whose relaxation is solved.
  auto process = [&](Node nd, const NodeSolve& s) {
    ++res.nodes;
    if (s.status == QpStatus::Infeasible) {
      current_bound(-kInf);
      log_line(nd);
      return;
    }
    if (s.status == QpStatus::Unbounded) {
      unbounded = true;
      res.unbounded_node = nd.id;
      res.events.push_back("unbounded relaxation node=" + std::to_string(nd.id));
      return;
    }
    if (s.status != QpStatus::Optimal) {
      ++res.numerical_failures;
      res.events.push_back("numerical failure node=" + std::to_string(nd.id) + "; parent bound " + fmt(nd.bound) +
                           " dropped");
      discard(nd.bound);
      current_bound(-kInf);
      log_line(nd);
      return;
    }
    const double value = std::min(s.value, nd.bound);
    if (value <= inc || within_gap(value)) {
      discard(value);
      current_bound(-kInf);
      log_line(nd);
      return;
    }
    if (heuristic) {
      ++res.heuristic_calls;
      NodeContext ctx{nd.id, nd.depth, &s.v, value, current_bound(value), static_cast<int>(res.incumbents.size()),
                      inc};
      if (auto cand = heuristic(ctx)) {
        if (!offer(*cand, nd.id, "heuristic")) ++res.heuristic_rejected;
      }
      if (value <= inc || within_gap(value)) {
        discard(value);
        current_bound(-kInf);
        log_line(nd);
        return;
      }
    }
    auto d = select_branch(s.v, m, cfg.int_tol, cfg.compl_tol);
    if (d && d->kind == BranchFixing::Kind::Complementarity) {
      if (auto c = complementary_completion(m, nd.fixings, s.v, cfg.compl_tol, res.qp_solves)) {
        offer(*c, nd.id, "completion");
        if (value <= inc || within_gap(value)) {
          discard(value);
          current_bound(-kInf);
          log_line(nd);
          return;
        }
      }
    }
    if (!d) {
      if (!offer(s.v, nd.id, "relaxation")) {
        ++res.numerical_failures;
        res.events.push_back("unverifiable leaf node=" + std::to_string(nd.id));
        discard(value);
      }
      current_bound(-kInf);
      log_line(nd);
      return;
    }
    for (const auto& f : d->children) {
      Node c;
      c.id = next_id++;
      c.depth = nd.depth + 1;
      c.bound = value;
      c.fixings = nd.fixings;
      c.fixings.push_back(f);
      open.push(std::move(c));
    }
    current_bound(-kInf);
    log_line(nd);
  };

  // Root.
  Node root;
  root.id = 0;
  NodeSolve rs = solve_node(m, {});
  ++res.qp_solves;
  res.root_status = rs.status;
  res.root_relax = rs.value;
  if (rs.status == QpStatus::Optimal && cfg.root_probing) {
    // An incumbent first, so that probing can discard sides that cannot beat it.
    if (heuristic) {
      ++res.heuristic_calls;
      NodeContext ctx{0, 0, &rs.v, rs.value, rs.value, 0, inc};
      if (auto cand = heuristic(ctx)) {
        if (!offer(*cand, 0, "heuristic")) ++res.heuristic_rejected;
      }
    }
    // Flip and swap hill climbing on the integer part, continuous part re-optimised with the integers pinned.
    // Started from the incumbent and from the root point with every positive integer rounded up.
    if (cfg.root_local_search && !m.nonconvex() && !within_gap(rs.value)) {
      const size_t ni = m.integers.size();
      auto pinned = [&](const Vec& vals) {
        std::vector<BranchFixing> f;
        for (size_t a = 0; a < ni; ++a) {
          f.push_back(BranchFixing::integer(m.integers[a], false, vals[a]));
          f.push_back(BranchFixing::integer(m.integers[a], true, vals[a]));
        }
        return f;
      };
      auto attempt = [&](const Vec& vals) {
        NodeSolve ls = solve_node(m, pinned(vals));
        ++res.qp_solves;
        ++res.local_search_solves;
        if (ls.status != QpStatus::Optimal) return -kInf;
        auto c = complementary_completion(m, pinned(vals), ls.v, cfg.compl_tol, res.qp_solves);
        if (c && offer(*c, 0, "local")) return m.objective(*c);
        if (!heuristic) return -kInf;
        // Follower re-solve at the pinned point's leader decisions.
        ++res.heuristic_calls;
        NodeContext ctx{0, 0, &ls.v, ls.value, rs.value, static_cast<int>(res.incumbents.size()), inc, true};
        auto h = heuristic(ctx);
        if (!h) return -kInf;
        if (!offer(*h, 0, "local")) {
          ++res.heuristic_rejected;
          return -kInf;
        }
        return m.objective(*h);
      };
      std::vector<Vec> starts;
      if (res.has_incumbent) {
        Vec v(ni);
        for (size_t a = 0; a < ni; ++a) v[a] = std::round(res.incumbent[m.integers[a]]);
        starts.push_back(v);
      }
      Vec up(ni);
      for (size_t a = 0; a < ni; ++a) up[a] = std::ceil(rs.v[m.integers[a]] - cfg.int_tol);
      if (starts.empty() || up != starts[0]) starts.push_back(up);
      for (size_t st = 0; st < starts.size(); ++st) {
        Vec cur = starts[st];
        double cur_val = st == 0 && res.has_incumbent ? inc : attempt(cur);
        if (cur_val == -kInf) continue;
        auto budget = [&] { return res.local_search_solves < cfg.local_search_max_solves && elapsed() <= cfg.time_limit; };
        auto binary = [&](size_t a) { return m.lb[m.integers[a]] == 0.0 && m.ub[m.integers[a]] == 1.0; };
        auto take = [&](const Vec& next) {
          const double val = attempt(next);
          if (val <= cur_val) return false;
          cur = next;
          cur_val = val;
          return true;
        };
        bool improved = true;
        while (improved && budget()) {
          improved = false;
          for (size_t a = 0; a < ni && budget(); ++a) {
            if (!binary(a)) continue;
            Vec next = cur;
            next[a] = 1.0 - next[a];
            improved |= take(next);
          }
          if (improved) continue;
          // Swaps: close one, open another.
          for (size_t a = 0; a < ni && !improved && budget(); ++a) {
            if (!binary(a) || cur[a] != 1.0) continue;
            for (size_t b = 0; b < ni && !improved && budget(); ++b) {
              if (!binary(b) || cur[b] != 0.0) continue;
              Vec next = cur;
              next[a] = 0.0;
              next[b] = 1.0;
              improved = take(next);
            }
          }
        }
      }
    }
    // Both sides of every fractional binary and every violated complementarity pair; the root bound is
    // the weakest of the per-candidate maxima. Repeated while a round fixes something.
    double probe_bound = rs.value;
    bool infeasible = false;
    std::vector<char> pair_fixed(m.pairs.size(), 0);
    for (int round = 0; round < cfg.probing_rounds && !infeasible && !within_gap(rs.value); ++round) {
      std::vector<std::array<BranchFixing, 2>> cands;
      for (int j : m.integers) {
        const double f = rs.v[j] - std::floor(rs.v[j]);
        if (f > cfg.int_tol && f < 1.0 - cfg.int_tol)
          cands.push_back({BranchFixing::integer(j, false, std::floor(rs.v[j])),
                           BranchFixing::integer(j, true, std::ceil(rs.v[j]))});
      }
      if (cfg.probe_pairs) {
        for (size_t k = 0; k < m.pairs.size(); ++k) {
          const auto& pr = m.pairs[k];
          if (pair_fixed[k] || std::min(std::abs(pr.first_value(rs.v)), std::abs(rs.v[pr.second])) <= cfg.compl_tol)
            continue;
          cands.push_back({BranchFixing::complementarity(static_cast<int>(k), 0),
                           BranchFixing::complementarity(static_cast<int>(k), 1)});
        }
      }
      const size_t fixed_before = root.fixings.size();
      double round_bound = rs.value;
      for (const auto& fx : cands) {
        if (elapsed() > cfg.time_limit) break;
        double side[2];
        for (int k = 0; k < 2; ++k) {
          auto f = root.fixings;
          f.push_back(fx[k]);
          NodeSolve ps = solve_node(m, f);
          ++res.probe_solves;
          ++res.qp_solves;
          side[k] = ps.status == QpStatus::Optimal ? ps.value : (ps.status == QpStatus::Infeasible ? -kInf : kInf);
          if (ps.status == QpStatus::Optimal && !select_branch(ps.v, m, cfg.int_tol, cfg.compl_tol))
            offer(ps.v, 0, "probe");
        }
        round_bound = std::min(round_bound, std::max(side[0], side[1]));
        if (side[0] == -kInf && side[1] == -kInf) {
          infeasible = true;
          break;
        }
        // A side that is infeasible or cannot beat the incumbent is dropped for good.
        for (int k = 0; k < 2; ++k) {
          if (side[1 - k] == -kInf || (inc > -kInf && side[1 - k] <= inc && side[k] > inc)) {
            root.fixings.push_back(fx[k]);
            if (fx[k].kind == BranchFixing::Kind::Complementarity) pair_fixed[fx[k].pair] = 1;
            res.events.push_back("root probing fixes " + fx[k].describe(m));
            break;
          }
        }
      }
      probe_bound = std::min(probe_bound, round_bound);
      if (infeasible || root.fixings.size() == fixed_before) break;
      NodeSolve again = solve_node(m, root.fixings);
      ++res.qp_solves;
      if (again.status != QpStatus::Optimal) {
        rs.status = again.status;
        break;
      }
      rs = again;
      probe_bound = std::min(probe_bound, rs.value);
    }
    if (infeasible) rs.status = QpStatus::Infeasible;
    else if (rs.status == QpStatus::Optimal) rs.value = std::min(rs.value, probe_bound);
  }
  root.bound = rs.status == QpStatus::Optimal ? rs.value : kInf;
  process(root, rs);

  bool time_hit = false, node_hit = false;
  const int workers = std::max(1, cfg.workers);
  while (!open.empty() && !unbounded) {
    if (elapsed() > cfg.time_limit) {
      time_hit = true;
      break;
    }
    if (cfg.node_limit >= 0 && res.nodes >= cfg.node_limit) {
      node_hit = true;
      break;
    }
    std::vector<Node> batch;
    while (!open.empty() && static_cast<int>(batch.size()) < workers) {
      Node nd = open.top();
      open.pop();
      if (nd.bound <= inc || within_gap(nd.bound)) {
        discard(nd.bound);
        continue;
      }
      batch.push_back(std::move(nd));
    }
    if (batch.empty()) continue;
    std::vector<NodeSolve> sols(batch.size());
    if (batch.size() == 1) {
      sols[0] = solve_node(m, batch[0].fixings);
    } else {
      std::vector<std::future<NodeSolve>> fut;
      for (const auto& nd : batch)
        fut.push_back(std::async(std::launch::async, [&m, &nd] { return solve_node(m, nd.fixings); }));
      for (size_t k = 0; k < fut.size(); ++k) sols[k] = fut[k].get();
    }
    res.qp_solves += static_cast<long long>(batch.size());
    for (size_t k = 0; k < batch.size(); ++k) {
      process(batch[k], sols[k]);
      if (unbounded) break;
    }
  }

  res.seconds = elapsed();
  if (unbounded) {
    res.status = BnbStatus::Unbounded;
    res.bound = kInf;
  } else {
    double b = std::max(inc, pruned_max);
    if (!open.empty()) b = std::max(b, open.top().bound);
    res.bound = std::min(b, global_bound);
    if (time_hit) res.status = BnbStatus::TimeLimit;
    else if (node_hit) res.status = BnbStatus::NodeLimit;
    else res.status = res.has_incumbent ? BnbStatus::OptimalWithinGap : BnbStatus::Infeasible;
  }
  if (res.has_incumbent) {
    res.objective = inc;
    res.gap = res.bound == kInf ? kInf : relative_gap(res.bound, inc);
  } else {
    res.objective = -kInf;
    res.gap = kInf;
  }
  res.events.push_back("status " + to_string(res.status));
  return res;
}

std::string bnb_result_json(const SingleLevelModel& m, const BnbResult& r) {
  using nlohmann::json;
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(v > 0 ? "inf" : "-inf"); };
  json j;
  j["schema"] = "spe-bnb-result/1";
  j["status"] = to_string(r.status);
  j["objective"] = r.has_incumbent ? json(r.objective) : json(nullptr);
  j["bound"] = num(r.bound);
  j["gap"] = num(r.gap);
  j["nodes"] = r.nodes;
  j["root_relax"] = num(r.root_relax);
  j["root_status"] = to_string(r.root_status);
  j["probe_solves"] = r.probe_solves;
  j["local_search_solves"] = r.local_search_solves;
  j["qp_solves"] = r.qp_solves;
  j["heuristic_calls"] = r.heuristic_calls;
  j["heuristic_rejected"] = r.heuristic_rejected;
  j["numerical_failures"] = r.numerical_failures;
  if (r.unbounded_node >= 0) j["unbounded_node"] = r.unbounded_node;
  json point = json::object();
  if (r.has_incumbent) {
    const ModelLayout& L = m.layout;
    for (int k = 0; k < L.y; ++k) point[m.vars[k].name] = r.incumbent[k];
  }
  j["leader"] = point;
  json inc = json::array();
  for (const auto& e : r.incumbents) inc.push_back({{"node", e.node}, {"value", e.value}, {"source", e.source}});
  j["incumbents"] = inc;
  j["events"] = r.events;
  return j.dump(2);
}

}  // namespace spe
