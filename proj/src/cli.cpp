#include "spe/cli.hpp"

#include "CLI11.hpp"
#include "json.hpp"
#include "spe/bnb.hpp"
#include "spe/csv.hpp"
#include "spe/diagnostics.hpp"
#include "spe/efl.hpp"
#include "spe/heuristics.hpp"
#include "spe/instance_io.hpp"
#include "spe/oracle.hpp"
#include "spe/rgup.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

namespace spe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void check_target(const std::string& path, bool force) {
  if (fs::exists(path) && !force) throw InputError(path + " exists (use --force to overwrite)");
}

void emit(const RunConfig& cfg, std::ostream& out, const std::string& text) {
  if (cfg.output.empty()) {
    out << text << "\n";
    return;
  }
  std::ofstream f(cfg.output);
  if (!f) throw InputError("cannot write " + cfg.output);
  f << text << "\n";
}

BilevelSpeProblem load_checked(const RunConfig& cfg) {
  BilevelSpeProblem p = load_instance(cfg.instance, cfg.samples);
  const ValidationReport rep = validate(p);
  if (!rep.ok()) throw InputError("invalid instance: " + rep.errors.front());
  return p;
}

int exit_code(BnbStatus s) {
  switch (s) {
    case BnbStatus::OptimalWithinGap: return kExitOptimal;
    case BnbStatus::TimeLimit:
    case BnbStatus::NodeLimit: return kExitTimeLimit;
    case BnbStatus::Infeasible: return kExitInfeasible;
    case BnbStatus::Unbounded: return kExitOther;
  }
  return kExitOther;
}

struct Search {
  BnbResult result;
  std::shared_ptr<RhStats> stats;
};

Search run_search(const RunConfig& cfg, const BilevelSpeProblem& p, const SingleLevelModel& m, std::ostream* log) {
  BnbConfig bc;
  bc.gap = cfg.gap;
  bc.time_limit = cfg.time_limit;
  bc.workers = cfg.workers;
  bc.log = log;
  bc.log_every = cfg.log_every;
  Search s;
  HeuristicFn h;
  if (cfg.heuristic) {
    const bool per_sample = p.n_blocks() > 1;
    RhConfig rc = per_sample ? RhConfig::rgup() : RhConfig::efl();
    rc.threshold = cfg.threshold;
    rc.seed = cfg.seed;
    s.stats = std::make_shared<RhStats>();
    h = make_rh_callback(p, m, rc, per_sample, s.stats);
  }
  s.result = solve(m, bc, h);
  return s;
}

int cmd_gen_efl(const RunConfig& cfg, std::ostream& out) {
  const std::string dir = cfg.output.empty() ? "efl_" + std::to_string(cfg.nodes) + "_" + std::to_string(cfg.arcs) + "_" +
                                                   std::to_string(cfg.seed)
                                             : cfg.output;
  check_target(dir, cfg.force);
  const EflInstance e = generate_efl(cfg.nodes, cfg.arcs, cfg.seed);
  write_efl(e, dir);
  out << "wrote " << dir << ": nodes=" << e.n_nodes << " arcs=" << e.n_arcs() << " candidates=" << e.candidates.size()
      << " demand=" << e.demand.size() << " supply=" << e.supply.size() << " q_max=" << format_double(e.q_max) << "\n";
  return kExitOptimal;
}

int cmd_gen_samples(const RunConfig& cfg, std::ostream& out) {
  const RgupNetwork net = load_ieee(cfg.instance);
  const std::string path =
      cfg.output.empty() ? cfg.instance + "/samples_K" + std::to_string(cfg.k) + ".csv" : cfg.output;
  check_target(path, cfg.force);
  const UncertaintySamples s = generate_samples(static_cast<int>(net.candidates.size()), cfg.k, cfg.seed);
  write_samples(net, s, path);
  out << "wrote " << path << ": K=" << s.K() << " candidates=" << s.xi.cols() << "\n";
  return kExitOptimal;
}

int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const BilevelSpeProblem p = load_checked(cfg);
  std::ofstream log_file;
  std::ostream* log = nullptr;
  if (!cfg.log.empty()) {
    log_file.open(cfg.log);
    if (!log_file) throw InputError("cannot write " + cfg.log);
    log = &log_file;
  }
  if (cfg.formulation == "duality") {
    const SingleLevelModel m = build_duality_model(p);
    const Search s = run_search(cfg, p, m, log);
    const BnbResult& r = s.result;
    err << "status=" << to_string(r.status) << " objective=" << format_double(r.objective)
        << " bound=" << format_double(r.bound) << " gap=" << format_double(r.gap) << " nodes=" << r.nodes << "\n";
    emit(cfg, out, bnb_result_json(m, r));
    return exit_code(r.status);
  }

  // kkt-check: certificate for the KKT relaxation, then KKT vs duality objective at the duality incumbent.
  json j;
  j["schema"] = "spe-kkt-check/1";
  const LeaderPoint witness = default_witness(p);
  const auto cert = find_unbounded_ray(p, witness);
  if (cert) {
    out << "root relaxation UNBOUNDED (certificate attached)\n";
    j["root_relaxation"] = "unbounded";
    j["certificate"] = json::parse(certificate_json(p, *cert));
    const CertificateCheck chk = check_certificate(p, *cert);
    j["certificate_valid"] = chk.valid();
    json fam = json::array();
    for (const auto& pt : simulate_ray_family(p, *cert, {1.0, 10.0, 100.0}))
      fam.push_back({{"rho", pt.rho}, {"objective", pt.objective}, {"predicted", pt.predicted}, {"violation", pt.violation}});
    j["ray_family"] = fam;
  } else {
    out << "root relaxation: no unbounded ray found\n";
    j["root_relaxation"] = "no-ray";
  }
  const SingleLevelModel dm = build_duality_model(p);
  const Search s = run_search(cfg, p, dm, log);
  j["duality_status"] = to_string(s.result.status);
  if (s.result.has_incumbent) {
    const double kk = kkt_objective(p, s.result.incumbent), du = duality_objective(p, s.result.incumbent);
    j["duality_objective"] = du;
    j["kkt_objective"] = kk;
    j["objective_gap"] = std::abs(kk - du);
    out << "kkt/duality objective gap at incumbent: " << format_double(std::abs(kk - du)) << "\n";
  }
  emit(cfg, out, j.dump(2));
  return exit_code(s.result.status);
}

int cmd_oracle(const RunConfig& cfg, std::ostream& out) {
  const BilevelSpeProblem p = load_checked(cfg);
  const OracleResult r = grid_oracle(p, cfg.step);
  json j;
  j["schema"] = "spe-oracle/1";
  j["step"] = cfg.step;
  j["feasible"] = r.feasible;
  j["value"] = r.feasible ? json(r.value) : json(nullptr);
  j["points"] = r.points;
  j["evaluations"] = r.evaluations;
  j["lipschitz"] = r.lipschitz;
  j["resolution"] = r.resolution;
  if (r.feasible) {
    json lead = json::object();
    for (int i = 0; i < p.n_z(); ++i) lead["z:" + (p.z_names.empty() ? std::to_string(i) : p.z_names[i])] = r.z[i];
    for (int i = 0; i < p.n_x(); ++i) lead["x:" + (p.x_names.empty() ? std::to_string(i) : p.x_names[i])] = r.x[i];
    j["leader"] = lead;
  }
  emit(cfg, out, j.dump(2));
  return r.feasible ? kExitOptimal : kExitInfeasible;
}

int cmd_certify(const RunConfig& cfg, std::ostream& out) {
  const BilevelSpeProblem p = load_checked(cfg);
  json j;
  j["schema"] = "spe-certify/1";
  const BoundednessReport b = check_duality_bounded(p);
  j["duality_relaxation"] = b.status == Boundedness::Bounded ? "bounded" : "unknown";
  j["duality_reason"] = b.reason;
  const auto cert = find_unbounded_ray(p, default_witness(p));
  j["kkt_relaxation"] = cert ? "unbounded" : "no-ray";
  if (cert) {
    j["certificate"] = json::parse(certificate_json(p, *cert));
    j["certificate_valid"] = check_certificate(p, *cert).valid();
  }
  emit(cfg, out, j.dump(2));
  return kExitOptimal;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Bilevel spatial price equilibrium solver"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-efl", "generate a random facility location instance");
  gen->add_option("--nodes", cfg.nodes, "node count")->check(CLI::PositiveNumber);
  gen->add_option("--arcs", cfg.arcs, "arc count")->check(CLI::PositiveNumber);
  gen->add_option("--seed", cfg.seed, "random seed");
  gen->add_option("--out", cfg.output, "output folder");
  gen->add_flag("--force", cfg.force, "overwrite an existing folder");

  auto* samples = app.add_subcommand("gen-rgup-samples", "draw renewable output samples for a network folder");
  samples->add_option("network", cfg.instance, "network folder")->required();
  samples->add_option("--k", cfg.k, "sample count")->check(CLI::PositiveNumber);
  samples->add_option("--seed", cfg.seed, "random seed");
  samples->add_option("--out", cfg.output, "output file (default <network>/samples_K<k>.csv)");
  samples->add_flag("--force", cfg.force, "overwrite an existing file");

  auto* solve_cmd = app.add_subcommand("solve", "solve an instance");
  solve_cmd->add_option("instance", cfg.instance, "instance folder")->required();
  solve_cmd->add_option("--formulation", cfg.formulation, "duality or kkt-check")
      ->check(CLI::IsMember({"duality", "kkt-check"}));
  solve_cmd->add_option("--samples", cfg.samples, "sample file for network folders");
  solve_cmd->add_option("--time-limit", cfg.time_limit, "seconds")->check(CLI::PositiveNumber);
  solve_cmd->add_option("--gap", cfg.gap, "relative gap target")->check(CLI::NonNegativeNumber);
  solve_cmd->add_option("--seed", cfg.seed, "heuristic seed");
  solve_cmd->add_option("--threshold", cfg.threshold, "rounding threshold")->check(CLI::Range(0.0, 1.0));
  solve_cmd->add_option("--workers", cfg.workers, "parallel node workers")->check(CLI::PositiveNumber);
  solve_cmd->add_option("--out", cfg.output, "result JSON file (default stdout)");
  solve_cmd->add_option("--log", cfg.log, "node log file");
  solve_cmd->add_option("--log-every", cfg.log_every, "log every n-th node")->check(CLI::PositiveNumber);
  solve_cmd->add_flag("!--no-heuristic", cfg.heuristic, "disable the rounding heuristic");

  auto* oracle = app.add_subcommand("oracle", "grid enumeration of the leader decisions");
  oracle->add_option("instance", cfg.instance, "instance folder")->required();
  oracle->add_option("--samples", cfg.samples, "sample file for network folders");
  oracle->add_option("--step", cfg.step, "grid step")->check(CLI::PositiveNumber);
  oracle->add_option("--out", cfg.output, "result JSON file (default stdout)");

  auto* certify = app.add_subcommand("certify", "relaxation boundedness certificates");
  certify->add_option("instance", cfg.instance, "instance folder")->required();
  certify->add_option("--samples", cfg.samples, "sample file for network folders");
  certify->add_option("--out", cfg.output, "result JSON file (default stdout)");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOptimal;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }

  try {
    if (gen->parsed()) return cmd_gen_efl(cfg, out);
    if (samples->parsed()) return cmd_gen_samples(cfg, out);
    if (solve_cmd->parsed()) return cmd_solve(cfg, out, err);
    if (oracle->parsed()) return cmd_oracle(cfg, out);
    if (certify->parsed()) return cmd_certify(cfg, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::invalid_argument& e) {  // TooLarge, TooManyArcs, bad instance data
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitOther;
}

}  // namespace spe
