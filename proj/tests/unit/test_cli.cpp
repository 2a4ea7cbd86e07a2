#include "doctest.h"

#include "json.hpp"
#include "spe/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace spe;
namespace fs = std::filesystem;

namespace {

const std::string kData = SPE_TEST_DATA;

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string temp_path(const std::string& name) {
  auto d = fs::temp_directory_path() / ("spe_cli_" + name);
  fs::remove_all(d);
  return d.string();
}

}  // namespace

TEST_CASE("gen-efl writes a folder and refuses to overwrite it") {
  const auto d = temp_path("efl");
  auto r = run({"gen-efl", "--nodes", "10", "--arcs", "15", "--seed", "3", "--out", d});
  REQUIRE(r.code == 0);
  int csv = 0;
  for (const auto& e : fs::directory_iterator(d)) csv += e.path().extension() == ".csv";
  CHECK(csv == 6);
  r = run({"gen-efl", "--nodes", "10", "--arcs", "15", "--seed", "3", "--out", d});
  CHECK(r.code == kExitInputError);
  CHECK(r.err.find("--force") != std::string::npos);
  CHECK(run({"gen-efl", "--nodes", "10", "--arcs", "15", "--seed", "3", "--out", d, "--force"}).code == 0);
}

TEST_CASE("gen-rgup-samples on the 14-bus network") {
  const auto d = temp_path("n14");
  fs::copy(kData + "/ieee14", d, fs::copy_options::recursive);
  auto r = run({"gen-rgup-samples", d, "--k", "10", "--seed", "1"});
  REQUIRE(r.code == 0);
  std::ifstream f(d + "/samples_K10.csv");
  std::string line;
  int rows = 0;
  std::getline(f, line);
  CHECK(std::count(line.begin(), line.end(), ',') == 5);
  while (std::getline(f, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 10);
  CHECK(run({"gen-rgup-samples", d, "--k", "10"}).code == kExitInputError);
}

TEST_CASE("toy duality solve") {
  auto r = run({"solve", kData + "/toy"});
  REQUIRE(r.code == kExitOptimal);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j["objective"].get<double>() == doctest::Approx(10.78125).epsilon(1e-6));
  CHECK(j["root_relax"].get<double>() == doctest::Approx(11.12347).epsilon(1e-5));
  CHECK(j["nodes"].get<int>() == 1);
  CHECK(j["leader"]["x:x"].get<double>() == doctest::Approx(2.375).epsilon(1e-6));
}

TEST_CASE("toy kkt-check reports the unbounded relaxation") {
  auto r = run({"solve", kData + "/toy", "--formulation", "kkt-check"});
  CHECK(r.code == kExitOptimal);
  CHECK(r.out.rfind("root relaxation UNBOUNDED (certificate attached)\n", 0) == 0);
  auto j = nlohmann::json::parse(r.out.substr(r.out.find('{')));
  CHECK(j["certificate_valid"].get<bool>());
  CHECK(j["objective_gap"].get<double>() <= 1e-6);
}

TEST_CASE("exit codes") {
  CHECK(run({"solve", kData + "/toy_infeasible"}).code == kExitInfeasible);
  CHECK(run({"solve", temp_path("missing")}).code == kExitInputError);
  CHECK(run({"solve", kData + "/toy", "--gap", "-1"}).code == kExitInputError);
  CHECK(run({"solve", kData + "/toy", "--time-limit", "0"}).code == kExitInputError);
  CHECK(run({"solve", kData + "/toy", "--formulation", "kkt"}).code == kExitInputError);
  CHECK(run({}).code == kExitInputError);
}

TEST_CASE("oracle and certify on the toy") {
  auto r = run({"oracle", kData + "/toy", "--step", "0.025"});
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j["value"].get<double>() == doctest::Approx(10.78125).epsilon(1e-6));
  CHECK(j["points"].get<int>() == 602);
  r = run({"certify", kData + "/toy"});
  REQUIRE(r.code == 0);
  j = nlohmann::json::parse(r.out);
  CHECK(j["duality_relaxation"] == "bounded");
  CHECK(j["kkt_relaxation"] == "unbounded");
}
