#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mvdelay/experiments.hpp"
#include "mvdelay/model.hpp"

using namespace mvdelay;
using nlohmann::json;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mvdelay_exp_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json ou_scenario(std::size_t n, std::size_t steps) {
  return {{"grid", {{"h", 0.01}, {"delay_steps", 0}, {"horizon_steps", steps}}},
          {"model", {{"name", "ou"}, {"params", {{"a", 2.0}}}, {"constants", {{"K1", 0.0}, {"K2", 2.0}, {"K3", 0.0}}}}},
          {"n_particles", n},
          {"initial", {{"name", "point"}, {"params", {{"location", -1.0}}}}},
          {"seed", 5}};
}

}  // namespace

TEST_CASE("contract: identical initials give zero distance and no rate") {
  json cfg{{"scenario", ou_scenario(20, 50)}, {"experiment", {{"second_initial", ou_scenario(1, 1)["initial"]}}}};
  const auto dir = scratch("contract_same");
  const auto r = cmd_contract(cfg, {dir});
  CHECK(r.summary["fit"].is_null());
  CHECK(r.summary["final_distance"] == 0.0);
  CHECK(std::filesystem::exists(dir / "contract.csv"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("contract: linear OU pair decays at rate a") {
  json cfg{{"scenario", ou_scenario(20, 200)},
           {"experiment", {{"second_initial", {{"name", "point"}, {"params", {{"location", 1.0}}}}},
                           {"acceptance", {{"require_monotone", true}, {"min_r_squared", 0.99}}}}}};
  const auto dir = scratch("contract_ou");
  const auto r = cmd_contract(cfg, {dir});
  const double rate = r.summary["fit"]["rate"];
  CHECK(std::abs(rate - 2.0) < 0.2);
  CHECK(r.exit_code == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("chaos: no interaction means no chaos error") {
  json cfg{{"scenario", ou_scenario(1, 40)}, {"experiment", {{"n_values", {4, 8, 16}}, {"replicas", 2}}}};
  cfg["scenario"]["initial"] = {{"name", "gaussian"}};
  const auto dir = scratch("chaos_zero");
  const auto r = cmd_chaos(cfg, {dir});
  for (const auto& row : r.summary["per_n"]) CHECK(row["distance"] == 0.0);
  CHECK(r.summary["fit"].is_null());
  std::filesystem::remove_all(dir);
}

TEST_CASE("moments: OU plateau") {
  json cfg{{"scenario", ou_scenario(4000, 500)},
           {"experiment", {{"record_every", 50}, {"acceptance", {{"stationary_moment", 0.25 / (1.0 - 0.01)}}}}}};
  cfg["scenario"]["initial"]["params"]["location"] = 0.0;
  const auto dir = scratch("moments_ou");
  const auto r = cmd_moments(cfg, {dir});
  CHECK(r.exit_code == 0);
  CHECK(std::filesystem::exists(dir / "moments.csv"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("girsanov: identical laws") {
  json s = ou_scenario(10, 50);
  s["model"]["mode"] = "theorem2";
  s["model"]["params"]["sigma"] = {{"name", "moment_sigma"}, {"sigma0", 0.2}, {"sigma1", 0.0}};
  s["initial"] = {{"name", "gaussian"}, {"params", {{"scale", 0.3}}}};
  json cfg{{"scenario", s}, {"experiment", {{"t0", 0.5}, {"n_replicas", 100}, {"pairing", "optimal"}}}};
  const auto dir = scratch("girsanov_same");
  const auto r = cmd_girsanov(cfg, {dir});
  CHECK(r.exit_code == 0);
  CHECK(r.summary["entropy_bound"]["mean"] == 0.0);
  CHECK(r.summary["endpoint_residual_max"] < 1e-10);
  cfg["experiment"]["t0"] = 0.505;
  CHECK_THROWS_AS(cmd_girsanov(cfg, {dir}), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("rates: failing condition gives exit code 2") {
  json s = ou_scenario(1, 1);
  s["model"]["constants"] = {{"K1", 1.0}, {"K2", 1.0}, {"K3", 1.0}};
  s["model"]["mode"] = "theorem2";
  const auto dir = scratch("rates_fail");
  CHECK(cmd_rates({{"scenario", s}}, {dir}).exit_code == 2);
  s["model"]["constants"] = {{"K1", 0.01}, {"K2", 1.0}, {"K3", 5.0}};
  s["grid"]["delay_steps"] = 10;
  CHECK(cmd_rates({{"scenario", s}}, {dir}).exit_code == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("outputs are deterministic and carry the config hash") {
  json cfg{{"scenario", ou_scenario(50, 30)}, {"experiment", {{"record_every", 10}}}};
  const auto a = scratch("det_a"), b = scratch("det_b");
  cmd_simulate(cfg, {a, std::uint64_t{11}, 1});
  cmd_simulate(cfg, {b, std::uint64_t{11}, 2});
  for (const char* f : {"trace.csv", "snapshot.json", "summary.json"}) CHECK(slurp(a / f) == slurp(b / f));
  const auto first_line = slurp(a / "trace.csv").substr(0, 40);
  CHECK(first_line.rfind("# mvdelay ", 0) == 0);
  cmd_simulate(cfg, {b, std::uint64_t{12}, 1});
  CHECK(slurp(a / "trace.csv") != slurp(b / "trace.csv"));
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}

TEST_CASE("unknown subcommands and malformed configs are operational errors") {
  CHECK_THROWS_AS(run_command("nope", json::object(), {scratch("x")}), Error);
  CHECK_THROWS_AS(run_command("simulate", json::object(), {scratch("x")}), Error);
  CHECK_THROWS_AS(run_command("contract", {{"scenario", ou_scenario(2, 2)}}, {scratch("x")}), Error);
}
