#include "mvdelay/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>

#include <fmt/format.h>

#include "mvdelay/config.hpp"
#include "mvdelay/coupling.hpp"
#include "mvdelay/engine.hpp"
#include "mvdelay/io.hpp"
#include "mvdelay/metrics.hpp"
#include "mvdelay/rates.hpp"
#include "mvdelay/stats.hpp"
#include "mvdelay/version.hpp"

namespace mvdelay {

namespace {

using nlohmann::json;

struct Prepared {
  json config;
  Provenance provenance;
  json experiment;
};

Prepared prepare(const json& config, const RunContext& ctx) {
  if (!config.is_object() || !config.contains("scenario")) throw Error("config: missing 'scenario'");
  Prepared p;
  p.config = config;
  if (ctx.seed) p.config["scenario"]["seed"] = *ctx.seed;
  p.provenance = {kVersion, config_hash(p.config)};
  p.experiment = p.config.value("experiment", json::object());
  std::filesystem::create_directories(ctx.out_dir);
  return p;
}

Scenario with_initial(const json& scenario, const json& initial) {
  json s = scenario;
  s["initial"] = initial;
  return scenario_from_json(s);
}

void log(const RunContext& ctx, const std::string& message) {
  if (ctx.verbose) fmt::print(stderr, "[mvdelay] {}\n", message);
}

int exit_code_of(const json& checks) {
  for (const auto& [name, ok] : checks.items())
    if (!ok.get<bool>()) return 2;
  return 0;
}

// Picard-solved flow, or a constant flow when nothing reads the measure.
PicardResult solve_flow(const Scenario& s, const json& e, const RunContext& ctx) {
  if (!s.model.measure_dependent()) {
    const auto initial = sample_initial_cloud(s, NoiseStream(s.seed, Family::reference), 2);
    return {MeasureFlow::stationary(initial, s.grid.horizon_steps), {0.0}, 0};
  }
  PicardOptions opt;
  opt.n_reference = e.value("n_reference", std::size_t{512});
  opt.tol = e.value("picard_tol", 1e-9);
  opt.max_iter = e.value("picard_max_iter", std::size_t{50});
  opt.threads = ctx.threads;
  return solve_mckean_vlasov_picard(s, opt);
}

json picard_json(const PicardResult& r) { return {{"iterations", r.iterations}, {"trace", r.trace}}; }

std::size_t steps_for(double t, double h, const char* what) {
  const double ratio = t / h;
  const double rounded = std::round(ratio);
  if (t < 0.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
    throw Error(fmt::format("{} = {} is not on the time grid", what, t));
  return static_cast<std::size_t>(rounded);
}

}  // namespace

CommandResult cmd_simulate(const json& config, const RunContext& ctx) {
  const auto p = prepare(config, ctx);
  const auto s = scenario_from_json(p.config.at("scenario"));
  const auto record_every = p.experiment.value("record_every", std::size_t{1});
  log(ctx, fmt::format("simulate: N = {}, {} steps", s.n_particles, s.grid.horizon_steps));
  const auto run = run_interacting(s, record_every, ctx.threads);
  CsvTable table{{"step", "time", "second_gamma_moment", "second_gamma_moment_se"}, {}, {"step"}};
  for (const auto& r : run.trace)
    table.add({static_cast<double>(r.step), r.time, r.second_gamma_moment, r.second_gamma_moment_se});
  write_csv(ctx.out_dir / "trace.csv", table, p.provenance);
  write_json(ctx.out_dir / "snapshot.json", snapshot_to_json(run.final), p.provenance);
  CommandResult result;
  result.summary = {{"command", "simulate"},
                    {"n_particles", s.n_particles},
                    {"final_time", run.trace.back().time},
                    {"final_second_gamma_moment", run.trace.back().second_gamma_moment},
                    {"checks", json::object()}};
  write_json(ctx.out_dir / "summary.json", result.summary, p.provenance);
  return result;
}

CommandResult cmd_contract(const json& config, const RunContext& ctx) {
  const auto p = prepare(config, ctx);
  const auto& e = p.experiment;
  const auto first = scenario_from_json(p.config.at("scenario"));
  if (!e.contains("second_initial")) throw Error("contract: experiment.second_initial is required");
  const auto second = with_initial(p.config.at("scenario"), e.at("second_initial"));
  const auto coupling = e.value("coupling", std::string("synchronous"));
  if (coupling != "synchronous" && coupling != "reflection")
    throw Error("contract: coupling must be 'synchronous' or 'reflection'");
  const bool reflection = coupling == "reflection";
  const double epsilon = e.value("epsilon", 1e-3);
  const double burn_in = e.value("burn_in_time", 0.0);
  const double floor_sigmas = e.value("floor_sigmas", 3.0);
  const auto& model = first.model;
  const double r0 = first.grid.r0();
  const double beta = model.beta;
  const auto& K = model.constants;

  log(ctx, "contract: solving measure flows");
  const auto flow_a = solve_flow(first, e, ctx);
  const auto flow_b = solve_flow(second, e, ctx);
  log(ctx, fmt::format("contract: running {} coupling, N = {}", coupling, first.n_particles));
  const auto trace = reflection ? run_reflection_pair(first, second, flow_a.flow, flow_b.flow, epsilon, ctx.threads)
                                : run_synchronous_pair(first, second, flow_a.flow, flow_b.flow, ctx.threads);

  json theory;
  std::function<double(double, double)> envelope;   // (t, d0) -> bound without MC allowance
  std::function<double(double)> systematic = [](double) { return 0.0; };
  if (reflection) {
    const auto rf = RateFunction::from_constants(K, beta);
    const auto rates = theorem33_rates(rf, K.Kb, r0);
    const double ell = ell_epsilon(rf, epsilon, rates.delta);
    const double kappa = K.K2 - K.Ksigma;
    const double a = kappa / (2.0 * beta * beta) * std::exp(rates.lambda0 * r0);
    const double ckb = rates.c * K.Kb;
    systematic = [=](double t) { return a * ell * std::exp(ckb * t) * (1.0 - std::exp(-rates.lambda0 * t)) / rates.lambda0; };
    envelope = [=](double t, double d0) { return rates.c * std::exp(-rates.lambda * t) * d0 + systematic(t); };
    theory = rates.to_json();
    theory["ell_epsilon"] = ell;
    theory["distance"] = "gamma_w1";
  } else if (K.K3 > 0.0) {
    const auto check = check_theorem23_condition(K.K1, K.K2, K.K3, r0);
    envelope = [=](double t, double d0) { return std::sqrt(check.prefactor * std::exp(check.exponent * t)) * d0; };
    theory = {{"dic", {{"holds", check.condition.holds}, {"lhs", check.condition.lhs}, {"rhs", check.condition.rhs}}},
              {"prefactor", check.prefactor},
              {"exponent", check.exponent},
              {"lambda", -0.5 * check.exponent},
              {"c", std::sqrt(check.prefactor)},
              {"distance", "sup_w2"}};
  }

  const auto distance_of = [&](const CouplingStep& s) { return reflection ? s.gamma_w1 : s.sup_w2; };
  const auto se_of = [&](const CouplingStep& s) { return reflection ? s.gamma_w1_se : s.sup_w2_se; };
  const double d0 = distance_of(trace.steps.front());

  CsvTable table{{"step", "time", "endpoint_mean", "marginal_w1", "gamma_w1", "gamma_w1_se", "sup_w1", "sup_w2",
                  "sup_w2_se", "envelope", "floor", "mixing_defect"},
                 {},
                 {"step"}};
  std::size_t violations = 0;
  std::size_t monotone_breaks = 0;
  double max_defect = 0.0;
  std::vector<std::pair<double, double>> fit_points;
  bool floored = false;
  const double fit_end = e.value("fit_end_time", std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const auto& s = trace.steps[k];
    const double d = distance_of(s);
    const double env = envelope ? envelope(s.time, d0) + 3.0 * se_of(s) : std::numeric_limits<double>::quiet_NaN();
    const double floor = floor_sigmas * se_of(s) + systematic(s.time);
    if (d > env) ++violations;
    if (k > 0 && s.time > burn_in && d > distance_of(trace.steps[k - 1])) ++monotone_breaks;
    max_defect = std::max(max_defect, s.mixing_defect);
    if (s.time >= burn_in && s.time <= fit_end && !floored) {
      if (d > floor && d > 0.0) {
        fit_points.emplace_back(s.time, d);
      } else {
        floored = true;
      }
    }
    table.add({static_cast<double>(s.step), s.time, s.endpoint_mean, s.marginal_w1, s.gamma_w1, s.gamma_w1_se,
               s.sup_w1, s.sup_w2, s.sup_w2_se, env, floor, s.mixing_defect});
  }
  write_csv(ctx.out_dir / "contract.csv", table, p.provenance);

  json fit = nullptr;
  double fitted_rate = std::numeric_limits<double>::quiet_NaN();
  double r_squared = std::numeric_limits<double>::quiet_NaN();
  if (fit_points.size() >= 3) {
    const auto f = fit_exponential_rate(fit_points);
    fitted_rate = f.rate;
    r_squared = f.r_squared;
    fit = {{"rate", f.rate},
           {"rate_se", f.rate_standard_error},
           {"log_intercept", f.log_intercept},
           {"r_squared", f.r_squared},
           {"points_used", f.points_used}};
  }

  json checks = json::object();
  if (envelope) checks["bound_violations"] = violations == 0;
  const json acceptance = e.value("acceptance", json::object());
  if (acceptance.value("require_monotone", false)) checks["monotone_after_burn_in"] = monotone_breaks == 0;
  if (acceptance.value("require_positive_rate", false)) checks["positive_rate"] = !fit.is_null() && fitted_rate > 0.0;
  if (acceptance.contains("min_r_squared"))
    checks["r_squared"] = !fit.is_null() && r_squared > acceptance.at("min_r_squared").get<double>();
  if (acceptance.contains("min_rate_ratio")) {
    const double lambda = theory.is_null() ? std::numeric_limits<double>::quiet_NaN() : theory.at("lambda").get<double>();
    checks["rate_ratio"] = !fit.is_null() && fitted_rate >= acceptance.at("min_rate_ratio").get<double>() * lambda;
  }
  if (reflection) checks["mixing_identity"] = max_defect <= 1e-12;

  CommandResult result;
  result.summary = {{"command", "contract"},
                    {"coupling", coupling},
                    {"n_pairs", first.n_particles},
                    {"initial_distance", d0},
                    {"final_distance", distance_of(trace.steps.back())},
                    {"fit", fit},
                    {"theory", theory},
                    {"bound_violations", violations},
                    {"monotone_breaks", monotone_breaks},
                    {"max_mixing_defect", max_defect},
                    {"picard", {{"first", picard_json(flow_a)}, {"second", picard_json(flow_b)}}},
                    {"checks", checks}};
  result.exit_code = exit_code_of(checks);
  write_json(ctx.out_dir / "summary.json", result.summary, p.provenance);
  return result;
}

CommandResult cmd_chaos(const json& config, const RunContext& ctx) {
  const auto p = prepare(config, ctx);
  const auto& e = p.experiment;
  const auto s = scenario_from_json(p.config.at("scenario"));
  const auto n_values = e.value("n_values", std::vector<std::size_t>{16, 64, 256, 1024});
  const auto replicas = e.value("replicas", std::size_t{8});
  const double window_start = e.value("window_start_fraction", 0.5) * s.grid.horizon();
  if (n_values.size() < 3) throw Error("chaos: need at least three particle counts");
  if (replicas < 1) throw Error("chaos: need at least one replica");
  const std::size_t max_n = *std::max_element(n_values.begin(), n_values.end());
  const double h = s.grid.step_h;
  const std::size_t steps = s.grid.horizon_steps;

  log(ctx, "chaos: solving the limit flow");
  const auto limit = solve_flow(s, e, ctx);
  const NoiseStream noise(s.seed, Family::main);

  CsvTable table{{"n", "distance", "distance_se", "replicas"}, {}, {"n", "replicas"}};
  std::vector<double> log_n, log_d;
  bool any_zero = false;
  json per_n = json::array();
  for (std::size_t idx = 0; idx < n_values.size(); ++idx) {
    const std::size_t n = n_values[idx];
    log(ctx, fmt::format("chaos: N = {}", n));
    std::vector<double> averages(replicas);
    for (std::size_t r = 0; r < replicas; ++r) {
      const std::uint64_t base = (r * n_values.size() + idx) * max_n;
      ParticleCloud x = sample_initial_cloud(s, noise, n, base);
      ParticleCloud y = x;
      std::vector<double> ex(n * s.model.dim), ey(ex.size());
      double total = 0.0;
      std::size_t count = 0;
      for (std::size_t k = 0; k < steps; ++k) {
        const BoundCoefficients cx(s.model, x.view());
        const BoundCoefficients cy(s.model, limit.flow.snapshot(k));
        euler_endpoints(x.view(), cx, noise, k, h, ex, base, ctx.threads);
        euler_endpoints(y.view(), cy, noise, k, h, ey, base, ctx.threads);
        x = x.advanced(ex);
        y = y.advanced(ey);
        if (static_cast<double>(k + 1) * h >= window_start) {
          total += coupled_pair_cost(x.view(), y.view(), 1, PathNorm::gamma_r0);
          ++count;
        }
      }
      averages[r] = total / static_cast<double>(std::max<std::size_t>(count, 1));
    }
    const auto stats = mean_and_error(averages);
    table.add({static_cast<double>(n), stats.mean, stats.standard_error, static_cast<double>(replicas)});
    per_n.push_back({{"n", n}, {"distance", stats.mean}, {"se", stats.standard_error}});
    if (!(stats.mean > 0.0)) any_zero = true;
    log_n.push_back(std::log(static_cast<double>(n)));
    log_d.push_back(stats.mean > 0.0 ? std::log(stats.mean) : 0.0);
  }
  write_csv(ctx.out_dir / "chaos.csv", table, p.provenance);

  json fit = nullptr;
  json checks = json::object();
  const json acceptance = e.value("acceptance", json::object());
  if (!any_zero) {
    const auto f = fit_line(log_n, log_d);
    fit = {{"slope", f.slope}, {"slope_se", f.slope_standard_error}, {"intercept", f.intercept}, {"r_squared", f.r_squared}};
    if (acceptance.contains("slope_range")) {
      const auto range = acceptance.at("slope_range").get<std::vector<double>>();
      checks["slope_range"] = f.slope >= range.at(0) && f.slope <= range.at(1);
    }
    if (acceptance.contains("min_r_squared"))
      checks["r_squared"] = f.r_squared > acceptance.at("min_r_squared").get<double>();
  } else if (acceptance.contains("slope_range")) {
    checks["slope_range"] = false;
  }
  json theory = nullptr;
  if (s.model.mode == Mode::theorem3) {
    const auto rates = theorem33_rates(RateFunction::from_constants(s.model.constants, s.model.beta),
                                       s.model.constants.Kb, s.grid.r0());
    theory = rates.to_json();
  }
  CommandResult result;
  result.summary = {{"command", "chaos"},
                    {"per_n", per_n},
                    {"fit", fit},
                    {"window_start", window_start},
                    {"n_reference", limit.flow.size()},
                    {"picard", picard_json(limit)},
                    {"theory", theory},
                    {"checks", checks}};
  result.exit_code = exit_code_of(checks);
  write_json(ctx.out_dir / "summary.json", result.summary, p.provenance);
  return result;
}

CommandResult cmd_moments(const json& config, const RunContext& ctx) {
  const auto p = prepare(config, ctx);
  const auto& e = p.experiment;
  const auto s = scenario_from_json(p.config.at("scenario"));
  const auto record_every = e.value("record_every", std::size_t{10});
  const double window_start = e.value("window_start_fraction", 0.5) * s.grid.horizon();
  log(ctx, fmt::format("moments: N = {}, {} steps", s.n_particles, s.grid.horizon_steps));
  const auto run = run_interacting(s, record_every, ctx.threads);

  CsvTable table{{"step", "time", "second_gamma_moment", "second_gamma_moment_se"}, {}, {"step"}};
  double overall_max = 0.0, window_max = 0.0, at_window = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> window_values;
  for (const auto& r : run.trace) {
    table.add({static_cast<double>(r.step), r.time, r.second_gamma_moment, r.second_gamma_moment_se});
    overall_max = std::max(overall_max, r.second_gamma_moment);
    if (r.time >= window_start - 1e-12) {
      if (std::isnan(at_window)) at_window = r.second_gamma_moment;
      window_max = std::max(window_max, r.second_gamma_moment);
      window_values.push_back(r.second_gamma_moment);
    }
  }
  write_csv(ctx.out_dir / "moments.csv", table, p.provenance);
  const double growth = at_window > 0.0 ? (window_max - at_window) / at_window : 0.0;
  const double plateau = window_values.empty() ? 0.0 : pairwise_sum(window_values) / static_cast<double>(window_values.size());
  const auto& last = run.trace.back();

  json checks = json::object();
  json theory = nullptr;
  if (s.model.mode == Mode::theorem3) {
    const auto rates = theorem33_rates(RateFunction::from_constants(s.model.constants, s.model.beta),
                                       s.model.constants.Kb, s.grid.r0());
    theory = {{"CTK0", {{"holds", rates.CTK0.holds}, {"lhs", rates.CTK0.lhs}, {"rhs", rates.CTK0.rhs}}}};
  }
  const json acceptance = e.value("acceptance", json::object());
  if (acceptance.contains("max_relative_growth"))
    checks["relative_growth"] = growth < acceptance.at("max_relative_growth").get<double>();
  if (acceptance.contains("stationary_moment")) {
    const double target = acceptance.at("stationary_moment").get<double>();
    checks["stationary_moment"] = std::abs(last.second_gamma_moment - target) <= 3.0 * last.second_gamma_moment_se;
  }
  if (acceptance.value("require_CTK0", false)) checks["CTK0"] = !theory.is_null() && theory["CTK0"]["holds"].get<bool>();

  CommandResult result;
  result.summary = {{"command", "moments"},
                    {"max", overall_max},
                    {"value_at_window_start", at_window},
                    {"window_max", window_max},
                    {"relative_growth", growth},
                    {"plateau_mean", plateau},
                    {"final", {{"time", last.time}, {"value", last.second_gamma_moment}, {"se", last.second_gamma_moment_se}}},
                    {"theory", theory},
                    {"checks", checks}};
  result.exit_code = exit_code_of(checks);
  write_json(ctx.out_dir / "summary.json", result.summary, p.provenance);
  return result;
}

CommandResult cmd_girsanov(const json& config, const RunContext& ctx) {
  const auto p = prepare(config, ctx);
  const auto& e = p.experiment;
  const auto mu = scenario_from_json(p.config.at("scenario"));
  const auto nu = e.contains("second_initial") ? with_initial(p.config.at("scenario"), e.at("second_initial")) : mu;
  GirsanovOptions opt;
  opt.t0_steps = steps_for(e.value("t0", 1.0), mu.grid.step_h, "t0");
  opt.n_replicas = e.value("n_replicas", std::size_t{10000});
  opt.threads = ctx.threads;
  const auto pairing = e.value("pairing", std::string("independent"));
  if (pairing == "optimal") {
    opt.pairing = InitialPairing::optimal;
  } else if (pairing != "independent") {
    throw Error("girsanov: pairing must be 'independent' or 'optimal'");
  }
  log(ctx, "girsanov: solving measure flows");
  const auto flow_mu = solve_flow(mu, e, ctx);
  const auto flow_nu = solve_flow(nu, e, ctx);
  log(ctx, fmt::format("girsanov: {} replicas to t0 = {}", opt.n_replicas, static_cast<double>(opt.t0_steps) * mu.grid.step_h));
  const auto report = run_girsanov_pair(mu, nu, flow_mu.flow, flow_nu.flow, opt, default_test_functions(mu.model.dim));

  CsvTable table{{"replica", "weight", "log_weight"}, {}, {"replica"}};
  for (std::size_t i = 0; i < report.weights.size(); ++i)
    table.add({static_cast<double>(i), report.weights[i], report.log_weights[i]});
  write_csv(ctx.out_dir / "weights.csv", table, p.provenance);
  auto j = report.to_json();
  write_json(ctx.out_dir / "girsanov.json", j, p.provenance);

  CommandResult result;
  result.summary = j;
  result.summary["command"] = "girsanov";
  result.summary["picard"] = {{"mu", picard_json(flow_mu)}, {"nu", picard_json(flow_nu)}};
  result.exit_code = report.passed() ? 0 : 2;
  write_json(ctx.out_dir / "summary.json", result.summary, p.provenance);
  return result;
}

CommandResult cmd_rates(const json& config, const RunContext& ctx) {
  const auto p = prepare(config, ctx);
  const auto& e = p.experiment;
  const auto s = scenario_from_json(p.config.at("scenario"));
  const auto& K = s.model.constants;
  const double r0 = s.grid.r0();
  json out = {{"command", "rates"}, {"mode", to_string(s.model.mode)}, {"r0", r0}};
  json conditions = json::object();
  if (K.K2 > K.Ksigma) {
    const auto rf = RateFunction::from_constants(K, s.model.beta);
    const auto report = theorem33_rates(rf, K.Kb, r0, e.value("tol", 1e-12));
    out["theorem33"] = report.to_json();
    conditions["kb_kd1"] = report.kb_kd1.holds;
    conditions["kb_kd"] = report.kb_kd.holds;
    conditions["CTK0"] = report.CTK0.holds;
    if (e.contains("epsilon")) out["ell_epsilon"] = ell_epsilon(rf, e.at("epsilon").get<double>(), report.delta);
  }
  if (K.K3 > 0.0) {
    const auto check = check_theorem23_condition(K.K1, K.K2, K.K3, r0);
    out["theorem23"] = {{"dic", {{"holds", check.condition.holds}, {"lhs", check.condition.lhs}, {"rhs", check.condition.rhs}}},
                        {"prefactor", check.prefactor},
                        {"exponent", check.exponent}};
    conditions["dic"] = check.condition.holds;
  }
  std::vector<std::string> requested;
  if (e.contains("conditions")) {
    requested = e.at("conditions").get<std::vector<std::string>>();
  } else if (s.model.mode == Mode::theorem3) {
    requested = {"kb_kd1", "kb_kd", "CTK0"};
  } else {
    requested = {"dic"};
  }
  json checks = json::object();
  for (const auto& name : requested)
    checks[name] = conditions.contains(name) && conditions.at(name).get<bool>();
  out["conditions"] = conditions;
  out["checks"] = checks;
  write_json(ctx.out_dir / "rates.json", out, p.provenance);
  return {exit_code_of(checks), out};
}

CommandResult run_command(const std::string& name, const json& config, const RunContext& ctx) {
  if (name == "simulate") return cmd_simulate(config, ctx);
  if (name == "contract") return cmd_contract(config, ctx);
  if (name == "chaos") return cmd_chaos(config, ctx);
  if (name == "moments") return cmd_moments(config, ctx);
  if (name == "girsanov") return cmd_girsanov(config, ctx);
  if (name == "rates") return cmd_rates(config, ctx);
  throw Error("unknown subcommand '" + name + "'");
}

}  // namespace mvdelay
