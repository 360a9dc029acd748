#include "capassign/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "capassign/error.hpp"
#include "capassign/harness.hpp"
#include "capassign/io.hpp"
#include "capassign/kernels.hpp"

#ifndef CAPASSIGN_VERSION
#define CAPASSIGN_VERSION "0.0.0"
#endif

namespace capassign::cli {

namespace {

using io::json;
namespace fs = std::filesystem;

json load_config(const CommandOptions& options, bool required, const char* command) {
  if (!options.config) {
    if (required) throw InputError(std::string(command) + " needs --config");
    return json::object();
  }
  json cfg = io::read_json_file(*options.config);
  if (!cfg.is_object()) throw InputError("config must be a JSON object");
  return cfg;
}

fs::path resolve(const CommandOptions& options, const std::string& p) {
  fs::path path(p);
  if (path.is_relative() && options.config) return options.config->parent_path() / path;
  return path;
}

fs::path prepare_out(const CommandOptions& options) {
  std::error_code ec;
  fs::create_directories(options.out, ec);
  if (ec) throw InputError("cannot create output directory " + options.out.string());
  return options.out;
}

void write_manifest(const fs::path& out, const char* command, const json& resolved,
                    const CommandOptions& options) {
  json m = {{"command", command},
            {"version", CAPASSIGN_VERSION},
            {"config", resolved},
            {"profile", options.profile ? json(*options.profile) : json(nullptr)},
            {"kernel_backend", std::string(kernels::backend_name(kernels::active_backend()))},
            {"compiler", __VERSION__},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                          "." + std::to_string(EIGEN_MINOR_VERSION)}};
  io::write_json_file(out / "run_manifest.json", m);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path.string());
  f << text;
}

void check_feasible(const transport::Coupling& c, const transport::DiscreteMarginal& rows,
                    const transport::DiscreteMarginal& cols) {
  if (c.marginal_error(rows, cols) > transport::kFeasibilityTolerance)
    throw NumericalError("solver returned a coupling that violates the marginals");
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

int cmd_fit(const CommandOptions& options, std::ostream& log) {
  const json cfg = load_config(options, true, "fit");
  io::check_keys(cfg, {"data", "mle"}, "fit config");
  if (!cfg.contains("data")) throw InputError("fit config: missing key 'data'");
  const json& data = cfg["data"];
  if (!data.contains("path") || !data["path"].is_string())
    throw InputError("fit config: data.path must name a CSV file");
  const auto schema = io::schema_from_json(data);
  const auto table = io::read_csv_file(resolve(options, data["path"].get<std::string>()));
  const auto loaded = io::load_dataset(table, schema);

  tobit::MleOptions mle;
  if (cfg.contains("mle")) {
    const json& m = cfg["mle"];
    io::check_keys(m, {"tol", "max_iterations"}, "fit config mle");
    mle.tol = m.value("tol", mle.tol);
    mle.max_iterations = m.value("max_iterations", mle.max_iterations);
  }
  io::FitRecord record{tobit::tobit_mle(loaded.data, mle), loaded.covariates, loaded.tau};
  const fs::path out = prepare_out(options);
  const json fit_json = io::to_json(record);
  io::write_json_file(out / "fit.json", fit_json);
  json resolved = cfg;
  resolved["data"]["tau_value"] = loaded.tau;
  write_manifest(out, "fit", resolved, options);

  const auto& f = record.fit;
  log << "Tobit maximum likelihood (censored at tau = " << io::format_double(loaded.tau) << ")\n";
  log << "n = " << f.n << ", censored = " << loaded.data.censored_count()
      << ", loglik = " << fmt("%.6f", f.loglik) << ", iterations = " << f.iterations << "\n";
  const auto& names = fit_json["parameters"];
  const auto flat = f.theta_hat.flatten();
  char line[128];
  std::snprintf(line, sizeof line, "%-12s %14s %14s\n", "parameter", "estimate", "std.error");
  log << line;
  for (std::size_t k = 0; k < flat.size(); ++k) {
    const auto& se = fit_json["se"][k];
    std::snprintf(line, sizeof line, "%-12s %14.6f %14s\n", names[k].get<std::string>().c_str(),
                  flat[k], se.is_null() ? "n/a" : fmt("%.6f", se.get<double>()).c_str());
    log << line;
  }
  if (!fit_json["se"].back().is_null()) {
    const double s = f.theta_hat.sigma, se = fit_json["se"].back().get<double>();
    std::snprintf(line, sizeof line, "%-12s %14.6f %14.6f\n", "sigma^2", s * s, 2.0 * s * se);
    log << line;
  }
  if (!f.converged) {
    log << "fit did not converge (gradient norm " << io::format_double(f.gradient_norm) << ")\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_assign(const CommandOptions& options, std::ostream& log) {
  const json cfg = load_config(options, true, "assign");
  io::check_keys(cfg, {"fit", "theta", "grid", "data", "capacity", "target", "welfare", "rule", "L",
                       "seed", "tie_mode", "metric"},
                 "assign config");

  std::optional<io::FitRecord> record;
  std::optional<transport::DiscreteMarginal> grid;
  if (cfg.contains("fit")) {
    const json& f = cfg["fit"];
    if (f.is_string() && f.get<std::string>() == "application-standin") {
      auto setup = harness::application_standin();
      record = io::FitRecord{setup.fit, {"const", "age", "gender"}, setup.tau};
      grid = setup.grid;
    } else if (f.is_string()) {
      record = io::fit_from_json(io::read_json_file(resolve(options, f.get<std::string>())));
    } else {
      record = io::fit_from_json(f);
    }
  }
  std::optional<welfare::ParamVector> theta;
  if (cfg.contains("theta")) theta = io::param_from_json(cfg["theta"]);
  if (!record && !theta) throw InputError("assign config: give 'fit' or 'theta'");
  if (record && theta) throw InputError("assign config: give only one of 'fit' and 'theta'");

  if (cfg.contains("grid")) {
    const json& g = cfg["grid"];
    grid = io::marginal_from_json(g.is_string() ? io::read_json_file(resolve(options, g.get<std::string>())) : g);
  } else if (cfg.contains("data")) {
    const json& d = cfg["data"];
    if (!d.contains("path") || !d["path"].is_string())
      throw InputError("assign config: data.path must name a CSV file");
    const auto loaded = io::load_dataset(io::read_csv_file(resolve(options, d["path"].get<std::string>())),
                                         io::schema_from_json(d));
    grid = io::empirical_covariates(loaded.data, loaded.covariates);
  }
  if (!grid) throw InputError("assign config: give 'grid' or 'data' for the covariate marginal");

  transport::DiscreteMarginal f_t;
  if (cfg.contains("target")) {
    f_t = io::marginal_from_json(cfg["target"]);
  } else if (cfg.contains("capacity")) {
    const double p = cfg["capacity"].is_number() ? cfg["capacity"].get<double>() : -1.0;
    if (!(p > 0.0 && p < 1.0)) throw InputError("assign config: capacity must lie in (0, 1)");
    f_t = transport::DiscreteMarginal::bernoulli(p);
  } else {
    throw InputError("assign config: give 'capacity' or 'target'");
  }

  welfare::WelfareSpec base;
  if (record) base.tau = record->tau;
  const auto spec = io::spec_from_json(cfg.value("welfare", json::object()), base);
  const std::string rule = cfg.value("rule", std::string("both"));
  if (rule != "plug_in" && rule != "ex_post_bayes" && rule != "oracle" && rule != "both")
    throw InputError("assign config: rule must be plug_in, ex_post_bayes, oracle or both");
  const std::size_t L = cfg.value("L", std::size_t{200});
  std::uint64_t seed = cfg.value("seed", std::uint64_t{1});
  if (options.seed) seed = *options.seed;
  rules::RuleOptions ropts;
  if (cfg.contains("tie_mode")) ropts.tie_mode = rules::parse_tie_mode(cfg["tie_mode"].get<std::string>());
  if (cfg.contains("metric")) ropts.metric = io::metric_from_json(cfg["metric"], *grid, f_t);

  tobit::TobitFit fit;
  if (record) {
    fit = record->fit;
  } else {
    fit.theta_hat = *theta;
    fit.converged = true;
  }
  std::vector<rules::RuleOutput> outputs;
  if (rule == "oracle") {
    outputs.push_back(rules::oracle_rule(fit.theta_hat, *grid, f_t, spec, ropts));
  }
  if (rule == "plug_in" || rule == "both") {
    outputs.push_back(rules::plug_in_rule(fit, *grid, f_t, spec, ropts));
  }
  if (rule == "ex_post_bayes" || rule == "both") {
    if (!record) throw InputError("ex-post Bayes rule needs a fit with information, not just theta");
    std::mt19937_64 rng(seed);
    outputs.push_back(rules::ex_post_bayes_rule(fit, *grid, f_t, spec, L, rng, ropts));
  }
  for (const auto& o : outputs) check_feasible(o.coupling, *grid, f_t);

  const fs::path out = prepare_out(options);
  {
    std::ofstream f(out / "allocation.csv", std::ios::binary);
    if (!f) throw InputError("cannot write allocation.csv");
    io::write_allocation_csv(f, outputs, *grid, f_t);
  }
  json rules_json = json::array();
  for (const auto& o : outputs) {
    rules_json.push_back({{"rule", rules::to_string(o.kind)},
                          {"tie_mode", rules::to_string(ropts.tie_mode)},
                          {"value", o.welfare_at_solution},
                          {"theta_used", io::to_json(o.theta_used)},
                          {"draws", o.draws},
                          {"coupling", io::to_json(o.coupling, *grid, f_t)}});
  }
  io::write_json_file(out / "allocation.json", {{"grid", io::to_json(*grid)},
                                                {"target", io::to_json(f_t)},
                                                {"welfare", io::to_json(spec)},
                                                {"seed", seed},
                                                {"rules", rules_json}});
  json resolved = cfg;
  resolved["seed"] = seed;
  resolved["welfare"] = io::to_json(spec);
  write_manifest(out, "assign", resolved, options);

  for (const auto& o : outputs)
    log << rules::to_string(o.kind) << ": welfare " << fmt("%.6f", o.welfare_at_solution) << "\n";
  if (outputs.size() == 2) {
    std::string diff = "bin,treatment,plug_in_mass,ex_post_bayes_mass,difference\n";
    std::size_t cells = 0;
    for (std::size_t i = 0; i < grid->size(); ++i)
      for (std::size_t j = 0; j < f_t.size(); ++j) {
        const double a = outputs[0].coupling(i, j), b = outputs[1].coupling(i, j);
        if (std::abs(a - b) <= 1e-9) continue;
        ++cells;
        diff += grid->point(i).label + "," + f_t.point(j).label + "," + io::format_double(a) + "," +
                io::format_double(b) + "," + io::format_double(a - b) + "\n";
      }
    write_text(out / "allocation_diff.csv", diff);
    log << "plug-in and ex-post Bayes allocations differ in " << cells << " cells\n";
  }
  return kExitOk;
}

int cmd_simulate(const CommandOptions& options, std::ostream& log) {
  const json cfg = load_config(options, false, "simulate");
  harness::SimConfig base;
  if (options.profile) base = harness::profile(*options.profile);
  if (options.seed) base.seed = *options.seed;
  auto config = io::sim_config_from_json(cfg, base);
  if (options.seed) config.seed = *options.seed;
  if (options.workers) config.workers = *options.workers;

  const auto result = harness::run_simulation(config);
  const fs::path out = prepare_out(options);
  {
    std::ofstream f(out / "risk_curve.csv", std::ios::binary);
    if (!f) throw InputError("cannot write risk_curve.csv");
    io::write_risk_curve_csv(f, result);
  }
  {
    std::ofstream f(out / "heatmap.csv", std::ios::binary);
    if (!f) throw InputError("cannot write heatmap.csv");
    io::write_heatmap_csv(f, result);
  }
  json summary = json::array();
  for (std::size_t l = 0; l < result.curves.size(); ++l) {
    const auto a = harness::average_risk(result.curves[l]);
    std::size_t excluded = 0;
    for (auto e : result.curves[l].excluded) excluded += e;
    summary.push_back({{"lambda", result.curves[l].lambda},
                       {"plug_in", a.plug_in},
                       {"plug_in_se", a.plug_in_se},
                       {"ex_post_bayes", a.ex_post_bayes},
                       {"ex_post_bayes_se", a.ex_post_bayes_se},
                       {"pooled_se", a.pooled_se},
                       {"difference_se", a.difference_se},
                       {"excluded", excluded}});
    log << "lambda " << io::format_double(result.curves[l].lambda) << ": average regret plug-in "
        << fmt("%.6g", a.plug_in) << " (se " << fmt("%.2g", a.plug_in_se) << "), ex-post Bayes "
        << fmt("%.6g", a.ex_post_bayes) << " (se " << fmt("%.2g", a.ex_post_bayes_se) << ")";
    if (excluded) log << ", " << excluded << " replications excluded";
    log << "\n";
  }
  json resolved = io::to_json(config);
  resolved.erase("workers");
  io::write_json_file(out / "risk_summary.json",
                      {{"averages", summary},
                       {"max_capacity_error", result.max_capacity_error},
                       {"min_regret", result.min_regret},
                       {"couplings_checked", result.couplings_checked}});
  write_manifest(out, "simulate", resolved, options);
  if (result.max_capacity_error > transport::kFeasibilityTolerance || result.min_regret < -1e-9) {
    log << "invariant violated: capacity error " << io::format_double(result.max_capacity_error)
        << ", min regret " << io::format_double(result.min_regret) << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_ot(const CommandOptions& options, std::ostream& log) {
  const json cfg = load_config(options, true, "ot");
  io::check_keys(cfg, {"problem", "solve", "eps", "scale", "metric", "reference", "method", "mu",
                       "nu", "max_iterations"},
                 "ot config");
  const std::string solve = cfg.value("solve", std::string("max"));
  const fs::path out = prepare_out(options);
  json result = {{"solve", solve}};
  int code = kExitOk;

  if (solve == "distance") {
    if (!cfg.contains("mu") || !cfg.contains("nu") || !cfg.contains("metric"))
      throw InputError("ot distance needs 'mu', 'nu' and 'metric'");
    const auto mu = io::marginal_from_json(cfg["mu"]);
    const auto nu = io::marginal_from_json(cfg["nu"]);
    if (!cfg["metric"].is_object()) throw InputError("ot distance needs an explicit distance table");
    const auto metric = io::metric_from_json(cfg["metric"], mu, nu);
    const double d = transport::wasserstein1(mu, nu, metric);
    const auto dual = transport::wasserstein1_dual(mu.masses(), nu.masses(), metric);
    result["distance"] = d;
    result["potential_mu"] = dual.potential_mu;
    result["potential_nu"] = dual.potential_nu;
    log << "distance " << io::format_double(d) << "\n";
  } else {
    if (!cfg.contains("problem")) throw InputError("ot config: missing key 'problem'");
    const json& pj = cfg["problem"];
    const auto problem = io::problem_from_json(
        pj.is_string() ? io::read_json_file(resolve(options, pj.get<std::string>())) : pj);
    transport::SolveReport report;
    auto metric = [&] {
      return cfg.contains("metric") ? io::metric_from_json(cfg["metric"], problem.source(), problem.target())
                                    : transport::GroundMetric::standardized(problem.source(), problem.target());
    };
    auto reference = [&] {
      if (!cfg.contains("reference") ||
          (cfg["reference"].is_string() && cfg["reference"].get<std::string>() == "independent"))
        return transport::Coupling::independent(problem.source(), problem.target());
      return io::coupling_from_json(cfg["reference"]).coupling;
    };
    if (solve == "max" || solve == "min") {
      transport::SimplexOptions so;
      so.max_iterations = cfg.value("max_iterations", std::size_t{0});
      report = solve == "max" ? transport::solve_max_transport(problem, so)
                              : transport::solve_min_transport(problem, so);
    } else if (solve == "penalized") {
      if (!cfg.contains("eps") || !cfg["eps"].is_number()) throw InputError("ot penalized needs 'eps'");
      transport::PenaltyOptions po;
      const std::string method = cfg.value("method", std::string("parametric"));
      if (method == "parametric")
        po.method = transport::PenaltyMethod::parametric;
      else if (method == "frank-wolfe")
        po.method = transport::PenaltyMethod::frank_wolfe;
      else
        throw InputError("ot config: method must be parametric or frank-wolfe");
      if (cfg.contains("max_iterations")) po.fw_max_iterations = cfg["max_iterations"].get<std::size_t>();
      report = transport::solve_penalized(problem, reference(), metric(), cfg["eps"].get<double>(),
                                          cfg.value("scale", 1.0), po);
    } else if (solve == "minimal-H") {
      report.coupling = transport::minimal_H_selection(problem, reference(), metric());
      report.value = problem.value(report.coupling);
    } else {
      throw InputError("ot config: solve must be max, min, penalized, minimal-H or distance");
    }
    check_feasible(report.coupling, problem.source(), problem.target());
    result["coupling"] = io::to_json(report.coupling, problem.source(), problem.target());
    result["value"] = report.value;
    result["iterations"] = report.iterations;
    result["status"] = transport::to_string(report.status);
    result["gap"] = report.gap;
    if (!report.row_potentials.empty()) {
      result["row_potentials"] = report.row_potentials;
      result["col_potentials"] = report.col_potentials;
    }
    log << "value " << io::format_double(report.value) << " (" << transport::to_string(report.status)
        << ", " << report.iterations << " iterations)\n";
    if (report.status != transport::SolveStatus::optimal) code = kExitNumerical;
  }
  io::write_json_file(out / "ot_solution.json", result);
  write_manifest(out, "ot", cfg, options);
  return code;
}

int run(const std::string& command, const CommandOptions& options, std::ostream& log,
        std::ostream& err) {
  try {
    if (command == "fit") return cmd_fit(options, log);
    if (command == "assign") return cmd_assign(options, log);
    if (command == "simulate") return cmd_simulate(options, log);
    if (command == "ot") return cmd_ot(options, log);
    throw InputError("unknown command '" + command + "'");
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace capassign::cli
