#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "capassign/error.hpp"
#include "capassign/io.hpp"

namespace capassign::io {

namespace {

template <class F>
auto guarded(const std::string& context, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(context + ": " + e.what());
  }
}

const json& require(const json& j, const char* key, const std::string& context) {
  if (!j.is_object()) throw InputError(context + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw InputError(context + ": missing key '" + key + "'");
  return *it;
}

double number(const json& j, const std::string& context) {
  if (!j.is_number()) throw InputError(context + ": expected a number");
  return j.get<double>();
}

std::vector<double> numbers(const json& j, const std::string& context) {
  if (!j.is_array()) throw InputError(context + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(number(v, context));
  return out;
}

std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

void check_keys(const json& object, std::initializer_list<const char*> allowed,
                const std::string& context) {
  if (!object.is_object()) throw InputError(context + ": expected an object");
  for (auto it = object.begin(); it != object.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw InputError(context + ": unknown key '" + it.key() + "'");
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": malformed JSON: " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& value) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << value.dump(2) << '\n';
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

json to_json(const transport::DiscreteMarginal& m) {
  json masses = json::object(), coords = json::object();
  for (std::size_t i = 0; i < m.size(); ++i) {
    masses[m.point(i).label] = m.mass(i);
    coords[m.point(i).label] = m.point(i).coords;
  }
  return {{"masses", masses}, {"coords", coords}};
}

transport::DiscreteMarginal marginal_from_json(const json& j) {
  return guarded("marginal", [&] {
    check_keys(j, {"masses", "coords"}, "marginal");
    const json& masses = require(j, "masses", "marginal");
    if (!masses.is_object()) throw InputError("marginal: 'masses' must map labels to masses");
    const json* coords = j.contains("coords") ? &j.at("coords") : nullptr;
    if (coords && !coords->is_object()) throw InputError("marginal: 'coords' must be an object");
    std::vector<transport::SupportPoint> points;
    std::vector<double> mass;
    for (auto it = masses.begin(); it != masses.end(); ++it) {
      transport::SupportPoint p;
      p.label = it.key();
      if (coords && coords->contains(it.key())) {
        p.coords = numbers(coords->at(it.key()), "marginal coords '" + it.key() + "'");
      } else if (auto v = parse_number(it.key())) {
        p.coords = {*v};
      }
      points.push_back(std::move(p));
      mass.push_back(number(it.value(), "marginal mass '" + it.key() + "'"));
    }
    if (coords)
      for (auto it = coords->begin(); it != coords->end(); ++it)
        if (!masses.contains(it.key()))
          throw InputError("marginal: coords given for unknown label '" + it.key() + "'");
    return transport::DiscreteMarginal(std::move(points), std::move(mass));
  });
}

json to_json(const transport::Coupling& c, const transport::DiscreteMarginal& rows,
             const transport::DiscreteMarginal& cols) {
  if (rows.size() != c.rows() || cols.size() != c.cols())
    throw InputError("coupling shape does not match its labels");
  json r = json::array(), k = json::array();
  for (const auto& p : rows.points()) r.push_back(p.label);
  for (const auto& p : cols.points()) k.push_back(p.label);
  return {{"rows", r}, {"cols", k}, {"mass", std::vector<double>(c.mass().begin(), c.mass().end())}};
}

LabeledCoupling coupling_from_json(const json& j) {
  return guarded("coupling", [&] {
    check_keys(j, {"rows", "cols", "mass"}, "coupling");
    LabeledCoupling out;
    out.row_labels = require(j, "rows", "coupling").get<std::vector<std::string>>();
    out.col_labels = require(j, "cols", "coupling").get<std::vector<std::string>>();
    auto mass = numbers(require(j, "mass", "coupling"), "coupling mass");
    out.coupling = transport::Coupling(out.row_labels.size(), out.col_labels.size(), std::move(mass));
    return out;
  });
}

json to_json(const transport::TransportProblem& p) {
  json w = json::array();
  for (std::size_t i = 0; i < p.rows(); ++i) {
    json r = json::array();
    for (std::size_t j = 0; j < p.cols(); ++j) r.push_back(p.welfare(i, j));
    w.push_back(std::move(r));
  }
  return {{"source", to_json(p.source())}, {"target", to_json(p.target())}, {"welfare", w}};
}

transport::TransportProblem problem_from_json(const json& j) {
  return guarded("problem", [&] {
    check_keys(j, {"source", "target", "welfare"}, "problem");
    auto source = marginal_from_json(require(j, "source", "problem"));
    auto target = marginal_from_json(require(j, "target", "problem"));
    const json& w = require(j, "welfare", "problem");
    if (!w.is_array() || w.size() != source.size())
      throw InputError("problem: 'welfare' needs one row per source label");
    std::vector<double> flat;
    for (const auto& row : w) {
      auto r = numbers(row, "problem welfare");
      if (r.size() != target.size())
        throw InputError("problem: every welfare row needs one entry per target label");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    return transport::TransportProblem(std::move(flat), std::move(source), std::move(target));
  });
}

transport::GroundMetric metric_from_json(const json& j, const transport::DiscreteMarginal& rows,
                                         const transport::DiscreteMarginal& cols) {
  return guarded("metric", [&] {
    if (j.is_string()) {
      if (j.get<std::string>() != "standardized")
        throw InputError("metric: the only named metric is 'standardized'");
      return transport::GroundMetric::standardized(rows, cols);
    }
    check_keys(j, {"distances", "description"}, "metric");
    const json& d = require(j, "distances", "metric");
    if (!d.is_array()) throw InputError("metric: 'distances' must be a square array");
    std::vector<double> flat;
    for (const auto& row : d) {
      auto r = numbers(row, "metric distances");
      if (r.size() != d.size()) throw InputError("metric: 'distances' must be square");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    return transport::GroundMetric(d.size(), std::move(flat),
                                   j.value("description", std::string("custom")));
  });
}

json to_json(const transport::GroundMetric& metric) {
  json d = json::array();
  for (std::size_t a = 0; a < metric.size(); ++a) {
    json r = json::array();
    for (std::size_t b = 0; b < metric.size(); ++b) r.push_back(metric(a, b));
    d.push_back(std::move(r));
  }
  return {{"distances", d}, {"description", metric.description()}};
}

json to_json(const welfare::ParamVector& p) {
  return {{"beta", p.beta}, {"alpha", p.alpha}, {"sigma", p.sigma}};
}

welfare::ParamVector param_from_json(const json& j) {
  return guarded("theta", [&] {
    check_keys(j, {"beta", "alpha", "sigma"}, "theta");
    welfare::ParamVector p;
    p.beta = numbers(require(j, "beta", "theta"), "theta beta");
    p.alpha = number(require(j, "alpha", "theta"), "theta alpha");
    p.sigma = number(require(j, "sigma", "theta"), "theta sigma");
    p.validate();
    return p;
  });
}

json to_json(const welfare::WelfareSpec& s) {
  json j = {{"lambda", s.lambda}, {"eps_robust", s.eps_robust}, {"tau", s.tau}};
  j["floor"] = s.floor ? json(*s.floor) : json(nullptr);
  j["level_floors"] = s.level_floors;
  return j;
}

welfare::WelfareSpec spec_from_json(const json& j, welfare::WelfareSpec base) {
  return guarded("welfare", [&] {
    check_keys(j, {"lambda", "eps_robust", "tau", "floor", "level_floors"}, "welfare");
    if (j.contains("lambda")) base.lambda = number(j["lambda"], "welfare lambda");
    if (j.contains("eps_robust")) base.eps_robust = number(j["eps_robust"], "welfare eps_robust");
    if (j.contains("tau")) base.tau = number(j["tau"], "welfare tau");
    if (j.contains("floor")) {
      if (j["floor"].is_null())
        base.floor.reset();
      else
        base.floor = number(j["floor"], "welfare floor");
    }
    if (j.contains("level_floors")) base.level_floors = numbers(j["level_floors"], "welfare level_floors");
    base.validate();
    return base;
  });
}

json to_json(const FitRecord& r) {
  const auto& f = r.fit;
  json names = json::array();
  for (const auto& c : r.covariates) names.push_back(c);
  names.push_back("treatment");
  names.push_back("sigma");
  json se = json::array();
  Eigen::LLT<Eigen::MatrixXd> llt(f.fisher * static_cast<double>(f.n));
  if (llt.info() == Eigen::Success && f.n > 0) {
    const Eigen::MatrixXd cov =
        llt.solve(Eigen::MatrixXd::Identity(f.fisher.rows(), f.fisher.cols()));
    for (Eigen::Index k = 0; k < cov.rows(); ++k) se.push_back(std::sqrt(cov(k, k)));
  } else {
    for (Eigen::Index k = 0; k < f.fisher.rows(); ++k) se.push_back(nullptr);
  }
  return {{"theta", to_json(f.theta_hat)},
          {"covariates", r.covariates},
          {"parameters", names},
          {"se", se},
          {"information", matrix_json(f.fisher)},
          {"loglik", f.loglik},
          {"n", f.n},
          {"tau", r.tau},
          {"converged", f.converged},
          {"iterations", f.iterations},
          {"gradient_norm", f.gradient_norm}};
}

FitRecord fit_from_json(const json& j) {
  return guarded("fit", [&] {
    check_keys(j, {"theta", "covariates", "parameters", "se", "information", "loglik", "n", "tau",
                   "converged", "iterations", "gradient_norm"},
               "fit");
    FitRecord r;
    r.fit.theta_hat = param_from_json(require(j, "theta", "fit"));
    const std::size_t k = r.fit.theta_hat.size();
    if (j.contains("covariates")) r.covariates = j["covariates"].get<std::vector<std::string>>();
    if (!r.covariates.empty() && r.covariates.size() + 2 != k)
      throw InputError("fit: covariate names do not match beta");
    const json& info = require(j, "information", "fit");
    if (!info.is_array() || info.size() != k)
      throw InputError("fit: 'information' must be " + std::to_string(k) + " x " + std::to_string(k));
    r.fit.fisher.resize(k, k);
    for (std::size_t a = 0; a < k; ++a) {
      auto row = numbers(info[a], "fit information");
      if (row.size() != k) throw InputError("fit: 'information' rows have the wrong length");
      for (std::size_t b = 0; b < k; ++b) r.fit.fisher(a, b) = row[b];
    }
    r.fit.n = require(j, "n", "fit").get<std::size_t>();
    r.fit.loglik = j.value("loglik", 0.0);
    r.fit.converged = j.value("converged", true);
    r.fit.iterations = j.value("iterations", std::size_t{0});
    r.fit.gradient_norm = j.value("gradient_norm", 0.0);
    r.tau = j.value("tau", 0.0);
    return r;
  });
}

json to_json(const harness::SimConfig& c) {
  return {{"theta0", to_json(c.theta0)},
          {"n", c.n},
          {"J", c.J},
          {"L", c.L},
          {"capacity", c.capacity},
          {"h_grid", c.h_grid},
          {"lambdas", c.lambdas},
          {"eps_robust", c.eps_robust},
          {"tau", c.tau},
          {"floor", c.floor},
          {"bins", c.bins},
          {"age", {{"mean", c.age.mean}, {"sd", c.age.sd}, {"lo", c.age.lo}, {"hi", c.age.hi}}},
          {"p_sex", c.p_sex},
          {"p_treat", c.p_treat},
          {"tie_mode", rules::to_string(c.tie_mode)},
          {"seed", c.seed},
          {"workers", c.workers}};
}

harness::SimConfig sim_config_from_json(const json& j, harness::SimConfig c) {
  return guarded("simulate", [&] {
    check_keys(j, {"theta0", "n", "J", "L", "capacity", "h_grid", "lambdas", "eps_robust", "tau",
                   "floor", "bins", "age", "p_sex", "p_treat", "tie_mode", "seed", "workers"},
               "simulate");
    auto count = [&](const char* key, std::size_t& dst) {
      if (!j.contains(key)) return;
      if (!j[key].is_number_unsigned())
        throw InputError(std::string("simulate: '") + key + "' must be a nonnegative integer");
      dst = j[key].get<std::size_t>();
    };
    auto real = [&](const char* key, double& dst) {
      if (j.contains(key)) dst = number(j[key], std::string("simulate ") + key);
    };
    if (j.contains("theta0")) c.theta0 = param_from_json(j["theta0"]);
    count("n", c.n);
    count("J", c.J);
    count("L", c.L);
    real("capacity", c.capacity);
    if (j.contains("h_grid")) c.h_grid = numbers(j["h_grid"], "simulate h_grid");
    if (j.contains("lambdas")) c.lambdas = numbers(j["lambdas"], "simulate lambdas");
    real("eps_robust", c.eps_robust);
    real("tau", c.tau);
    real("floor", c.floor);
    count("bins", c.bins);
    if (j.contains("age")) {
      const json& a = j["age"];
      check_keys(a, {"mean", "sd", "lo", "hi"}, "simulate age");
      if (a.contains("mean")) c.age.mean = number(a["mean"], "age mean");
      if (a.contains("sd")) c.age.sd = number(a["sd"], "age sd");
      if (a.contains("lo")) c.age.lo = number(a["lo"], "age lo");
      if (a.contains("hi")) c.age.hi = number(a["hi"], "age hi");
    }
    real("p_sex", c.p_sex);
    real("p_treat", c.p_treat);
    if (j.contains("tie_mode")) c.tie_mode = rules::parse_tie_mode(j["tie_mode"].get<std::string>());
    if (j.contains("seed")) {
      if (!j["seed"].is_number_unsigned()) throw InputError("simulate: 'seed' must be a u64");
      c.seed = j["seed"].get<std::uint64_t>();
    }
    count("workers", c.workers);
    c.validate();
    return c;
  });
}

DatasetSchema schema_from_json(const json& j) {
  return guarded("data", [&] {
    check_keys(j, {"path", "y", "t", "covariates", "intercept", "tau", "tau_flag_column"}, "data");
    DatasetSchema s;
    s.y = require(j, "y", "data").get<std::string>();
    s.t = require(j, "t", "data").get<std::string>();
    for (const auto& c : require(j, "covariates", "data")) {
      CovariateColumn col;
      if (c.is_string()) {
        col.column = c.get<std::string>();
      } else {
        check_keys(c, {"column", "levels"}, "data covariate");
        col.column = require(c, "column", "data covariate").get<std::string>();
        const json& lv = require(c, "levels", "data covariate");
        if (!lv.is_object() || lv.empty())
          throw InputError("data covariate '" + col.column + "': 'levels' must map values to codes");
        for (auto it = lv.begin(); it != lv.end(); ++it)
          col.levels.emplace_back(it.key(), number(it.value(), "level code"));
      }
      s.covariates.push_back(std::move(col));
    }
    s.intercept = j.value("intercept", false);
    const json& tau = require(j, "tau", "data");
    if (tau.is_number()) {
      s.tau = tau.get<double>();
    } else if (tau.is_string()) {
      const std::string t = tau.get<std::string>();
      const std::string prefix = "quantile:";
      if (t.rfind(prefix, 0) != 0) throw InputError("data: 'tau' must be a number or 'quantile:<q>'");
      auto q = parse_number(t.substr(prefix.size()));
      if (!q || !(*q >= 0.0 && *q <= 1.0)) throw InputError("data: quantile must lie in [0, 1]");
      s.tau_quantile = *q;
    } else {
      throw InputError("data: 'tau' must be a number or 'quantile:<q>'");
    }
    if (j.contains("tau_flag_column")) s.flag_column = j["tau_flag_column"].get<std::string>();
    return s;
  });
}

json to_json(const DatasetSchema& s) {
  json cov = json::array();
  for (const auto& c : s.covariates) {
    if (c.levels.empty()) {
      cov.push_back(c.column);
    } else {
      json lv = json::object();
      for (const auto& [k, v] : c.levels) lv[k] = v;
      cov.push_back({{"column", c.column}, {"levels", lv}});
    }
  }
  json j = {{"y", s.y}, {"t", s.t}, {"covariates", cov}, {"intercept", s.intercept}};
  if (s.tau)
    j["tau"] = *s.tau;
  else if (s.tau_quantile)
    j["tau"] = "quantile:" + format_double(*s.tau_quantile);
  if (s.flag_column) j["tau_flag_column"] = *s.flag_column;
  return j;
}

}  // namespace capassign::io
