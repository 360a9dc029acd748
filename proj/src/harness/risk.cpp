#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "capassign/error.hpp"
#include "capassign/harness.hpp"
#include "capassign/random.hpp"

namespace capassign::harness {

namespace {

using transport::Coupling;
using transport::DiscreteMarginal;
using transport::TransportProblem;

struct Slot {
  bool converged = false;
  std::vector<double> plug_in, ex_post_bayes;
  // [lambda][bin] treatment probabilities.
  std::vector<std::vector<double>> plug_in_prob, ex_post_bayes_prob;
  double capacity_error = 0.0;
  double min_regret = 0.0;
  std::size_t couplings = 0;
};

std::vector<double> treat_probability(const Coupling& c, const DiscreteMarginal& grid) {
  std::vector<double> p(c.rows());
  for (std::size_t i = 0; i < c.rows(); ++i)
    p[i] = grid.mass(i) > 0.0 ? c(i, 1) / grid.mass(i) : 0.0;
  return p;
}

struct MeanSe {
  double mean = 0.0, se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  }
  return r;
}

}  // namespace

std::vector<double> SimConfig::default_h_grid() {
  std::vector<double> g;
  for (int k = -5; k <= 5; ++k) g.push_back(k / 2.5);
  return g;
}

void SimConfig::validate() const {
  theta0.validate();
  if (theta0.beta.size() != 2) throw InputError("theta0 must have two covariate coefficients");
  if (n < 1 || J < 1 || L < 1) throw InputError("n, J and L must be at least 1");
  if (!(capacity > 0.0 && capacity < 1.0)) throw InputError("capacity must lie in (0, 1)");
  if (h_grid.empty()) throw InputError("h grid is empty");
  for (double h : h_grid)
    if (!std::isfinite(h)) throw InputError("h grid entries must be finite");
  if (lambdas.empty()) throw InputError("need at least one lambda");
  for (double l : lambdas) spec(l).validate();
  if (bins < 2) throw InputError("need at least two covariate bins");
  age.validate();
  if (!(p_sex > 0.0 && p_sex < 1.0)) throw InputError("p_sex must lie in (0, 1)");
  if (!(p_treat > 0.0 && p_treat < 1.0)) throw InputError("p_treat must lie in (0, 1)");
  for (double h : h_grid) perturb(theta0, h, n);
}

welfare::WelfareSpec SimConfig::spec(double lambda) const {
  welfare::WelfareSpec s;
  s.lambda = lambda;
  s.eps_robust = eps_robust;
  s.tau = tau;
  s.floor = floor;
  return s;
}

SimConfig profile(const std::string& name) {
  SimConfig c;
  c.lambdas = {0.0, 1.0};
  if (name == "smoke") {
    c.J = 10;
    c.L = 50;
  } else if (name == "desk") {
    c.J = 200;
    c.L = 200;
  } else if (name == "paper") {
    c.J = 2000;
    c.L = 2000;
  } else {
    throw InputError("unknown profile '" + name + "' (expected smoke, desk or paper)");
  }
  return c;
}

SimResult run_simulation(const SimConfig& config) {
  config.validate();
  const DiscreteMarginal grid = discretize_covariates(config.age, config.p_sex, config.bins);
  const DiscreteMarginal f_t = DiscreteMarginal::bernoulli(config.capacity);
  const std::size_t H = config.h_grid.size(), J = config.J, nl = config.lambdas.size();
  std::vector<welfare::WelfareSpec> specs;
  for (double l : config.lambdas) specs.push_back(config.spec(l));

  rules::RuleOptions options;
  options.tie_mode = config.tie_mode;
  if (config.tie_mode == rules::TieMode::minimal_H)
    options.metric = transport::GroundMetric::standardized(grid, f_t);

  // Truth at each grid point.
  std::vector<ParamVector> theta_nh;
  std::vector<std::vector<std::vector<double>>> truth(H);
  std::vector<std::vector<double>> optimum(H, std::vector<double>(nl));
  std::vector<std::vector<std::vector<double>>> oracle_prob(H);
  for (std::size_t i = 0; i < H; ++i) {
    theta_nh.push_back(perturb(config.theta0, config.h_grid[i], config.n));
    truth[i] = welfare::averaged_welfare_matrices(std::span<const ParamVector>(&theta_nh[i], 1),
                                                  grid, f_t, specs);
    for (std::size_t l = 0; l < nl; ++l) {
      TransportProblem problem(truth[i][l], grid, f_t);
      const auto report = transport::solve_max_transport(problem);
      if (report.status != transport::SolveStatus::optimal)
        throw NumericalError("oracle transport solve hit the iteration limit");
      optimum[i][l] = report.value;
      oracle_prob[i].push_back(treat_probability(solve_assignment(problem, options), grid));
    }
  }

  std::vector<Slot> slots(H * J);
  auto run_one = [&](std::size_t task) {
    const std::size_t i = task / J, j = task % J;
    Slot& s = slots[task];
    std::mt19937_64 rng(random::derive_seed(config.seed, {i, j}));
    const auto data = sample_training_data(theta_nh[i], config.n, rng, config);
    tobit::TobitFit fit;
    std::vector<ParamVector> draws;
    try {
      fit = tobit::tobit_mle(data);
      if (!fit.converged) return;
      draws = tobit::sample_quasi_posterior(fit, config.L, rng);
    } catch (const NumericalError&) {
      return;
    }
    const auto plug = welfare::averaged_welfare_matrices(
        std::span<const ParamVector>(&fit.theta_hat, 1), grid, f_t, specs);
    const auto eb = welfare::averaged_welfare_matrices(draws, grid, f_t, specs);
    for (std::size_t l = 0; l < nl; ++l) {
      const Coupling cp = rules::solve_assignment(TransportProblem(plug[l], grid, f_t), options);
      const Coupling ce = rules::solve_assignment(TransportProblem(eb[l], grid, f_t), options);
      const double rp = rules::regret_from_matrix(truth[i][l], optimum[i][l], cp);
      const double re = rules::regret_from_matrix(truth[i][l], optimum[i][l], ce);
      s.plug_in.push_back(rp);
      s.ex_post_bayes.push_back(re);
      s.plug_in_prob.push_back(treat_probability(cp, grid));
      s.ex_post_bayes_prob.push_back(treat_probability(ce, grid));
      s.capacity_error = std::max({s.capacity_error, cp.marginal_error(grid, f_t),
                                   ce.marginal_error(grid, f_t)});
      s.min_regret = std::min({s.min_regret, rp, re});
      s.couplings += 2;
    }
    s.converged = true;
  };

  std::size_t workers = config.workers ? config.workers : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, H * J);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t task; (task = next.fetch_add(1)) < H * J;) {
      try {
        run_one(task);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  // Ordered reduction.
  SimResult result;
  result.config = config;
  result.grid = grid;
  for (std::size_t task = 0; task < H * J; ++task) {
    const Slot& s = slots[task];
    ReplicationRecord r;
    r.h_index = task / J;
    r.j = task % J;
    r.converged = s.converged;
    r.plug_in = s.plug_in;
    r.ex_post_bayes = s.ex_post_bayes;
    result.records.push_back(std::move(r));
    result.max_capacity_error = std::max(result.max_capacity_error, s.capacity_error);
    result.min_regret = std::min(result.min_regret, s.min_regret);
    result.couplings_checked += s.couplings;
  }
  for (std::size_t l = 0; l < nl; ++l) {
    RiskCurve curve;
    curve.lambda = config.lambdas[l];
    curve.h = config.h_grid;
    Heatmap hp{config.lambdas[l], "plug_in", std::vector<double>(grid.size(), 0.0)};
    Heatmap he{config.lambdas[l], "ex_post_bayes", std::vector<double>(grid.size(), 0.0)};
    Heatmap ho{config.lambdas[l], "oracle", std::vector<double>(grid.size(), 0.0)};
    std::size_t used_total = 0;
    for (std::size_t i = 0; i < H; ++i) {
      std::vector<double> p, e, d;
      std::size_t excluded = 0;
      for (std::size_t j = 0; j < J; ++j) {
        const Slot& s = slots[i * J + j];
        if (!s.converged) {
          ++excluded;
          continue;
        }
        p.push_back(s.plug_in[l]);
        e.push_back(s.ex_post_bayes[l]);
        d.push_back(s.plug_in[l] - s.ex_post_bayes[l]);
        for (std::size_t b = 0; b < grid.size(); ++b) {
          hp.treatment_probability[b] += s.plug_in_prob[l][b];
          he.treatment_probability[b] += s.ex_post_bayes_prob[l][b];
        }
        ++used_total;
      }
      for (std::size_t b = 0; b < grid.size(); ++b)
        ho.treatment_probability[b] += oracle_prob[i][l][b];
      const auto mp = mean_se(p), me = mean_se(e), md = mean_se(d);
      curve.plug_in_mean.push_back(mp.mean);
      curve.plug_in_se.push_back(mp.se);
      curve.ex_post_bayes_mean.push_back(me.mean);
      curve.ex_post_bayes_se.push_back(me.se);
      curve.difference_se.push_back(md.se);
      curve.excluded.push_back(excluded);
    }
    for (std::size_t b = 0; b < grid.size(); ++b) {
      if (used_total) {
        hp.treatment_probability[b] /= static_cast<double>(used_total);
        he.treatment_probability[b] /= static_cast<double>(used_total);
      }
      ho.treatment_probability[b] /= static_cast<double>(H);
    }
    result.curves.push_back(std::move(curve));
    result.heatmaps.push_back(std::move(ho));
    result.heatmaps.push_back(std::move(hp));
    result.heatmaps.push_back(std::move(he));
  }
  return result;
}

SimResult estimate_risk(const SimConfig& config, double h) {
  SimConfig one = config;
  one.h_grid = {h};
  return run_simulation(one);
}

RiskAverage average_risk(const RiskCurve& curve) {
  RiskAverage a;
  const double H = static_cast<double>(curve.h.size());
  if (curve.h.empty()) return a;
  double vp = 0.0, ve = 0.0, vd = 0.0;
  for (std::size_t i = 0; i < curve.h.size(); ++i) {
    a.plug_in += curve.plug_in_mean[i];
    a.ex_post_bayes += curve.ex_post_bayes_mean[i];
    vp += curve.plug_in_se[i] * curve.plug_in_se[i];
    ve += curve.ex_post_bayes_se[i] * curve.ex_post_bayes_se[i];
    vd += curve.difference_se[i] * curve.difference_se[i];
  }
  a.plug_in /= H;
  a.ex_post_bayes /= H;
  a.plug_in_se = std::sqrt(vp) / H;
  a.ex_post_bayes_se = std::sqrt(ve) / H;
  a.pooled_se = std::sqrt(a.plug_in_se * a.plug_in_se + a.ex_post_bayes_se * a.ex_post_bayes_se);
  a.difference_se = std::sqrt(vd) / H;
  return a;
}

RiskAverage average_risk_from_records(const SimResult& result, std::size_t lambda_index) {
  const std::size_t H = result.config.h_grid.size();
  std::vector<double> sp(H, 0.0), se(H, 0.0);
  std::vector<std::size_t> count(H, 0);
  for (const auto& r : result.records) {
    if (!r.converged) continue;
    sp[r.h_index] += r.plug_in.at(lambda_index);
    se[r.h_index] += r.ex_post_bayes.at(lambda_index);
    ++count[r.h_index];
  }
  RiskAverage a;
  for (std::size_t i = 0; i < H; ++i) {
    if (count[i] == 0) continue;
    a.plug_in += sp[i] / static_cast<double>(count[i]);
    a.ex_post_bayes += se[i] / static_cast<double>(count[i]);
  }
  a.plug_in /= static_cast<double>(H);
  a.ex_post_bayes /= static_cast<double>(H);
  return a;
}

}  // namespace capassign::harness
