#pragma once

// Local-asymptotic risk experiment: sample Tobit training data at drifting
// parameters theta0 + h / sqrt(n), fit, build the plug-in and ex-post Bayes
// rules, and score their regret at the drifting parameter.

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "capassign/rules.hpp"
#include "capassign/tobit.hpp"

namespace capassign::harness {

using welfare::ParamVector;

/// Normal(mean, sd^2) truncated to [lo, hi].
struct TruncatedNormal {
  double mean = 4.0;
  double sd = 2.0;
  double lo = 1.0;
  double hi = 10.0;

  void validate() const;
  double cdf(double x) const;
  double quantile(double u) const;
  /// Mean of the truncated law.
  double expectation() const;

  friend bool operator==(const TruncatedNormal&, const TruncatedNormal&) = default;
};

struct SimConfig {
  ParamVector theta0{{-2.0, -3.0}, 4.0, 10.0};
  std::size_t n = 200;
  std::size_t J = 200;
  std::size_t L = 200;
  double capacity = 0.75;
  std::vector<double> h_grid = default_h_grid();
  std::vector<double> lambdas{0.0};
  double eps_robust = 0.8;
  double tau = 0.0;
  double floor = 0.0;
  std::size_t bins = 99;
  TruncatedNormal age;
  double p_sex = 0.5;
  double p_treat = 0.5;
  rules::TieMode tie_mode = rules::TieMode::solver_vertex;
  std::uint64_t seed = 20240601;
  /// 0 picks std::thread::hardware_concurrency().
  std::size_t workers = 0;

  static std::vector<double> default_h_grid();
  /// Throws InputError on an invalid field.
  void validate() const;
  welfare::WelfareSpec spec(double lambda) const;

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

/// Named presets: "smoke", "desk", "paper".
SimConfig profile(const std::string& name);

/// n draws of (age, sex) covariates, random treatment and censored outcome.
tobit::Dataset sample_training_data(const ParamVector& theta, std::size_t n, std::mt19937_64& rng,
                                    const SimConfig& config = {});

/// theta0 with h / sqrt(n) added to every component. Throws InputError if
/// sigma would not stay positive.
ParamVector perturb(const ParamVector& theta0, double h, std::size_t n);

/// Equi-probability age cells per sex (ceil(bins/2) for sex 0, the rest for
/// sex 1), represented by cell medians.
transport::DiscreteMarginal discretize_covariates(const TruncatedNormal& age, double p_sex,
                                                  std::size_t bins);

/// Regrets of one replication, one entry per lambda.
struct ReplicationRecord {
  std::size_t h_index = 0;
  std::size_t j = 0;
  bool converged = false;
  std::vector<double> plug_in;
  std::vector<double> ex_post_bayes;
};

struct RiskCurve {
  double lambda = 0.0;
  std::vector<double> h;
  std::vector<double> plug_in_mean;
  std::vector<double> plug_in_se;
  std::vector<double> ex_post_bayes_mean;
  std::vector<double> ex_post_bayes_se;
  /// Standard error of the per-replication difference plug_in - ex_post_bayes.
  std::vector<double> difference_se;
  std::vector<std::size_t> excluded;
};

struct RiskAverage {
  double plug_in = 0.0;
  double ex_post_bayes = 0.0;
  double plug_in_se = 0.0;
  double ex_post_bayes_se = 0.0;
  /// sqrt(plug_in_se^2 + ex_post_bayes_se^2).
  double pooled_se = 0.0;
  /// Standard error of the averaged paired difference.
  double difference_se = 0.0;
};

/// Mean treatment probability per bin, averaged over every replication and h.
struct Heatmap {
  double lambda = 0.0;
  std::string rule;
  std::vector<double> treatment_probability;
};

struct SimResult {
  SimConfig config;
  transport::DiscreteMarginal grid;
  std::vector<RiskCurve> curves;
  std::vector<ReplicationRecord> records;
  std::vector<Heatmap> heatmaps;
  /// Worst column-marginal error over all couplings built.
  double max_capacity_error = 0.0;
  /// Most negative regret seen (oracle dominance requires >= -1e-9).
  double min_regret = 0.0;
  std::size_t couplings_checked = 0;
};

/// Runs the full grid. Deterministic in the config, including worker count.
SimResult run_simulation(const SimConfig& config);

/// Single grid point, all lambdas.
SimResult estimate_risk(const SimConfig& config, double h);

RiskAverage average_risk(const RiskCurve& curve);

/// Per-rule average risk recomputed from the raw replication records.
RiskAverage average_risk_from_records(const SimResult& result, std::size_t lambda_index);

// Application stand-in: covariates (const, age, gender with 1 = male),
// ages 10..17, and the reported math-score point estimates.
struct ApplicationSetup {
  transport::DiscreteMarginal grid;
  tobit::TobitFit fit;
  double tau = 0.0;
};

/// Grid ages 10..17 with masses from a discretized Normal(mean, sd^2) and the
/// given share of males; fit with diagonal information matching the reported
/// standard errors.
ApplicationSetup application_standin(double age_mean = 12.7, double age_sd = 1.3,
                                     double male_share = 1753.0 / 3541.0,
                                     std::size_t n = 3541);

}  // namespace capassign::harness
