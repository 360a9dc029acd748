#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "capassign/error.hpp"
#include "capassign/harness.hpp"
#include "capassign/normal.hpp"
#include "capassign/random.hpp"

namespace capassign::harness {

void TruncatedNormal::validate() const {
  if (!std::isfinite(mean) || !(sd > 0.0) || !std::isfinite(sd))
    throw InputError("truncated normal needs a finite mean and a positive sd");
  if (!(lo < hi)) throw InputError("truncated normal needs lo < hi");
  if (!(normal::cdf((hi - mean) / sd) - normal::cdf((lo - mean) / sd) > 0.0))
    throw InputError("truncation interval carries no probability");
}

double TruncatedNormal::cdf(double x) const {
  if (x <= lo) return 0.0;
  if (x >= hi) return 1.0;
  const double a = normal::cdf((lo - mean) / sd);
  const double b = normal::cdf((hi - mean) / sd);
  return (normal::cdf((x - mean) / sd) - a) / (b - a);
}

double TruncatedNormal::quantile(double u) const {
  const double a = normal::cdf((lo - mean) / sd);
  const double b = normal::cdf((hi - mean) / sd);
  const double p = a + u * (b - a);
  if (p <= 0.0) return lo;
  if (p >= 1.0) return hi;
  return std::clamp(mean + sd * normal::quantile(p), lo, hi);
}

double TruncatedNormal::expectation() const {
  const double a = (lo - mean) / sd, b = (hi - mean) / sd;
  return mean + sd * (normal::pdf(a) - normal::pdf(b)) / (normal::cdf(b) - normal::cdf(a));
}

ParamVector perturb(const ParamVector& theta0, double h, std::size_t n) {
  if (n == 0) throw InputError("sample size must be positive");
  const double shift = h / std::sqrt(static_cast<double>(n));
  auto flat = theta0.flatten();
  for (double& v : flat) v += shift;
  auto out = ParamVector::from_flat(flat);
  if (!(out.sigma > 0.0))
    throw InputError("perturbation makes sigma nonpositive (h = " + std::to_string(h) + ")");
  return out;
}

transport::DiscreteMarginal discretize_covariates(const TruncatedNormal& age, double p_sex,
                                                  std::size_t bins) {
  age.validate();
  if (bins < 2) throw InputError("need at least two covariate bins");
  if (!(p_sex > 0.0 && p_sex < 1.0)) throw InputError("sex probability must lie in (0, 1)");
  const std::size_t cells[2] = {(bins + 1) / 2, bins / 2};
  const double sex_mass[2] = {1.0 - p_sex, p_sex};
  std::vector<transport::SupportPoint> points;
  std::vector<double> masses;
  for (int sex = 0; sex < 2; ++sex) {
    const std::size_t m = cells[sex];
    for (std::size_t k = 0; k < m; ++k) {
      const double median = age.quantile((static_cast<double>(k) + 0.5) / static_cast<double>(m));
      char label[48];
      std::snprintf(label, sizeof label, "sex%d_age%02zu", sex, k + 1);
      points.push_back({label, {median, static_cast<double>(sex)}});
      masses.push_back(sex_mass[sex] / static_cast<double>(m));
    }
  }
  return transport::DiscreteMarginal(std::move(points), std::move(masses));
}

tobit::Dataset sample_training_data(const ParamVector& theta, std::size_t n, std::mt19937_64& rng,
                                    const SimConfig& config) {
  theta.validate();
  if (theta.beta.size() != 2) throw InputError("the simulation design has two covariates");
  if (n == 0) throw InputError("sample size must be positive");
  std::vector<tobit::Observation> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    tobit::Observation o;
    const double age = config.age.quantile(random::uniform01(rng));
    const double sex = random::bernoulli(rng, config.p_sex) ? 1.0 : 0.0;
    o.t = random::bernoulli(rng, config.p_treat) ? 1.0 : 0.0;
    o.x = {age, sex};
    const double latent = theta.index(o.x, o.t) + theta.sigma * random::standard_normal(rng);
    o.y = std::max(config.tau, latent);
    rows.push_back(std::move(o));
  }
  return tobit::Dataset(std::move(rows), config.tau);
}

}  // namespace capassign::harness
