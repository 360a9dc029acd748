#include "capassign/welfare.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "capassign/error.hpp"
#include "capassign/kernels.hpp"
#include "capassign/normal.hpp"

namespace capassign::welfare {

namespace {

void check_x(const ParamVector& theta, std::span<const double> x) {
  if (x.size() != theta.beta.size())
    throw InputError("covariate vector has " + std::to_string(x.size()) + " entries, beta has " +
                     std::to_string(theta.beta.size()));
}

}  // namespace

void ParamVector::validate() const {
  for (double b : beta)
    if (!std::isfinite(b)) throw InputError("beta must be finite");
  if (!std::isfinite(alpha)) throw InputError("alpha must be finite");
  if (!std::isfinite(sigma) || sigma <= 0.0) throw InputError("sigma must be positive and finite");
}

double ParamVector::index(std::span<const double> x, double t) const {
  double m = alpha * t;
  for (std::size_t k = 0; k < beta.size(); ++k) m += beta[k] * x[k];
  return m;
}

std::vector<double> ParamVector::flatten() const {
  std::vector<double> out(beta);
  out.push_back(alpha);
  out.push_back(sigma);
  return out;
}

ParamVector ParamVector::from_flat(std::span<const double> flat) {
  if (flat.size() < 2) throw InputError("parameter vector needs at least alpha and sigma");
  ParamVector p;
  p.beta.assign(flat.begin(), flat.end() - 2);
  p.alpha = flat[flat.size() - 2];
  p.sigma = flat[flat.size() - 1];
  return p;
}

void WelfareSpec::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InputError("lambda must lie in [0, 1]");
  if (!std::isfinite(eps_robust) || eps_robust <= 0.0)
    throw InputError("eps_robust must be positive");
  if (!std::isfinite(tau)) throw InputError("tau must be finite");
  if (floor && !std::isfinite(*floor)) throw InputError("floor must be finite");
  for (double f : level_floors)
    if (!std::isfinite(f)) throw InputError("level floors must be finite");
}

double WelfareSpec::floor_for(std::size_t level) const {
  if (!level_floors.empty()) {
    if (level >= level_floors.size())
      throw InputError("no floor for treatment level " + std::to_string(level));
    return level_floors[level];
  }
  return floor.value_or(tau);
}

double tobit_mean_tau(const ParamVector& theta, std::span<const double> x, double t, double tau) {
  check_x(theta, x);
  const double m = theta.index(x, t);
  return tau + theta.sigma * normal::loss((tau - m) / theta.sigma);
}

double tobit_mean_zero(const ParamVector& theta, std::span<const double> x, double t) {
  return tobit_mean_tau(theta, x, t, 0.0);
}

std::vector<double> tobit_mean_gradient(const ParamVector& theta, std::span<const double> x,
                                        double t, double tau) {
  check_x(theta, x);
  const double c = (tau - theta.index(x, t)) / theta.sigma;
  const double dm = normal::sf(c);
  std::vector<double> g(theta.size());
  for (std::size_t k = 0; k < x.size(); ++k) g[k] = dm * x[k];
  g[x.size()] = dm * t;
  g[x.size() + 1] = normal::pdf(c);
  return g;
}

double robust_welfare(double w_raw, const WelfareSpec& spec, double floor) {
  return spec.lambda * w_raw + (1.0 - spec.lambda) * std::max(w_raw - spec.eps_robust, floor);
}

double robust_welfare(double w_raw, const WelfareSpec& spec, std::size_t level) {
  return robust_welfare(w_raw, spec, spec.floor_for(level));
}

double robust_welfare_at(const ParamVector& theta, std::span<const double> x, double t,
                         const WelfareSpec& spec, std::size_t level) {
  return robust_welfare(tobit_mean_tau(theta, x, t, spec.tau), spec, level);
}

double welfare_contrast(const ParamVector& theta, std::span<const double> x,
                        const WelfareSpec& spec) {
  return robust_welfare_at(theta, x, 1.0, spec, 1) - robust_welfare_at(theta, x, 0.0, spec, 0);
}

double directional_derivative_wR(const ParamVector& theta, std::span<const double> x, double t,
                                 std::span<const double> h, const WelfareSpec& spec,
                                 std::size_t level) {
  if (h.size() != theta.size()) throw InputError("direction has the wrong dimension");
  const auto g = tobit_mean_gradient(theta, x, t, spec.tau);
  double dw = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) dw += g[k] * h[k];
  const double gap = tobit_mean_tau(theta, x, t, spec.tau) - spec.eps_robust - spec.floor_for(level);
  double inner;
  if (gap > kKinkTolerance)
    inner = dw;
  else if (gap < -kKinkTolerance)
    inner = 0.0;
  else
    inner = std::max(dw, 0.0);
  return spec.lambda * dw + (1.0 - spec.lambda) * inner;
}

double treatment_value(const transport::DiscreteMarginal& levels, std::size_t level) {
  const auto& coords = levels.point(level).coords;
  if (coords.empty()) throw InputError("treatment level '" + levels.point(level).label +
                                       "' has no numeric value");
  return coords[0];
}

std::vector<double> tobit_mean_matrix(const ParamVector& theta,
                                      const transport::DiscreteMarginal& bins,
                                      const transport::DiscreteMarginal& levels, double tau) {
  theta.validate();
  const std::size_t nb = bins.size(), nl = levels.size();
  std::vector<double> base(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    check_x(theta, bins.point(i).coords);
    base[i] = theta.index(bins.point(i).coords, 0.0);
  }
  std::vector<double> out(nb * nl), m(nb), w(nb);
  for (std::size_t j = 0; j < nl; ++j) {
    const double shift = theta.alpha * treatment_value(levels, j);
    for (std::size_t i = 0; i < nb; ++i) m[i] = base[i] + shift;
    kernels::tobit_mean(m, theta.sigma, tau, w);
    for (std::size_t i = 0; i < nb; ++i) out[i * nl + j] = w[i];
  }
  return out;
}

std::vector<double> robust_welfare_matrix(const ParamVector& theta,
                                          const transport::DiscreteMarginal& bins,
                                          const transport::DiscreteMarginal& levels,
                                          const WelfareSpec& spec) {
  const WelfareSpec specs[] = {spec};
  return averaged_welfare_matrices(std::span<const ParamVector>(&theta, 1), bins, levels, specs)[0];
}

std::vector<std::vector<double>> averaged_welfare_matrices(
    std::span<const ParamVector> draws, const transport::DiscreteMarginal& bins,
    const transport::DiscreteMarginal& levels, std::span<const WelfareSpec> specs) {
  if (draws.empty()) throw InputError("no parameter draws");
  if (specs.empty()) return {};
  for (const auto& s : specs) {
    s.validate();
    if (s.tau != specs[0].tau) throw InputError("welfare specs must share the censor point");
  }
  const std::size_t cells = bins.size() * levels.size();
  std::vector<std::vector<double>> floors(specs.size(), std::vector<double>(cells));
  for (std::size_t s = 0; s < specs.size(); ++s)
    for (std::size_t c = 0; c < cells; ++c)
      floors[s][c] = specs[s].floor_for(c % levels.size());

  std::vector<std::vector<double>> acc(specs.size(), std::vector<double>(cells, 0.0));
  for (const auto& theta : draws) {
    const auto w = tobit_mean_matrix(theta, bins, levels, specs[0].tau);
    for (std::size_t s = 0; s < specs.size(); ++s)
      kernels::accumulate_robust(w, specs[s].lambda, specs[s].eps_robust, floors[s], acc[s]);
  }
  const double scale = 1.0 / static_cast<double>(draws.size());
  for (auto& a : acc)
    for (double& v : a) v *= scale;
  return acc;
}

}  // namespace capassign::welfare
