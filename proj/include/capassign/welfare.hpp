#pragma once

// Planner utilities built on the Tobit conditional mean.
//
// The latent outcome is x'beta + alpha * t + u with u ~ N(0, sigma^2), observed
// censored from below at tau. The smooth utility is the censored mean w; the
// robust utility mixes it with the worst-case mean over a Wasserstein ball,
//   w_R = lambda * w + (1 - lambda) * max(w - eps, floor),
// which is only directionally differentiable in theta where the max binds.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "capassign/transport.hpp"

namespace capassign::welfare {

/// Tobit parameters. Flattened order is (beta..., alpha, sigma).
struct ParamVector {
  std::vector<double> beta;
  double alpha = 0.0;
  double sigma = 1.0;

  std::size_t size() const { return beta.size() + 2; }
  /// Throws InputError unless every entry is finite and sigma > 0.
  void validate() const;
  /// Linear index x'beta + alpha * t.
  double index(std::span<const double> x, double t) const;
  std::vector<double> flatten() const;
  static ParamVector from_flat(std::span<const double> flat);

  friend bool operator==(const ParamVector&, const ParamVector&) = default;
};

struct WelfareSpec {
  double lambda = 1.0;
  double eps_robust = 0.8;
  double tau = 0.0;
  /// Lower support bound y_l(t) used inside the max. Unset means tau.
  std::optional<double> floor;
  /// Optional per-level floors, indexed like the treatment marginal.
  std::vector<double> level_floors;

  /// Throws InputError unless 0 <= lambda <= 1 and eps_robust > 0.
  void validate() const;
  double floor_for(std::size_t level) const;

  friend bool operator==(const WelfareSpec&, const WelfareSpec&) = default;
};

/// Branch threshold for |w - eps - floor| below which the kink branch applies.
inline constexpr double kKinkTolerance = 1e-10;

/// E[max(0, N(m, sigma^2))], m = x'beta + alpha * t.
double tobit_mean_zero(const ParamVector& theta, std::span<const double> x, double t);
/// E[max(tau, N(m, sigma^2))].
double tobit_mean_tau(const ParamVector& theta, std::span<const double> x, double t, double tau);
/// Gradient of tobit_mean_tau with respect to the flattened parameters.
std::vector<double> tobit_mean_gradient(const ParamVector& theta, std::span<const double> x,
                                        double t, double tau);

/// lambda * w_raw + (1 - lambda) * max(w_raw - eps, floor).
double robust_welfare(double w_raw, const WelfareSpec& spec, double floor);
/// Same with the spec's floor for `level`.
double robust_welfare(double w_raw, const WelfareSpec& spec, std::size_t level = 0);

/// w_R(theta, x, t) with the spec's censor point.
double robust_welfare_at(const ParamVector& theta, std::span<const double> x, double t,
                         const WelfareSpec& spec, std::size_t level);

/// w_R(theta, x, 1) - w_R(theta, x, 0).
double welfare_contrast(const ParamVector& theta, std::span<const double> x,
                        const WelfareSpec& spec);

/// One-sided derivative of w_R(theta, x, t) along h (flattened parameter
/// direction).
double directional_derivative_wR(const ParamVector& theta, std::span<const double> x, double t,
                                 std::span<const double> h, const WelfareSpec& spec,
                                 std::size_t level = 0);

/// Treatment value carried by a level of the treatment marginal (its first
/// coordinate).
double treatment_value(const transport::DiscreteMarginal& levels, std::size_t level);

/// Row-major bins x levels table of raw censored means under theta.
std::vector<double> tobit_mean_matrix(const ParamVector& theta,
                                      const transport::DiscreteMarginal& bins,
                                      const transport::DiscreteMarginal& levels, double tau);

/// Row-major bins x levels table of w_R under theta.
std::vector<double> robust_welfare_matrix(const ParamVector& theta,
                                          const transport::DiscreteMarginal& bins,
                                          const transport::DiscreteMarginal& levels,
                                          const WelfareSpec& spec);

/// Posterior-averaged w_R tables, one per spec, sharing the same draws:
/// result[s] = mean over draws of robust_welfare_matrix(draw, ..., specs[s]).
/// All specs must share the same tau.
std::vector<std::vector<double>> averaged_welfare_matrices(
    std::span<const ParamVector> draws, const transport::DiscreteMarginal& bins,
    const transport::DiscreteMarginal& levels, std::span<const WelfareSpec> specs);

}  // namespace capassign::welfare
