#pragma once

// Assignment rules as transport solves over the covariate-bin x treatment grid.

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "capassign/tobit.hpp"
#include "capassign/transport.hpp"
#include "capassign/welfare.hpp"

namespace capassign::rules {

using transport::Coupling;
using transport::DiscreteMarginal;
using welfare::ParamVector;
using welfare::WelfareSpec;

enum class RuleKind { oracle, plug_in, ex_post_bayes };

/// How to pick among welfare-maximizing couplings when the optimum is not
/// unique.
enum class TieMode {
  /// The vertex returned by the transportation simplex.
  solver_vertex,
  /// Proportional split over the optimal face: cells that can carry mass at
  /// the optimum share each row's mass in proportion to the column weights,
  /// so tied bins receive the residual capacity at a common rate.
  uniform_split,
  /// Least squared Wasserstein distance to F_X (x) F_T within the optimal face.
  minimal_H,
};

const char* to_string(RuleKind kind);
const char* to_string(TieMode mode);
/// Accepts "solver-vertex", "uniform-split", "minimal-H".
TieMode parse_tie_mode(std::string_view name);

struct RuleOptions {
  TieMode tie_mode = TieMode::solver_vertex;
  /// Metric for minimal_H; defaults to GroundMetric::standardized.
  std::optional<transport::GroundMetric> metric;
};

struct RuleOutput {
  Coupling coupling;
  RuleKind kind = RuleKind::oracle;
  /// The parameter solved at; for ex-post Bayes, the mean of the draws.
  ParamVector theta_used;
  /// Posterior draws averaged (0 for oracle and plug-in).
  std::size_t draws = 0;
  /// Objective of the matrix that was solved (posterior mean welfare for
  /// ex-post Bayes).
  double welfare_at_solution = 0.0;
  /// Row-major bins x levels welfare table that was solved.
  std::vector<double> welfare_matrix;
};

/// Row-major w_R table at theta.
std::vector<double> welfare_matrix(const ParamVector& theta, const DiscreteMarginal& grid,
                                   const DiscreteMarginal& f_t, const WelfareSpec& spec);

/// Maximizing coupling of an arbitrary welfare table under the tie mode.
Coupling solve_assignment(const transport::TransportProblem& problem,
                          const RuleOptions& options = {});

RuleOutput oracle_rule(const ParamVector& theta, const DiscreteMarginal& grid,
                       const DiscreteMarginal& f_t, const WelfareSpec& spec,
                       const RuleOptions& options = {});

/// Throws InputError if the fit did not converge.
RuleOutput plug_in_rule(const tobit::TobitFit& fit, const DiscreteMarginal& grid,
                        const DiscreteMarginal& f_t, const WelfareSpec& spec,
                        const RuleOptions& options = {});

/// Draws L quasi-posterior parameters from rng and solves the averaged table.
RuleOutput ex_post_bayes_rule(const tobit::TobitFit& fit, const DiscreteMarginal& grid,
                              const DiscreteMarginal& f_t, const WelfareSpec& spec, std::size_t L,
                              std::mt19937_64& rng, const RuleOptions& options = {});

/// Same rule from explicit draws.
RuleOutput ex_post_bayes_from_draws(std::span<const ParamVector> draws,
                                    const DiscreteMarginal& grid, const DiscreteMarginal& f_t,
                                    const WelfareSpec& spec, const RuleOptions& options = {});

/// Solves a precomputed averaged table (draws already folded in).
RuleOutput ex_post_bayes_from_matrix(std::vector<double> averaged, std::span<const ParamVector> draws,
                                     const DiscreteMarginal& grid, const DiscreteMarginal& f_t,
                                     const RuleOptions& options = {});

/// W(theta, mu) = sum w_R(theta, x, t) mu(x, t).
double welfare_of(const ParamVector& theta, const Coupling& coupling, const DiscreteMarginal& grid,
                  const DiscreteMarginal& f_t, const WelfareSpec& spec);

/// W*(theta) - W(theta, mu).
double regret(const ParamVector& theta, const Coupling& coupling, const DiscreteMarginal& grid,
              const DiscreteMarginal& f_t, const WelfareSpec& spec);

/// Same with a precomputed table at theta and its optimal value.
double regret_from_matrix(std::span<const double> matrix, double optimum, const Coupling& coupling);

}  // namespace capassign::rules
