#include <string>

#include "capassign/error.hpp"
#include "capassign/kernels.hpp"
#include "capassign/rules.hpp"

namespace capassign::rules {

namespace {

using transport::TransportProblem;

RuleOutput finish(RuleKind kind, std::vector<double> matrix, const DiscreteMarginal& grid,
                  const DiscreteMarginal& f_t, const RuleOptions& options) {
  TransportProblem problem(std::move(matrix), grid, f_t);
  RuleOutput out;
  out.kind = kind;
  out.coupling = solve_assignment(problem, options);
  out.welfare_at_solution = problem.value(out.coupling);
  out.welfare_matrix.assign(problem.welfare().begin(), problem.welfare().end());
  return out;
}

ParamVector mean_of(std::span<const ParamVector> draws) {
  std::vector<double> acc(draws.front().size(), 0.0);
  for (const auto& d : draws) {
    const auto f = d.flatten();
    if (f.size() != acc.size()) throw InputError("posterior draws differ in dimension");
    for (std::size_t k = 0; k < f.size(); ++k) acc[k] += f[k];
  }
  for (double& v : acc) v /= static_cast<double>(draws.size());
  return ParamVector::from_flat(acc);
}

}  // namespace

const char* to_string(RuleKind kind) {
  switch (kind) {
    case RuleKind::oracle: return "oracle";
    case RuleKind::plug_in: return "plug_in";
    case RuleKind::ex_post_bayes: return "ex_post_bayes";
  }
  return "unknown";
}

const char* to_string(TieMode mode) {
  switch (mode) {
    case TieMode::solver_vertex: return "solver-vertex";
    case TieMode::uniform_split: return "uniform-split";
    case TieMode::minimal_H: return "minimal-H";
  }
  return "unknown";
}

TieMode parse_tie_mode(std::string_view name) {
  if (name == "solver-vertex") return TieMode::solver_vertex;
  if (name == "uniform-split") return TieMode::uniform_split;
  if (name == "minimal-H") return TieMode::minimal_H;
  throw InputError("unknown tie mode '" + std::string(name) +
                   "' (expected solver-vertex, uniform-split or minimal-H)");
}

std::vector<double> welfare_matrix(const ParamVector& theta, const DiscreteMarginal& grid,
                                   const DiscreteMarginal& f_t, const WelfareSpec& spec) {
  return welfare::robust_welfare_matrix(theta, grid, f_t, spec);
}

RuleOutput oracle_rule(const ParamVector& theta, const DiscreteMarginal& grid,
                       const DiscreteMarginal& f_t, const WelfareSpec& spec,
                       const RuleOptions& options) {
  auto out = finish(RuleKind::oracle, welfare_matrix(theta, grid, f_t, spec), grid, f_t, options);
  out.theta_used = theta;
  return out;
}

RuleOutput plug_in_rule(const tobit::TobitFit& fit, const DiscreteMarginal& grid,
                        const DiscreteMarginal& f_t, const WelfareSpec& spec,
                        const RuleOptions& options) {
  if (!fit.converged) throw InputError("plug-in rule needs a converged fit");
  auto out = finish(RuleKind::plug_in, welfare_matrix(fit.theta_hat, grid, f_t, spec), grid, f_t,
                    options);
  out.theta_used = fit.theta_hat;
  return out;
}

RuleOutput ex_post_bayes_rule(const tobit::TobitFit& fit, const DiscreteMarginal& grid,
                              const DiscreteMarginal& f_t, const WelfareSpec& spec, std::size_t L,
                              std::mt19937_64& rng, const RuleOptions& options) {
  if (L == 0) throw InputError("ex-post Bayes rule needs at least one draw");
  if (!fit.converged) throw InputError("ex-post Bayes rule needs a converged fit");
  const auto draws = tobit::sample_quasi_posterior(fit, L, rng);
  return ex_post_bayes_from_draws(draws, grid, f_t, spec, options);
}

RuleOutput ex_post_bayes_from_draws(std::span<const ParamVector> draws,
                                    const DiscreteMarginal& grid, const DiscreteMarginal& f_t,
                                    const WelfareSpec& spec, const RuleOptions& options) {
  if (draws.empty()) throw InputError("ex-post Bayes rule needs at least one draw");
  const WelfareSpec specs[] = {spec};
  auto averaged = welfare::averaged_welfare_matrices(draws, grid, f_t, specs);
  return ex_post_bayes_from_matrix(std::move(averaged[0]), draws, grid, f_t, options);
}

RuleOutput ex_post_bayes_from_matrix(std::vector<double> averaged, std::span<const ParamVector> draws,
                                     const DiscreteMarginal& grid, const DiscreteMarginal& f_t,
                                     const RuleOptions& options) {
  if (draws.empty()) throw InputError("ex-post Bayes rule needs at least one draw");
  auto out = finish(RuleKind::ex_post_bayes, std::move(averaged), grid, f_t, options);
  out.theta_used = mean_of(draws);
  out.draws = draws.size();
  return out;
}

double welfare_of(const ParamVector& theta, const Coupling& coupling, const DiscreteMarginal& grid,
                  const DiscreteMarginal& f_t, const WelfareSpec& spec) {
  if (coupling.rows() != grid.size() || coupling.cols() != f_t.size())
    throw InputError("coupling shape does not match the grid");
  const auto w = welfare_matrix(theta, grid, f_t, spec);
  return kernels::dot(w, coupling.mass());
}

double regret(const ParamVector& theta, const Coupling& coupling, const DiscreteMarginal& grid,
              const DiscreteMarginal& f_t, const WelfareSpec& spec) {
  TransportProblem problem(welfare_matrix(theta, grid, f_t, spec), grid, f_t);
  const double best = transport::solve_max_transport(problem).value;
  return regret_from_matrix(problem.welfare(), best, coupling);
}

double regret_from_matrix(std::span<const double> matrix, double optimum, const Coupling& coupling) {
  if (matrix.size() != coupling.mass().size())
    throw InputError("coupling shape does not match the welfare table");
  return optimum - kernels::dot(matrix, coupling.mass());
}

}  // namespace capassign::rules
