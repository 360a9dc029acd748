#include <algorithm>
#include <cmath>
#include <string>

#include "capassign/error.hpp"
#include "capassign/rules.hpp"

namespace capassign::rules {

namespace {

using transport::TransportProblem;

// Cells with zero reduced cost under the simplex potentials. Every optimal
// coupling lives on this set and every feasible coupling on it is optimal.
std::vector<char> optimal_support(const TransportProblem& problem,
                                  const transport::SolveReport& report) {
  double scale = 1.0;
  for (double w : problem.welfare()) scale = std::max(scale, std::abs(w));
  const double tol = 1e-9 * scale;
  std::vector<char> s(problem.rows() * problem.cols());
  for (std::size_t i = 0; i < problem.rows(); ++i)
    for (std::size_t j = 0; j < problem.cols(); ++j)
      s[i * problem.cols() + j] =
          report.row_potentials[i] + report.col_potentials[j] - problem.welfare(i, j) <= tol;
  return s;
}

Coupling split_two_levels(const TransportProblem& problem, const std::vector<char>& support,
                          const Coupling& vertex) {
  const std::size_t rows = problem.rows();
  double forced1 = 0.0, tied = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const double f = problem.source().mass(i);
    const bool s0 = support[2 * i], s1 = support[2 * i + 1];
    if (s0 && s1)
      tied += f;
    else if (s1)
      forced1 += f;
  }
  if (tied <= 1e-15) return vertex;
  double q = (problem.target().mass(1) - forced1) / tied;
  if (q < -1e-9 || q > 1.0 + 1e-9) throw NumericalError("optimal face split is infeasible");
  q = std::clamp(q, 0.0, 1.0);
  std::vector<double> mass(rows * 2, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    const double f = problem.source().mass(i);
    const bool s0 = support[2 * i], s1 = support[2 * i + 1];
    if (s0 && s1) {
      mass[2 * i] = f * (1.0 - q);
      mass[2 * i + 1] = f * q;
    } else if (s1) {
      mass[2 * i + 1] = f;
    } else {
      mass[2 * i] = f;
    }
  }
  return Coupling(rows, 2, std::move(mass));
}

// Iterative proportional fitting of F_X (x) F_T restricted to the support.
Coupling split_general(const TransportProblem& problem, const std::vector<char>& support) {
  const std::size_t rows = problem.rows(), cols = problem.cols();
  const auto fx = problem.source().masses();
  const auto ft = problem.target().masses();
  std::vector<double> a(rows, 1.0), b(cols, 1.0);
  std::vector<double> mass(rows * cols);
  auto build = [&] {
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        mass[i * cols + j] = support[i * cols + j] ? a[i] * fx[i] * b[j] * ft[j] : 0.0;
  };
  for (std::size_t sweep = 0; sweep < 200000; ++sweep) {
    for (std::size_t j = 0; j < cols; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < rows; ++i)
        if (support[i * cols + j]) s += a[i] * fx[i];
      b[j] = s > 0.0 ? 1.0 / s : 0.0;
    }
    for (std::size_t i = 0; i < rows; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < cols; ++j)
        if (support[i * cols + j]) s += b[j] * ft[j];
      a[i] = s > 0.0 ? 1.0 / s : 0.0;
    }
    build();
    Coupling c(rows, cols, mass);
    if (c.marginal_error(problem.source(), problem.target()) < 1e-13) return c;
  }
  Coupling c(rows, cols, mass);
  if (c.marginal_error(problem.source(), problem.target()) > transport::kFeasibilityTolerance)
    throw NumericalError("proportional split over the optimal face did not converge");
  return c;
}

}  // namespace

Coupling solve_assignment(const TransportProblem& problem, const RuleOptions& options) {
  switch (options.tie_mode) {
    case TieMode::solver_vertex:
      return transport::solve_max_transport(problem).coupling;
    case TieMode::uniform_split: {
      const auto report = transport::solve_max_transport(problem);
      const auto support = optimal_support(problem, report);
      if (problem.cols() == 2) return split_two_levels(problem, support, report.coupling);
      return split_general(problem, support);
    }
    case TieMode::minimal_H: {
      const auto reference = Coupling::independent(problem.source(), problem.target());
      if (options.metric)
        return transport::minimal_H_selection(problem, reference, *options.metric);
      return transport::minimal_H_selection(
          problem, reference,
          transport::GroundMetric::standardized(problem.source(), problem.target()));
    }
  }
  throw InputError("unknown tie mode");
}

}  // namespace capassign::rules
