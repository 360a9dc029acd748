// Penalized and H-minimal selections among welfare-maximizing couplings.
//
// H(mu) = d_W(mu, ref)^2 is the square of a polyhedral convex function of mu,
// so both problems reduce to linear programs over transport plans gamma on
// (X x T) x (X x T) whose first marginal is a feasible coupling mu and whose
// second marginal is the reference:
//   * minimal-H: minimize <d, gamma> over plans whose mu attains the LP value;
//   * penalized: g(r) = max { scale * W(mu) : <d, gamma> <= r } is concave and
//     piecewise linear in r, and the penalized optimum sits at the radius where
//     the shadow price of the distance row equals 2 * eps * r.

#include <algorithm>
#include <cmath>

#include "capassign/error.hpp"
#include "capassign/lp.hpp"
#include "capassign/transport.hpp"

namespace capassign::transport {

namespace {

void check_reference(const TransportProblem& problem, const Coupling& reference,
                     const GroundMetric& metric) {
  if (reference.rows() != problem.rows() || reference.cols() != problem.cols()) {
    throw InputError("reference coupling has the wrong shape");
  }
  if (reference.marginal_error(problem.source(), problem.target()) > kFeasibilityTolerance) {
    throw InputError("reference coupling is not feasible for the problem marginals");
  }
  if (metric.size() != problem.rows() * problem.cols()) {
    throw InputError("ground metric does not cover the cells of the problem");
  }
}

// Plans gamma (cells x cells, row-major) with second marginal = reference and
// first marginal a coupling of (source, target).
lp::LinearProgram plan_program(const TransportProblem& problem, const Coupling& reference) {
  const std::size_t rows = problem.rows();
  const std::size_t cols = problem.cols();
  const std::size_t n = rows * cols;
  lp::LinearProgram prog;
  prog.num_vars = n * n;
  prog.objective.assign(n * n, 0.0);
  const auto ref = reference.mass();
  for (std::size_t b = 0; b < n; ++b) {
    lp::Row row;
    row.type = lp::RowType::equal;
    row.rhs = ref[b];
    for (std::size_t a = 0; a < n; ++a) row.coeffs.emplace_back(a * n + b, 1.0);
    prog.rows.push_back(std::move(row));
  }
  for (std::size_t i = 0; i < rows; ++i) {
    lp::Row row;
    row.type = lp::RowType::equal;
    row.rhs = problem.source().mass(i);
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t a = i * cols + j;
      for (std::size_t b = 0; b < n; ++b) row.coeffs.emplace_back(a * n + b, 1.0);
    }
    prog.rows.push_back(std::move(row));
  }
  for (std::size_t j = 0; j < cols; ++j) {
    lp::Row row;
    row.type = lp::RowType::equal;
    row.rhs = problem.target().mass(j);
    for (std::size_t i = 0; i < rows; ++i) {
      const std::size_t a = i * cols + j;
      for (std::size_t b = 0; b < n; ++b) row.coeffs.emplace_back(a * n + b, 1.0);
    }
    prog.rows.push_back(std::move(row));
  }
  return prog;
}

Coupling first_marginal(const TransportProblem& problem, const std::vector<double>& plan) {
  const std::size_t n = problem.rows() * problem.cols();
  std::vector<double> mu(n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) mu[a] += plan[a * n + b];
  }
  return Coupling(problem.rows(), problem.cols(), std::move(mu));
}

lp::Row distance_row(const GroundMetric& metric, lp::RowType type, double rhs) {
  lp::Row row;
  row.type = type;
  row.rhs = rhs;
  const auto d = metric.table();
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (d[k] != 0.0) row.coeffs.emplace_back(k, d[k]);
  }
  return row;
}

struct RadiusSolve {
  Coupling mu;
  double slope = 0.0;  // shadow price of the distance row
  bool optimal = false;
};

class RadiusProgram {
 public:
  RadiusProgram(const TransportProblem& problem, const Coupling& reference,
                const GroundMetric& metric, double scale)
      : problem_(problem), prog_(plan_program(problem, reference)) {
    const std::size_t n = problem.rows() * problem.cols();
    const auto w = problem.welfare();
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) prog_.objective[a * n + b] = scale * w[a];
    }
    prog_.rows.push_back(distance_row(metric, lp::RowType::less_equal, 0.0));
  }

  RadiusSolve solve(double radius) {
    prog_.rows.back().rhs = radius;
    const lp::LpResult r = lp::solve(prog_);
    if (r.status == lp::LpStatus::infeasible || r.status == lp::LpStatus::unbounded) {
      throw NumericalError("penalized solve: radius-constrained program has no solution");
    }
    return {first_marginal(problem_, r.x), r.duals.back(), r.status == lp::LpStatus::optimal};
  }

 private:
  const TransportProblem& problem_;
  lp::LinearProgram prog_;
};

SolveReport penalized_parametric(const TransportProblem& problem, const Coupling& reference,
                                 const GroundMetric& metric, double eps, double scale,
                                 const PenaltyOptions& options) {
  const SolveReport plain = solve_max_transport(problem);
  const double r_hi = wasserstein1(plain.coupling, reference, metric);
  SolveReport report;
  if (r_hi == 0.0) {
    report = plain;
    report.row_potentials.clear();
    report.col_potentials.clear();
    return report;
  }
  RadiusProgram program(problem, reference, metric, scale);
  double lo = 0.0;
  double hi = r_hi;
  bool all_optimal = true;
  std::size_t steps = 0;
  while (hi - lo > options.radius_tolerance * r_hi && steps < 200) {
    const double mid = 0.5 * (lo + hi);
    const RadiusSolve s = program.solve(mid);
    all_optimal = all_optimal && s.optimal;
    if (s.slope - 2.0 * eps * mid > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
    ++steps;
  }
  const double radius = 0.5 * (lo + hi);
  RadiusSolve final_solve = program.solve(radius);
  report.coupling = std::move(final_solve.mu);
  report.value = problem.value(report.coupling);
  report.iterations = steps;
  report.gap = hi - lo;
  report.status = (all_optimal && final_solve.optimal) ? SolveStatus::optimal
                                                       : SolveStatus::iteration_limit;
  return report;
}

SolveReport penalized_frank_wolfe(const TransportProblem& problem, const Coupling& reference,
                                  const GroundMetric& metric, double eps, double scale,
                                  const PenaltyOptions& options) {
  SolveReport start = solve_max_transport(problem);
  std::vector<double> mu(start.coupling.mass().begin(), start.coupling.mass().end());
  const std::size_t n = mu.size();
  const auto w = problem.welfare();
  std::vector<double> direction(n);
  SolveReport report;
  report.status = SolveStatus::iteration_limit;
  std::size_t k = 0;
  double gap = 0.0;
  for (; k < options.fw_max_iterations; ++k) {
    const KantorovichSolution kd = wasserstein1_dual(mu, reference.mass(), metric);
    for (std::size_t a = 0; a < n; ++a) {
      direction[a] = scale * w[a] - eps * 2.0 * kd.distance * kd.potential_mu[a];
    }
    const TransportProblem linear(direction, problem.source(), problem.target());
    const SolveReport vertex = solve_max_transport(linear);
    const auto s = vertex.coupling.mass();
    gap = 0.0;
    for (std::size_t a = 0; a < n; ++a) gap += direction[a] * (s[a] - mu[a]);
    if (gap < options.fw_gap_tolerance) {
      report.status = SolveStatus::optimal;
      break;
    }
    const double step = 2.0 / (static_cast<double>(k) + 2.0);
    for (std::size_t a = 0; a < n; ++a) mu[a] = std::max(0.0, mu[a] + step * (s[a] - mu[a]));
  }
  report.coupling = Coupling(problem.rows(), problem.cols(), std::move(mu));
  report.value = problem.value(report.coupling);
  report.iterations = k;
  report.gap = gap;
  return report;
}

}  // namespace

SolveReport solve_penalized(const TransportProblem& problem, const Coupling& reference,
                            const GroundMetric& metric, double eps, double scale,
                            const PenaltyOptions& options) {
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw InputError("penalized solve: eps must be positive");
  }
  if (!std::isfinite(scale)) {
    throw InputError("penalized solve: scale must be finite");
  }
  check_reference(problem, reference, metric);
  if (options.method == PenaltyMethod::frank_wolfe) {
    return penalized_frank_wolfe(problem, reference, metric, eps, scale, options);
  }
  return penalized_parametric(problem, reference, metric, eps, scale, options);
}

Coupling minimal_H_selection(const TransportProblem& problem, const Coupling& reference,
                             const GroundMetric& metric) {
  check_reference(problem, reference, metric);
  const SolveReport plain = solve_max_transport(problem);
  if (plain.status != SolveStatus::optimal) {
    throw NumericalError("minimal-H selection: linear transport solve hit its iteration limit");
  }
  lp::LinearProgram prog = plan_program(problem, reference);
  const std::size_t n = problem.rows() * problem.cols();
  const auto d = metric.table();
  for (std::size_t k = 0; k < n * n; ++k) prog.objective[k] = -d[k];
  lp::Row value_row;
  value_row.type = lp::RowType::greater_equal;
  value_row.rhs = plain.value - kFeasibilityTolerance;
  const auto w = problem.welfare();
  for (std::size_t a = 0; a < n; ++a) {
    if (w[a] == 0.0) continue;
    for (std::size_t b = 0; b < n; ++b) value_row.coeffs.emplace_back(a * n + b, w[a]);
  }
  prog.rows.push_back(std::move(value_row));
  const lp::LpResult r = lp::solve(prog);
  if (r.status != lp::LpStatus::optimal) {
    throw NumericalError("minimal-H selection: face program did not reach optimality");
  }
  return first_marginal(problem, r.x);
}

}  // namespace capassign::transport
