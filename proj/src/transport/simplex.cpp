// Transportation simplex (MODI / u-v method) for
//   maximize sum gain(i, j) * flow(i, j)
//   s.t.     row sums = supply, column sums = demand, flow >= 0.
// The basis is a spanning tree of the bipartite row/column graph with exactly
// rows + cols - 1 cells; degenerate (zero-flow) basic cells are kept explicitly.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "capassign/error.hpp"
#include "capassign/transport.hpp"
#include "transport_internal.hpp"

namespace capassign::transport::detail {

namespace {

struct Edge {
  std::size_t node;
  std::size_t cell;
};

class Tree {
 public:
  Tree(std::size_t rows, std::size_t cols) : rows_(rows), adj_(rows + cols) {}

  void rebuild(const std::vector<std::size_t>& basis, std::size_t cols) {
    for (auto& a : adj_) a.clear();
    for (std::size_t cell : basis) {
      const std::size_t i = cell / cols;
      const std::size_t j = cell % cols;
      adj_[i].push_back({rows_ + j, cell});
      adj_[rows_ + j].push_back({i, cell});
    }
  }

  // Potentials with u[0] = 0 such that u_i + v_j = gain(i, j) on basic cells.
  void potentials(std::span<const double> gain, std::size_t cols, std::vector<double>& u,
                  std::vector<double>& v) {
    const std::size_t n = adj_.size();
    std::vector<double> pot(n, 0.0);
    std::vector<bool> seen(n, false);
    stack_.clear();
    stack_.push_back(0);
    seen[0] = true;
    while (!stack_.empty()) {
      const std::size_t a = stack_.back();
      stack_.pop_back();
      for (const Edge& e : adj_[a]) {
        if (seen[e.node]) continue;
        seen[e.node] = true;
        pot[e.node] = gain[e.cell] - pot[a];
        stack_.push_back(e.node);
      }
    }
    u.assign(pot.begin(), pot.begin() + static_cast<std::ptrdiff_t>(rows_));
    v.assign(pot.begin() + static_cast<std::ptrdiff_t>(rows_), pot.end());
    (void)cols;
  }

  // Cells on the tree path from row node `i` to column node `j`, ordered from
  // the row end.
  std::vector<std::size_t> path(std::size_t i, std::size_t j) {
    const std::size_t n = adj_.size();
    std::vector<std::size_t> parent_node(n, n), parent_cell(n, 0);
    stack_.clear();
    stack_.push_back(i);
    parent_node[i] = i;
    while (!stack_.empty()) {
      const std::size_t a = stack_.back();
      stack_.pop_back();
      if (a == rows_ + j) break;
      for (const Edge& e : adj_[a]) {
        if (parent_node[e.node] != n) continue;
        parent_node[e.node] = a;
        parent_cell[e.node] = e.cell;
        stack_.push_back(e.node);
      }
    }
    std::vector<std::size_t> cells;
    for (std::size_t a = rows_ + j; a != i; a = parent_node[a]) {
      if (parent_node[a] == n) {
        throw NumericalError("transport simplex: basis is not a spanning tree");
      }
      cells.push_back(parent_cell[a]);
    }
    std::reverse(cells.begin(), cells.end());
    return cells;
  }

 private:
  std::size_t rows_;
  std::vector<std::vector<Edge>> adj_;
  std::vector<std::size_t> stack_;
};

}  // namespace

TransportLpResult transport_simplex(std::size_t rows, std::size_t cols,
                                    std::span<const double> gain, std::span<const double> supply,
                                    std::span<const double> demand, std::size_t max_iterations) {
  if (gain.size() != rows * cols || supply.size() != rows || demand.size() != cols) {
    throw InputError("transport simplex: dimension mismatch");
  }
  const double total_supply = std::accumulate(supply.begin(), supply.end(), 0.0);
  const double total_demand = std::accumulate(demand.begin(), demand.end(), 0.0);
  if (std::abs(total_supply - total_demand) > kFeasibilityTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "infeasible marginals: source mass " << total_supply << " != target mass "
        << total_demand;
    throw InputError(msg.str());
  }
  if (max_iterations == 0) {
    const std::size_t cells = rows * cols;
    max_iterations = 10 * cells * cells;
  }

  TransportLpResult out;
  out.flow.assign(rows * cols, 0.0);
  std::vector<bool> basic(rows * cols, false);
  std::vector<std::size_t> basis;
  basis.reserve(rows + cols - 1);

  // Initial basic feasible solution: matrix-maximum rule (largest gain first,
  // lowest index on ties), crossing out exactly one line per step.
  {
    std::vector<double> r(supply.begin(), supply.end());
    std::vector<double> c(demand.begin(), demand.end());
    std::vector<bool> row_on(rows, true), col_on(cols, true);
    std::size_t rows_left = rows, cols_left = cols;
    while (rows_left > 0 && cols_left > 0) {
      std::size_t best = rows * cols;
      for (std::size_t i = 0; i < rows; ++i) {
        if (!row_on[i]) continue;
        for (std::size_t j = 0; j < cols; ++j) {
          if (!col_on[j]) continue;
          const std::size_t k = i * cols + j;
          if (best == rows * cols || gain[k] > gain[best]) best = k;
        }
      }
      const std::size_t i = best / cols;
      const std::size_t j = best % cols;
      const double x = std::max(0.0, std::min(r[i], c[j]));
      out.flow[best] = x;
      basic[best] = true;
      basis.push_back(best);
      r[i] -= x;
      c[j] -= x;
      if (rows_left == 1 && cols_left == 1) break;
      if ((r[i] <= c[j] && rows_left > 1) || cols_left == 1) {
        row_on[i] = false;
        --rows_left;
      } else {
        col_on[j] = false;
        --cols_left;
      }
    }
  }

  double scale = 1.0;
  for (double g : gain) scale = std::max(scale, std::abs(g));
  const double tol = 1e-12 * scale;

  Tree tree(rows, cols);
  std::vector<double> u, v;
  out.status = SolveStatus::optimal;
  while (true) {
    tree.rebuild(basis, cols);
    tree.potentials(gain, cols, u, v);
    std::size_t enter = rows * cols;
    for (std::size_t k = 0; k < rows * cols; ++k) {
      if (basic[k]) continue;
      if (gain[k] - u[k / cols] - v[k % cols] > tol) {
        enter = k;
        break;
      }
    }
    if (enter == rows * cols) break;
    if (out.iterations >= max_iterations) {
      out.status = SolveStatus::iteration_limit;
      break;
    }
    const std::vector<std::size_t> cycle = tree.path(enter / cols, enter % cols);
    // cycle[0], cycle[2], ... lose mass; cycle[1], cycle[3], ... gain it.
    double theta = 0.0;
    std::size_t leave = rows * cols;
    for (std::size_t p = 0; p < cycle.size(); p += 2) {
      const std::size_t k = cycle[p];
      if (leave == rows * cols || out.flow[k] < theta || (out.flow[k] == theta && k < leave)) {
        theta = out.flow[k];
        leave = k;
      }
    }
    for (std::size_t p = 0; p < cycle.size(); ++p) {
      const std::size_t k = cycle[p];
      out.flow[k] = (p % 2 == 0) ? out.flow[k] - theta : out.flow[k] + theta;
    }
    out.flow[enter] = theta;
    out.flow[leave] = 0.0;
    basic[leave] = false;
    basic[enter] = true;
    *std::find(basis.begin(), basis.end(), leave) = enter;
    ++out.iterations;
  }
  out.row_potentials = std::move(u);
  out.col_potentials = std::move(v);
  out.value = 0.0;
  for (std::size_t k = 0; k < rows * cols; ++k) out.value += gain[k] * out.flow[k];
  return out;
}

}  // namespace capassign::transport::detail

namespace capassign::transport {

namespace {

SolveReport to_report(const TransportProblem& problem, detail::TransportLpResult lp) {
  SolveReport report;
  report.coupling = Coupling(problem.rows(), problem.cols(), std::move(lp.flow));
  report.value = problem.value(report.coupling);
  report.iterations = lp.iterations;
  report.status = lp.status;
  report.row_potentials = std::move(lp.row_potentials);
  report.col_potentials = std::move(lp.col_potentials);
  return report;
}

}  // namespace

SolveReport solve_max_transport(const TransportProblem& problem, const SimplexOptions& options) {
  auto lp = detail::transport_simplex(problem.rows(), problem.cols(), problem.welfare(),
                                      problem.source().masses(), problem.target().masses(),
                                      options.max_iterations);
  return to_report(problem, std::move(lp));
}

SolveReport solve_min_transport(const TransportProblem& problem, const SimplexOptions& options) {
  std::vector<double> negated(problem.welfare().begin(), problem.welfare().end());
  for (double& w : negated) w = -w;
  auto lp = detail::transport_simplex(problem.rows(), problem.cols(), negated,
                                      problem.source().masses(), problem.target().masses(),
                                      options.max_iterations);
  for (double& u : lp.row_potentials) u = -u;
  for (double& v : lp.col_potentials) v = -v;
  return to_report(problem, std::move(lp));
}

}  // namespace capassign::transport
