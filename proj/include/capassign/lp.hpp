#pragma once

// Small dense linear programs: two-phase tableau simplex with Bland's rule.
// Used for the transport problems whose constraint matrix is not a plain
// transportation polytope (distance-ball and optimal-face restrictions).

#include <cstddef>
#include <utility>
#include <vector>

namespace capassign::lp {

enum class RowType { less_equal, equal, greater_equal };

struct Row {
  std::vector<std::pair<std::size_t, double>> coeffs;  // (variable, coefficient)
  RowType type = RowType::equal;
  double rhs = 0.0;
};

/// maximize objective . x  subject to rows, x >= 0.
struct LinearProgram {
  std::size_t num_vars = 0;
  std::vector<double> objective;
  std::vector<Row> rows;
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

struct LpResult {
  LpStatus status = LpStatus::optimal;
  std::vector<double> x;
  double value = 0.0;
  /// Shadow price of each row: d(optimal value) / d(rhs). Zero for rows
  /// dropped as redundant.
  std::vector<double> duals;
  std::size_t iterations = 0;
};

/// `max_iterations == 0` selects 50 * (rows + columns).
LpResult solve(const LinearProgram& program, std::size_t max_iterations = 0);

}  // namespace capassign::lp
