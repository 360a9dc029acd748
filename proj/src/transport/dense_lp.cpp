#include <algorithm>
#include <cmath>
#include <limits>

#include "capassign/error.hpp"
#include "capassign/lp.hpp"

namespace capassign::lp {

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kCostTol = 1e-11;
constexpr double kFeasTol = 1e-9;

class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), t_(rows * (cols + 1), 0.0) {}

  double& at(std::size_t r, std::size_t c) { return t_[r * (cols_ + 1) + c]; }
  double at(std::size_t r, std::size_t c) const { return t_[r * (cols_ + 1) + c]; }
  double& rhs(std::size_t r) { return at(r, cols_); }
  double rhs(std::size_t r) const { return at(r, cols_); }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  void pivot(std::size_t pr, std::size_t pc, std::vector<double>& obj, double& obj_value) {
    const double inv = 1.0 / at(pr, pc);
    for (std::size_t c = 0; c <= cols_; ++c) at(pr, c) *= inv;
    at(pr, pc) = 1.0;
    for (std::size_t r = 0; r < rows_; ++r) {
      if (r == pr) continue;
      const double f = at(r, pc);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c <= cols_; ++c) at(r, c) -= f * at(pr, c);
      at(r, pc) = 0.0;
    }
    const double f = obj[pc];
    if (f != 0.0) {
      for (std::size_t c = 0; c < cols_; ++c) obj[c] -= f * at(pr, c);
      obj_value += f * rhs(pr);
      obj[pc] = 0.0;
    }
  }

  void erase_row(std::size_t r) {
    t_.erase(t_.begin() + static_cast<std::ptrdiff_t>(r * (cols_ + 1)),
             t_.begin() + static_cast<std::ptrdiff_t>((r + 1) * (cols_ + 1)));
    --rows_;
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> t_;
};

// Reduced-cost row for `cost` given the current basis: obj[c] = cost[c] - cost_B . column c.
void price(const Tableau& t, const std::vector<std::size_t>& basis, const std::vector<double>& cost,
           std::vector<double>& obj, double& obj_value) {
  obj = cost;
  obj_value = 0.0;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const double cb = cost[basis[r]];
    if (cb == 0.0) continue;
    for (std::size_t c = 0; c < t.cols(); ++c) obj[c] -= cb * t.at(r, c);
    obj_value += cb * t.rhs(r);
  }
}

enum class Outcome { optimal, unbounded, limit };

// Bland's rule: lowest-index improving column, lowest-index leaving basic.
Outcome run(Tableau& t, std::vector<std::size_t>& basis, std::vector<double>& obj,
            double& obj_value, std::size_t enter_limit, std::size_t& iterations,
            std::size_t max_iterations) {
  double scale = 1.0;
  for (std::size_t c = 0; c < enter_limit; ++c) scale = std::max(scale, std::abs(obj[c]));
  const double tol = kCostTol * scale;
  while (true) {
    std::size_t enter = enter_limit;
    for (std::size_t c = 0; c < enter_limit; ++c) {
      if (obj[c] > tol) {
        enter = c;
        break;
      }
    }
    if (enter == enter_limit) return Outcome::optimal;
    if (iterations >= max_iterations) return Outcome::limit;
    std::size_t leave = t.rows();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < t.rows(); ++r) {
      const double a = t.at(r, enter);
      if (a <= kPivotTol) continue;
      const double ratio = std::max(0.0, t.rhs(r)) / a;
      const double tie = 1e-14 * (std::isinf(best) ? 1.0 : std::max(1.0, best));
      if (leave == t.rows() || ratio < best - tie) {
        best = ratio;
        leave = r;
      } else if (ratio <= best + tie && basis[r] < basis[leave]) {
        best = std::min(best, ratio);
        leave = r;
      }
    }
    if (leave == t.rows()) return Outcome::unbounded;
    t.pivot(leave, enter, obj, obj_value);
    basis[leave] = enter;
    ++iterations;
  }
}

}  // namespace

LpResult solve(const LinearProgram& program, std::size_t max_iterations) {
  const std::size_t n = program.num_vars;
  const std::size_t m = program.rows.size();
  if (program.objective.size() != n) {
    throw InputError("lp: objective length differs from variable count");
  }

  // Normalize rows to nonnegative right-hand sides.
  std::vector<RowType> type(m);
  std::vector<double> sign(m, 1.0);
  for (std::size_t r = 0; r < m; ++r) {
    type[r] = program.rows[r].type;
    if (program.rows[r].rhs < 0.0) {
      sign[r] = -1.0;
      if (type[r] == RowType::less_equal) {
        type[r] = RowType::greater_equal;
      } else if (type[r] == RowType::greater_equal) {
        type[r] = RowType::less_equal;
      }
    }
  }
  std::size_t num_slack = 0;
  std::size_t num_art = 0;
  for (std::size_t r = 0; r < m; ++r) {
    if (type[r] != RowType::equal) ++num_slack;
    if (type[r] != RowType::less_equal) ++num_art;
  }
  const std::size_t art_begin = n + num_slack;
  const std::size_t cols = art_begin + num_art;
  Tableau t(m, cols);
  std::vector<std::size_t> basis(m);
  // Column whose reduced cost yields each row's dual, and its sign.
  std::vector<std::size_t> dual_col(m);
  std::vector<double> dual_sign(m);
  std::size_t next_slack = n;
  std::size_t next_art = art_begin;
  for (std::size_t r = 0; r < m; ++r) {
    for (const auto& [var, coef] : program.rows[r].coeffs) {
      if (var >= n) throw InputError("lp: variable index out of range");
      t.at(r, var) += sign[r] * coef;
    }
    t.rhs(r) = sign[r] * program.rows[r].rhs;
    if (type[r] == RowType::less_equal) {
      t.at(r, next_slack) = 1.0;
      basis[r] = next_slack;
      dual_col[r] = next_slack;
      dual_sign[r] = -sign[r];
      ++next_slack;
    } else if (type[r] == RowType::greater_equal) {
      t.at(r, next_slack) = -1.0;
      t.at(r, next_art) = 1.0;
      basis[r] = next_art;
      dual_col[r] = next_slack;
      dual_sign[r] = sign[r];
      ++next_slack;
      ++next_art;
    } else {
      t.at(r, next_art) = 1.0;
      basis[r] = next_art;
      dual_col[r] = next_art;
      dual_sign[r] = -sign[r];
      ++next_art;
    }
  }

  if (max_iterations == 0) max_iterations = 50 * (m + cols);
  LpResult result;
  std::vector<double> obj;
  double obj_value = 0.0;

  // Phase 1: maximize -sum(artificials).
  if (num_art > 0) {
    std::vector<double> cost(cols, 0.0);
    for (std::size_t c = art_begin; c < cols; ++c) cost[c] = -1.0;
    price(t, basis, cost, obj, obj_value);
    const Outcome o = run(t, basis, obj, obj_value, cols, result.iterations, max_iterations);
    if (o == Outcome::limit) {
      result.status = LpStatus::iteration_limit;
      return result;
    }
    if (-obj_value > kFeasTol) {
      result.status = LpStatus::infeasible;
      return result;
    }
    // Drive remaining zero-level artificials out of the basis; drop the row
    // when it is redundant.
    std::vector<bool> row_alive(m, true);
    std::vector<std::size_t> original_row(m);
    for (std::size_t r = 0; r < m; ++r) original_row[r] = r;
    for (std::size_t r = 0; r < t.rows();) {
      if (basis[r] < art_begin) {
        ++r;
        continue;
      }
      std::size_t col = art_begin;
      for (std::size_t c = 0; c < art_begin; ++c) {
        if (std::abs(t.at(r, c)) > 1e-9) {
          col = c;
          break;
        }
      }
      if (col < art_begin) {
        t.pivot(r, col, obj, obj_value);
        basis[r] = col;
        ++r;
      } else {
        row_alive[original_row[r]] = false;
        t.erase_row(r);
        basis.erase(basis.begin() + static_cast<std::ptrdiff_t>(r));
        original_row.erase(original_row.begin() + static_cast<std::ptrdiff_t>(r));
      }
    }
    for (std::size_t r = 0; r < m; ++r) {
      if (!row_alive[r]) dual_sign[r] = 0.0;
    }
  }

  // Phase 2 on the original objective; artificials may not re-enter.
  std::vector<double> cost(cols, 0.0);
  std::copy(program.objective.begin(), program.objective.end(), cost.begin());
  price(t, basis, cost, obj, obj_value);
  const Outcome o = run(t, basis, obj, obj_value, art_begin, result.iterations, max_iterations);
  if (o == Outcome::unbounded) {
    result.status = LpStatus::unbounded;
    return result;
  }
  result.status = o == Outcome::limit ? LpStatus::iteration_limit : LpStatus::optimal;
  result.x.assign(n, 0.0);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    if (basis[r] < n) result.x[basis[r]] = std::max(0.0, t.rhs(r));
  }
  result.value = 0.0;
  for (std::size_t v = 0; v < n; ++v) result.value += program.objective[v] * result.x[v];
  result.duals.assign(m, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    if (dual_sign[r] != 0.0) result.duals[r] = dual_sign[r] * obj[dual_col[r]];
  }
  return result;
}

}  // namespace capassign::lp
