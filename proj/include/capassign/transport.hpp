#pragma once

// Discrete optimal transport on a covariate-bin x treatment-level grid.
//
// A coupling is a joint mass table whose row sums are the covariate
// distribution F_X and whose column sums are the treatment distribution F_T.
// The capacity constraint is the column marginal, so every feasible coupling
// meets it by construction.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace capassign::transport {

inline constexpr double kMassTolerance = 1e-12;
inline constexpr double kFeasibilityTolerance = 1e-9;

struct SupportPoint {
  std::string label;
  std::vector<double> coords;

  friend bool operator==(const SupportPoint&, const SupportPoint&) = default;
};

/// Finite probability distribution over distinct labeled support points.
class DiscreteMarginal {
 public:
  DiscreteMarginal() = default;
  /// Throws InputError unless masses are nonnegative, sum to 1 within 1e-12,
  /// and labels are distinct.
  DiscreteMarginal(std::vector<SupportPoint> points, std::vector<double> masses);

  /// Treatment levels {0, 1} with P(1) = p.
  static DiscreteMarginal bernoulli(double p);

  std::size_t size() const { return masses_.size(); }
  const std::vector<SupportPoint>& points() const { return points_; }
  std::span<const double> masses() const { return masses_; }
  double mass(std::size_t i) const { return masses_[i]; }
  const SupportPoint& point(std::size_t i) const { return points_[i]; }

  friend bool operator==(const DiscreteMarginal&, const DiscreteMarginal&) = default;

 private:
  std::vector<SupportPoint> points_;
  std::vector<double> masses_;
};

/// Pairwise distances over a finite support (here the cells of X x T).
class GroundMetric {
 public:
  GroundMetric() = default;
  /// Row-major n x n table; throws InputError unless symmetric, nonnegative,
  /// finite, with a zero diagonal.
  GroundMetric(std::size_t n, std::vector<double> distances, std::string description = "custom");

  /// Euclidean distance on covariate coordinates standardized by their F_X
  /// standard deviation, plus a 0/1 indicator for differing treatment levels.
  /// Cells are ordered row-major (bin-major) as in Coupling.
  static GroundMetric standardized(const DiscreteMarginal& bins, const DiscreteMarginal& levels);

  std::size_t size() const { return n_; }
  double operator()(std::size_t a, std::size_t b) const { return d_[a * n_ + b]; }
  std::span<const double> table() const { return d_; }
  double diameter() const;
  const std::string& description() const { return description_; }

 private:
  std::size_t n_ = 0;
  std::vector<double> d_;
  std::string description_;
};

/// Joint mass table over bins x levels, stored row-major.
class Coupling {
 public:
  Coupling() = default;
  /// Throws InputError on size mismatch or negative / non-finite entries.
  Coupling(std::size_t rows, std::size_t cols, std::vector<double> mass);

  /// The product coupling rows (x) cols.
  static Coupling independent(const DiscreteMarginal& rows, const DiscreteMarginal& cols);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t i, std::size_t j) const { return mass_[i * cols_ + j]; }
  std::span<const double> mass() const { return mass_; }

  std::vector<double> row_sums() const;
  std::vector<double> col_sums() const;
  /// Largest absolute deviation of the row sums from `rows`.
  double row_error(const DiscreteMarginal& rows) const;
  /// Largest absolute deviation of the column sums from `cols`.
  double col_error(const DiscreteMarginal& cols) const;
  double marginal_error(const DiscreteMarginal& rows, const DiscreteMarginal& cols) const;
  /// mu(j | i); rows with zero mass report the column distribution of the
  /// whole table.
  double conditional(std::size_t i, std::size_t j) const;

  /// Convex combination (1 - t) * this + t * other.
  Coupling mix(const Coupling& other, double t) const;
  /// Sum of |this - other| over cells.
  double total_variation(const Coupling& other) const;

  friend bool operator==(const Coupling&, const Coupling&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> mass_;
};

/// Maximize sum_{x,t} welfare(x, t) * mu(x, t) over couplings of source x target.
class TransportProblem {
 public:
  TransportProblem() = default;
  /// Throws InputError unless welfare is source.size() x target.size() and finite.
  TransportProblem(std::vector<double> welfare, DiscreteMarginal source, DiscreteMarginal target);

  std::size_t rows() const { return source_.size(); }
  std::size_t cols() const { return target_.size(); }
  std::span<const double> welfare() const { return welfare_; }
  double welfare(std::size_t i, std::size_t j) const { return welfare_[i * cols() + j]; }
  const DiscreteMarginal& source() const { return source_; }
  const DiscreteMarginal& target() const { return target_; }

  /// sum welfare * coupling.
  double value(const Coupling& coupling) const;
  /// Same problem with welfare multiplied by `factor` and shifted by `shift`.
  TransportProblem transformed(double factor, double shift) const;

 private:
  std::vector<double> welfare_;
  DiscreteMarginal source_;
  DiscreteMarginal target_;
};

enum class SolveStatus { optimal, iteration_limit };

const char* to_string(SolveStatus status);

struct SolveReport {
  Coupling coupling;
  double value = 0.0;
  std::size_t iterations = 0;
  SolveStatus status = SolveStatus::optimal;
  /// Optimality gap certificate of the final iterate (0 for exact LP solves).
  double gap = 0.0;
  /// Dual potentials of the linear solve (empty for penalized solves):
  /// welfare(i, j) <= row_potential[i] + col_potential[j], with equality on
  /// every cell that carries mass.
  std::vector<double> row_potentials;
  std::vector<double> col_potentials;
};

struct SimplexOptions {
  /// 0 selects the default cap 10 * (rows * cols)^2.
  std::size_t max_iterations = 0;
};

/// Exact transportation simplex (Bland's rule). Throws InputError when the
/// marginal totals differ by more than 1e-9.
SolveReport solve_max_transport(const TransportProblem& problem, const SimplexOptions& options = {});
/// Minimizing counterpart, same algorithm on negated welfare.
SolveReport solve_min_transport(const TransportProblem& problem, const SimplexOptions& options = {});

struct KantorovichSolution {
  double distance = 0.0;
  /// potential_mu[a] + potential_nu[b] <= d(a, b); the distance equals
  /// <potential_mu, mu> + <potential_nu, nu>.
  std::vector<double> potential_mu;
  std::vector<double> potential_nu;
};

/// Wasserstein-1 distance between two mass vectors on the metric's support.
KantorovichSolution wasserstein1_dual(std::span<const double> mu, std::span<const double> nu,
                                      const GroundMetric& metric);
/// Throws InputError if the supports differ or do not match the metric size.
double wasserstein1(const DiscreteMarginal& mu, const DiscreteMarginal& nu,
                    const GroundMetric& metric);
/// Distance between couplings viewed as distributions on the cells of X x T.
double wasserstein1(const Coupling& mu, const Coupling& nu, const GroundMetric& metric);

/// H(mu) = d_W(mu, reference)^2.
double penalty_H(const Coupling& mu, const Coupling& reference, const GroundMetric& metric);

enum class PenaltyMethod {
  /// One-dimensional concave search over the transport radius with an exact LP
  /// per evaluation.
  parametric,
  /// Frank-Wolfe with step 2/(k+2) and the Kantorovich subgradient of H.
  frank_wolfe,
};

struct PenaltyOptions {
  PenaltyMethod method = PenaltyMethod::parametric;
  /// Radius tolerance for the parametric search, relative to the search span.
  double radius_tolerance = 1e-13;
  double fw_gap_tolerance = 1e-8;
  std::size_t fw_max_iterations = 10000;
};

/// Maximizer of scale * W(mu) - eps * H(mu) over couplings. Throws InputError
/// for eps <= 0 or a reference that is not a feasible coupling.
SolveReport solve_penalized(const TransportProblem& problem, const Coupling& reference,
                            const GroundMetric& metric, double eps, double scale = 1.0,
                            const PenaltyOptions& options = {});

/// The coupling of least H among all welfare-maximizing couplings.
Coupling minimal_H_selection(const TransportProblem& problem, const Coupling& reference,
                             const GroundMetric& metric);

}  // namespace capassign::transport
