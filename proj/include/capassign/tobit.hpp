#pragma once

// Tobit (censored-from-below) regression: likelihood, maximum likelihood fit,
// observed information and Gaussian quasi-posterior draws.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "capassign/welfare.hpp"

namespace capassign::tobit {

using welfare::ParamVector;

struct Observation {
  double y = 0.0;
  std::vector<double> x;
  double t = 0.0;
};

/// Rows with y == tau are treated as censored.
class Dataset {
 public:
  Dataset() = default;
  /// Throws InputError if any y < tau, covariate lengths differ, entries are
  /// not finite, or there are fewer than k + 2 rows.
  Dataset(std::vector<Observation> rows, double tau);

  std::size_t size() const { return rows_.size(); }
  /// Covariate dimension (length of beta).
  std::size_t dim() const { return dim_; }
  /// Parameter count k = dim + 2.
  std::size_t num_params() const { return dim_ + 2; }
  double tau() const { return tau_; }
  const std::vector<Observation>& rows() const { return rows_; }
  const Observation& row(std::size_t i) const { return rows_[i]; }
  bool censored(std::size_t i) const { return rows_[i].y <= tau_; }
  std::size_t censored_count() const;

 private:
  std::vector<Observation> rows_;
  double tau_ = 0.0;
  std::size_t dim_ = 0;
};

struct TobitFit {
  ParamVector theta_hat;
  double loglik = 0.0;
  /// Observed information per observation, (beta, alpha, sigma) coordinates.
  Eigen::MatrixXd fisher;
  std::size_t n = 0;
  bool converged = false;
  std::size_t iterations = 0;
  /// Infinity norm of the average score at theta_hat, natural coordinates.
  double gradient_norm = 0.0;
};

struct MleOptions {
  double tol = 1e-8;
  std::size_t max_iterations = 200;
};

/// Sum of log-density contributions. Throws InputError for sigma <= 0 or a
/// dimension mismatch.
double tobit_loglik(const ParamVector& theta, const Dataset& data);

/// Score of the total log-likelihood, natural coordinates.
Eigen::VectorXd tobit_score(const ParamVector& theta, const Dataset& data);

/// Hessian of the total log-likelihood, natural coordinates.
Eigen::MatrixXd tobit_hessian(const ParamVector& theta, const Dataset& data);

/// Least squares on the uncensored rows, sigma = residual standard deviation.
ParamVector default_init(const Dataset& data);

/// Newton with backtracking on (beta, alpha, log sigma). A fit that hits the
/// iteration cap comes back with converged = false.
TobitFit tobit_mle(const Dataset& data, const ParamVector& init, const MleOptions& options = {});
TobitFit tobit_mle(const Dataset& data, const MleOptions& options = {});

/// Negative average Hessian at theta. Throws NumericalError if it is not
/// positive definite.
Eigen::MatrixXd fisher_information(const ParamVector& theta, const Dataset& data);

struct QuasiPosterior {
  ParamVector mean;
  /// (n * I)^{-1}.
  Eigen::MatrixXd covariance;

  /// Throws NumericalError if the information is not positive definite.
  static QuasiPosterior from_fit(const TobitFit& fit);
};

/// L iid draws from N(mean, covariance) in (beta, alpha, sigma) coordinates;
/// a draw with sigma <= 0 is discarded and redrawn. Throws NumericalError if
/// the covariance has no Cholesky factor.
std::vector<ParamVector> sample_quasi_posterior(const QuasiPosterior& posterior, std::size_t L,
                                                std::mt19937_64& rng);
std::vector<ParamVector> sample_quasi_posterior(const TobitFit& fit, std::size_t L,
                                                std::mt19937_64& rng);

}  // namespace capassign::tobit
