#include "capassign/error.hpp"
#include "capassign/random.hpp"
#include "capassign/tobit.hpp"

namespace capassign::tobit {

QuasiPosterior QuasiPosterior::from_fit(const TobitFit& fit) {
  if (fit.n == 0) throw InputError("fit has no observations");
  const Eigen::MatrixXd total = fit.fisher * static_cast<double>(fit.n);
  Eigen::LLT<Eigen::MatrixXd> llt(total);
  if (llt.info() != Eigen::Success)
    throw NumericalError("information matrix is not positive definite");
  QuasiPosterior q;
  q.mean = fit.theta_hat;
  q.covariance = llt.solve(Eigen::MatrixXd::Identity(total.rows(), total.cols()));
  q.covariance = 0.5 * (q.covariance + q.covariance.transpose()).eval();
  return q;
}

std::vector<ParamVector> sample_quasi_posterior(const QuasiPosterior& posterior, std::size_t L,
                                                std::mt19937_64& rng) {
  posterior.mean.validate();
  const std::size_t k = posterior.mean.size();
  if (static_cast<std::size_t>(posterior.covariance.rows()) != k ||
      static_cast<std::size_t>(posterior.covariance.cols()) != k)
    throw InputError("posterior covariance has the wrong shape");
  Eigen::LLT<Eigen::MatrixXd> llt(posterior.covariance);
  if (llt.info() != Eigen::Success)
    throw NumericalError("posterior covariance has no Cholesky factor");
  const Eigen::MatrixXd chol = llt.matrixL();
  const auto flat = posterior.mean.flatten();
  const Eigen::VectorXd mean = Eigen::Map<const Eigen::VectorXd>(flat.data(), flat.size());

  std::vector<ParamVector> draws;
  draws.reserve(L);
  Eigen::VectorXd z(k);
  std::size_t rejected = 0;
  while (draws.size() < L) {
    for (std::size_t j = 0; j < k; ++j) z[j] = random::standard_normal(rng);
    const Eigen::VectorXd v = mean + chol * z;
    if (!(v[k - 1] > 0.0)) {
      if (++rejected > 1000 + 100 * L)
        throw NumericalError("posterior puts almost no mass on sigma > 0");
      continue;
    }
    draws.push_back(ParamVector::from_flat(std::span<const double>(v.data(), k)));
  }
  return draws;
}

std::vector<ParamVector> sample_quasi_posterior(const TobitFit& fit, std::size_t L,
                                                std::mt19937_64& rng) {
  return sample_quasi_posterior(QuasiPosterior::from_fit(fit), L, rng);
}

}  // namespace capassign::tobit
