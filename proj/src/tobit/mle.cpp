#include <cmath>

#include "capassign/error.hpp"
#include "tobit_internal.hpp"

namespace capassign::tobit {

namespace {

bool positive_definite(const Eigen::MatrixXd& a) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  return llt.info() == Eigen::Success;
}

ParamVector with_log_sigma(const Eigen::VectorXd& zs) {
  ParamVector p;
  const Eigen::Index k = zs.size();
  p.beta.assign(zs.data(), zs.data() + (k - 2));
  p.alpha = zs[k - 2];
  p.sigma = std::exp(zs[k - 1]);
  return p;
}

Eigen::VectorXd to_log_sigma(const ParamVector& theta) {
  const auto flat = theta.flatten();
  Eigen::VectorXd zs = Eigen::Map<const Eigen::VectorXd>(flat.data(), flat.size());
  zs[zs.size() - 1] = std::log(theta.sigma);
  return zs;
}

}  // namespace

ParamVector default_init(const Dataset& data) {
  const std::size_t p = data.dim() + 1;
  const std::size_t nu = data.size() - data.censored_count();
  ParamVector init;
  init.beta.assign(data.dim(), 0.0);
  if (nu > p) {
    Eigen::MatrixXd r(nu, p);
    Eigen::VectorXd y(nu);
    std::size_t row = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.censored(i)) continue;
      const auto& o = data.row(i);
      for (std::size_t j = 0; j < data.dim(); ++j) r(row, j) = o.x[j];
      r(row, p - 1) = o.t;
      y[row++] = o.y;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(r);
    if (qr.rank() == static_cast<Eigen::Index>(p)) {
      const Eigen::VectorXd b = qr.solve(y);
      const double rss = (y - r * b).squaredNorm();
      for (std::size_t j = 0; j < data.dim(); ++j) init.beta[j] = b[j];
      init.alpha = b[p - 1];
      init.sigma = std::sqrt(rss / static_cast<double>(nu));
      if (init.sigma > 0.0 && std::isfinite(init.sigma)) return init;
    }
  }
  // Degenerate uncensored part: start from a flat mean.
  double mean = 0.0, sq = 0.0;
  for (const auto& o : data.rows()) mean += o.y;
  mean /= static_cast<double>(data.size());
  for (const auto& o : data.rows()) sq += (o.y - mean) * (o.y - mean);
  init.beta.assign(data.dim(), 0.0);
  init.alpha = 0.0;
  init.sigma = std::max(std::sqrt(sq / static_cast<double>(data.size())), 1e-3);
  return init;
}

TobitFit tobit_mle(const Dataset& data, const MleOptions& options) {
  return tobit_mle(data, default_init(data), options);
}

TobitFit tobit_mle(const Dataset& data, const ParamVector& init, const MleOptions& options) {
  if (!(options.tol > 0.0)) throw InputError("tolerance must be positive");
  const double n = static_cast<double>(data.size());
  const std::size_t k = data.num_params();
  Eigen::VectorXd zs = to_log_sigma(init);
  ParamVector theta = init;
  auto d = detail::log_sigma_derivatives(theta, data, true);
  if (!std::isfinite(d.value)) throw NumericalError("log-likelihood is not finite at the start");

  TobitFit fit;
  fit.n = data.size();
  std::size_t it = 0;
  auto gnorm = [&] { return (detail::natural_gradient(d, theta.sigma) / n).lpNorm<Eigen::Infinity>(); };
  while (gnorm() >= options.tol && it < options.max_iterations) {
    ++it;
    // Newton direction on the negative Hessian, damped until positive definite.
    Eigen::MatrixXd neg = -d.hess;
    const double scale = std::max(1.0, neg.diagonal().cwiseAbs().maxCoeff());
    double damp = 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt(neg);
    while (llt.info() != Eigen::Success) {
      damp = damp == 0.0 ? 1e-8 * scale : damp * 10.0;
      if (damp > 1e12 * scale) throw NumericalError("could not regularize the Tobit Hessian");
      llt.compute(neg + damp * Eigen::MatrixXd::Identity(k, k));
    }
    const Eigen::VectorXd step = llt.solve(d.grad);
    const double slope = d.grad.dot(step);
    double t = 1.0;
    bool accepted = false;
    for (int half = 0; half < 60; ++half, t *= 0.5) {
      const Eigen::VectorXd cand = zs + t * step;
      const ParamVector ct = with_log_sigma(cand);
      if (!std::isfinite(ct.sigma) || ct.sigma <= 0.0) continue;
      auto cd = detail::log_sigma_derivatives(ct, data, true);
      if (std::isfinite(cd.value) && cd.value >= d.value + 1e-4 * t * slope) {
        zs = cand;
        theta = ct;
        d = std::move(cd);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }

  fit.theta_hat = theta;
  fit.loglik = d.value;
  fit.iterations = it;
  fit.gradient_norm = gnorm();
  fit.fisher = -detail::natural_hessian(d, theta.sigma) / n;
  fit.converged = fit.gradient_norm < options.tol && positive_definite(fit.fisher);
  return fit;
}

Eigen::MatrixXd fisher_information(const ParamVector& theta, const Dataset& data) {
  Eigen::MatrixXd info = -tobit_hessian(theta, data) / static_cast<double>(data.size());
  if (!positive_definite(info))
    throw NumericalError("information matrix is not positive definite (degenerate data?)");
  return info;
}

}  // namespace capassign::tobit
