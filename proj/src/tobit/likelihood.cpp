#include <cmath>
#include <string>

#include "capassign/error.hpp"
#include "capassign/normal.hpp"
#include "tobit_internal.hpp"

namespace capassign::tobit {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

void check_theta(const ParamVector& theta, const Dataset& data) {
  theta.validate();
  if (theta.beta.size() != data.dim())
    throw InputError("beta has " + std::to_string(theta.beta.size()) +
                     " entries but the data has " + std::to_string(data.dim()) + " covariates");
}

}  // namespace

Dataset::Dataset(std::vector<Observation> rows, double tau) : rows_(std::move(rows)), tau_(tau) {
  if (!std::isfinite(tau_)) throw InputError("censor point must be finite");
  if (rows_.empty()) throw InputError("dataset is empty");
  dim_ = rows_[0].x.size();
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& r = rows_[i];
    if (r.x.size() != dim_)
      throw InputError("row " + std::to_string(i) + " has " + std::to_string(r.x.size()) +
                       " covariates, expected " + std::to_string(dim_));
    if (!std::isfinite(r.y) || !std::isfinite(r.t))
      throw InputError("row " + std::to_string(i) + " has a non-finite entry");
    for (double v : r.x)
      if (!std::isfinite(v)) throw InputError("row " + std::to_string(i) + " has a non-finite entry");
    if (r.y < tau_)
      throw InputError("row " + std::to_string(i) + " has y below the censor point");
  }
  if (rows_.size() < num_params())
    throw InputError("need at least " + std::to_string(num_params()) + " rows, got " +
                     std::to_string(rows_.size()));
}

std::size_t Dataset::censored_count() const {
  std::size_t c = 0;
  for (std::size_t i = 0; i < size(); ++i) c += censored(i);
  return c;
}

double tobit_loglik(const ParamVector& theta, const Dataset& data) {
  check_theta(theta, data);
  const double sigma = theta.sigma, log_sigma = std::log(sigma);
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data.row(i);
    const double m = theta.index(r.x, r.t);
    if (data.censored(i)) {
      total += normal::log_cdf((data.tau() - m) / sigma);
    } else {
      const double e = (r.y - m) / sigma;
      total += -0.5 * e * e - kHalfLog2Pi - log_sigma;
    }
  }
  return total;
}

namespace detail {

LogSigmaDerivatives log_sigma_derivatives(const ParamVector& theta, const Dataset& data,
                                          bool with_hessian) {
  check_theta(theta, data);
  const std::size_t k = data.num_params(), p = k - 1;
  const double sigma = theta.sigma, log_sigma = std::log(sigma);
  LogSigmaDerivatives d;
  d.grad = Eigen::VectorXd::Zero(k);
  if (with_hessian) d.hess = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd r(p);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& row = data.row(i);
    for (std::size_t j = 0; j + 1 < p; ++j) r[j] = row.x[j];
    r[p - 1] = row.t;
    const double m = theta.index(row.x, row.t);
    double gz, gs, hzz, hzs, hss;
    if (data.censored(i)) {
      const double c = (data.tau() - m) / sigma;
      const double lam = normal::inverse_mills(c);
      const double bend = 1.0 - c * (c + lam);
      d.value += normal::log_cdf(c);
      gz = -lam / sigma;
      gs = -lam * c;
      hzz = -lam * (c + lam) / (sigma * sigma);
      hzs = lam * bend / sigma;
      hss = lam * c * bend;
    } else {
      const double e = (row.y - m) / sigma;
      d.value += -0.5 * e * e - kHalfLog2Pi - log_sigma;
      gz = e / sigma;
      gs = e * e - 1.0;
      hzz = -1.0 / (sigma * sigma);
      hzs = -2.0 * e / sigma;
      hss = -2.0 * e * e;
    }
    d.grad.head(p) += gz * r;
    d.grad[p] += gs;
    if (with_hessian) {
      d.hess.topLeftCorner(p, p).noalias() += hzz * r * r.transpose();
      d.hess.col(p).head(p) += hzs * r;
      d.hess(p, p) += hss;
    }
  }
  if (with_hessian) d.hess.row(p).head(p) = d.hess.col(p).head(p).transpose();
  return d;
}

Eigen::VectorXd natural_gradient(const LogSigmaDerivatives& d, double sigma) {
  Eigen::VectorXd g = d.grad;
  g[g.size() - 1] /= sigma;
  return g;
}

Eigen::MatrixXd natural_hessian(const LogSigmaDerivatives& d, double sigma) {
  const Eigen::Index p = d.grad.size() - 1;
  Eigen::MatrixXd h = d.hess;
  h.col(p).head(p) /= sigma;
  h.row(p).head(p) /= sigma;
  h(p, p) = (d.hess(p, p) - d.grad[p]) / (sigma * sigma);
  return h;
}

}  // namespace detail

Eigen::VectorXd tobit_score(const ParamVector& theta, const Dataset& data) {
  return detail::natural_gradient(detail::log_sigma_derivatives(theta, data, false), theta.sigma);
}

Eigen::MatrixXd tobit_hessian(const ParamVector& theta, const Dataset& data) {
  return detail::natural_hessian(detail::log_sigma_derivatives(theta, data, true), theta.sigma);
}

}  // namespace capassign::tobit
