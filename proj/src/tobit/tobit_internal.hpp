#pragma once

#include <Eigen/Dense>

#include "capassign/tobit.hpp"

namespace capassign::tobit::detail {

/// Total log-likelihood with derivatives in (beta, alpha, s = log sigma).
struct LogSigmaDerivatives {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

LogSigmaDerivatives log_sigma_derivatives(const ParamVector& theta, const Dataset& data,
                                          bool with_hessian);

/// Converts derivatives in (z, log sigma) to (z, sigma).
Eigen::VectorXd natural_gradient(const LogSigmaDerivatives& d, double sigma);
Eigen::MatrixXd natural_hessian(const LogSigmaDerivatives& d, double sigma);

}  // namespace capassign::tobit::detail
