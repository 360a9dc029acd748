#include <cmath>
#include <string>

#include "capassign/error.hpp"
#include "capassign/harness.hpp"
#include "capassign/normal.hpp"

namespace capassign::harness {

ApplicationSetup application_standin(double age_mean, double age_sd, double male_share,
                                     std::size_t n) {
  if (!(age_sd > 0.0)) throw InputError("age sd must be positive");
  if (!(male_share > 0.0 && male_share < 1.0)) throw InputError("male share must lie in (0, 1)");
  if (n < 5) throw InputError("sample size too small");

  // Integer ages 10..17; each takes the normal mass of [age - 0.5, age + 0.5),
  // with the tails folded into the end ages.
  constexpr int kFirst = 10, kLast = 17;
  std::vector<double> age_mass;
  for (int a = kFirst; a <= kLast; ++a) {
    const double lo = a == kFirst ? 0.0 : normal::cdf((a - 0.5 - age_mean) / age_sd);
    const double hi = a == kLast ? 1.0 : normal::cdf((a + 0.5 - age_mean) / age_sd);
    age_mass.push_back(hi - lo);
  }
  std::vector<transport::SupportPoint> points;
  std::vector<double> masses;
  for (int g = 0; g < 2; ++g) {
    const double share = g == 1 ? male_share : 1.0 - male_share;
    for (int a = kFirst; a <= kLast; ++a) {
      points.push_back({std::string(g == 1 ? "male" : "female") + "_age" + std::to_string(a),
                        {1.0, static_cast<double>(a), static_cast<double>(g)}});
      masses.push_back(share * age_mass[a - kFirst]);
    }
  }
  // Renormalize away rounding so the total is 1 to machine precision.
  double total = 0.0;
  for (double m : masses) total += m;
  for (double& m : masses) m /= total;

  ApplicationSetup setup;
  setup.grid = transport::DiscreteMarginal(std::move(points), std::move(masses));

  // Point estimates: const, age, gender (beta), voucher (alpha), sigma^2.
  const double sigma2 = 104.31;
  auto& fit = setup.fit;
  fit.theta_hat.beta = {102.77, -5.5, -0.72};
  fit.theta_hat.alpha = 2.06;
  fit.theta_hat.sigma = std::sqrt(sigma2);
  fit.n = n;
  fit.converged = true;
  // Standard errors in (const, age, gender, voucher, sigma); sigma's from
  // sigma^2's by the delta method.
  const double se[5] = {2.87, 0.24, 0.44, 0.46, 5.17 / (2.0 * std::sqrt(sigma2))};
  fit.fisher = Eigen::MatrixXd::Zero(5, 5);
  for (int k = 0; k < 5; ++k) fit.fisher(k, k) = 1.0 / (se[k] * se[k] * static_cast<double>(n));
  // Calibrated so that, at epsilon = 3.5, the treated arm's w_R is censored
  // from age 13 for females and age 12 for males.
  setup.tau = 39.6;
  return setup;
}

}  // namespace capassign::harness
