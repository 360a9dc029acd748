#include "capassign/normal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/erf.hpp>

#include "capassign/error.hpp"

namespace capassign::normal {

namespace {

// Below this point erfc underflows; switch to the asymptotic Mills series.
constexpr double kTailSwitch = -37.0;

// 1 - 1/x^2 + 3/x^4 - 15/x^6 + 105/x^8, the asymptotic factor in
// Phi(x) ~ phi(x) / |x| * series(x) as x -> -inf.
double tail_series(double x) {
  const double r = 1.0 / (x * x);
  return 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)));
}

}  // namespace

double pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double sf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

double log_cdf(double x) {
  if (x > kTailSwitch) {
    return std::log(cdf(x));
  }
  return -0.5 * x * x - std::log(-x) + std::log(kInvSqrt2Pi) + std::log(tail_series(x));
}

double inverse_mills(double x) {
  if (x > kTailSwitch) {
    return pdf(x) / cdf(x);
  }
  return -x / tail_series(x);
}

double quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw InputError("normal quantile requires p in (0, 1)");
  }
  return -kSqrt2 * boost::math::erfc_inv(2.0 * p);
}

double loss(double c) {
  return std::max(0.0, pdf(c) - c * sf(c));
}

}  // namespace capassign::normal
