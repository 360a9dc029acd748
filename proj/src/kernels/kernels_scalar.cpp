#include <algorithm>

#include "capassign/kernels.hpp"
#include "capassign/normal.hpp"

namespace capassign::kernels::scalar {

void normal_loss(const double* c, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = normal::loss(c[i]);
  }
}

void tobit_mean(const double* m, double sigma, double tau, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = tau + sigma * normal::loss((tau - m[i]) / sigma);
  }
}

void accumulate_robust(const double* w, double lambda, double eps, const double* floor,
                       double* acc, std::size_t n) {
  const double rest = 1.0 - lambda;
  for (std::size_t i = 0; i < n; ++i) {
    acc[i] += lambda * w[i] + rest * std::max(w[i] - eps, floor[i]);
  }
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += a[i] * b[i];
  }
  return s;
}

}  // namespace capassign::kernels::scalar
