#include <cmath>

#include "capassign/error.hpp"
#include "capassign/transport.hpp"
#include "transport_internal.hpp"

namespace capassign::transport {

KantorovichSolution wasserstein1_dual(std::span<const double> mu, std::span<const double> nu,
                                      const GroundMetric& metric) {
  const std::size_t n = metric.size();
  if (mu.size() != n || nu.size() != n) {
    throw InputError("wasserstein1: distributions do not match the metric support");
  }
  std::vector<double> gain(n * n);
  const auto d = metric.table();
  for (std::size_t k = 0; k < n * n; ++k) gain[k] = -d[k];
  auto lp = detail::transport_simplex(n, n, gain, mu, nu, 0);
  if (lp.status != SolveStatus::optimal) {
    throw NumericalError("wasserstein1: transport simplex hit its iteration limit");
  }
  KantorovichSolution out;
  out.distance = std::max(0.0, -lp.value);
  out.potential_mu.resize(n);
  out.potential_nu.resize(n);
  for (std::size_t a = 0; a < n; ++a) out.potential_mu[a] = -lp.row_potentials[a];
  for (std::size_t b = 0; b < n; ++b) out.potential_nu[b] = -lp.col_potentials[b];
  return out;
}

double wasserstein1(const DiscreteMarginal& mu, const DiscreteMarginal& nu,
                    const GroundMetric& metric) {
  if (mu.points() != nu.points()) {
    throw InputError("wasserstein1: marginals are supported on different points");
  }
  return wasserstein1_dual(mu.masses(), nu.masses(), metric).distance;
}

double wasserstein1(const Coupling& mu, const Coupling& nu, const GroundMetric& metric) {
  if (mu.rows() != nu.rows() || mu.cols() != nu.cols()) {
    throw InputError("wasserstein1: couplings have different shapes");
  }
  return wasserstein1_dual(mu.mass(), nu.mass(), metric).distance;
}

double penalty_H(const Coupling& mu, const Coupling& reference, const GroundMetric& metric) {
  const double d = wasserstein1(mu, reference, metric);
  return d * d;
}

}  // namespace capassign::transport
