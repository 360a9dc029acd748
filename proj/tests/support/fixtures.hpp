#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "capassign/transport.hpp"

namespace fixtures {

using capassign::transport::DiscreteMarginal;
using capassign::transport::SupportPoint;

/// Labels prefix0, prefix1, ...; coordinate k for point k unless given.
inline DiscreteMarginal marginal(const std::vector<double>& masses, const std::string& prefix = "b",
                                 std::vector<std::vector<double>> coords = {}) {
  std::vector<SupportPoint> pts;
  for (std::size_t k = 0; k < masses.size(); ++k)
    pts.push_back({prefix + std::to_string(k),
                   coords.empty() ? std::vector<double>{static_cast<double>(k)} : coords[k]});
  return DiscreteMarginal(std::move(pts), masses);
}

/// Random welfare table; with `ties`, entries are small integers.
inline std::vector<double> random_welfare(std::mt19937_64& rng, std::size_t n, bool ties) {
  std::vector<double> w(n);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_int_distribution<int> k(-2, 2);
  for (auto& x : w) x = ties ? k(rng) : u(rng);
  return w;
}

// Three bins on a line with distinct spacings below 1, two levels.
struct TieInstance {
  capassign::transport::TransportProblem problem;
  capassign::transport::GroundMetric metric;
  capassign::transport::Coupling reference;
};

inline TieInstance tie_instance(double a, double b, double f1, double nu1) {
  const auto bins = marginal({f1, (1.0 - f1) / 2.0, (1.0 - f1) / 2.0}, "x", {{0.0}, {0.3}, {0.7}});
  const auto levels = capassign::transport::DiscreteMarginal::bernoulli(nu1);
  std::vector<double> w = {0.0, a, 0.0, b, 0.0, b};
  std::vector<double> d(36);
  const double x[3] = {0.0, 0.3, 0.7};
  for (std::size_t p = 0; p < 6; ++p)
    for (std::size_t q = 0; q < 6; ++q)
      d[p * 6 + q] = std::abs(x[p / 2] - x[q / 2]) + (p % 2 != q % 2 ? 1.0 : 0.0);
  capassign::transport::TransportProblem problem(w, bins, levels);
  return {problem, capassign::transport::GroundMetric(6, d, "line+indicator"),
          capassign::transport::Coupling::independent(bins, levels)};
}

}  // namespace fixtures
