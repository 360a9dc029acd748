#pragma once

#include <span>
#include <vector>

#include "capassign/transport.hpp"

namespace capassign::transport::detail {

struct TransportLpResult {
  std::vector<double> flow;
  std::vector<double> row_potentials;
  std::vector<double> col_potentials;
  double value = 0.0;
  std::size_t iterations = 0;
  SolveStatus status = SolveStatus::optimal;
};

/// max_iterations == 0 selects 10 * (rows * cols)^2.
TransportLpResult transport_simplex(std::size_t rows, std::size_t cols,
                                    std::span<const double> gain, std::span<const double> supply,
                                    std::span<const double> demand, std::size_t max_iterations);

}  // namespace capassign::transport::detail
