#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "capassign/error.hpp"
#include "capassign/transport.hpp"

namespace capassign::transport {

DiscreteMarginal::DiscreteMarginal(std::vector<SupportPoint> points, std::vector<double> masses)
    : points_(std::move(points)), masses_(std::move(masses)) {
  if (points_.size() != masses_.size()) {
    throw InputError("marginal: points and masses differ in length");
  }
  if (masses_.empty()) {
    throw InputError("marginal: empty support");
  }
  double total = 0.0;
  for (double m : masses_) {
    if (!std::isfinite(m) || m < 0.0) {
      throw InputError("marginal: masses must be finite and nonnegative");
    }
    total += m;
  }
  if (std::abs(total - 1.0) > kMassTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "marginal: masses sum to " << total << ", expected 1";
    throw InputError(msg.str());
  }
  std::set<std::string> seen;
  for (const auto& p : points_) {
    if (!seen.insert(p.label).second) {
      throw InputError("marginal: duplicate support label '" + p.label + "'");
    }
  }
}

DiscreteMarginal DiscreteMarginal::bernoulli(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw InputError("bernoulli: p must lie in [0, 1]");
  }
  return DiscreteMarginal({{"0", {0.0}}, {"1", {1.0}}}, {1.0 - p, p});
}

GroundMetric::GroundMetric(std::size_t n, std::vector<double> distances, std::string description)
    : n_(n), d_(std::move(distances)), description_(std::move(description)) {
  if (d_.size() != n_ * n_) {
    throw InputError("metric: table is not n x n");
  }
  for (std::size_t a = 0; a < n_; ++a) {
    if (d_[a * n_ + a] != 0.0) {
      throw InputError("metric: nonzero diagonal");
    }
    for (std::size_t b = 0; b < n_; ++b) {
      const double v = d_[a * n_ + b];
      if (!std::isfinite(v) || v < 0.0) {
        throw InputError("metric: distances must be finite and nonnegative");
      }
      if (v != d_[b * n_ + a]) {
        throw InputError("metric: table is not symmetric");
      }
    }
  }
}

GroundMetric GroundMetric::standardized(const DiscreteMarginal& bins,
                                        const DiscreteMarginal& levels) {
  const std::size_t nb = bins.size();
  const std::size_t nl = levels.size();
  const std::size_t dim = bins.point(0).coords.size();
  for (const auto& p : bins.points()) {
    if (p.coords.size() != dim) {
      throw InputError("metric: bins carry coordinate vectors of different lengths");
    }
  }
  std::vector<double> scale(dim, 1.0);
  for (std::size_t k = 0; k < dim; ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < nb; ++i) mean += bins.mass(i) * bins.point(i).coords[k];
    double var = 0.0;
    for (std::size_t i = 0; i < nb; ++i) {
      const double dx = bins.point(i).coords[k] - mean;
      var += bins.mass(i) * dx * dx;
    }
    if (var > 0.0) scale[k] = 1.0 / std::sqrt(var);
  }
  std::vector<double> bin_dist(nb * nb, 0.0);
  for (std::size_t i = 0; i < nb; ++i) {
    for (std::size_t j = i + 1; j < nb; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double dx = (bins.point(i).coords[k] - bins.point(j).coords[k]) * scale[k];
        s += dx * dx;
      }
      bin_dist[i * nb + j] = bin_dist[j * nb + i] = std::sqrt(s);
    }
  }
  const std::size_t n = nb * nl;
  std::vector<double> d(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t ia = a / nl, ta = a % nl, ib = b / nl, tb = b % nl;
      d[a * n + b] = bin_dist[ia * nb + ib] + (ta == tb ? 0.0 : 1.0);
    }
  }
  return GroundMetric(n, std::move(d), "standardized-euclidean+level-indicator");
}

double GroundMetric::diameter() const {
  return d_.empty() ? 0.0 : *std::max_element(d_.begin(), d_.end());
}

Coupling::Coupling(std::size_t rows, std::size_t cols, std::vector<double> mass)
    : rows_(rows), cols_(cols), mass_(std::move(mass)) {
  if (mass_.size() != rows_ * cols_) {
    throw InputError("coupling: mass table size does not match rows x cols");
  }
  for (double m : mass_) {
    if (!std::isfinite(m) || m < 0.0) {
      throw InputError("coupling: entries must be finite and nonnegative");
    }
  }
}

Coupling Coupling::independent(const DiscreteMarginal& rows, const DiscreteMarginal& cols) {
  std::vector<double> m(rows.size() * cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      m[i * cols.size() + j] = rows.mass(i) * cols.mass(j);
    }
  }
  return Coupling(rows.size(), cols.size(), std::move(m));
}

std::vector<double> Coupling::row_sums() const {
  std::vector<double> s(rows_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) s[i] += mass_[i * cols_ + j];
  }
  return s;
}

std::vector<double> Coupling::col_sums() const {
  std::vector<double> s(cols_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) s[j] += mass_[i * cols_ + j];
  }
  return s;
}

double Coupling::row_error(const DiscreteMarginal& rows) const {
  if (rows.size() != rows_) {
    throw InputError("coupling: row marginal has the wrong size");
  }
  const auto s = row_sums();
  double err = 0.0;
  for (std::size_t i = 0; i < rows_; ++i) err = std::max(err, std::abs(s[i] - rows.mass(i)));
  return err;
}

double Coupling::col_error(const DiscreteMarginal& cols) const {
  if (cols.size() != cols_) {
    throw InputError("coupling: column marginal has the wrong size");
  }
  const auto s = col_sums();
  double err = 0.0;
  for (std::size_t j = 0; j < cols_; ++j) err = std::max(err, std::abs(s[j] - cols.mass(j)));
  return err;
}

double Coupling::marginal_error(const DiscreteMarginal& rows, const DiscreteMarginal& cols) const {
  return std::max(row_error(rows), col_error(cols));
}

double Coupling::conditional(std::size_t i, std::size_t j) const {
  double row = 0.0;
  for (std::size_t k = 0; k < cols_; ++k) row += mass_[i * cols_ + k];
  if (row > 0.0) {
    return mass_[i * cols_ + j] / row;
  }
  const auto c = col_sums();
  const double total = std::accumulate(c.begin(), c.end(), 0.0);
  return total > 0.0 ? c[j] / total : 0.0;
}

Coupling Coupling::mix(const Coupling& other, double t) const {
  if (other.rows_ != rows_ || other.cols_ != cols_) {
    throw InputError("coupling: cannot mix tables of different shapes");
  }
  std::vector<double> m(mass_.size());
  for (std::size_t k = 0; k < m.size(); ++k) {
    m[k] = std::max(0.0, (1.0 - t) * mass_[k] + t * other.mass_[k]);
  }
  return Coupling(rows_, cols_, std::move(m));
}

double Coupling::total_variation(const Coupling& other) const {
  if (other.mass_.size() != mass_.size()) {
    throw InputError("coupling: shapes differ");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < mass_.size(); ++k) s += std::abs(mass_[k] - other.mass_[k]);
  return s;
}

TransportProblem::TransportProblem(std::vector<double> welfare, DiscreteMarginal source,
                                   DiscreteMarginal target)
    : welfare_(std::move(welfare)), source_(std::move(source)), target_(std::move(target)) {
  if (welfare_.size() != source_.size() * target_.size()) {
    throw InputError("transport problem: welfare matrix does not match marginal sizes");
  }
  for (double w : welfare_) {
    if (!std::isfinite(w)) {
      throw InputError("transport problem: welfare entries must be finite");
    }
  }
}

double TransportProblem::value(const Coupling& coupling) const {
  if (coupling.rows() != rows() || coupling.cols() != cols()) {
    throw InputError("transport problem: coupling shape does not match");
  }
  double v = 0.0;
  const auto m = coupling.mass();
  for (std::size_t k = 0; k < m.size(); ++k) v += welfare_[k] * m[k];
  return v;
}

TransportProblem TransportProblem::transformed(double factor, double shift) const {
  std::vector<double> w(welfare_.size());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = factor * welfare_[k] + shift;
  return TransportProblem(std::move(w), source_, target_);
}

const char* to_string(SolveStatus status) {
  return status == SolveStatus::optimal ? "optimal" : "iteration-limit";
}

}  // namespace capassign::transport
