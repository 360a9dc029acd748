#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "capassign/error.hpp"
#include "capassign/harness.hpp"
#include "capassign/random.hpp"
#include "capassign/tobit.hpp"
#include "oracles.hpp"

using namespace capassign::tobit;
using capassign::welfare::ParamVector;

namespace {

Dataset gaussian_data(std::size_t n, std::uint64_t seed, double tau = -1e6) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<Observation> rows;
  for (std::size_t i = 0; i < n; ++i) {
    Observation o;
    o.x = {1.0, z(rng)};
    o.t = static_cast<double>(i % 2);
    o.y = 1.0 + 0.5 * o.x[1] + 2.0 * o.t + 1.5 * z(rng);
    rows.push_back(o);
  }
  return Dataset(rows, tau);
}

// Log-likelihood written straight from the censored density.
double loglik_oracle(const ParamVector& p, const Dataset& d) {
  double s = 0.0;
  for (const auto& o : d.rows()) {
    const double m = p.beta[0] * o.x[0] + p.beta[1] * o.x[1] + p.alpha * o.t;
    if (o.y <= d.tau())
      s += std::log(0.5 * std::erfc(-(d.tau() - m) / p.sigma / std::sqrt(2.0)));
    else
      s += std::log(std::exp(-0.5 * std::pow((o.y - m) / p.sigma, 2)) / (p.sigma * std::sqrt(2 * M_PI)));
  }
  return s;
}

Dataset censored_data(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<Observation> rows;
  for (std::size_t i = 0; i < n; ++i) {
    Observation o;
    o.x = {1.0, z(rng)};
    o.t = static_cast<double>(i % 2);
    o.y = std::max(0.5, 0.3 + 0.8 * o.x[1] + 1.0 * o.t + 1.2 * z(rng));
    rows.push_back(o);
  }
  return Dataset(rows, 0.5);
}

}  // namespace

TEST_CASE("dataset validation") {
  CHECK_THROWS_AS(Dataset({{0.0, {1.0}, 0.0}}, 0.0), capassign::InputError);
  std::vector<Observation> rows(5, {1.0, {1.0}, 0.0});
  rows[2].y = -1.0;
  CHECK_THROWS_AS(Dataset(rows, 0.0), capassign::InputError);
  rows[2].y = 1.0;
  rows[3].x = {1.0, 2.0};
  CHECK_THROWS_AS(Dataset(rows, 0.0), capassign::InputError);
}

TEST_CASE("log-likelihood: uncensored is Gaussian, censored at the mean is log 1/2") {
  const auto d = gaussian_data(50, 1);
  ParamVector p{{0.9, 0.4}, 1.8, 1.3};
  CHECK(tobit_loglik(p, d) == doctest::Approx(loglik_oracle(p, d)).epsilon(1e-12));
  std::vector<Observation> one(4, {2.0, {1.0}, 0.0});
  one[0].y = 1.0;
  ParamVector q{{1.0}, 0.0, 3.0};
  Dataset cd(one, 1.0);
  const double uncensored = 3.0 * (-0.5 * std::pow(1.0 / 3.0, 2) - std::log(3.0 * std::sqrt(2 * M_PI)));
  CHECK(tobit_loglik(q, cd) == doctest::Approx(std::log(0.5) + uncensored).epsilon(1e-13));
  const auto c = censored_data(60, 2);
  ParamVector r{{0.2, 0.7}, 1.1, 1.4};
  CHECK(tobit_loglik(r, c) == doctest::Approx(loglik_oracle(r, c)).epsilon(1e-12));
  ParamVector bad = r;
  bad.sigma = 0.0;
  CHECK_THROWS_AS(tobit_loglik(bad, c), capassign::InputError);
}

TEST_CASE("uncensored MLE is least squares with sigma^2 = RSS / n") {
  const auto d = gaussian_data(400, 3);
  const auto fit = tobit_mle(d);
  REQUIRE(fit.converged);
  Eigen::MatrixXd X(d.size(), 3);
  Eigen::VectorXd y(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    X.row(i) << d.row(i).x[0], d.row(i).x[1], d.row(i).t;
    y[i] = d.row(i).y;
  }
  const Eigen::VectorXd b = (X.transpose() * X).ldlt().solve(X.transpose() * y);
  const double rss = (y - X * b).squaredNorm();
  CHECK(fit.theta_hat.beta[0] == doctest::Approx(b[0]).epsilon(1e-6));
  CHECK(fit.theta_hat.beta[1] == doctest::Approx(b[1]).epsilon(1e-6));
  CHECK(fit.theta_hat.alpha == doctest::Approx(b[2]).epsilon(1e-6));
  CHECK(fit.theta_hat.sigma * fit.theta_hat.sigma == doctest::Approx(rss / d.size()).epsilon(1e-6));

  // Gaussian information: X'X / (n sigma^2) block, 2 / sigma^2 for sigma.
  const double s2 = rss / d.size();
  const Eigen::MatrixXd block = X.transpose() * X / (d.size() * s2);
  for (int a = 0; a < 3; ++a)
    for (int c = 0; c < 3; ++c) CHECK(fit.fisher(a, c) == doctest::Approx(block(a, c)).epsilon(1e-6));
  CHECK(fit.fisher(3, 3) == doctest::Approx(2.0 / s2).epsilon(1e-6));
  for (int a = 0; a < 3; ++a) CHECK(std::abs(fit.fisher(a, 3)) < 1e-6);
}

TEST_CASE("censored MLE: score vanishes, loglik improves on the start, Hessian matches differences") {
  const auto d = censored_data(300, 4);
  CHECK(d.censored_count() > 30);
  const auto init = default_init(d);
  const auto fit = tobit_mle(d, init);
  REQUIRE(fit.converged);
  CHECK(fit.gradient_norm < 1e-8);
  CHECK(fit.loglik >= tobit_loglik(init, d));
  CHECK(tobit_score(fit.theta_hat, d).lpNorm<Eigen::Infinity>() / d.size() < 1e-8);

  const ParamVector p{{0.1, 0.6}, 0.9, 1.1};
  const Eigen::MatrixXd H = tobit_hessian(p, d);
  const auto flat = p.flatten();
  for (std::size_t k = 0; k < flat.size(); ++k) {
    auto plus = flat, minus = flat;
    const double step = 1e-5;
    plus[k] += step;
    minus[k] -= step;
    const Eigen::VectorXd col = (tobit_score(ParamVector::from_flat(plus), d) -
                                 tobit_score(ParamVector::from_flat(minus), d)) / (2 * step);
    for (std::size_t r = 0; r < flat.size(); ++r)
      CHECK(H(r, k) == doctest::Approx(col[r]).epsilon(1e-4).scale(1.0));
  }
  const Eigen::VectorXd g = tobit_score(p, d);
  for (std::size_t k = 0; k < flat.size(); ++k) {
    const double fd = oracle::central_difference(
        [&](double s) {
          auto q = flat;
          q[k] += s;
          return tobit_loglik(ParamVector::from_flat(q), d);
        },
        0.0, 1e-6);
    CHECK(g[k] == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("information: symmetric, positive definite, additive over duplicated rows") {
  const auto d = censored_data(200, 5);
  const auto fit = tobit_mle(d);
  REQUIRE(fit.converged);
  CHECK((fit.fisher - fit.fisher.transpose()).norm() < 1e-12);
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(fit.fisher).eigenvalues().minCoeff() > 0.0);
  auto rows = d.rows();
  rows.insert(rows.end(), d.rows().begin(), d.rows().end());
  const Dataset twice(rows, d.tau());
  const Eigen::MatrixXd total1 = -tobit_hessian(fit.theta_hat, d);
  const Eigen::MatrixXd total2 = -tobit_hessian(fit.theta_hat, twice);
  CHECK((total2 - 2.0 * total1).norm() <= 1e-10 * total1.norm());
  CHECK((fisher_information(fit.theta_hat, twice) - fisher_information(fit.theta_hat, d)).norm() <
        1e-10 * total1.norm());
}

TEST_CASE("row permutation and outcome shift invariance") {
  const auto d = censored_data(150, 6);
  auto rows = d.rows();
  std::mt19937_64 rng(1);
  std::shuffle(rows.begin(), rows.end(), rng);
  const Dataset perm(rows, d.tau());
  const auto a = tobit_mle(d), b = tobit_mle(perm);
  CHECK(a.loglik == doctest::Approx(b.loglik).epsilon(1e-12));
  for (std::size_t k = 0; k < a.theta_hat.size(); ++k)
    CHECK(a.theta_hat.flatten()[k] == doctest::Approx(b.theta_hat.flatten()[k]).epsilon(1e-9));

  auto shifted = d.rows();
  for (auto& o : shifted) o.y += 3.0;
  const auto c = tobit_mle(Dataset(shifted, d.tau() + 3.0));
  CHECK(c.theta_hat.beta[0] == doctest::Approx(a.theta_hat.beta[0] + 3.0).epsilon(1e-8));
  CHECK(c.theta_hat.beta[1] == doctest::Approx(a.theta_hat.beta[1]).epsilon(1e-8));
  CHECK(c.theta_hat.sigma == doctest::Approx(a.theta_hat.sigma).epsilon(1e-8));
}

TEST_CASE("simulation design: n = 5000 recovers theta0 within 3 standard errors") {
  namespace h = capassign::harness;
  const ParamVector theta0{{-2.0, -3.0}, 4.0, 10.0};
  std::mt19937_64 rng(2024);
  const auto data = h::sample_training_data(theta0, 5000, rng);
  const auto fit = tobit_mle(data);
  REQUIRE(fit.converged);
  const auto post = QuasiPosterior::from_fit(fit);
  const auto est = fit.theta_hat.flatten(), truth = theta0.flatten();
  for (std::size_t k = 0; k < est.size(); ++k)
    CHECK(std::abs(est[k] - truth[k]) < 3.0 * std::sqrt(post.covariance(k, k)));
}

TEST_CASE("quasi-posterior draws: moments, determinism, degenerate limit") {
  const auto d = censored_data(400, 7);
  const auto fit = tobit_mle(d);
  REQUIRE(fit.converged);
  const auto post = QuasiPosterior::from_fit(fit);
  std::mt19937_64 rng(99);
  const std::size_t L = 100000;
  const auto draws = sample_quasi_posterior(post, L, rng);
  const auto mean = post.mean.flatten();
  std::vector<double> avg(mean.size(), 0.0);
  for (const auto& p : draws) {
    CHECK_FALSE(p.sigma <= 0.0);
    const auto f = p.flatten();
    for (std::size_t k = 0; k < f.size(); ++k) avg[k] += f[k] / L;
  }
  for (std::size_t k = 0; k < mean.size(); ++k)
    CHECK(std::abs(avg[k] - mean[k]) < 4.0 * std::sqrt(post.covariance(k, k) / L));

  std::mt19937_64 r1(5), r2(5);
  const auto a = sample_quasi_posterior(post, 10, r1), b = sample_quasi_posterior(post, 10, r2);
  for (std::size_t i = 0; i < 10; ++i) CHECK(a[i] == b[i]);

  QuasiPosterior tight = post;
  tight.covariance *= 1e-20;
  std::mt19937_64 r3(6);
  for (const auto& p : sample_quasi_posterior(tight, 20, r3))
    for (std::size_t k = 0; k < mean.size(); ++k) CHECK(p.flatten()[k] == doctest::Approx(mean[k]).epsilon(1e-8));

  QuasiPosterior broken = post;
  broken.covariance(0, 0) = -1.0;
  CHECK_THROWS_AS(sample_quasi_posterior(broken, 3, r3), capassign::NumericalError);
}
