#include <doctest.h>

#include <cmath>
#include <random>

#include "capassign/error.hpp"
#include "capassign/welfare.hpp"
#include "oracles.hpp"

using namespace capassign::welfare;

namespace {

ParamVector theta0() { return ParamVector{{-2.0, -3.0}, 4.0, 10.0}; }

// Welfare as a function of a scalar step along a flattened direction.
double wR_along(const ParamVector& theta, std::span<const double> x, double t,
                std::span<const double> h, const WelfareSpec& spec, std::size_t level, double s) {
  auto flat = theta.flatten();
  for (std::size_t k = 0; k < flat.size(); ++k) flat[k] += s * h[k];
  return robust_welfare_at(ParamVector::from_flat(flat), x, t, spec, level);
}

}  // namespace

TEST_CASE("zero-censored Tobit mean against Monte Carlo") {
  const double x0[] = {0.0, 0.0};
  ParamVector flat{{0.0, 0.0}, 0.0, 10.0};
  CHECK(tobit_mean_zero(flat, x0, 0.0) == doctest::Approx(10.0 / std::sqrt(2.0 * M_PI)).epsilon(1e-14));
  CHECK(std::abs(tobit_mean_zero(flat, x0, 0.0) - oracle::tobit_mean_mc(0.0, 10.0, 0.0, 10000000, 1)) < 5e-3);
  const double x[] = {1.0, 0.0};
  const double w = tobit_mean_zero(theta0(), x, 1.0);
  CHECK(w == doctest::Approx(5.0689).epsilon(1e-4));
  CHECK(std::abs(w - oracle::tobit_mean_mc(2.0, 10.0, 0.0, 10000000, 2)) < 5e-3);
  ParamVector sharp{{50.0}, 0.0, 1.0};
  const double one[] = {1.0};
  CHECK(std::abs(tobit_mean_zero(sharp, one, 0.0) - 50.0) < 1e-10);
}

TEST_CASE("tau-censored Tobit mean") {
  ParamVector p{{3.0}, 1.0, 2.0};
  const double x[] = {1.0};
  const double m = 4.0;
  CHECK(std::abs(tobit_mean_tau(p, x, 1.0, m - 50.0 * 2.0) - m) < 1e-10);
  CHECK(tobit_mean_tau(p, x, 1.0, m) == doctest::Approx(m + 2.0 / std::sqrt(2.0 * M_PI)).epsilon(1e-14));
  CHECK(std::abs(tobit_mean_tau(p, x, 1.0, m) - oracle::tobit_mean_mc(m, 2.0, m, 4000000, 3)) < 5e-3);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int k = 0; k < 1000; ++k) {
    ParamVector q{{u(rng), u(rng)}, u(rng), 0.1 + std::abs(u(rng))};
    const double xs[] = {u(rng), u(rng)};
    const double t = k % 2;
    CHECK(tobit_mean_tau(q, xs, t, 0.0) == tobit_mean_zero(q, xs, t));
    const double mm = q.index(xs, t);
    CHECK(tobit_mean_zero(q, xs, t) >= std::max(0.0, mm) - 1e-12);
  }
}

TEST_CASE("Tobit mean is strictly increasing in the index") {
  double prev = -1.0;
  for (double b = -12.0; b <= 30.0; b += 0.5) {
    ParamVector p{{b}, 0.0, 3.0};
    const double x[] = {1.0};
    const double w = tobit_mean_tau(p, x, 0.0, 1.0);
    CHECK(w > prev);
    CHECK(w >= std::max(1.0, b) - 1e-12);
    prev = w;
  }
}

TEST_CASE("robust welfare branches") {
  WelfareSpec s;
  s.lambda = 1.0;
  CHECK(robust_welfare(3.3, s, 0.0) == 3.3);
  s.lambda = 0.0;
  s.eps_robust = 0.8;
  CHECK(robust_welfare(0.4, s, 0.0) == 0.0);
  CHECK(robust_welfare(3.0, s, 0.0) == doctest::Approx(2.2));
  s.floor = 5.0;
  CHECK(robust_welfare(5.4, s, std::size_t{0}) == 5.0);
  s.level_floors = {1.0, 2.0};
  CHECK(s.floor_for(1) == 2.0);
  CHECK_THROWS_AS(s.floor_for(2), capassign::InputError);
  WelfareSpec bad;
  bad.lambda = 1.5;
  CHECK_THROWS_AS(bad.validate(), capassign::InputError);
  bad.lambda = 0.5;
  bad.eps_robust = 0.0;
  CHECK_THROWS_AS(bad.validate(), capassign::InputError);
}

TEST_CASE("robust welfare is monotone and 1-Lipschitz") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-3, 6), l(0, 1);
  for (int k = 0; k < 2000; ++k) {
    WelfareSpec s;
    s.lambda = l(rng);
    s.eps_robust = 0.1 + l(rng);
    const double a = u(rng), b = u(rng), f = u(rng) / 3.0;
    const double ra = robust_welfare(a, s, f), rb = robust_welfare(b, s, f);
    CHECK(std::abs(ra - rb) <= std::abs(a - b) + 1e-12);
    if (a <= b) CHECK(ra <= rb + 1e-15);
  }
}

TEST_CASE("welfare contrast") {
  WelfareSpec s;
  s.lambda = 0.0;
  s.eps_robust = 0.8;
  ParamVector low{{-20.0, 0.0}, 1.0, 1.0};
  const double x[] = {1.0, 0.0};
  CHECK(welfare_contrast(low, x, s) == 0.0);
  s.lambda = 1.0;
  CHECK(welfare_contrast(theta0(), x, s) ==
        doctest::Approx(tobit_mean_zero(theta0(), x, 1.0) - tobit_mean_zero(theta0(), x, 0.0)));
  const double mc = oracle::tobit_mean_mc(2.0, 10.0, 0.0, 10000000, 7) -
                    oracle::tobit_mean_mc(-2.0, 10.0, 0.0, 10000000, 8);
  CHECK(std::abs(welfare_contrast(theta0(), x, s) - mc) < 1e-2);
}

TEST_CASE("smooth directional derivative matches central differences") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1, 1);
  WelfareSpec s;
  s.lambda = 1.0;
  s.tau = 0.5;
  for (int k = 0; k < 200; ++k) {
    ParamVector p{{3 * u(rng), 3 * u(rng)}, 2 * u(rng), 1.0 + std::abs(3 * u(rng))};
    const double x[] = {2 * u(rng), u(rng) > 0 ? 1.0 : 0.0};
    const double h[] = {u(rng), u(rng), u(rng), u(rng)};
    const double t = k % 2;
    const double analytic = directional_derivative_wR(p, x, t, h, s, 0);
    const double fd = oracle::central_difference(
        [&](double st) { return wR_along(p, x, t, h, s, 0, st); }, 0.0, 1e-6);
    CHECK(analytic == doctest::Approx(fd).epsilon(1e-5).scale(1e-3));
  }
}

TEST_CASE("kink: negative smooth derivative contributes nothing through the max") {
  WelfareSpec s;
  s.lambda = 0.0;
  s.eps_robust = 0.8;
  ParamVector p{{0.0}, 0.0, 1.0};
  const double x[] = {1.0};
  // Place the kink exactly: pick beta so that w - eps = floor.
  double lo = -5.0, hi = 5.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    p.beta[0] = mid;
    (tobit_mean_zero(p, x, 0.0) - 0.8 > 0.0 ? hi : lo) = mid;
  }
  p.beta[0] = 0.5 * (lo + hi);
  const double down[] = {-1.0, 0.0, 0.0};
  const double up[] = {1.0, 0.0, 0.0};
  CHECK(directional_derivative_wR(p, x, 0.0, down, s) == 0.0);
  const double g = tobit_mean_gradient(p, x, 0.0, 0.0)[0];
  CHECK(directional_derivative_wR(p, x, 0.0, up, s) == doctest::Approx(g));
  // Not linear in h: d(h) + d(-h) != 0 at the kink.
  CHECK(directional_derivative_wR(p, x, 0.0, up, s) + directional_derivative_wR(p, x, 0.0, down, s) > 0.0);
}

TEST_CASE("directional derivative is positively homogeneous") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1, 1);
  WelfareSpec s;
  s.lambda = 0.3;
  for (int k = 0; k < 200; ++k) {
    ParamVector p{{2 * u(rng), 2 * u(rng)}, u(rng), 1.0 + std::abs(u(rng))};
    const double x[] = {u(rng), u(rng)};
    const double h[] = {u(rng), u(rng), u(rng), u(rng)};
    const double c = 0.5 + 3 * std::abs(u(rng));
    const double ch[] = {c * h[0], c * h[1], c * h[2], c * h[3]};
    CHECK(directional_derivative_wR(p, x, 1.0, ch, s) ==
          doctest::Approx(c * directional_derivative_wR(p, x, 1.0, h, s)).epsilon(1e-12));
  }
}

TEST_CASE("welfare tables agree with pointwise evaluation") {
  using capassign::transport::DiscreteMarginal;
  const DiscreteMarginal bins({{"a", {1.0, 0.0}}, {"b", {3.0, 1.0}}, {"c", {6.0, 0.0}}}, {0.2, 0.3, 0.5});
  const auto levels = DiscreteMarginal::bernoulli(0.4);
  WelfareSpec s;
  s.lambda = 0.25;
  s.eps_robust = 0.8;
  const auto table = robust_welfare_matrix(theta0(), bins, levels, s);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      CHECK(table[i * 2 + j] ==
            doctest::Approx(robust_welfare_at(theta0(), bins.point(i).coords, double(j), s, j)).epsilon(1e-13));
  std::vector<ParamVector> draws = {theta0(), ParamVector{{-1.0, -2.0}, 3.0, 8.0}};
  WelfareSpec s1 = s;
  s1.lambda = 1.0;
  const WelfareSpec specs[] = {s, s1};
  const auto avg = averaged_welfare_matrices(draws, bins, levels, specs);
  const auto t2 = robust_welfare_matrix(draws[1], bins, levels, s1);
  const auto t1 = robust_welfare_matrix(draws[0], bins, levels, s1);
  for (std::size_t k = 0; k < 6; ++k) CHECK(avg[1][k] == doctest::Approx(0.5 * (t1[k] + t2[k])));
}
