#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "capassign/error.hpp"
#include "capassign/kernels.hpp"
#include "capassign/normal.hpp"
#include "oracles.hpp"

namespace normal = capassign::normal;
namespace kernels = capassign::kernels;

TEST_CASE("normal cdf matches Simpson quadrature of the density") {
  for (double x : {-6.0, -3.3, -1.0, -0.25, 0.0, 0.4, 1.7, 2.5, 5.0}) {
    CHECK(normal::cdf(x) == doctest::Approx(oracle::normal_cdf_quadrature(x)).epsilon(1e-12));
    CHECK(normal::sf(x) == doctest::Approx(normal::cdf(-x)).epsilon(1e-15));
  }
}

TEST_CASE("log cdf and inverse Mills ratio stay finite and continuous in the far tail") {
  CHECK(normal::log_cdf(-20.0) == doctest::Approx(std::log(normal::cdf(-20.0))).epsilon(1e-13));
  const double below = normal::log_cdf(-37.0 - 1e-9), above = normal::log_cdf(-37.0 + 1e-9);
  CHECK(std::abs(below - above) < 1e-6);
  CHECK(std::isfinite(normal::log_cdf(-1e4)));
  CHECK(normal::inverse_mills(-1e4) == doctest::Approx(1e4).epsilon(1e-8));
  CHECK(normal::inverse_mills(0.0) == doctest::Approx(2.0 * normal::pdf(0.0)));
  const double im_lo = normal::inverse_mills(-37.0 - 1e-9), im_hi = normal::inverse_mills(-37.0 + 1e-9);
  CHECK(im_lo == doctest::Approx(im_hi).epsilon(1e-9));
  CHECK(normal::log_cdf(30.0) == doctest::Approx(0.0));
}

TEST_CASE("quantile inverts the cdf") {
  for (double p : {1e-12, 1e-6, 0.01, 0.3, 0.5, 0.77, 0.999}) {
    CHECK(normal::cdf(normal::quantile(p)) == doctest::Approx(p).epsilon(1e-12));
  }
  CHECK_THROWS_AS(normal::quantile(0.0), capassign::InputError);
  CHECK_THROWS_AS(normal::quantile(1.0), capassign::InputError);
}

TEST_CASE("expected loss satisfies loss(c) - loss(-c) = -c and loss(0) = phi(0)") {
  CHECK(normal::loss(0.0) == doctest::Approx(normal::kInvSqrt2Pi).epsilon(1e-15));
  for (double c : {0.1, 0.8, 2.0, 5.0, 12.0})
    CHECK(normal::loss(c) - normal::loss(-c) == doctest::Approx(-c).epsilon(1e-13));
  CHECK(normal::loss(40.0) >= 0.0);
}

TEST_CASE("both kernel backends report availability consistently") {
  CHECK(kernels::backend_available(kernels::Backend::scalar));
  CHECK(kernels::parse_backend("scalar") == kernels::Backend::scalar);
  CHECK_THROWS_AS(kernels::parse_backend("neon"), capassign::InputError);
}

namespace {

std::vector<double> probe_points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> wide(-40.0, 40.0), narrow(-3.0, 3.0);
  std::vector<double> c = {0.0, -0.0, 0.5, -0.5, 1.0, -1.0, 8.0, -8.0, 26.0, -26.0, 37.5, -37.5,
                           1e-300, -1e-300, 0.7071067811865476, 5.656854249492381};
  while (c.size() < n) c.push_back(c.size() % 2 ? wide(rng) : narrow(rng));
  return c;
}

bool close(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + 1e-300;
}

}  // namespace

TEST_CASE("AVX2 kernels agree with the scalar reference") {
  if (!kernels::backend_available(kernels::Backend::avx2)) {
    MESSAGE("AVX2 not available on this CPU; equivalence test skipped");
    return;
  }
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 1001u, 20000u}) {
    const auto c = probe_points(n, 17 + n);
    std::vector<double> a(c.size()), b(c.size());
    kernels::scalar::normal_loss(c.data(), a.data(), c.size());
    kernels::avx2::normal_loss(c.data(), b.data(), c.size());
    std::size_t bad = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      // Cancellation in phi(c) - c * sf(c) grows like c^2 for large c.
      const double rel = 1e-13 * std::max(1.0, c[i] * c[i]);
      if (!close(a[i], b[i], rel)) {
        if (bad++ < 5) MESSAGE("loss mismatch at c = " << c[i] << ": " << a[i] << " vs " << b[i]);
      }
    }
    CHECK(bad == 0);

    std::vector<double> m(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) m[i] = 3.0 * c[i];
    kernels::scalar::tobit_mean(m.data(), 2.5, 0.7, a.data(), m.size());
    kernels::avx2::tobit_mean(m.data(), 2.5, 0.7, b.data(), m.size());
    for (std::size_t i = 0; i < m.size(); ++i) CHECK(close(a[i], b[i], 1e-13));

    std::vector<double> floor(c.size(), 0.3), acc_a(c.size(), 1.0), acc_b(c.size(), 1.0);
    kernels::scalar::accumulate_robust(m.data(), 0.4, 0.8, floor.data(), acc_a.data(), m.size());
    kernels::avx2::accumulate_robust(m.data(), 0.4, 0.8, floor.data(), acc_b.data(), m.size());
    for (std::size_t i = 0; i < m.size(); ++i) CHECK(close(acc_a[i], acc_b[i], 1e-15));

    const double da = kernels::scalar::dot(c.data(), m.data(), c.size());
    const double db = kernels::avx2::dot(c.data(), m.data(), c.size());
    CHECK(close(da, db, 1e-12));
  }
}

TEST_CASE("dispatcher honours the selected backend") {
  const auto before = kernels::active_backend();
  kernels::set_backend(kernels::Backend::scalar);
  CHECK(kernels::active_backend() == kernels::Backend::scalar);
  std::vector<double> c = {0.0, 1.0}, out(2);
  kernels::normal_loss(c, out);
  CHECK(out[0] == doctest::Approx(normal::kInvSqrt2Pi));
  std::vector<double> short_out(1);
  CHECK_THROWS_AS(kernels::normal_loss(c, short_out), capassign::InputError);
  kernels::set_backend(before);
}
