#pragma once

// Data-parallel inner loops behind the welfare matrices. Every kernel has a
// scalar reference implementation and, on x86-64, an AVX2+FMA variant chosen
// at runtime. Results of the two agree to within a few ulps; the choice is
// fixed for the lifetime of a process unless set_backend() is called.

#include <cstddef>
#include <span>
#include <string_view>

namespace capassign::kernels {

enum class Backend { scalar, avx2 };

std::string_view backend_name(Backend backend);
bool backend_available(Backend backend);
Backend active_backend();
/// Forces a backend; throws InputError if the CPU cannot run it.
void set_backend(Backend backend);
/// Parses "scalar", "avx2" or "auto".
Backend parse_backend(std::string_view name);

/// out[i] = phi(c[i]) - c[i] * (1 - Phi(c[i])).
void normal_loss(std::span<const double> c, std::span<double> out);

/// Mean of max(tau, N(m[i], sigma^2)) for every m[i].
void tobit_mean(std::span<const double> m, double sigma, double tau, std::span<double> out);

/// acc[i] += lambda * w[i] + (1 - lambda) * max(w[i] - eps, floor[i]).
void accumulate_robust(std::span<const double> w, double lambda, double eps,
                       std::span<const double> floor, std::span<double> acc);

double dot(std::span<const double> a, std::span<const double> b);

// Direct access to each implementation, used by the equivalence tests.
namespace scalar {
void normal_loss(const double* c, double* out, std::size_t n);
void tobit_mean(const double* m, double sigma, double tau, double* out, std::size_t n);
void accumulate_robust(const double* w, double lambda, double eps, const double* floor,
                       double* acc, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
}  // namespace scalar

namespace avx2 {
void normal_loss(const double* c, double* out, std::size_t n);
void tobit_mean(const double* m, double sigma, double tau, double* out, std::size_t n);
void accumulate_robust(const double* w, double lambda, double eps, const double* floor,
                       double* acc, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
}  // namespace avx2

}  // namespace capassign::kernels
