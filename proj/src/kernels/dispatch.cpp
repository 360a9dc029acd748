#include <atomic>
#include <string>

#include "capassign/error.hpp"
#include "capassign/kernels.hpp"

namespace capassign::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend detect() { return cpu_has_avx2() ? Backend::avx2 : Backend::scalar; }

std::atomic<Backend>& current() {
  static std::atomic<Backend> backend{detect()};
  return backend;
}

void check_sizes(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw InputError(std::string(what) + ": span size mismatch");
  }
}

}  // namespace

std::string_view backend_name(Backend backend) {
  return backend == Backend::avx2 ? "avx2" : "scalar";
}

bool backend_available(Backend backend) {
  return backend == Backend::scalar || cpu_has_avx2();
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

void set_backend(Backend backend) {
  if (!backend_available(backend)) {
    throw InputError("kernel backend '" + std::string(backend_name(backend)) +
                     "' is not supported by this CPU");
  }
  current().store(backend, std::memory_order_relaxed);
}

Backend parse_backend(std::string_view name) {
  if (name == "scalar") return Backend::scalar;
  if (name == "avx2") return Backend::avx2;
  if (name == "auto") return detect();
  throw InputError("unknown kernel backend '" + std::string(name) + "'");
}

void normal_loss(std::span<const double> c, std::span<double> out) {
  check_sizes(c.size(), out.size(), "normal_loss");
  if (active_backend() == Backend::avx2) {
    avx2::normal_loss(c.data(), out.data(), c.size());
  } else {
    scalar::normal_loss(c.data(), out.data(), c.size());
  }
}

void tobit_mean(std::span<const double> m, double sigma, double tau, std::span<double> out) {
  check_sizes(m.size(), out.size(), "tobit_mean");
  if (active_backend() == Backend::avx2) {
    avx2::tobit_mean(m.data(), sigma, tau, out.data(), m.size());
  } else {
    scalar::tobit_mean(m.data(), sigma, tau, out.data(), m.size());
  }
}

void accumulate_robust(std::span<const double> w, double lambda, double eps,
                       std::span<const double> floor, std::span<double> acc) {
  check_sizes(w.size(), acc.size(), "accumulate_robust");
  check_sizes(w.size(), floor.size(), "accumulate_robust");
  if (active_backend() == Backend::avx2) {
    avx2::accumulate_robust(w.data(), lambda, eps, floor.data(), acc.data(), w.size());
  } else {
    scalar::accumulate_robust(w.data(), lambda, eps, floor.data(), acc.data(), w.size());
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  check_sizes(a.size(), b.size(), "dot");
  if (active_backend() == Backend::avx2) {
    return avx2::dot(a.data(), b.data(), a.size());
  }
  return scalar::dot(a.data(), b.data(), a.size());
}

}  // namespace capassign::kernels
