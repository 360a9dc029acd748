// AVX2 + FMA variants. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after a runtime CPU check (see dispatch.cpp). It avoids
// inline library templates so no AVX2 code leaks into shared COMDAT symbols.

#include "capassign/kernels.hpp"

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

namespace capassign::kernels::avx2 {

namespace {

// Cephes erf/erfc rational approximations (ndtr.c).
constexpr double kErfcP[] = {2.46196981473530512524E-10, 5.64189564831068821977E-1,
                             7.46321056442269912687E0,   4.86371970985681366614E1,
                             1.96520832956077098242E2,   5.26445194995477358631E2,
                             9.34528527171957607540E2,   1.02755188689515710272E3,
                             5.57535335369399327526E2};
constexpr double kErfcQ[] = {1.32281951154744992508E1, 8.67072140885989742329E1,
                             3.54937778887819891062E2, 9.75708501743205489753E2,
                             1.82390916687909736289E3, 2.24633760818710981792E3,
                             1.65666309194161350182E3, 5.57535340817727675546E2};
constexpr double kErfcR[] = {5.64189583547755073984E-1, 1.27536670759978104416E0,
                             5.01905042251180477414E0,  6.16021097993053585195E0,
                             7.40974269950448939160E0,  2.97886665372100240670E0};
constexpr double kErfcS[] = {2.26052863220117276590E0, 9.39603524938001434673E0,
                             1.20489539808096656605E1, 1.70814450747565897222E1,
                             9.60896809063285878198E0, 3.36907645100081516050E0};
constexpr double kErfT[] = {9.60497373987051638749E0, 9.00260197203842689217E1,
                            2.23200534594684319226E3, 7.00332514112805075473E3,
                            5.55923013010394962768E4};
constexpr double kErfU[] = {3.35617141647503099647E1, 5.21357949780152679795E2,
                            4.59432382970980127987E3, 2.26290000613890934246E4,
                            4.92673942608635921086E4};

// Cephes exp: Pade approximant on the reduced argument.
constexpr double kExpP[] = {1.26177193074810590878E-4, 3.02994407707441961300E-2,
                            9.99999999999999999910E-1};
constexpr double kExpQ[] = {3.00198505138664455042E-6, 2.52448340349684104192E-3,
                            2.27265548208155028766E-1, 2.00000000000000000009E0};
constexpr double kLog2e = 1.4426950408889634073599;
constexpr double kLn2Hi = 6.93145751953125E-1;
constexpr double kLn2Lo = 1.42860682030941723212E-6;

template <int N>
inline __m256d polevl(__m256d x, const double (&coef)[N]) {
  __m256d acc = _mm256_set1_pd(coef[0]);
  for (int i = 1; i < N; ++i) {
    acc = _mm256_fmadd_pd(acc, x, _mm256_set1_pd(coef[i]));
  }
  return acc;
}

// Same as polevl with an implicit leading coefficient of 1.
template <int N>
inline __m256d p1evl(__m256d x, const double (&coef)[N]) {
  __m256d acc = _mm256_add_pd(x, _mm256_set1_pd(coef[0]));
  for (int i = 1; i < N; ++i) {
    acc = _mm256_fmadd_pd(acc, x, _mm256_set1_pd(coef[i]));
  }
  return acc;
}

// exp(x) for x <= 0; lanes below -708 return 0.
inline __m256d exp_nonpositive(__m256d x) {
  const __m256d lo = _mm256_set1_pd(-708.0);
  const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  x = _mm256_max_pd(x, lo);
  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(kLog2e)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(kLn2Hi), x);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(kLn2Lo), r);
  const __m256d rr = _mm256_mul_pd(r, r);
  const __m256d px = _mm256_mul_pd(r, polevl(rr, kExpP));
  const __m256d qx = polevl(rr, kExpQ);
  __m256d e = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  e = _mm256_fmadd_pd(_mm256_set1_pd(2.0), e, _mm256_set1_pd(1.0));
  // 2^n via the magic-number trick; valid for n + 1023 in [1, 2046].
  const __m256d magic = _mm256_set1_pd(6755399441055744.0 + 1023.0);
  const __m256i bits = _mm256_slli_epi64(_mm256_castpd_si256(_mm256_add_pd(n, magic)), 52);
  e = _mm256_mul_pd(e, _mm256_castsi256_pd(bits));
  return _mm256_andnot_pd(underflow, e);
}

// exp(-x^2) with x split so the square of the high part is exact.
inline __m256d exp_neg_square(__m256d x) {
  const __m256d scale = _mm256_set1_pd(128.0);
  const __m256d hi = _mm256_div_pd(
      _mm256_round_pd(_mm256_mul_pd(x, scale), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC),
      scale);
  const __m256d lo = _mm256_sub_pd(x, hi);
  const __m256d big = _mm256_mul_pd(hi, hi);
  const __m256d small = _mm256_fmadd_pd(_mm256_add_pd(hi, hi), lo, _mm256_mul_pd(lo, lo));
  const __m256d zero = _mm256_setzero_pd();
  return _mm256_mul_pd(exp_nonpositive(_mm256_sub_pd(zero, big)),
                       exp_nonpositive(_mm256_sub_pd(zero, small)));
}

inline __m256d erfc(__m256d a) {
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  const __m256d x = _mm256_andnot_pd(sign_mask, a);
  const __m256d one = _mm256_set1_pd(1.0);

  const __m256d a2 = _mm256_mul_pd(a, a);
  const __m256d erf_small = _mm256_div_pd(_mm256_mul_pd(a, polevl(a2, kErfT)), p1evl(a2, kErfU));
  const __m256d small = _mm256_sub_pd(one, erf_small);

  const __m256d z = exp_neg_square(x);
  const __m256d mid = _mm256_div_pd(polevl(x, kErfcP), p1evl(x, kErfcQ));
  const __m256d far = _mm256_div_pd(polevl(x, kErfcR), p1evl(x, kErfcS));
  const __m256d use_far = _mm256_cmp_pd(x, _mm256_set1_pd(8.0), _CMP_GE_OQ);
  __m256d y = _mm256_mul_pd(z, _mm256_blendv_pd(mid, far, use_far));
  const __m256d negative = _mm256_cmp_pd(a, _mm256_setzero_pd(), _CMP_LT_OQ);
  y = _mm256_blendv_pd(y, _mm256_sub_pd(_mm256_set1_pd(2.0), y), negative);

  const __m256d use_small = _mm256_cmp_pd(x, one, _CMP_LT_OQ);
  return _mm256_blendv_pd(y, small, use_small);
}

inline __m256d loss(__m256d c) {
  const __m256d q = _mm256_mul_pd(
      _mm256_set1_pd(0.5), erfc(_mm256_div_pd(c, _mm256_set1_pd(1.41421356237309504880))));
  const __m256d half_sq = _mm256_mul_pd(_mm256_set1_pd(-0.5), _mm256_mul_pd(c, c));
  const __m256d pdf =
      _mm256_mul_pd(_mm256_set1_pd(0.39894228040143267794), exp_nonpositive(half_sq));
  return _mm256_max_pd(_mm256_setzero_pd(), _mm256_fnmadd_pd(c, q, pdf));
}

}  // namespace

void normal_loss(const double* c, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, loss(_mm256_loadu_pd(c + i)));
  }
  if (i < n) {
    alignas(32) double buf[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t k = i; k < n; ++k) buf[k - i] = c[k];
    alignas(32) double res[4];
    _mm256_store_pd(res, loss(_mm256_load_pd(buf)));
    for (std::size_t k = i; k < n; ++k) out[k] = res[k - i];
  }
}

void tobit_mean(const double* m, double sigma, double tau, double* out, std::size_t n) {
  const __m256d s = _mm256_set1_pd(sigma);
  const __m256d t = _mm256_set1_pd(tau);
  auto body = [&](__m256d mv) {
    const __m256d c = _mm256_div_pd(_mm256_sub_pd(t, mv), s);
    return _mm256_fmadd_pd(s, loss(c), t);
  };
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, body(_mm256_loadu_pd(m + i)));
  }
  if (i < n) {
    alignas(32) double buf[4] = {tau, tau, tau, tau};
    for (std::size_t k = i; k < n; ++k) buf[k - i] = m[k];
    alignas(32) double res[4];
    _mm256_store_pd(res, body(_mm256_load_pd(buf)));
    for (std::size_t k = i; k < n; ++k) out[k] = res[k - i];
  }
}

void accumulate_robust(const double* w, double lambda, double eps, const double* floor,
                       double* acc, std::size_t n) {
  const __m256d lam = _mm256_set1_pd(lambda);
  const __m256d rest = _mm256_set1_pd(1.0 - lambda);
  const __m256d e = _mm256_set1_pd(eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d wv = _mm256_loadu_pd(w + i);
    const __m256d kink = _mm256_max_pd(_mm256_sub_pd(wv, e), _mm256_loadu_pd(floor + i));
    const __m256d term = _mm256_add_pd(_mm256_mul_pd(lam, wv), _mm256_mul_pd(rest, kink));
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), term));
  }
  for (; i < n; ++i) {
    const double kink = w[i] - eps > floor[i] ? w[i] - eps : floor[i];
    acc[i] += lambda * w[i] + (1.0 - lambda) * kink;
  }
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) {
    s += a[i] * b[i];
  }
  return s;
}

}  // namespace capassign::kernels::avx2

#else

// Non-x86 builds: the AVX2 entry points exist but are never selected.
namespace capassign::kernels::avx2 {
void normal_loss(const double* c, double* out, std::size_t n) { scalar::normal_loss(c, out, n); }
void tobit_mean(const double* m, double sigma, double tau, double* out, std::size_t n) {
  scalar::tobit_mean(m, sigma, tau, out, n);
}
void accumulate_robust(const double* w, double lambda, double eps, const double* floor,
                       double* acc, std::size_t n) {
  scalar::accumulate_robust(w, lambda, eps, floor, acc, n);
}
double dot(const double* a, const double* b, std::size_t n) { return scalar::dot(a, b, n); }
}  // namespace capassign::kernels::avx2

#endif
