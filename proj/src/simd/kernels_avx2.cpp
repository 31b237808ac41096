// Compiled with -mavx2 -mfma. Keep this translation unit free of inline
// library templates so no AVX2 instantiation can leak into generic code.

#include <immintrin.h>
#include <math.h>

#include "mfc/simd/kernels.hpp"

namespace mfc::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// exp(x) for 4 lanes: Cody-Waite reduction by ln2 and the Cephes rational
// approximation on [-ln2/2, ln2/2]. Relative error ~2 ulp; inputs below -708
// flush to zero.
inline __m256d exp4(__m256d x) {
  const __m256d lo = _mm256_set1_pd(-708.0);
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

  const __m256d n = _mm256_round_pd(
      _mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634073599)),
      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93145751953125E-1), x);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.42860682030941723212E-6), r);

  const __m256d rr = _mm256_mul_pd(r, r);
  __m256d p = _mm256_fmadd_pd(_mm256_set1_pd(1.26177193074810590878E-4), rr,
                              _mm256_set1_pd(3.02994407707441961300E-2));
  p = _mm256_fmadd_pd(p, rr, _mm256_set1_pd(9.99999999999999999910E-1));
  p = _mm256_mul_pd(p, r);
  __m256d q = _mm256_fmadd_pd(_mm256_set1_pd(3.00198505138664455042E-6), rr,
                              _mm256_set1_pd(2.52448340349684104192E-3));
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.27265548208155028766E-1));
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.00000000000000000009E0));

  __m256d e = _mm256_div_pd(p, _mm256_sub_pd(q, p));
  e = _mm256_fmadd_pd(_mm256_set1_pd(2.0), e, _mm256_set1_pd(1.0));

  const __m256i biased = _mm256_add_epi64(
      _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(n)), _mm256_set1_epi64x(1023));
  const __m256d scale = _mm256_castsi256_pd(_mm256_slli_epi64(biased, 52));
  return _mm256_andnot_pd(underflow, _mm256_mul_pd(e, scale));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void matvec(const double* w, const double* x, double* y, std::size_t rows,
            std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) y[i] = dot(w + i * cols, x, cols);
}

void matvec_t(const double* w, const double* x, double* y, std::size_t rows,
              std::size_t cols) {
  for (std::size_t j = 0; j < cols; ++j) y[j] = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = w + i * cols;
    const __m256d xi = _mm256_set1_pd(x[i]);
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4) {
      _mm256_storeu_pd(y + j, _mm256_fmadd_pd(xi, _mm256_loadu_pd(row + j),
                                              _mm256_loadu_pd(y + j)));
    }
    for (; j < cols; ++j) y[j] += x[i] * row[j];
  }
}

double gaussian_pair_sum(const double* xs, const double* ys, const double* zs,
                         std::size_t n, double scale) {
  const __m256d neg_scale = _mm256_set1_pd(-scale);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const __m256d xi = _mm256_set1_pd(xs[i]);
    const __m256d yi = _mm256_set1_pd(ys[i]);
    const __m256d zi = _mm256_set1_pd(zs[i]);
    __m256d acc = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const __m256d dx = _mm256_sub_pd(xi, _mm256_loadu_pd(xs + j));
      const __m256d dy = _mm256_sub_pd(yi, _mm256_loadu_pd(ys + j));
      const __m256d dz = _mm256_sub_pd(zi, _mm256_loadu_pd(zs + j));
      __m256d d2 = _mm256_mul_pd(dx, dx);
      d2 = _mm256_fmadd_pd(dy, dy, d2);
      d2 = _mm256_fmadd_pd(dz, dz, d2);
      acc = _mm256_add_pd(acc, exp4(_mm256_mul_pd(neg_scale, d2)));
    }
    double row = hsum(acc);
    for (; j < n; ++j) {
      const double dx = xs[i] - xs[j];
      const double dy = ys[i] - ys[j];
      const double dz = zs[i] - zs[j];
      row += ::exp(-scale * (dx * dx + dy * dy + dz * dz));
    }
    total += row;
  }
  return total;
}

double gram_sum(const double* f, const double* g, std::size_t n,
                std::size_t r) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += dot(f + i * r, g + j * r, r);
    total += row;
  }
  return total;
}

// tanh(u) = sign(u) * (1 - 2 / (exp(2|u|) + 1)); absolute error ~1e-16.
void tanh_n(const double* in, double* out, std::size_t n) {
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d two = _mm256_set1_pd(2.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d u = _mm256_loadu_pd(in + i);
    const __m256d sign = _mm256_and_pd(u, sign_mask);
    const __m256d a = _mm256_andnot_pd(sign_mask, u);
    const __m256d e = exp4(_mm256_min_pd(_mm256_mul_pd(two, a),
                                         _mm256_set1_pd(700.0)));
    const __m256d t = _mm256_sub_pd(one, _mm256_div_pd(two, _mm256_add_pd(e, one)));
    _mm256_storeu_pd(out + i, _mm256_or_pd(t, sign));
  }
  for (; i < n; ++i) out[i] = ::tanh(in[i]);
}

constexpr KernelTable kAvx2{dot,      matvec,   matvec_t,
                            gaussian_pair_sum, gram_sum, tanh_n};

}  // namespace

const KernelTable& avx2_kernels() { return kAvx2; }

}  // namespace mfc::simd
