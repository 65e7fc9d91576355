#include "kernels_simd.hpp"

#if POLYSEG_KERNELS_X86

#include <immintrin.h>

#include <cmath>

// AVX2+FMA kernel variants. This TU is compiled with -mavx2 -mfma; the
// dispatcher routes here only when the CPU reports both features.
//
// Elementwise kernels mirror the scalar reference operation-for-operation
// (separate mul and add roundings, exact-rounded sqrt/div) so results are
// bit-identical. FMA is used only inside GEMM and the reductions, which are
// compared against the reference with a tolerance.

namespace polyseg::kernels::avx2_impl {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
  lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
  return _mm_cvtss_f32(lo);
}

}  // namespace

// ---- elementwise, float -------------------------------------------------

void add(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void mul(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void mul_acc(const float* a, const float* b, float* dst, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 t = _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i));
    _mm256_storeu_ps(dst + i, _mm256_add_ps(_mm256_loadu_ps(dst + i), t));
  }
  for (; i < n; ++i) {
    float t = a[i] * b[i];
    dst[i] = dst[i] + t;
  }
}

void axpy(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 t = _mm256_mul_ps(va, _mm256_loadu_ps(x + i));
    _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), t));
  }
  for (; i < n; ++i) {
    float t = alpha * x[i];
    y[i] = y[i] + t;
  }
}

void scale(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
  for (; i < n; ++i) y[i] = alpha * x[i];
}

void scale_shift(const float* x, float a, float b, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(a);
  const __m256 vb = _mm256_set1_ps(b);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 t = _mm256_mul_ps(va, _mm256_loadu_ps(x + i));
    _mm256_storeu_ps(y + i, _mm256_add_ps(t, vb));
  }
  for (; i < n; ++i) {
    float t = a * x[i];
    y[i] = t + b;
  }
}

void lincomb_acc(float* dst, float a, const float* x, float b, const float* y, float c, std::size_t n) {
  const __m256 va = _mm256_set1_ps(a);
  const __m256 vb = _mm256_set1_ps(b);
  const __m256 vc = _mm256_set1_ps(c);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 t = _mm256_add_ps(_mm256_loadu_ps(dst + i), _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
    t = _mm256_add_ps(t, _mm256_mul_ps(vb, _mm256_loadu_ps(y + i)));
    _mm256_storeu_ps(dst + i, _mm256_add_ps(t, vc));
  }
  for (; i < n; ++i) {
    float t = dst[i] + a * x[i];
    t = t + b * y[i];
    dst[i] = t + c;
  }
}

void relu(const float* x, float* y, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu6(const float* x, float* y, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  const __m256 six = _mm256_set1_ps(6.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_min_ps(_mm256_max_ps(_mm256_loadu_ps(x + i), zero), six));
  for (; i < n; ++i) {
    float t = x[i] > 0.0f ? x[i] : 0.0f;
    y[i] = t < 6.0f ? t : 6.0f;
  }
}

void relu_backward(const float* x, const float* dy, float* dx, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 vx = _mm256_loadu_ps(x + i);
    __m256 vdx = _mm256_loadu_ps(dx + i);
    __m256 sum = _mm256_add_ps(vdx, _mm256_loadu_ps(dy + i));
    __m256 mask = _mm256_cmp_ps(vx, zero, _CMP_GT_OQ);
    _mm256_storeu_ps(dx + i, _mm256_blendv_ps(vdx, sum, mask));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0f) dx[i] = dx[i] + dy[i];
}

void relu6_backward(const float* x, const float* dy, float* dx, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  const __m256 six = _mm256_set1_ps(6.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 vx = _mm256_loadu_ps(x + i);
    __m256 vdx = _mm256_loadu_ps(dx + i);
    __m256 sum = _mm256_add_ps(vdx, _mm256_loadu_ps(dy + i));
    __m256 mask = _mm256_and_ps(_mm256_cmp_ps(vx, zero, _CMP_GT_OQ), _mm256_cmp_ps(vx, six, _CMP_LT_OQ));
    _mm256_storeu_ps(dx + i, _mm256_blendv_ps(vdx, sum, mask));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0f && x[i] < 6.0f) dx[i] = dx[i] + dy[i];
}

void adadelta_update(float* param, const float* grad, float* sq_grad, float* sq_update,
                     float lr, float rho, float eps, std::size_t n) {
  const float c1s = 1.0f - rho;
  const __m256 vrho = _mm256_set1_ps(rho);
  const __m256 vc1 = _mm256_set1_ps(c1s);
  const __m256 veps = _mm256_set1_ps(eps);
  const __m256 vlr = _mm256_set1_ps(lr);
  const __m256 sign = _mm256_set1_ps(-0.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 g = _mm256_loadu_ps(grad + i);
    __m256 g2 = _mm256_add_ps(_mm256_mul_ps(vrho, _mm256_loadu_ps(sq_grad + i)),
                              _mm256_mul_ps(vc1, _mm256_mul_ps(g, g)));
    __m256 u = _mm256_loadu_ps(sq_update + i);
    __m256 num = _mm256_sqrt_ps(_mm256_add_ps(u, veps));
    __m256 den = _mm256_sqrt_ps(_mm256_add_ps(g2, veps));
    __m256 delta = _mm256_xor_ps(_mm256_mul_ps(_mm256_div_ps(num, den), g), sign);
    __m256 un = _mm256_add_ps(_mm256_mul_ps(vrho, u), _mm256_mul_ps(vc1, _mm256_mul_ps(delta, delta)));
    _mm256_storeu_ps(sq_grad + i, g2);
    _mm256_storeu_ps(sq_update + i, un);
    _mm256_storeu_ps(param + i,
                     _mm256_add_ps(_mm256_loadu_ps(param + i), _mm256_mul_ps(vlr, delta)));
  }
  for (; i < n; ++i) {
    float g = grad[i];
    float g2 = rho * sq_grad[i] + c1s * (g * g);
    float num = std::sqrt(sq_update[i] + eps);
    float den = std::sqrt(g2 + eps);
    float delta = -((num / den) * g);
    float u = rho * sq_update[i] + c1s * (delta * delta);
    sq_grad[i] = g2;
    sq_update[i] = u;
    param[i] = param[i] + lr * delta;
  }
}

// ---- elementwise, double --------------------------------------------------

void add(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void mul(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void mul_acc(const double* a, const double* b, double* dst, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d t = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(dst + i), t));
  }
  for (; i < n; ++i) {
    double t = a[i] * b[i];
    dst[i] = dst[i] + t;
  }
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d t = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), t));
  }
  for (; i < n; ++i) {
    double t = alpha * x[i];
    y[i] = y[i] + t;
  }
}

void scale(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) y[i] = alpha * x[i];
}

void scale_shift(const double* x, double a, double b, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d t = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(t, vb));
  }
  for (; i < n; ++i) {
    double t = a * x[i];
    y[i] = t + b;
  }
}

void lincomb_acc(double* dst, double a, const double* x, double b, const double* y, double c, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  const __m256d vc = _mm256_set1_pd(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d t = _mm256_add_pd(_mm256_loadu_pd(dst + i), _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    t = _mm256_add_pd(t, _mm256_mul_pd(vb, _mm256_loadu_pd(y + i)));
    _mm256_storeu_pd(dst + i, _mm256_add_pd(t, vc));
  }
  for (; i < n; ++i) {
    double t = dst[i] + a * x[i];
    t = t + b * y[i];
    dst[i] = t + c;
  }
}

void relu(const double* x, double* y, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu6(const double* x, double* y, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d six = _mm256_set1_pd(6.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_min_pd(_mm256_max_pd(_mm256_loadu_pd(x + i), zero), six));
  for (; i < n; ++i) {
    double t = x[i] > 0.0 ? x[i] : 0.0;
    y[i] = t < 6.0 ? t : 6.0;
  }
}

void relu_backward(const double* x, const double* dy, double* dx, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vx = _mm256_loadu_pd(x + i);
    __m256d vdx = _mm256_loadu_pd(dx + i);
    __m256d sum = _mm256_add_pd(vdx, _mm256_loadu_pd(dy + i));
    __m256d mask = _mm256_cmp_pd(vx, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(dx + i, _mm256_blendv_pd(vdx, sum, mask));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0) dx[i] = dx[i] + dy[i];
}

void relu6_backward(const double* x, const double* dy, double* dx, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d six = _mm256_set1_pd(6.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vx = _mm256_loadu_pd(x + i);
    __m256d vdx = _mm256_loadu_pd(dx + i);
    __m256d sum = _mm256_add_pd(vdx, _mm256_loadu_pd(dy + i));
    __m256d mask = _mm256_and_pd(_mm256_cmp_pd(vx, zero, _CMP_GT_OQ), _mm256_cmp_pd(vx, six, _CMP_LT_OQ));
    _mm256_storeu_pd(dx + i, _mm256_blendv_pd(vdx, sum, mask));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0 && x[i] < 6.0) dx[i] = dx[i] + dy[i];
}

void adadelta_update(double* param, const double* grad, double* sq_grad, double* sq_update,
                     double lr, double rho, double eps, std::size_t n) {
  const double c1s = 1.0 - rho;
  const __m256d vrho = _mm256_set1_pd(rho);
  const __m256d vc1 = _mm256_set1_pd(c1s);
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d sign = _mm256_set1_pd(-0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d g = _mm256_loadu_pd(grad + i);
    __m256d g2 = _mm256_add_pd(_mm256_mul_pd(vrho, _mm256_loadu_pd(sq_grad + i)),
                               _mm256_mul_pd(vc1, _mm256_mul_pd(g, g)));
    __m256d u = _mm256_loadu_pd(sq_update + i);
    __m256d num = _mm256_sqrt_pd(_mm256_add_pd(u, veps));
    __m256d den = _mm256_sqrt_pd(_mm256_add_pd(g2, veps));
    __m256d delta = _mm256_xor_pd(_mm256_mul_pd(_mm256_div_pd(num, den), g), sign);
    __m256d un = _mm256_add_pd(_mm256_mul_pd(vrho, u), _mm256_mul_pd(vc1, _mm256_mul_pd(delta, delta)));
    _mm256_storeu_pd(sq_grad + i, g2);
    _mm256_storeu_pd(sq_update + i, un);
    _mm256_storeu_pd(param + i,
                     _mm256_add_pd(_mm256_loadu_pd(param + i), _mm256_mul_pd(vlr, delta)));
  }
  for (; i < n; ++i) {
    double g = grad[i];
    double g2 = rho * sq_grad[i] + c1s * (g * g);
    double num = std::sqrt(sq_update[i] + eps);
    double den = std::sqrt(g2 + eps);
    double delta = -((num / den) * g);
    double u = rho * sq_update[i] + c1s * (delta * delta);
    sq_grad[i] = g2;
    sq_update[i] = u;
    param[i] = param[i] + lr * delta;
  }
}

// ---- reductions -----------------------------------------------------------

double sum(const float* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 v = _mm256_loadu_ps(x + i);
    acc0 = _mm256_add_pd(acc0, _mm256_cvtps_pd(_mm256_castps256_ps128(v)));
    acc1 = _mm256_add_pd(acc1, _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)));
  }
  double total = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) total += static_cast<double>(x[i]);
  return total;
}

double sum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double total = hsum(acc);
  for (; i < n; ++i) total += x[i];
  return total;
}

double dot(const float* a, const float* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 va = _mm256_loadu_ps(a + i);
    __m256 vb = _mm256_loadu_ps(b + i);
    acc0 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(va)),
                           _mm256_cvtps_pd(_mm256_castps256_ps128(vb)), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(va, 1)),
                           _mm256_cvtps_pd(_mm256_extractf128_ps(vb, 1)), acc1);
  }
  double total = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) total += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return total;
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  double total = hsum(acc);
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

double sum_sq_dev(const float* x, float mean, std::size_t n) {
  const __m256d vm = _mm256_set1_pd(static_cast<double>(mean));
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 v = _mm256_loadu_ps(x + i);
    __m256d d0 = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(v)), vm);
    __m256d d1 = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)), vm);
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  double total = hsum(_mm256_add_pd(acc0, acc1));
  double m = static_cast<double>(mean);
  for (; i < n; ++i) {
    double d = static_cast<double>(x[i]) - m;
    total += d * d;
  }
  return total;
}

double sum_sq_dev(const double* x, double mean, std::size_t n) {
  const __m256d vm = _mm256_set1_pd(mean);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), vm);
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double total = hsum(acc);
  for (; i < n; ++i) {
    double d = x[i] - mean;
    total += d * d;
  }
  return total;
}

// ---- GEMM -------------------------------------------------------------

// Row-major axpy-style GEMM: stream rows of B into the C row with FMA,
// k unrolled by 4 to amortize C traffic.

void gemm_nn(const float* A, const float* B, float* C, std::size_t M, std::size_t K, std::size_t N) {
  const std::size_t k4 = K & ~static_cast<std::size_t>(3);
  for (std::size_t m = 0; m < M; ++m) {
    float* c = C + m * N;
    const float* arow = A + m * K;
    std::size_t k = 0;
    for (; k < k4; k += 4) {
      const float* b0 = B + k * N;
      const float* b1 = b0 + N;
      const float* b2 = b1 + N;
      const float* b3 = b2 + N;
      const __m256 a0 = _mm256_set1_ps(arow[k]);
      const __m256 a1 = _mm256_set1_ps(arow[k + 1]);
      const __m256 a2 = _mm256_set1_ps(arow[k + 2]);
      const __m256 a3 = _mm256_set1_ps(arow[k + 3]);
      std::size_t j = 0;
      for (; j + 8 <= N; j += 8) {
        __m256 cv = _mm256_loadu_ps(c + j);
        cv = _mm256_fmadd_ps(a0, _mm256_loadu_ps(b0 + j), cv);
        cv = _mm256_fmadd_ps(a1, _mm256_loadu_ps(b1 + j), cv);
        cv = _mm256_fmadd_ps(a2, _mm256_loadu_ps(b2 + j), cv);
        cv = _mm256_fmadd_ps(a3, _mm256_loadu_ps(b3 + j), cv);
        _mm256_storeu_ps(c + j, cv);
      }
      for (; j < N; ++j)
        c[j] += arow[k] * b0[j] + arow[k + 1] * b1[j] + arow[k + 2] * b2[j] + arow[k + 3] * b3[j];
    }
    for (; k < K; ++k) {
      const float* b = B + k * N;
      const __m256 a = _mm256_set1_ps(arow[k]);
      std::size_t j = 0;
      for (; j + 8 <= N; j += 8)
        _mm256_storeu_ps(c + j, _mm256_fmadd_ps(a, _mm256_loadu_ps(b + j), _mm256_loadu_ps(c + j)));
      for (; j < N; ++j) c[j] += arow[k] * b[j];
    }
  }
}

void gemm_nn(const double* A, const double* B, double* C, std::size_t M, std::size_t K, std::size_t N) {
  const std::size_t k4 = K & ~static_cast<std::size_t>(3);
  for (std::size_t m = 0; m < M; ++m) {
    double* c = C + m * N;
    const double* arow = A + m * K;
    std::size_t k = 0;
    for (; k < k4; k += 4) {
      const double* b0 = B + k * N;
      const double* b1 = b0 + N;
      const double* b2 = b1 + N;
      const double* b3 = b2 + N;
      const __m256d a0 = _mm256_set1_pd(arow[k]);
      const __m256d a1 = _mm256_set1_pd(arow[k + 1]);
      const __m256d a2 = _mm256_set1_pd(arow[k + 2]);
      const __m256d a3 = _mm256_set1_pd(arow[k + 3]);
      std::size_t j = 0;
      for (; j + 4 <= N; j += 4) {
        __m256d cv = _mm256_loadu_pd(c + j);
        cv = _mm256_fmadd_pd(a0, _mm256_loadu_pd(b0 + j), cv);
        cv = _mm256_fmadd_pd(a1, _mm256_loadu_pd(b1 + j), cv);
        cv = _mm256_fmadd_pd(a2, _mm256_loadu_pd(b2 + j), cv);
        cv = _mm256_fmadd_pd(a3, _mm256_loadu_pd(b3 + j), cv);
        _mm256_storeu_pd(c + j, cv);
      }
      for (; j < N; ++j)
        c[j] += arow[k] * b0[j] + arow[k + 1] * b1[j] + arow[k + 2] * b2[j] + arow[k + 3] * b3[j];
    }
    for (; k < K; ++k) {
      const double* b = B + k * N;
      const __m256d a = _mm256_set1_pd(arow[k]);
      std::size_t j = 0;
      for (; j + 4 <= N; j += 4)
        _mm256_storeu_pd(c + j, _mm256_fmadd_pd(a, _mm256_loadu_pd(b + j), _mm256_loadu_pd(c + j)));
      for (; j < N; ++j) c[j] += arow[k] * b[j];
    }
  }
}

void gemm_nt(const float* A, const float* B, float* C, std::size_t M, std::size_t K, std::size_t N) {
  for (std::size_t m = 0; m < M; ++m) {
    const float* a = A + m * K;
    for (std::size_t j = 0; j < N; ++j) {
      const float* b = B + j * K;
      __m256 acc0 = _mm256_setzero_ps();
      __m256 acc1 = _mm256_setzero_ps();
      std::size_t k = 0;
      for (; k + 16 <= K; k += 16) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + k), _mm256_loadu_ps(b + k), acc0);
        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + k + 8), _mm256_loadu_ps(b + k + 8), acc1);
      }
      for (; k + 8 <= K; k += 8)
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + k), _mm256_loadu_ps(b + k), acc0);
      float total = hsum(_mm256_add_ps(acc0, acc1));
      for (; k < K; ++k) total += a[k] * b[k];
      C[m * N + j] += total;
    }
  }
}

void gemm_nt(const double* A, const double* B, double* C, std::size_t M, std::size_t K, std::size_t N) {
  for (std::size_t m = 0; m < M; ++m) {
    const double* a = A + m * K;
    for (std::size_t j = 0; j < N; ++j) {
      const double* b = B + j * K;
      __m256d acc0 = _mm256_setzero_pd();
      __m256d acc1 = _mm256_setzero_pd();
      std::size_t k = 0;
      for (; k + 8 <= K; k += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k + 4), _mm256_loadu_pd(b + k + 4), acc1);
      }
      for (; k + 4 <= K; k += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k), acc0);
      double total = hsum(_mm256_add_pd(acc0, acc1));
      for (; k < K; ++k) total += a[k] * b[k];
      C[m * N + j] += total;
    }
  }
}

void gemm_tn(const float* A, const float* B, float* C, std::size_t M, std::size_t K, std::size_t N) {
  const std::size_t k4 = K & ~static_cast<std::size_t>(3);
  for (std::size_t m = 0; m < M; ++m) {
    float* c = C + m * N;
    std::size_t k = 0;
    for (; k < k4; k += 4) {
      const float* b0 = B + k * N;
      const float* b1 = b0 + N;
      const float* b2 = b1 + N;
      const float* b3 = b2 + N;
      const __m256 a0 = _mm256_set1_ps(A[k * M + m]);
      const __m256 a1 = _mm256_set1_ps(A[(k + 1) * M + m]);
      const __m256 a2 = _mm256_set1_ps(A[(k + 2) * M + m]);
      const __m256 a3 = _mm256_set1_ps(A[(k + 3) * M + m]);
      std::size_t j = 0;
      for (; j + 8 <= N; j += 8) {
        __m256 cv = _mm256_loadu_ps(c + j);
        cv = _mm256_fmadd_ps(a0, _mm256_loadu_ps(b0 + j), cv);
        cv = _mm256_fmadd_ps(a1, _mm256_loadu_ps(b1 + j), cv);
        cv = _mm256_fmadd_ps(a2, _mm256_loadu_ps(b2 + j), cv);
        cv = _mm256_fmadd_ps(a3, _mm256_loadu_ps(b3 + j), cv);
        _mm256_storeu_ps(c + j, cv);
      }
      for (; j < N; ++j)
        c[j] += A[k * M + m] * b0[j] + A[(k + 1) * M + m] * b1[j] + A[(k + 2) * M + m] * b2[j] +
                A[(k + 3) * M + m] * b3[j];
    }
    for (; k < K; ++k) {
      const float* b = B + k * N;
      const __m256 a = _mm256_set1_ps(A[k * M + m]);
      std::size_t j = 0;
      for (; j + 8 <= N; j += 8)
        _mm256_storeu_ps(c + j, _mm256_fmadd_ps(a, _mm256_loadu_ps(b + j), _mm256_loadu_ps(c + j)));
      for (; j < N; ++j) c[j] += A[k * M + m] * b[j];
    }
  }
}

void gemm_tn(const double* A, const double* B, double* C, std::size_t M, std::size_t K, std::size_t N) {
  for (std::size_t m = 0; m < M; ++m) {
    double* c = C + m * N;
    for (std::size_t k = 0; k < K; ++k) {
      const double* b = B + k * N;
      const __m256d a = _mm256_set1_pd(A[k * M + m]);
      std::size_t j = 0;
      for (; j + 4 <= N; j += 4)
        _mm256_storeu_pd(c + j, _mm256_fmadd_pd(a, _mm256_loadu_pd(b + j), _mm256_loadu_pd(c + j)));
      for (; j < N; ++j) c[j] += A[k * M + m] * b[j];
    }
  }
}

}  // namespace polyseg::kernels::avx2_impl

#endif  // POLYSEG_KERNELS_X86
