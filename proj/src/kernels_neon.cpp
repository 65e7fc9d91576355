#include "kernels_simd.hpp"

#if POLYSEG_KERNELS_AARCH64

#include <arm_neon.h>

// NEON variants for the float kernels. Same bit-parity rules as AVX2:
// elementwise loops avoid fused multiply-add; GEMM uses fma and is
// tolerance-tested against the scalar reference.

namespace polyseg::kernels::neon_impl {

void add(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vaddq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void mul(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vmulq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void mul_acc(const float* a, const float* b, float* dst, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    float32x4_t t = vmulq_f32(vld1q_f32(a + i), vld1q_f32(b + i));
    vst1q_f32(dst + i, vaddq_f32(vld1q_f32(dst + i), t));
  }
  for (; i < n; ++i) {
    float t = a[i] * b[i];
    dst[i] = dst[i] + t;
  }
}

void axpy(float alpha, const float* x, float* y, std::size_t n) {
  const float32x4_t va = vdupq_n_f32(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    float32x4_t t = vmulq_f32(va, vld1q_f32(x + i));
    vst1q_f32(y + i, vaddq_f32(vld1q_f32(y + i), t));
  }
  for (; i < n; ++i) {
    float t = alpha * x[i];
    y[i] = y[i] + t;
  }
}

void scale(float alpha, const float* x, float* y, std::size_t n) {
  const float32x4_t va = vdupq_n_f32(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vmulq_f32(va, vld1q_f32(x + i)));
  for (; i < n; ++i) y[i] = alpha * x[i];
}

void scale_shift(const float* x, float a, float b, float* y, std::size_t n) {
  const float32x4_t va = vdupq_n_f32(a);
  const float32x4_t vb = vdupq_n_f32(b);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    float32x4_t t = vmulq_f32(va, vld1q_f32(x + i));
    vst1q_f32(y + i, vaddq_f32(t, vb));
  }
  for (; i < n; ++i) {
    float t = a * x[i];
    y[i] = t + b;
  }
}

void lincomb_acc(float* dst, float a, const float* x, float b, const float* y, float c, std::size_t n) {
  const float32x4_t va = vdupq_n_f32(a);
  const float32x4_t vb = vdupq_n_f32(b);
  const float32x4_t vc = vdupq_n_f32(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    float32x4_t t = vaddq_f32(vld1q_f32(dst + i), vmulq_f32(va, vld1q_f32(x + i)));
    t = vaddq_f32(t, vmulq_f32(vb, vld1q_f32(y + i)));
    vst1q_f32(dst + i, vaddq_f32(t, vc));
  }
  for (; i < n; ++i) {
    float t = dst[i] + a * x[i];
    t = t + b * y[i];
    dst[i] = t + c;
  }
}

void relu(const float* x, float* y, std::size_t n) {
  const float32x4_t zero = vdupq_n_f32(0.0f);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vmaxq_f32(vld1q_f32(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu6(const float* x, float* y, std::size_t n) {
  const float32x4_t zero = vdupq_n_f32(0.0f);
  const float32x4_t six = vdupq_n_f32(6.0f);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vminq_f32(vmaxq_f32(vld1q_f32(x + i), zero), six));
  for (; i < n; ++i) {
    float t = x[i] > 0.0f ? x[i] : 0.0f;
    y[i] = t < 6.0f ? t : 6.0f;
  }
}

void relu_backward(const float* x, const float* dy, float* dx, std::size_t n) {
  const float32x4_t zero = vdupq_n_f32(0.0f);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    float32x4_t vx = vld1q_f32(x + i);
    float32x4_t vdx = vld1q_f32(dx + i);
    float32x4_t sum = vaddq_f32(vdx, vld1q_f32(dy + i));
    uint32x4_t mask = vcgtq_f32(vx, zero);
    vst1q_f32(dx + i, vbslq_f32(mask, sum, vdx));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0f) dx[i] = dx[i] + dy[i];
}

void relu6_backward(const float* x, const float* dy, float* dx, std::size_t n) {
  const float32x4_t zero = vdupq_n_f32(0.0f);
  const float32x4_t six = vdupq_n_f32(6.0f);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    float32x4_t vx = vld1q_f32(x + i);
    float32x4_t vdx = vld1q_f32(dx + i);
    float32x4_t sum = vaddq_f32(vdx, vld1q_f32(dy + i));
    uint32x4_t mask = vandq_u32(vcgtq_f32(vx, zero), vcltq_f32(vx, six));
    vst1q_f32(dx + i, vbslq_f32(mask, sum, vdx));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0f && x[i] < 6.0f) dx[i] = dx[i] + dy[i];
}

void gemm_nn(const float* A, const float* B, float* C, std::size_t M, std::size_t K, std::size_t N) {
  for (std::size_t m = 0; m < M; ++m) {
    float* c = C + m * N;
    const float* arow = A + m * K;
    for (std::size_t k = 0; k < K; ++k) {
      const float* b = B + k * N;
      const float32x4_t a = vdupq_n_f32(arow[k]);
      std::size_t j = 0;
      for (; j + 4 <= N; j += 4)
        vst1q_f32(c + j, vfmaq_f32(vld1q_f32(c + j), a, vld1q_f32(b + j)));
      for (; j < N; ++j) c[j] += arow[k] * b[j];
    }
  }
}

void gemm_nt(const float* A, const float* B, float* C, std::size_t M, std::size_t K, std::size_t N) {
  for (std::size_t m = 0; m < M; ++m) {
    const float* a = A + m * K;
    for (std::size_t j = 0; j < N; ++j) {
      const float* b = B + j * K;
      float32x4_t acc = vdupq_n_f32(0.0f);
      std::size_t k = 0;
      for (; k + 4 <= K; k += 4) acc = vfmaq_f32(acc, vld1q_f32(a + k), vld1q_f32(b + k));
      float total = vaddvq_f32(acc);
      for (; k < K; ++k) total += a[k] * b[k];
      C[m * N + j] += total;
    }
  }
}

void gemm_tn(const float* A, const float* B, float* C, std::size_t M, std::size_t K, std::size_t N) {
  for (std::size_t m = 0; m < M; ++m) {
    float* c = C + m * N;
    for (std::size_t k = 0; k < K; ++k) {
      const float* b = B + k * N;
      const float32x4_t a = vdupq_n_f32(A[k * M + m]);
      std::size_t j = 0;
      for (; j + 4 <= N; j += 4)
        vst1q_f32(c + j, vfmaq_f32(vld1q_f32(c + j), a, vld1q_f32(b + j)));
      for (; j < N; ++j) c[j] += A[k * M + m] * b[j];
    }
  }
}

}  // namespace polyseg::kernels::neon_impl

#endif  // POLYSEG_KERNELS_AARCH64
