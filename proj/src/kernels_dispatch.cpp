#include "polyseg/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <type_traits>

#include "polyseg/check.hpp"
#include "kernels_scalar.hpp"
#include "kernels_simd.hpp"

namespace polyseg::kernels {

namespace {

Backend detect_best() {
#if POLYSEG_KERNELS_X86
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Backend::avx2;
#elif POLYSEG_KERNELS_AARCH64
  return Backend::neon;
#endif
  return Backend::scalar;
}

Backend initial_backend() {
  if (const char* env = std::getenv("POLYSEG_BACKEND")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0 && backend_supported(Backend::avx2)) return Backend::avx2;
    if (std::strcmp(env, "neon") == 0 && backend_supported(Backend::neon)) return Backend::neon;
  }
  return detect_best();
}

std::atomic<Backend>& backend_slot() {
  static std::atomic<Backend> slot{initial_backend()};
  return slot;
}

}  // namespace

bool backend_supported(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if POLYSEG_KERNELS_X86
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::neon:
      return POLYSEG_KERNELS_AARCH64 != 0;
  }
  return false;
}

Backend preferred_backend() { return initial_backend(); }

Backend active_backend() { return backend_slot().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  POLYSEG_CHECK(backend_supported(b), "kernel backend '" << backend_name(b)
                                                         << "' is not supported on this CPU");
  backend_slot().store(b, std::memory_order_relaxed);
}

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
  }
  return "?";
}

// Dispatch wrappers. NEON covers float only; anything it lacks falls back
// to the scalar reference.

#if POLYSEG_KERNELS_X86
#define POLYSEG_DISPATCH(call)                               \
  do {                                                       \
    if (active_backend() == Backend::avx2) {                 \
      avx2_impl::call;                                       \
      return;                                                \
    }                                                        \
    scalar_impl::call;                                       \
  } while (0)
#define POLYSEG_DISPATCH_RET(call)                           \
  do {                                                       \
    if (active_backend() == Backend::avx2) return avx2_impl::call; \
    return scalar_impl::call;                                \
  } while (0)
#elif POLYSEG_KERNELS_AARCH64
#define POLYSEG_DISPATCH(call)                               \
  do {                                                       \
    if constexpr (std::is_same_v<T, float>) {                \
      if (active_backend() == Backend::neon) {               \
        neon_impl::call;                                     \
        return;                                              \
      }                                                      \
    }                                                        \
    scalar_impl::call;                                       \
  } while (0)
#define POLYSEG_DISPATCH_RET(call) return scalar_impl::call
#else
#define POLYSEG_DISPATCH(call) scalar_impl::call
#define POLYSEG_DISPATCH_RET(call) return scalar_impl::call
#endif

template <class T>
void add(const T* a, const T* b, T* out, std::size_t n) {
  POLYSEG_DISPATCH(add(a, b, out, n));
}

template <class T>
void mul(const T* a, const T* b, T* out, std::size_t n) {
  POLYSEG_DISPATCH(mul(a, b, out, n));
}

template <class T>
void mul_acc(const T* a, const T* b, T* dst, std::size_t n) {
  POLYSEG_DISPATCH(mul_acc(a, b, dst, n));
}

template <class T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  POLYSEG_DISPATCH(axpy(alpha, x, y, n));
}

template <class T>
void scale(T alpha, const T* x, T* y, std::size_t n) {
  POLYSEG_DISPATCH(scale(alpha, x, y, n));
}

template <class T>
void scale_shift(const T* x, T a, T b, T* y, std::size_t n) {
  POLYSEG_DISPATCH(scale_shift(x, a, b, y, n));
}

template <class T>
void lincomb_acc(T* dst, T a, const T* x, T b, const T* y, T c, std::size_t n) {
  POLYSEG_DISPATCH(lincomb_acc(dst, a, x, b, y, c, n));
}

template <class T>
void relu(const T* x, T* y, std::size_t n) {
  POLYSEG_DISPATCH(relu(x, y, n));
}

template <class T>
void relu6(const T* x, T* y, std::size_t n) {
  POLYSEG_DISPATCH(relu6(x, y, n));
}

template <class T>
void relu_backward(const T* x, const T* dy, T* dx, std::size_t n) {
  POLYSEG_DISPATCH(relu_backward(x, dy, dx, n));
}

template <class T>
void relu6_backward(const T* x, const T* dy, T* dx, std::size_t n) {
  POLYSEG_DISPATCH(relu6_backward(x, dy, dx, n));
}

template <class T>
void adadelta_update(T* param, const T* grad, T* sq_grad, T* sq_update,
                     T lr, T rho, T eps, std::size_t n) {
#if POLYSEG_KERNELS_X86
  if (active_backend() == Backend::avx2) {
    avx2_impl::adadelta_update(param, grad, sq_grad, sq_update, lr, rho, eps, n);
    return;
  }
#endif
  scalar_impl::adadelta_update(param, grad, sq_grad, sq_update, lr, rho, eps, n);
}

template <class T>
double sum(const T* x, std::size_t n) {
  POLYSEG_DISPATCH_RET(sum(x, n));
}

template <class T>
double dot(const T* a, const T* b, std::size_t n) {
  POLYSEG_DISPATCH_RET(dot(a, b, n));
}

template <class T>
double sum_sq_dev(const T* x, T mean, std::size_t n) {
  POLYSEG_DISPATCH_RET(sum_sq_dev(x, mean, n));
}

template <class T>
void gemm_nn(const T* A, const T* B, T* C, std::size_t M, std::size_t K, std::size_t N) {
  POLYSEG_DISPATCH(gemm_nn(A, B, C, M, K, N));
}

template <class T>
void gemm_nt(const T* A, const T* B, T* C, std::size_t M, std::size_t K, std::size_t N) {
  POLYSEG_DISPATCH(gemm_nt(A, B, C, M, K, N));
}

template <class T>
void gemm_tn(const T* A, const T* B, T* C, std::size_t M, std::size_t K, std::size_t N) {
  POLYSEG_DISPATCH(gemm_tn(A, B, C, M, K, N));
}

#define POLYSEG_INSTANTIATE(T)                                                            \
  template void add<T>(const T*, const T*, T*, std::size_t);                              \
  template void mul<T>(const T*, const T*, T*, std::size_t);                              \
  template void mul_acc<T>(const T*, const T*, T*, std::size_t);                          \
  template void axpy<T>(T, const T*, T*, std::size_t);                                    \
  template void scale<T>(T, const T*, T*, std::size_t);                                   \
  template void scale_shift<T>(const T*, T, T, T*, std::size_t);                          \
  template void lincomb_acc<T>(T*, T, const T*, T, const T*, T, std::size_t);             \
  template void relu<T>(const T*, T*, std::size_t);                                       \
  template void relu6<T>(const T*, T*, std::size_t);                                      \
  template void relu_backward<T>(const T*, const T*, T*, std::size_t);                    \
  template void relu6_backward<T>(const T*, const T*, T*, std::size_t);                   \
  template void adadelta_update<T>(T*, const T*, T*, T*, T, T, T, std::size_t);           \
  template double sum<T>(const T*, std::size_t);                                          \
  template double dot<T>(const T*, const T*, std::size_t);                                \
  template double sum_sq_dev<T>(const T*, T, std::size_t);                                \
  template void gemm_nn<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t); \
  template void gemm_nt<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t); \
  template void gemm_tn<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t);

POLYSEG_INSTANTIATE(float)
POLYSEG_INSTANTIATE(double)

#undef POLYSEG_INSTANTIATE
#undef POLYSEG_DISPATCH
#undef POLYSEG_DISPATCH_RET

}  // namespace polyseg::kernels
