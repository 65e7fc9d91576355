#pragma once

#include <cstddef>

// Data-parallel inner loops behind the tensor stack. Every kernel has a
// scalar reference implementation plus SIMD variants (AVX2+FMA on x86-64,
// NEON on aarch64) selected once at startup and overridable for tests.
//
// Contract: elementwise kernels are bit-identical across backends (no FMA
// contraction there). Reductions and GEMM accumulate in a backend-specific
// order and agree with the reference to rounding error.

namespace polyseg::kernels {

enum class Backend { scalar, avx2, neon };

Backend preferred_backend();  // best supported backend, honoring POLYSEG_BACKEND env
Backend active_backend();
void set_backend(Backend b);  // throws std::invalid_argument if unsupported here
bool backend_supported(Backend b);
const char* backend_name(Backend b);

// ---- elementwise ------------------------------------------------------

template <class T> void add(const T* a, const T* b, T* out, std::size_t n);
template <class T> void mul(const T* a, const T* b, T* out, std::size_t n);
template <class T> void mul_acc(const T* a, const T* b, T* dst, std::size_t n);  // dst += a*b
template <class T> void axpy(T alpha, const T* x, T* y, std::size_t n);          // y += alpha*x
template <class T> void scale(T alpha, const T* x, T* y, std::size_t n);         // y = alpha*x
template <class T> void scale_shift(const T* x, T a, T b, T* y, std::size_t n);  // y = a*x + b

// dst += a*x + b*y + c
template <class T>
void lincomb_acc(T* dst, T a, const T* x, T b, const T* y, T c, std::size_t n);

template <class T> void relu(const T* x, T* y, std::size_t n);
template <class T> void relu6(const T* x, T* y, std::size_t n);
template <class T> void relu_backward(const T* x, const T* dy, T* dx, std::size_t n);   // dx += dy where x > 0
template <class T> void relu6_backward(const T* x, const T* dy, T* dx, std::size_t n);  // dx += dy where 0 < x < 6

// In-place Adadelta recurrence over one parameter buffer:
//   sq_grad   <- rho*sq_grad + (1-rho)*g^2
//   delta     =  -sqrt(sq_update + eps)/sqrt(sq_grad + eps) * g
//   sq_update <- rho*sq_update + (1-rho)*delta^2
//   param     += lr*delta
template <class T>
void adadelta_update(T* param, const T* grad, T* sq_grad, T* sq_update,
                     T lr, T rho, T eps, std::size_t n);

// ---- reductions (double accumulators) ---------------------------------

template <class T> double sum(const T* x, std::size_t n);
template <class T> double dot(const T* a, const T* b, std::size_t n);
template <class T> double sum_sq_dev(const T* x, T mean, std::size_t n);  // sum((x-mean)^2)

// ---- GEMM, row-major, accumulating into C -----------------------------

// C(MxN) += A(MxK) * B(KxN)
template <class T>
void gemm_nn(const T* A, const T* B, T* C, std::size_t M, std::size_t K, std::size_t N);
// C(MxN) += A(MxK) * B(NxK)^T
template <class T>
void gemm_nt(const T* A, const T* B, T* C, std::size_t M, std::size_t K, std::size_t N);
// C(MxN) += A(KxM)^T * B(KxN)
template <class T>
void gemm_tn(const T* A, const T* B, T* C, std::size_t M, std::size_t K, std::size_t N);

}  // namespace polyseg::kernels
