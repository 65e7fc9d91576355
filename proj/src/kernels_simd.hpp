#pragma once

#include <cstddef>

// Internal declarations for the SIMD kernel variants. Each backend TU is
// compiled with its own ISA flags; the dispatcher only calls into a backend
// the CPU actually supports.

#if defined(__x86_64__) || defined(_M_X64)
#define POLYSEG_KERNELS_X86 1
#else
#define POLYSEG_KERNELS_X86 0
#endif

#if defined(__aarch64__)
#define POLYSEG_KERNELS_AARCH64 1
#else
#define POLYSEG_KERNELS_AARCH64 0
#endif

namespace polyseg::kernels {

#if POLYSEG_KERNELS_X86
namespace avx2_impl {

void add(const float* a, const float* b, float* out, std::size_t n);
void add(const double* a, const double* b, double* out, std::size_t n);
void mul(const float* a, const float* b, float* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
void mul_acc(const float* a, const float* b, float* dst, std::size_t n);
void mul_acc(const double* a, const double* b, double* dst, std::size_t n);
void axpy(float alpha, const float* x, float* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(float alpha, const float* x, float* y, std::size_t n);
void scale(double alpha, const double* x, double* y, std::size_t n);
void scale_shift(const float* x, float a, float b, float* y, std::size_t n);
void scale_shift(const double* x, double a, double b, double* y, std::size_t n);
void lincomb_acc(float* dst, float a, const float* x, float b, const float* y, float c, std::size_t n);
void lincomb_acc(double* dst, double a, const double* x, double b, const double* y, double c, std::size_t n);
void relu(const float* x, float* y, std::size_t n);
void relu(const double* x, double* y, std::size_t n);
void relu6(const float* x, float* y, std::size_t n);
void relu6(const double* x, double* y, std::size_t n);
void relu_backward(const float* x, const float* dy, float* dx, std::size_t n);
void relu_backward(const double* x, const double* dy, double* dx, std::size_t n);
void relu6_backward(const float* x, const float* dy, float* dx, std::size_t n);
void relu6_backward(const double* x, const double* dy, double* dx, std::size_t n);
void adadelta_update(float* param, const float* grad, float* sq_grad, float* sq_update,
                     float lr, float rho, float eps, std::size_t n);
void adadelta_update(double* param, const double* grad, double* sq_grad, double* sq_update,
                     double lr, double rho, double eps, std::size_t n);
double sum(const float* x, std::size_t n);
double sum(const double* x, std::size_t n);
double dot(const float* a, const float* b, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
double sum_sq_dev(const float* x, float mean, std::size_t n);
double sum_sq_dev(const double* x, double mean, std::size_t n);
void gemm_nn(const float* A, const float* B, float* C, std::size_t M, std::size_t K, std::size_t N);
void gemm_nn(const double* A, const double* B, double* C, std::size_t M, std::size_t K, std::size_t N);
void gemm_nt(const float* A, const float* B, float* C, std::size_t M, std::size_t K, std::size_t N);
void gemm_nt(const double* A, const double* B, double* C, std::size_t M, std::size_t K, std::size_t N);
void gemm_tn(const float* A, const float* B, float* C, std::size_t M, std::size_t K, std::size_t N);
void gemm_tn(const double* A, const double* B, double* C, std::size_t M, std::size_t K, std::size_t N);

}  // namespace avx2_impl
#endif  // POLYSEG_KERNELS_X86

#if POLYSEG_KERNELS_AARCH64
// NEON covers the float elementwise kernels and float GEMM; everything else
// falls back to scalar on aarch64.
namespace neon_impl {

void add(const float* a, const float* b, float* out, std::size_t n);
void mul(const float* a, const float* b, float* out, std::size_t n);
void mul_acc(const float* a, const float* b, float* dst, std::size_t n);
void axpy(float alpha, const float* x, float* y, std::size_t n);
void scale(float alpha, const float* x, float* y, std::size_t n);
void scale_shift(const float* x, float a, float b, float* y, std::size_t n);
void lincomb_acc(float* dst, float a, const float* x, float b, const float* y, float c, std::size_t n);
void relu(const float* x, float* y, std::size_t n);
void relu6(const float* x, float* y, std::size_t n);
void relu_backward(const float* x, const float* dy, float* dx, std::size_t n);
void relu6_backward(const float* x, const float* dy, float* dx, std::size_t n);
void gemm_nn(const float* A, const float* B, float* C, std::size_t M, std::size_t K, std::size_t N);
void gemm_nt(const float* A, const float* B, float* C, std::size_t M, std::size_t K, std::size_t N);
void gemm_tn(const float* A, const float* B, float* C, std::size_t M, std::size_t K, std::size_t N);

}  // namespace neon_impl
#endif  // POLYSEG_KERNELS_AARCH64

}  // namespace polyseg::kernels
