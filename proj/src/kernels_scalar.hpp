#pragma once

#include <cmath>
#include <cstddef>

// Scalar reference kernels. These define the semantics the SIMD variants
// are tested against. Elementwise loops keep mul/add as separate roundings
// so SIMD backends can match them bit for bit.

namespace polyseg::kernels::scalar_impl {

template <class T>
void add(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <class T>
void mul(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <class T>
void mul_acc(const T* a, const T* b, T* dst, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    T t = a[i] * b[i];
    dst[i] = dst[i] + t;
  }
}

template <class T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    T t = alpha * x[i];
    y[i] = y[i] + t;
  }
}

template <class T>
void scale(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = alpha * x[i];
}

template <class T>
void scale_shift(const T* x, T a, T b, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    T t = a * x[i];
    y[i] = t + b;
  }
}

template <class T>
void lincomb_acc(T* dst, T a, const T* x, T b, const T* y, T c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    T t = dst[i] + a * x[i];
    t = t + b * y[i];
    dst[i] = t + c;
  }
}

template <class T>
void relu(const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <class T>
void relu6(const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    T t = x[i] > T(0) ? x[i] : T(0);
    y[i] = t < T(6) ? t : T(6);
  }
}

template <class T>
void relu_backward(const T* x, const T* dy, T* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > T(0)) dx[i] = dx[i] + dy[i];
  }
}

template <class T>
void relu6_backward(const T* x, const T* dy, T* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > T(0) && x[i] < T(6)) dx[i] = dx[i] + dy[i];
  }
}

template <class T>
void adadelta_update(T* param, const T* grad, T* sq_grad, T* sq_update,
                     T lr, T rho, T eps, std::size_t n) {
  const T c1 = T(1) - rho;
  for (std::size_t i = 0; i < n; ++i) {
    T g = grad[i];
    T g2 = rho * sq_grad[i] + c1 * (g * g);
    T num = std::sqrt(sq_update[i] + eps);
    T den = std::sqrt(g2 + eps);
    T delta = -((num / den) * g);
    T u = rho * sq_update[i] + c1 * (delta * delta);
    sq_grad[i] = g2;
    sq_update[i] = u;
    param[i] = param[i] + lr * delta;
  }
}

template <class T>
double sum(const T* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(x[i]);
  return acc;
}

template <class T>
double dot(const T* a, const T* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

template <class T>
double sum_sq_dev(const T* x, T mean, std::size_t n) {
  double acc = 0.0;
  double m = static_cast<double>(mean);
  for (std::size_t i = 0; i < n; ++i) {
    double d = static_cast<double>(x[i]) - m;
    acc += d * d;
  }
  return acc;
}

template <class T>
void gemm_nn(const T* A, const T* B, T* C, std::size_t M, std::size_t K, std::size_t N) {
  for (std::size_t m = 0; m < M; ++m) {
    T* c = C + m * N;
    for (std::size_t k = 0; k < K; ++k) {
      T a = A[m * K + k];
      const T* b = B + k * N;
      for (std::size_t j = 0; j < N; ++j) {
        T t = a * b[j];
        c[j] = c[j] + t;
      }
    }
  }
}

template <class T>
void gemm_nt(const T* A, const T* B, T* C, std::size_t M, std::size_t K, std::size_t N) {
  for (std::size_t m = 0; m < M; ++m) {
    const T* a = A + m * K;
    for (std::size_t j = 0; j < N; ++j) {
      const T* b = B + j * K;
      T acc = T(0);
      for (std::size_t k = 0; k < K; ++k) acc += a[k] * b[k];
      C[m * N + j] += acc;
    }
  }
}

template <class T>
void gemm_tn(const T* A, const T* B, T* C, std::size_t M, std::size_t K, std::size_t N) {
  for (std::size_t k = 0; k < K; ++k) {
    const T* a = A + k * M;
    const T* b = B + k * N;
    for (std::size_t m = 0; m < M; ++m) {
      T am = a[m];
      T* c = C + m * N;
      for (std::size_t j = 0; j < N; ++j) {
        T t = am * b[j];
        c[j] = c[j] + t;
      }
    }
  }
}

}  // namespace polyseg::kernels::scalar_impl
