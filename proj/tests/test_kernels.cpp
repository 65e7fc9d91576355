#include <array>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "polyseg/kernels.hpp"
#include "polyseg/rng.hpp"

using namespace polyseg;
namespace k = polyseg::kernels;

namespace {

// Sizes chosen to hit the SIMD body and the scalar tails.
const std::vector<size_t> kSizes = {0, 1, 3, 7, 8, 9, 15, 16, 17, 31, 64, 67, 257, 1024};

template <class T>
std::vector<T> random_vec(size_t n, rng::SplitMix64& r, double lo = -2.0, double hi = 2.0) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(r.uniform(lo, hi));
  return v;
}

struct BackendGuard {
  k::Backend saved;
  BackendGuard() : saved(k::active_backend()) {}
  ~BackendGuard() { k::set_backend(saved); }
};

bool simd_available() {
  return k::backend_supported(k::Backend::avx2) || k::backend_supported(k::Backend::neon);
}

k::Backend simd_backend() {
  return k::backend_supported(k::Backend::avx2) ? k::Backend::avx2 : k::Backend::neon;
}

template <class T>
void expect_bitwise_equal(const std::vector<T>& a, const std::vector<T>& b) {
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    INFO("index ", i);
    CHECK(std::memcmp(&a[i], &b[i], sizeof(T)) == 0);
  }
}

template <class T>
void expect_close(const std::vector<T>& a, const std::vector<T>& b, double rel) {
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    double denom = std::max({std::abs(double(a[i])), std::abs(double(b[i])), 1.0});
    INFO("index ", i);
    CHECK(std::abs(double(a[i]) - double(b[i])) / denom <= rel);
  }
}

// Runs fn under both backends, returning {scalar_result, simd_result}.
template <class Fn>
auto under_both(Fn&& fn) {
  BackendGuard guard;
  k::set_backend(k::Backend::scalar);
  auto ref = fn();
  k::set_backend(simd_backend());
  auto simd = fn();
  return std::make_pair(ref, simd);
}

}  // namespace

TEST_CASE("backend dispatch basics") {
  CHECK(k::backend_supported(k::Backend::scalar));
  BackendGuard guard;
  k::set_backend(k::Backend::scalar);
  CHECK(k::active_backend() == k::Backend::scalar);
  CHECK_THROWS_AS(k::set_backend(k::backend_supported(k::Backend::avx2) ? k::Backend::neon
                                                                        : k::Backend::avx2),
                  std::invalid_argument);
}

template <class T>
void elementwise_equivalence() {
  if (!simd_available()) return;
  rng::SplitMix64 r(42);
  for (size_t n : kSizes) {
    auto a = random_vec<T>(n, r);
    auto b = random_vec<T>(n, r);
    auto x = random_vec<T>(n, r, -3.0, 9.0);  // spans relu6's both clamps
    const T alpha = static_cast<T>(r.uniform(-1.5, 1.5));
    const T beta = static_cast<T>(r.uniform(-1.5, 1.5));
    const T c = static_cast<T>(r.uniform(-1.5, 1.5));

    auto run_add = [&] { std::vector<T> o(n); k::add(a.data(), b.data(), o.data(), n); return o; };
    auto [r1, s1] = under_both(run_add);
    expect_bitwise_equal(r1, s1);

    auto run_mul = [&] { std::vector<T> o(n); k::mul(a.data(), b.data(), o.data(), n); return o; };
    auto [r2, s2] = under_both(run_mul);
    expect_bitwise_equal(r2, s2);

    auto run_mul_acc = [&] { auto o = x; k::mul_acc(a.data(), b.data(), o.data(), n); return o; };
    auto [r3, s3] = under_both(run_mul_acc);
    expect_bitwise_equal(r3, s3);

    auto run_axpy = [&] { auto o = b; k::axpy(alpha, a.data(), o.data(), n); return o; };
    auto [r4, s4] = under_both(run_axpy);
    expect_bitwise_equal(r4, s4);

    auto run_scale = [&] { std::vector<T> o(n); k::scale(alpha, a.data(), o.data(), n); return o; };
    auto [r5, s5] = under_both(run_scale);
    expect_bitwise_equal(r5, s5);

    auto run_ss = [&] { std::vector<T> o(n); k::scale_shift(a.data(), alpha, beta, o.data(), n); return o; };
    auto [r6, s6] = under_both(run_ss);
    expect_bitwise_equal(r6, s6);

    auto run_lin = [&] { auto o = x; k::lincomb_acc(o.data(), alpha, a.data(), beta, b.data(), c, n); return o; };
    auto [r7, s7] = under_both(run_lin);
    expect_bitwise_equal(r7, s7);

    auto run_relu = [&] { std::vector<T> o(n); k::relu(x.data(), o.data(), n); return o; };
    auto [r8, s8] = under_both(run_relu);
    expect_bitwise_equal(r8, s8);

    auto run_relu6 = [&] { std::vector<T> o(n); k::relu6(x.data(), o.data(), n); return o; };
    auto [r9, s9] = under_both(run_relu6);
    expect_bitwise_equal(r9, s9);

    auto run_relu_bwd = [&] { auto o = b; k::relu_backward(x.data(), a.data(), o.data(), n); return o; };
    auto [r10, s10] = under_both(run_relu_bwd);
    expect_bitwise_equal(r10, s10);

    auto run_relu6_bwd = [&] { auto o = b; k::relu6_backward(x.data(), a.data(), o.data(), n); return o; };
    auto [r11, s11] = under_both(run_relu6_bwd);
    expect_bitwise_equal(r11, s11);
  }
}

TEST_CASE("elementwise kernels: scalar and SIMD agree bitwise (float)") {
  elementwise_equivalence<float>();
}

TEST_CASE("elementwise kernels: scalar and SIMD agree bitwise (double)") {
  elementwise_equivalence<double>();
}

template <class T>
void adadelta_equivalence() {
  if (!simd_available()) return;
  rng::SplitMix64 r(7);
  for (size_t n : kSizes) {
    auto p0 = random_vec<T>(n, r);
    auto g = random_vec<T>(n, r);
    auto sg0 = random_vec<T>(n, r, 0.0, 1.0);
    auto su0 = random_vec<T>(n, r, 0.0, 1.0);
    auto run = [&] {
      auto p = p0;
      auto sg = sg0;
      auto su = su0;
      k::adadelta_update(p.data(), g.data(), sg.data(), su.data(), T(0.0001), T(0.95), T(1e-6), n);
      std::vector<T> all;
      all.insert(all.end(), p.begin(), p.end());
      all.insert(all.end(), sg.begin(), sg.end());
      all.insert(all.end(), su.begin(), su.end());
      return all;
    };
    auto [ref, simd] = under_both(run);
    expect_bitwise_equal(ref, simd);
  }
}

TEST_CASE("adadelta_update kernel: scalar and SIMD agree bitwise") {
  adadelta_equivalence<float>();
  adadelta_equivalence<double>();
}

template <class T>
void reduction_equivalence(double rel) {
  if (!simd_available()) return;
  rng::SplitMix64 r(11);
  for (size_t n : kSizes) {
    auto a = random_vec<T>(n, r);
    auto b = random_vec<T>(n, r);
    auto [s1, v1] = under_both([&] { return k::sum(a.data(), n); });
    CHECK(std::abs(s1 - v1) <= rel * std::max(1.0, std::abs(s1)));
    auto [s2, v2] = under_both([&] { return k::dot(a.data(), b.data(), n); });
    CHECK(std::abs(s2 - v2) <= rel * std::max(1.0, std::abs(s2)));
    auto [s3, v3] = under_both([&] { return k::sum_sq_dev(a.data(), T(0.25), n); });
    CHECK(std::abs(s3 - v3) <= rel * std::max(1.0, std::abs(s3)));
  }
}

TEST_CASE("reduction kernels: scalar and SIMD agree to rounding") {
  reduction_equivalence<float>(1e-10);
  reduction_equivalence<double>(1e-12);
}

namespace {

// Plain ijk product, independent of the kernel implementations.
template <class T>
std::vector<T> naive_gemm(const std::vector<T>& A, const std::vector<T>& B, size_t M, size_t K,
                          size_t N, bool ta, bool tb) {
  std::vector<T> C(M * N, T(0));
  for (size_t i = 0; i < M; ++i)
    for (size_t j = 0; j < N; ++j) {
      double acc = 0;
      for (size_t kk = 0; kk < K; ++kk) {
        double av = ta ? A[kk * M + i] : A[i * K + kk];
        double bv = tb ? B[j * K + kk] : B[kk * N + j];
        acc += av * bv;
      }
      C[i * N + j] = static_cast<T>(acc);
    }
  return C;
}

}  // namespace

template <class T>
void gemm_checks(double rel) {
  rng::SplitMix64 r(19);
  const std::vector<std::array<size_t, 3>> dims = {
      {1, 1, 1}, {2, 3, 4}, {5, 7, 9}, {8, 16, 8}, {13, 27, 33}, {32, 9, 70}, {3, 64, 17}};
  for (auto [M, K, N] : dims) {
    auto A = random_vec<T>(M * K, r);
    auto At = random_vec<T>(K * M, r);
    auto B = random_vec<T>(K * N, r);
    auto Bt = random_vec<T>(N * K, r);

    auto run_nn = [&] { std::vector<T> C(M * N, T(0)); k::gemm_nn(A.data(), B.data(), C.data(), M, K, N); return C; };
    auto run_nt = [&] { std::vector<T> C(M * N, T(0)); k::gemm_nt(A.data(), Bt.data(), C.data(), M, K, N); return C; };
    auto run_tn = [&] { std::vector<T> C(M * N, T(0)); k::gemm_tn(At.data(), B.data(), C.data(), M, K, N); return C; };

    // correctness of both backends vs the naive oracle
    BackendGuard guard;
    for (k::Backend b : {k::Backend::scalar, simd_available() ? simd_backend() : k::Backend::scalar}) {
      k::set_backend(b);
      expect_close(run_nn(), naive_gemm(A, B, M, K, N, false, false), rel);
      expect_close(run_nt(), naive_gemm(A, Bt, M, K, N, false, true), rel);
      expect_close(run_tn(), naive_gemm(At, B, M, K, N, true, false), rel);
    }
  }
}

TEST_CASE("gemm kernels match a naive oracle under every backend") {
  gemm_checks<float>(1e-4);
  gemm_checks<double>(1e-12);
}

TEST_CASE("gemm accumulates into C") {
  std::vector<float> A = {1, 2, 3, 4};  // 2x2
  std::vector<float> B = {5, 6, 7, 8};  // 2x2
  std::vector<float> C = {100, 100, 100, 100};
  k::gemm_nn(A.data(), B.data(), C.data(), 2, 2, 2);
  CHECK(C[0] == doctest::Approx(100 + 19));
  CHECK(C[1] == doctest::Approx(100 + 22));
  CHECK(C[2] == doctest::Approx(100 + 43));
  CHECK(C[3] == doctest::Approx(100 + 50));
}
