#include "polyseg/ops.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "polyseg/kernels.hpp"

namespace polyseg::ops {

namespace {

template <class T>
void debug_check_finite(const char* op, const TensorT<T>& t) {
#ifndef NDEBUG
  for (T v : t.data()) {
    if (!std::isfinite(v)) throw std::runtime_error(std::string(op) + " produced a non-finite value");
  }
#else
  (void)op;
  (void)t;
#endif
}

template <class T>
bool any_requires_grad(std::initializer_list<const TensorT<T>*> ins) {
  for (const TensorT<T>* t : ins)
    if (t && t->requires_grad()) return true;
  return false;
}

// (C*kh*kw) x (Ho*Wo) patch matrix; out-of-frame taps read zero.
template <class T>
void im2col(const T* x, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw, int64_t stride,
            int64_t pad, int64_t Ho, int64_t Wo, T* col) {
  const int64_t P = Ho * Wo;
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t i = 0; i < kh; ++i) {
      for (int64_t j = 0; j < kw; ++j) {
        T* row = col + ((c * kh + i) * kw + j) * P;
        for (int64_t oh = 0; oh < Ho; ++oh) {
          const int64_t ih = oh * stride - pad + i;
          T* dst = row + oh * Wo;
          if (ih < 0 || ih >= H) {
            std::memset(dst, 0, size_t(Wo) * sizeof(T));
            continue;
          }
          const T* src = x + (c * H + ih) * W;
          for (int64_t ow = 0; ow < Wo; ++ow) {
            const int64_t iw = ow * stride - pad + j;
            dst[ow] = (iw >= 0 && iw < W) ? src[iw] : T(0);
          }
        }
      }
    }
  }
}

template <class T>
void col2im_acc(const T* col, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw,
                int64_t stride, int64_t pad, int64_t Ho, int64_t Wo, T* dx) {
  const int64_t P = Ho * Wo;
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t i = 0; i < kh; ++i) {
      for (int64_t j = 0; j < kw; ++j) {
        const T* row = col + ((c * kh + i) * kw + j) * P;
        for (int64_t oh = 0; oh < Ho; ++oh) {
          const int64_t ih = oh * stride - pad + i;
          if (ih < 0 || ih >= H) continue;
          T* dst = dx + (c * H + ih) * W;
          const T* src = row + oh * Wo;
          for (int64_t ow = 0; ow < Wo; ++ow) {
            const int64_t iw = ow * stride - pad + j;
            if (iw >= 0 && iw < W) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

}  // namespace

int64_t conv_out_extent(int64_t in, int64_t k, int64_t stride, int64_t padding) {
  return (in + 2 * padding - k) / stride + 1;
}

template <class T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& weight,
                  const std::type_identity_t<TensorT<T>>* bias,
                  int64_t stride, int64_t padding, int64_t groups) {
  POLYSEG_CHECK(input.rank() == 4, "conv2d input must be rank 4, got " << input.shape().str());
  POLYSEG_CHECK(weight.rank() == 4, "conv2d weight must be rank 4, got " << weight.shape().str());
  POLYSEG_CHECK(stride >= 1, "conv2d stride " << stride << " must be >= 1");
  POLYSEG_CHECK(padding >= 0, "conv2d padding " << padding << " must be >= 0");
  POLYSEG_CHECK(groups >= 1, "conv2d groups " << groups << " must be >= 1");

  const int64_t N = input.dim(0), Cin = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int64_t Cout = weight.dim(0), Cw = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);

  POLYSEG_CHECK(Cin % groups == 0,
                "conv2d groups " << groups << " does not divide input channels " << Cin);
  POLYSEG_CHECK(Cout % groups == 0,
                "conv2d groups " << groups << " does not divide output channels " << Cout);
  POLYSEG_CHECK(Cw == Cin / groups, "conv2d weight channel dim " << Cw << " does not match Cin/groups = "
                                                                 << Cin / groups);
  POLYSEG_CHECK(kh <= H + 2 * padding,
                "conv2d kernel height " << kh << " exceeds padded input height " << H + 2 * padding);
  POLYSEG_CHECK(kw <= W + 2 * padding,
                "conv2d kernel width " << kw << " exceeds padded input width " << W + 2 * padding);
  if (bias) {
    POLYSEG_CHECK(bias->rank() == 1 && bias->dim(0) == Cout,
                  "conv2d bias shape " << bias->shape().str() << " does not match Cout " << Cout);
  }

  const int64_t Ho = conv_out_extent(H, kh, stride, padding);
  const int64_t Wo = conv_out_extent(W, kw, stride, padding);
  const int64_t P = Ho * Wo;
  const int64_t Kg = Cw * kh * kw;      // patch rows per group
  const int64_t CoutG = Cout / groups;  // filters per group

  TensorT<T> out(Shape{N, Cout, Ho, Wo});
  std::vector<T> col(size_t(Cin * kh * kw * P));

  for (int64_t n = 0; n < N; ++n) {
    im2col(input.data_ptr() + n * Cin * H * W, Cin, H, W, kh, kw, stride, padding, Ho, Wo, col.data());
    T* yn = out.data_ptr() + n * Cout * P;
    if (bias) {
      for (int64_t oc = 0; oc < Cout; ++oc) {
        const T bv = bias->data()[size_t(oc)];
        T* row = yn + oc * P;
        for (int64_t p = 0; p < P; ++p) row[p] = bv;
      }
    }
    for (int64_t g = 0; g < groups; ++g) {
      kernels::gemm_nn(weight.data_ptr() + g * CoutG * Kg, col.data() + g * Kg * P,
                       yn + g * CoutG * P, size_t(CoutG), size_t(Kg), size_t(P));
    }
  }
  debug_check_finite("conv2d", out);

  const bool bias_grad = bias && bias->requires_grad();
  if (auto* tape = TapeT<T>::current();
      tape && (input.requires_grad() || weight.requires_grad() || bias_grad)) {
    out.set_requires_grad(true);
    TensorT<T> x = input, w = weight, y = out;
    TensorT<T> b = bias ? *bias : TensorT<T>();
    std::vector<TensorT<T>> ins{input, weight};
    if (bias) ins.push_back(*bias);
    tape->record(ins, out, [x, w, b, y, stride, padding, groups, N, Cin, H, W, Cout, kh, kw, Ho,
                            Wo, P, Kg, CoutG]() mutable {
      std::vector<T> col;
      if (w.requires_grad()) col.resize(size_t(Cin * kh * kw * P));
      std::vector<T> dcol;
      if (x.requires_grad()) dcol.resize(size_t(Cin * kh * kw * P));
      for (int64_t n = 0; n < N; ++n) {
        const T* dy = y.grad_ptr() + n * Cout * P;
        if (w.requires_grad())
          im2col(x.data_ptr() + n * Cin * H * W, Cin, H, W, kh, kw, stride, padding, Ho, Wo,
                 col.data());
        if (w.requires_grad()) {
          for (int64_t g = 0; g < groups; ++g)
            kernels::gemm_nt(dy + g * CoutG * P, col.data() + g * Kg * P,
                             w.grad_ptr() + g * CoutG * Kg, size_t(CoutG), size_t(P), size_t(Kg));
        }
        if (x.requires_grad()) {
          std::fill(dcol.begin(), dcol.end(), T(0));
          for (int64_t g = 0; g < groups; ++g)
            kernels::gemm_tn(w.data_ptr() + g * CoutG * Kg, dy + g * CoutG * P,
                             dcol.data() + g * Kg * P, size_t(Kg), size_t(CoutG), size_t(P));
          col2im_acc(dcol.data(), Cin, H, W, kh, kw, stride, padding, Ho, Wo,
                     x.grad_ptr() + n * Cin * H * W);
        }
        if (b.defined() && b.requires_grad()) {
          for (int64_t oc = 0; oc < Cout; ++oc)
            b.grad()[size_t(oc)] += static_cast<T>(kernels::sum(dy + oc * P, size_t(P)));
        }
      }
    });
  }
  return out;
}

template <class T>
TensorT<T> batchnorm2d(const TensorT<T>& input, const TensorT<T>& gamma, const TensorT<T>& beta,
                       TensorT<T>& running_mean, TensorT<T>& running_var, bool training,
                       T momentum, T eps) {
  POLYSEG_CHECK(input.rank() == 4, "batchnorm2d input must be rank 4, got " << input.shape().str());
  const int64_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  POLYSEG_CHECK(gamma.rank() == 1 && gamma.dim(0) == C,
                "batchnorm2d gamma shape " << gamma.shape().str() << " does not match C=" << C);
  POLYSEG_CHECK(beta.rank() == 1 && beta.dim(0) == C,
                "batchnorm2d beta shape " << beta.shape().str() << " does not match C=" << C);
  POLYSEG_CHECK(running_mean.rank() == 1 && running_mean.dim(0) == C &&
                    running_var.rank() == 1 && running_var.dim(0) == C,
                "batchnorm2d running stats do not match C=" << C);
  POLYSEG_CHECK(eps > T(0), "batchnorm2d eps must be positive");
  POLYSEG_CHECK(N * H * W >= 1, "batchnorm2d requires at least one value per channel");

  const int64_t HW = H * W;
  const int64_t m = N * HW;

  std::vector<double> mean(static_cast<size_t>(C));
  std::vector<double> invstd(static_cast<size_t>(C));
  if (training) {
    for (int64_t c = 0; c < C; ++c) {
      double s = 0.0;
      for (int64_t n = 0; n < N; ++n)
        s += kernels::sum(input.data_ptr() + (n * C + c) * HW, size_t(HW));
      const double mu = s / double(m);
      double ss = 0.0;
      for (int64_t n = 0; n < N; ++n)
        ss += kernels::sum_sq_dev(input.data_ptr() + (n * C + c) * HW, static_cast<T>(mu), size_t(HW));
      const double var = ss / double(m);  // biased, matching the running-state update
      mean[size_t(c)] = mu;
      invstd[size_t(c)] = 1.0 / std::sqrt(var + double(eps));
      const double mom = double(momentum);
      running_mean.data()[size_t(c)] =
          static_cast<T>((1.0 - mom) * double(running_mean.data()[size_t(c)]) + mom * mu);
      running_var.data()[size_t(c)] =
          static_cast<T>((1.0 - mom) * double(running_var.data()[size_t(c)]) + mom * var);
    }
  } else {
    for (int64_t c = 0; c < C; ++c) {
      mean[size_t(c)] = double(running_mean.data()[size_t(c)]);
      invstd[size_t(c)] = 1.0 / std::sqrt(double(running_var.data()[size_t(c)]) + double(eps));
    }
  }

  TensorT<T> out(input.shape());
  for (int64_t c = 0; c < C; ++c) {
    const double a = double(gamma.data()[size_t(c)]) * invstd[size_t(c)];
    const double b = double(beta.data()[size_t(c)]) - mean[size_t(c)] * a;
    for (int64_t n = 0; n < N; ++n)
      kernels::scale_shift(input.data_ptr() + (n * C + c) * HW, static_cast<T>(a),
                           static_cast<T>(b), out.data_ptr() + (n * C + c) * HW, size_t(HW));
  }
  debug_check_finite("batchnorm2d", out);

  if (auto* tape = TapeT<T>::current();
      tape && (input.requires_grad() || gamma.requires_grad() || beta.requires_grad())) {
    out.set_requires_grad(true);
    TensorT<T> x = input, g = gamma, bt = beta, y = out;
    tape->record({input, gamma, beta}, out,
                 [x, g, bt, y, mean, invstd, training, N, C, HW, m]() mutable {
                   for (int64_t c = 0; c < C; ++c) {
                     double s1 = 0.0, sxy = 0.0;
                     for (int64_t n = 0; n < N; ++n) {
                       const T* dy = y.grad_ptr() + (n * C + c) * HW;
                       s1 += kernels::sum(dy, size_t(HW));
                       sxy += kernels::dot(dy, x.data_ptr() + (n * C + c) * HW, size_t(HW));
                     }
                     const double mu = mean[size_t(c)];
                     const double inv = invstd[size_t(c)];
                     const double s2 = inv * (sxy - mu * s1);  // sum(dy * xhat)
                     if (g.requires_grad()) g.grad()[size_t(c)] += static_cast<T>(s2);
                     if (bt.requires_grad()) bt.grad()[size_t(c)] += static_cast<T>(s1);
                     if (!x.requires_grad()) continue;
                     const double k1 = double(g.data()[size_t(c)]) * inv;
                     double a, b, c0;
                     if (training) {
                       a = k1;
                       b = -k1 * s2 * inv / double(m);
                       c0 = -k1 / double(m) * (s1 - s2 * inv * mu);
                     } else {
                       a = k1;
                       b = 0.0;
                       c0 = 0.0;
                     }
                     for (int64_t n = 0; n < N; ++n)
                       kernels::lincomb_acc(x.grad_ptr() + (n * C + c) * HW, static_cast<T>(a),
                                            y.grad_ptr() + (n * C + c) * HW, static_cast<T>(b),
                                            x.data_ptr() + (n * C + c) * HW, static_cast<T>(c0),
                                            size_t(HW));
                   }
                 });
  }
  return out;
}

template <class T>
TensorT<T> relu(const TensorT<T>& x) {
  TensorT<T> out(x.shape());
  kernels::relu(x.data_ptr(), out.data_ptr(), size_t(x.numel()));
  if (auto* tape = TapeT<T>::current(); tape && x.requires_grad()) {
    out.set_requires_grad(true);
    TensorT<T> xin = x, y = out;
    tape->record({x}, out, [xin, y]() mutable {
      kernels::relu_backward(xin.data_ptr(), y.grad_ptr(), xin.grad_ptr(), size_t(xin.numel()));
    });
  }
  return out;
}

template <class T>
TensorT<T> relu6(const TensorT<T>& x) {
  TensorT<T> out(x.shape());
  kernels::relu6(x.data_ptr(), out.data_ptr(), size_t(x.numel()));
  if (auto* tape = TapeT<T>::current(); tape && x.requires_grad()) {
    out.set_requires_grad(true);
    TensorT<T> xin = x, y = out;
    tape->record({x}, out, [xin, y]() mutable {
      kernels::relu6_backward(xin.data_ptr(), y.grad_ptr(), xin.grad_ptr(), size_t(xin.numel()));
    });
  }
  return out;
}

template <class T>
TensorT<T> sigmoid(const TensorT<T>& x) {
  TensorT<T> out(x.shape());
  const T lo = std::numeric_limits<T>::min();
  const T hi = T(1) - std::numeric_limits<T>::epsilon() / T(2);
  auto xs = x.data();
  auto ys = out.data();
  for (size_t i = 0; i < xs.size(); ++i) {
    const T v = xs[i];
    T y;
    if (v >= T(0)) {
      y = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      y = e / (T(1) + e);
    }
    // keep outputs strictly inside (0, 1) even where exp saturates
    ys[i] = y < lo ? lo : (y > hi ? hi : y);
  }
  if (auto* tape = TapeT<T>::current(); tape && x.requires_grad()) {
    out.set_requires_grad(true);
    TensorT<T> xin = x, y = out;
    tape->record({x}, out, [xin, y]() mutable {
      auto dy = y.grad();
      auto yv = y.data();
      auto dx = xin.grad();
      for (size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * yv[i] * (T(1) - yv[i]);
    });
  }
  return out;
}

template <class T>
TensorT<T> activation(const TensorT<T>& x, Act kind) {
  switch (kind) {
    case Act::relu: return relu(x);
    case Act::relu6: return relu6(x);
    case Act::sigmoid: return sigmoid(x);
  }
  POLYSEG_CHECK(false, "unknown activation kind");
  return {};
}

template <class T>
TensorT<T> upsample2x(const TensorT<T>& x) {
  POLYSEG_CHECK(x.rank() == 4, "upsample2x input must be rank 4, got " << x.shape().str());
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  TensorT<T> out(Shape{N, C, 2 * H, 2 * W});
  const T* src = x.data_ptr();
  T* dst = out.data_ptr();
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const T* plane = src + nc * H * W;
    T* oplane = dst + nc * 4 * H * W;
    for (int64_t h = 0; h < H; ++h) {
      T* row0 = oplane + (2 * h) * 2 * W;
      T* row1 = row0 + 2 * W;
      const T* irow = plane + h * W;
      for (int64_t w = 0; w < W; ++w) {
        const T v = irow[w];
        row0[2 * w] = v;
        row0[2 * w + 1] = v;
        row1[2 * w] = v;
        row1[2 * w + 1] = v;
      }
    }
  }
  if (auto* tape = TapeT<T>::current(); tape && x.requires_grad()) {
    out.set_requires_grad(true);
    TensorT<T> xin = x, y = out;
    tape->record({x}, out, [xin, y, N, C, H, W]() mutable {
      const T* dy = y.grad_ptr();
      T* dx = xin.grad_ptr();
      for (int64_t nc = 0; nc < N * C; ++nc) {
        const T* oplane = dy + nc * 4 * H * W;
        T* plane = dx + nc * H * W;
        for (int64_t h = 0; h < H; ++h) {
          const T* row0 = oplane + (2 * h) * 2 * W;
          const T* row1 = row0 + 2 * W;
          T* irow = plane + h * W;
          for (int64_t w = 0; w < W; ++w)
            irow[w] += row0[2 * w] + row0[2 * w + 1] + row1[2 * w] + row1[2 * w + 1];
        }
      }
    });
  }
  return out;
}

template <class T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
  POLYSEG_CHECK(a.rank() == 4 && b.rank() == 4, "concat_channels expects rank-4 tensors, got "
                                                    << a.shape().str() << " and " << b.shape().str());
  POLYSEG_CHECK(a.dim(0) == b.dim(0),
                "concat_channels batch mismatch: " << a.dim(0) << " vs " << b.dim(0));
  POLYSEG_CHECK(a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
                "concat_channels spatial mismatch: " << a.shape().str() << " vs " << b.shape().str());
  const int64_t N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), H = a.dim(2), W = a.dim(3);
  const int64_t HW = H * W;
  TensorT<T> out(Shape{N, Ca + Cb, H, W});
  for (int64_t n = 0; n < N; ++n) {
    if (Ca > 0)
      std::memcpy(out.data_ptr() + n * (Ca + Cb) * HW, a.data_ptr() + n * Ca * HW,
                  size_t(Ca * HW) * sizeof(T));
    if (Cb > 0)
      std::memcpy(out.data_ptr() + (n * (Ca + Cb) + Ca) * HW, b.data_ptr() + n * Cb * HW,
                  size_t(Cb * HW) * sizeof(T));
  }
  if (auto* tape = TapeT<T>::current(); tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    TensorT<T> ta = a, tb = b, y = out;
    tape->record({a, b}, out, [ta, tb, y, N, Ca, Cb, HW]() mutable {
      for (int64_t n = 0; n < N; ++n) {
        const T* dy = y.grad_ptr() + n * (Ca + Cb) * HW;
        if (ta.requires_grad())
          kernels::axpy(T(1), dy, ta.grad_ptr() + n * Ca * HW, size_t(Ca * HW));
        if (tb.requires_grad())
          kernels::axpy(T(1), dy + Ca * HW, tb.grad_ptr() + n * Cb * HW, size_t(Cb * HW));
      }
    });
  }
  return out;
}

template <class T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  POLYSEG_CHECK(a.shape() == b.shape(),
                "add shape mismatch: " << a.shape().str() << " vs " << b.shape().str());
  TensorT<T> out(a.shape());
  kernels::add(a.data_ptr(), b.data_ptr(), out.data_ptr(), size_t(a.numel()));
  if (auto* tape = TapeT<T>::current(); tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    TensorT<T> ta = a, tb = b, y = out;
    tape->record({a, b}, out, [ta, tb, y]() mutable {
      if (ta.requires_grad()) kernels::axpy(T(1), y.grad_ptr(), ta.grad_ptr(), size_t(ta.numel()));
      if (tb.requires_grad()) kernels::axpy(T(1), y.grad_ptr(), tb.grad_ptr(), size_t(tb.numel()));
    });
  }
  return out;
}

template <class T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  POLYSEG_CHECK(a.shape() == b.shape(),
                "mul shape mismatch: " << a.shape().str() << " vs " << b.shape().str());
  TensorT<T> out(a.shape());
  kernels::mul(a.data_ptr(), b.data_ptr(), out.data_ptr(), size_t(a.numel()));
  if (auto* tape = TapeT<T>::current(); tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    TensorT<T> ta = a, tb = b, y = out;
    tape->record({a, b}, out, [ta, tb, y]() mutable {
      if (ta.requires_grad())
        kernels::mul_acc(y.grad_ptr(), tb.data_ptr(), ta.grad_ptr(), size_t(ta.numel()));
      if (tb.requires_grad())
        kernels::mul_acc(y.grad_ptr(), ta.data_ptr(), tb.grad_ptr(), size_t(tb.numel()));
    });
  }
  return out;
}

template <class T>
TensorT<T> div(const TensorT<T>& a, const TensorT<T>& b) {
  POLYSEG_CHECK(a.shape() == b.shape(),
                "div shape mismatch: " << a.shape().str() << " vs " << b.shape().str());
  TensorT<T> out(a.shape());
  auto av = a.data();
  auto bv = b.data();
  auto ov = out.data();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] / bv[i];
  debug_check_finite("div", out);
  if (auto* tape = TapeT<T>::current(); tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    TensorT<T> ta = a, tb = b, y = out;
    tape->record({a, b}, out, [ta, tb, y]() mutable {
      auto dy = y.grad();
      auto av2 = ta.data();
      auto bv2 = tb.data();
      if (ta.requires_grad()) {
        auto da = ta.grad();
        for (size_t i = 0; i < da.size(); ++i) da[i] += dy[i] / bv2[i];
      }
      if (tb.requires_grad()) {
        auto db = tb.grad();
        for (size_t i = 0; i < db.size(); ++i) db[i] -= dy[i] * av2[i] / (bv2[i] * bv2[i]);
      }
    });
  }
  return out;
}

template <class T>
TensorT<T> add_scalar(const TensorT<T>& x, T c) {
  TensorT<T> out(x.shape());
  kernels::scale_shift(x.data_ptr(), T(1), c, out.data_ptr(), size_t(x.numel()));
  if (auto* tape = TapeT<T>::current(); tape && x.requires_grad()) {
    out.set_requires_grad(true);
    TensorT<T> xin = x, y = out;
    tape->record({x}, out, [xin, y]() mutable {
      kernels::axpy(T(1), y.grad_ptr(), xin.grad_ptr(), size_t(xin.numel()));
    });
  }
  return out;
}

template <class T>
TensorT<T> mul_scalar(const TensorT<T>& x, T c) {
  TensorT<T> out(x.shape());
  kernels::scale(c, x.data_ptr(), out.data_ptr(), size_t(x.numel()));
  if (auto* tape = TapeT<T>::current(); tape && x.requires_grad()) {
    out.set_requires_grad(true);
    TensorT<T> xin = x, y = out;
    tape->record({x}, out, [xin, y, c]() mutable {
      kernels::axpy(c, y.grad_ptr(), xin.grad_ptr(), size_t(xin.numel()));
    });
  }
  return out;
}

template <class T>
TensorT<T> reduce_sum(const TensorT<T>& x) {
  POLYSEG_CHECK(x.numel() >= 1, "reduce_sum of an empty tensor");
  TensorT<T> out = TensorT<T>::scalar(static_cast<T>(kernels::sum(x.data_ptr(), size_t(x.numel()))));
  if (auto* tape = TapeT<T>::current(); tape && x.requires_grad()) {
    out.set_requires_grad(true);
    TensorT<T> xin = x, y = out;
    tape->record({x}, out, [xin, y]() mutable {
      const T g = y.grad()[0];
      auto dx = xin.grad();
      for (size_t i = 0; i < dx.size(); ++i) dx[i] += g;
    });
  }
  return out;
}

template <class T>
TensorT<T> reduce_mean(const TensorT<T>& x) {
  POLYSEG_CHECK(x.numel() >= 1, "reduce_mean of an empty tensor");
  const int64_t n = x.numel();
  TensorT<T> out =
      TensorT<T>::scalar(static_cast<T>(kernels::sum(x.data_ptr(), size_t(n)) / double(n)));
  if (auto* tape = TapeT<T>::current(); tape && x.requires_grad()) {
    out.set_requires_grad(true);
    TensorT<T> xin = x, y = out;
    tape->record({x}, out, [xin, y, n]() mutable {
      const T alpha = y.grad()[0] / static_cast<T>(n);
      auto dx = xin.grad();
      for (size_t i = 0; i < dx.size(); ++i) dx[i] += alpha;
    });
  }
  return out;
}

#define POLYSEG_OPS_INSTANTIATE(T)                                                                \
  template TensorT<T> conv2d<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>*, int64_t, \
                                int64_t, int64_t);                                                \
  template TensorT<T> batchnorm2d<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,     \
                                     TensorT<T>&, TensorT<T>&, bool, T, T);                       \
  template TensorT<T> relu<T>(const TensorT<T>&);                                                 \
  template TensorT<T> relu6<T>(const TensorT<T>&);                                                \
  template TensorT<T> sigmoid<T>(const TensorT<T>&);                                              \
  template TensorT<T> activation<T>(const TensorT<T>&, Act);                                      \
  template TensorT<T> upsample2x<T>(const TensorT<T>&);                                           \
  template TensorT<T> concat_channels<T>(const TensorT<T>&, const TensorT<T>&);                   \
  template TensorT<T> add<T>(const TensorT<T>&, const TensorT<T>&);                               \
  template TensorT<T> mul<T>(const TensorT<T>&, const TensorT<T>&);                               \
  template TensorT<T> div<T>(const TensorT<T>&, const TensorT<T>&);                               \
  template TensorT<T> add_scalar<T>(const TensorT<T>&, T);                                        \
  template TensorT<T> mul_scalar<T>(const TensorT<T>&, T);                                        \
  template TensorT<T> reduce_sum<T>(const TensorT<T>&);                                           \
  template TensorT<T> reduce_mean<T>(const TensorT<T>&);

POLYSEG_OPS_INSTANTIATE(float)
POLYSEG_OPS_INSTANTIATE(double)

#undef POLYSEG_OPS_INSTANTIATE

}  // namespace polyseg::ops
