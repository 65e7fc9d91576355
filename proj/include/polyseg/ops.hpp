#pragma once

#include <cstdint>
#include <type_traits>

#include "polyseg/tensor.hpp"

// Differentiable tensor operations. Every op validates shapes up front,
// computes its forward result through the kernel layer, and — when a tape
// is active and an input requires gradients — records a backward rule on
// the tape. Convolution uses cross-correlation semantics (no kernel flip).

namespace polyseg::ops {

enum class Act { relu, relu6, sigmoid };

// floor((in + 2*padding - k) / stride) + 1
int64_t conv_out_extent(int64_t in, int64_t k, int64_t stride, int64_t padding);

// input N x Cin x H x W, weight Cout x (Cin/groups) x kh x kw, bias Cout.
// groups == Cin gives a depthwise convolution.
template <class T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& weight,
                  const std::type_identity_t<TensorT<T>>* bias,
                  int64_t stride = 1, int64_t padding = 0, int64_t groups = 1);

// Per-channel batch normalization over N,H,W. Train mode normalizes with
// batch statistics and folds them into the running state with
//   running <- (1 - momentum) * running + momentum * batch;
// eval mode normalizes with the running state.
template <class T>
TensorT<T> batchnorm2d(const TensorT<T>& input, const TensorT<T>& gamma, const TensorT<T>& beta,
                       TensorT<T>& running_mean, TensorT<T>& running_var, bool training,
                       T momentum, T eps);

template <class T> TensorT<T> relu(const TensorT<T>& x);
template <class T> TensorT<T> relu6(const TensorT<T>& x);
template <class T> TensorT<T> sigmoid(const TensorT<T>& x);
template <class T> TensorT<T> activation(const TensorT<T>& x, Act kind);

// Nearest-neighbor 2x upsample: every source pixel becomes a 2x2 block.
template <class T> TensorT<T> upsample2x(const TensorT<T>& x);

// Channel concatenation; a's channels come first.
template <class T> TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b);

template <class T> TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b);
template <class T> TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b);
template <class T> TensorT<T> div(const TensorT<T>& a, const TensorT<T>& b);
template <class T> TensorT<T> add_scalar(const TensorT<T>& x, T c);
template <class T> TensorT<T> mul_scalar(const TensorT<T>& x, T c);

// Full reductions to a 0-d tensor.
template <class T> TensorT<T> reduce_mean(const TensorT<T>& x);
template <class T> TensorT<T> reduce_sum(const TensorT<T>& x);

}  // namespace polyseg::ops
