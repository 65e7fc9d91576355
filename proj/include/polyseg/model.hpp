#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <type_traits>
#include <vector>

#include "polyseg/tensor.hpp"

// U-Net with a MobileNetV2 encoder. The encoder is a stack of inverted
// residual blocks exposing skip taps at strides 2/4/8/16 plus a stride-32
// bridge; the decoder upsamples, concatenates the matching tap and applies
// two 3x3 conv+BN+relu layers per block, ending in a 1x1 conv + sigmoid.

namespace polyseg::model {

// One encoder stage: `repeats` inverted residual blocks; the first repeat
// uses `stride`, the rest stride 1.
struct BlockSpec {
  int expansion;
  int out_channels;
  int repeats;
  int stride;
};

struct ModelConfig {
  int input_side = 320;
  int in_channels = 3;
  double width_multiplier = 1.0;
  std::vector<BlockSpec> encoder_plan = default_encoder_plan();
  std::array<int, 5> decoder_channels = {256, 128, 64, 32, 16};
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;

  // (t, c, n, s) table of the MobileNetV2 reference design.
  static std::vector<BlockSpec> default_encoder_plan() {
    return {{1, 16, 1, 1}, {6, 24, 2, 2},  {6, 32, 3, 2}, {6, 64, 4, 2},
            {6, 96, 3, 1}, {6, 160, 3, 2}, {6, 320, 1, 1}};
  }

  void validate() const;
};

// Width-multiplied channel count, rounded up to a multiple of 8, floor 8.
int scale_channels(int channels, double width_multiplier);

// Named tensor map holding every weight and BN running-stat buffer.
// Learnable tensors carry requires_grad; running stats do not. One map can
// serve any number of concurrent eval-mode forwards (reads only), but a
// train-mode forward/backward/update cycle needs exclusive ownership: BN
// running stats and gradients mutate.
template <class T>
struct ParamsT {
  std::map<std::string, TensorT<T>> tensors;

  TensorT<T>& at(const std::string& name) {
    auto it = tensors.find(name);
    POLYSEG_CHECK(it != tensors.end(), "unknown parameter '" << name << "'");
    return it->second;
  }
  const TensorT<T>& at(const std::string& name) const {
    auto it = tensors.find(name);
    POLYSEG_CHECK(it != tensors.end(), "unknown parameter '" << name << "'");
    return it->second;
  }

  int64_t total_elements() const {
    int64_t n = 0;
    for (const auto& [name, t] : tensors) n += t.numel();
    return n;
  }

  void zero_grads() {
    for (auto& [name, t] : tensors)
      if (t.has_grad()) t.zero_grad();
  }

  ParamsT clone() const {
    ParamsT c;
    for (const auto& [name, t] : tensors) {
      c.tensors.emplace(name, t.clone());
      c.tensors.at(name).set_requires_grad(t.requires_grad());
    }
    return c;
  }
};

using Params = ParamsT<float>;

template <class T>
struct EncoderTapsT {
  TensorT<T> t1;      // stride 2
  TensorT<T> t2;      // stride 4
  TensorT<T> t3;      // stride 8
  TensorT<T> t4;      // stride 16
  TensorT<T> bridge;  // stride 32
};

using EncoderTaps = EncoderTapsT<float>;

// Structural description of one tensor in the parameter map.
struct ParamInfo {
  enum class Init { he_normal, zeros, ones };
  std::string name;
  Shape shape;
  bool learnable;
  Init init;
  int64_t fan_in;  // he_normal only
};

// Deterministic enumeration of every tensor the config implies; the set of
// names is a pure function of the config.
std::vector<ParamInfo> parameter_table(const ModelConfig& config);

// Total element count over the parameter table (weights + BN stats).
int64_t parameter_count(const ModelConfig& config);

// he_normal conv weights, BN gamma=1 beta=0, running mean=0 var=1;
// bit-identical for identical (config, seed).
template <class T>
ParamsT<T> param_init(const ModelConfig& config, uint64_t seed);

// expand(1x1, skipped when t==1) + BN + relu6 -> depthwise 3x3 (stride) +
// BN + relu6 -> project(1x1) + BN; residual shortcut iff stride==1 and
// in_ch==out_ch. `prefix` locates the block's tensors in `params`.
template <class T>
TensorT<T> inverted_residual(const TensorT<T>& x, const std::string& prefix, int in_ch, int out_ch,
                             int expansion, int stride, const ParamsT<T>& params,
                             const ModelConfig& config, bool training);

template <class T>
EncoderTapsT<T> encoder_forward(const TensorT<T>& image, const ParamsT<T>& params,
                                const ModelConfig& config, bool training);

// upsample2x(x) -> concat skip (when present) -> [3x3 conv + BN + relu] x2.
template <class T>
TensorT<T> decoder_block(const TensorT<T>& x, const std::type_identity_t<TensorT<T>>* skip,
                         int out_ch, const std::string& prefix, const ParamsT<T>& params,
                         const ModelConfig& config, bool training);

// Full network: probabilities in (0,1), shape N x 1 x S x S.
template <class T>
TensorT<T> forward(const TensorT<T>& image, const ParamsT<T>& params, const ModelConfig& config,
                   bool training);

}  // namespace polyseg::model
