#include "polyseg/model.hpp"

#include <cmath>

#include "polyseg/ops.hpp"
#include "polyseg/rng.hpp"

namespace polyseg::model {

namespace {

struct ResolvedBlock {
  std::string prefix;
  int in_ch;
  int out_ch;
  int hidden;
  int stride;
  int expansion;
};

// Channel bookkeeping shared by the parameter table and the forward pass.
struct ResolvedPlan {
  int stem_ch = 0;
  std::vector<ResolvedBlock> blocks;
  // flattened block index whose output is the tap (t2, t3, t4)
  std::array<int, 3> tap_block{-1, -1, -1};
  std::array<int, 3> tap_ch{0, 0, 0};
  int bridge_ch = 0;
  std::array<int, 5> dec_in{};  // conv1 input channels per decoder block
};

ResolvedPlan resolve_plan(const ModelConfig& cfg) {
  cfg.validate();
  ResolvedPlan plan;
  plan.stem_ch = scale_channels(32, cfg.width_multiplier);

  // output stride per stage (stem already contributes a factor of 2)
  int stride_now = 2;
  std::vector<int> stage_out_stride;
  for (const BlockSpec& spec : cfg.encoder_plan) {
    stride_now *= spec.stride;
    stage_out_stride.push_back(stride_now);
  }

  int in_ch = plan.stem_ch;
  for (size_t s = 0; s < cfg.encoder_plan.size(); ++s) {
    const BlockSpec& spec = cfg.encoder_plan[s];
    const int out_ch = scale_channels(spec.out_channels, cfg.width_multiplier);
    for (int b = 0; b < spec.repeats; ++b) {
      ResolvedBlock rb;
      rb.prefix = "encoder.stage" + std::to_string(s + 1) + ".block" + std::to_string(b + 1);
      rb.in_ch = in_ch;
      rb.out_ch = out_ch;
      rb.hidden = in_ch * spec.expansion;
      rb.stride = (b == 0) ? spec.stride : 1;
      rb.expansion = spec.expansion;
      plan.blocks.push_back(rb);
      in_ch = out_ch;
    }
    // the tap at stride L is the last stage output at that stride
    for (int level = 0; level < 3; ++level) {
      const int want = 4 << level;
      if (stage_out_stride[s] == want &&
          (s + 1 == cfg.encoder_plan.size() || stage_out_stride[s + 1] != want)) {
        plan.tap_block[size_t(level)] = int(plan.blocks.size()) - 1;
        plan.tap_ch[size_t(level)] = out_ch;
      }
    }
  }
  plan.bridge_ch = in_ch;

  plan.dec_in[0] = plan.bridge_ch + plan.tap_ch[2];
  plan.dec_in[1] = cfg.decoder_channels[0] + plan.tap_ch[1];
  plan.dec_in[2] = cfg.decoder_channels[1] + plan.tap_ch[0];
  plan.dec_in[3] = cfg.decoder_channels[2] + plan.stem_ch;
  plan.dec_in[4] = cfg.decoder_channels[3];
  return plan;
}

void push_bn(std::vector<ParamInfo>& out, const std::string& prefix, int channels) {
  out.push_back({prefix + ".gamma", Shape{channels}, true, ParamInfo::Init::ones, 0});
  out.push_back({prefix + ".beta", Shape{channels}, true, ParamInfo::Init::zeros, 0});
  out.push_back({prefix + ".running_mean", Shape{channels}, false, ParamInfo::Init::zeros, 0});
  out.push_back({prefix + ".running_var", Shape{channels}, false, ParamInfo::Init::ones, 0});
}

void push_conv(std::vector<ParamInfo>& out, const std::string& prefix, int cout, int cin_per_group,
               int k) {
  out.push_back({prefix + ".weight", Shape{cout, cin_per_group, k, k}, true,
                 ParamInfo::Init::he_normal, int64_t(cin_per_group) * k * k});
}

}  // namespace

void ModelConfig::validate() const {
  POLYSEG_CHECK(input_side > 0 && input_side % 32 == 0,
                "input_side " << input_side << " must be a positive multiple of 32");
  POLYSEG_CHECK(in_channels >= 1, "in_channels must be >= 1");
  POLYSEG_CHECK(width_multiplier > 0.0 && width_multiplier <= 1.0,
                "width_multiplier " << width_multiplier << " must lie in (0, 1]");
  POLYSEG_CHECK(!encoder_plan.empty(), "encoder_plan must not be empty");
  int stride2 = 0;
  for (const BlockSpec& b : encoder_plan) {
    POLYSEG_CHECK(b.stride == 1 || b.stride == 2, "block stride " << b.stride << " must be 1 or 2");
    POLYSEG_CHECK(b.repeats >= 1, "block repeats " << b.repeats << " must be >= 1");
    POLYSEG_CHECK(b.expansion >= 1, "block expansion " << b.expansion << " must be >= 1");
    POLYSEG_CHECK(b.out_channels >= 1, "block out_channels must be >= 1");
    if (b.stride == 2) ++stride2;
  }
  POLYSEG_CHECK(stride2 == 4, "encoder_plan must contain exactly four stride-2 stages (got "
                                  << stride2 << ") so taps exist at strides 4, 8 and 16");
  for (int c : decoder_channels) POLYSEG_CHECK(c >= 1, "decoder channel counts must be >= 1");
  POLYSEG_CHECK(bn_eps > 0.0, "bn_eps must be positive");
  POLYSEG_CHECK(bn_momentum >= 0.0 && bn_momentum <= 1.0, "bn_momentum must lie in [0, 1]");
}

int scale_channels(int channels, double width_multiplier) {
  const double scaled = channels * width_multiplier;
  int v = int(std::ceil(scaled / 8.0)) * 8;
  return v < 8 ? 8 : v;
}

std::vector<ParamInfo> parameter_table(const ModelConfig& cfg) {
  const ResolvedPlan plan = resolve_plan(cfg);
  std::vector<ParamInfo> out;

  push_conv(out, "encoder.stem.conv", plan.stem_ch, cfg.in_channels, 3);
  push_bn(out, "encoder.stem.bn", plan.stem_ch);

  for (const ResolvedBlock& b : plan.blocks) {
    if (b.expansion > 1) {
      push_conv(out, b.prefix + ".expand.conv", b.hidden, b.in_ch, 1);
      push_bn(out, b.prefix + ".expand.bn", b.hidden);
    }
    // depthwise: one 3x3 filter per hidden channel
    push_conv(out, b.prefix + ".depthwise.conv", b.hidden, 1, 3);
    push_bn(out, b.prefix + ".depthwise.bn", b.hidden);
    push_conv(out, b.prefix + ".project.conv", b.out_ch, b.hidden, 1);
    push_bn(out, b.prefix + ".project.bn", b.out_ch);
  }

  for (int d = 0; d < 5; ++d) {
    const std::string prefix = "decoder.block" + std::to_string(d + 1);
    const int out_ch = cfg.decoder_channels[size_t(d)];
    push_conv(out, prefix + ".conv1", out_ch, plan.dec_in[size_t(d)], 3);
    push_bn(out, prefix + ".bn1", out_ch);
    push_conv(out, prefix + ".conv2", out_ch, out_ch, 3);
    push_bn(out, prefix + ".bn2", out_ch);
  }

  push_conv(out, "head.conv", 1, cfg.decoder_channels[4], 1);
  out.push_back({"head.conv.bias", Shape{1}, true, ParamInfo::Init::zeros, 0});
  return out;
}

int64_t parameter_count(const ModelConfig& cfg) {
  int64_t n = 0;
  for (const ParamInfo& p : parameter_table(cfg)) n += p.shape.numel();
  return n;
}

template <class T>
ParamsT<T> param_init(const ModelConfig& cfg, uint64_t seed) {
  ParamsT<T> params;
  for (const ParamInfo& p : parameter_table(cfg)) {
    InitScheme scheme;
    switch (p.init) {
      case ParamInfo::Init::he_normal:
        scheme = InitScheme::he_normal(p.fan_in, rng::mix(seed, rng::hash_str(p.name)));
        break;
      case ParamInfo::Init::zeros:
        scheme = InitScheme::zeros();
        break;
      case ParamInfo::Init::ones:
        scheme = InitScheme::ones();
        break;
    }
    TensorT<T> t = tensor_init<T>(p.shape, scheme);
    t.set_requires_grad(p.learnable);
    params.tensors.emplace(p.name, std::move(t));
  }
  return params;
}

namespace {

template <class T>
TensorT<T> conv_bn(const TensorT<T>& x, const std::string& prefix, int stride, int pad, int groups,
                   const ParamsT<T>& params, const ModelConfig& cfg, bool training) {
  auto y = ops::conv2d(x, params.at(prefix + ".conv.weight"), nullptr, stride, pad, groups);
  TensorT<T> rm = params.at(prefix + ".bn.running_mean");
  TensorT<T> rv = params.at(prefix + ".bn.running_var");
  return ops::batchnorm2d(y, params.at(prefix + ".bn.gamma"), params.at(prefix + ".bn.beta"), rm,
                          rv, training, static_cast<T>(cfg.bn_momentum),
                          static_cast<T>(cfg.bn_eps));
}

// decoder variant with explicit conv/bn names (conv1/bn1, conv2/bn2)
template <class T>
TensorT<T> conv_bn_named(const TensorT<T>& x, const std::string& conv_name,
                         const std::string& bn_name, const ParamsT<T>& params,
                         const ModelConfig& cfg, bool training) {
  auto y = ops::conv2d(x, params.at(conv_name + ".weight"), nullptr, 1, 1, 1);
  TensorT<T> rm = params.at(bn_name + ".running_mean");
  TensorT<T> rv = params.at(bn_name + ".running_var");
  return ops::batchnorm2d(y, params.at(bn_name + ".gamma"), params.at(bn_name + ".beta"), rm, rv,
                          training, static_cast<T>(cfg.bn_momentum), static_cast<T>(cfg.bn_eps));
}

}  // namespace

template <class T>
TensorT<T> inverted_residual(const TensorT<T>& x, const std::string& prefix, int in_ch, int out_ch,
                             int expansion, int stride, const ParamsT<T>& params,
                             const ModelConfig& cfg, bool training) {
  POLYSEG_CHECK(x.rank() == 4 && x.dim(1) == in_ch,
                prefix << ": input channel count " << (x.rank() == 4 ? x.dim(1) : -1)
                       << " does not match declared in_channels " << in_ch);
  const int hidden = in_ch * expansion;
  TensorT<T> h = x;
  if (expansion > 1)
    h = ops::relu6(conv_bn(h, prefix + ".expand", 1, 0, 1, params, cfg, training));
  h = ops::relu6(conv_bn(h, prefix + ".depthwise", stride, 1, hidden, params, cfg, training));
  h = conv_bn(h, prefix + ".project", 1, 0, 1, params, cfg, training);  // linear bottleneck
  if (stride == 1 && in_ch == out_ch) h = ops::add(x, h);
  return h;
}

template <class T>
EncoderTapsT<T> encoder_forward(const TensorT<T>& image, const ParamsT<T>& params,
                                const ModelConfig& cfg, bool training) {
  POLYSEG_CHECK(image.rank() == 4, "encoder input must be rank 4, got " << image.shape().str());
  POLYSEG_CHECK(image.dim(1) == cfg.in_channels,
                "encoder input channels " << image.dim(1) << " != configured " << cfg.in_channels);
  POLYSEG_CHECK(image.dim(2) == cfg.input_side && image.dim(3) == cfg.input_side,
                "encoder input side " << image.dim(2) << "x" << image.dim(3)
                                      << " != configured input_side " << cfg.input_side);
  const ResolvedPlan plan = resolve_plan(cfg);

  EncoderTapsT<T> taps;
  TensorT<T> h = ops::relu6(conv_bn(image, "encoder.stem", 2, 1, 1, params, cfg, training));
  taps.t1 = h;

  for (size_t i = 0; i < plan.blocks.size(); ++i) {
    const ResolvedBlock& b = plan.blocks[i];
    h = inverted_residual(h, b.prefix, b.in_ch, b.out_ch, b.expansion, b.stride, params, cfg,
                          training);
    if (int(i) == plan.tap_block[0]) taps.t2 = h;
    if (int(i) == plan.tap_block[1]) taps.t3 = h;
    if (int(i) == plan.tap_block[2]) taps.t4 = h;
  }
  taps.bridge = h;

  const int64_t S = cfg.input_side;
  POLYSEG_CHECK(taps.t1.dim(2) == S / 2 && taps.t2.dim(2) == S / 4 && taps.t3.dim(2) == S / 8 &&
                    taps.t4.dim(2) == S / 16 && taps.bridge.dim(2) == S / 32,
                "encoder tap strides are inconsistent with the plan");
  return taps;
}

template <class T>
TensorT<T> decoder_block(const TensorT<T>& x, const std::type_identity_t<TensorT<T>>* skip,
                         int out_ch, const std::string& prefix, const ParamsT<T>& params,
                         const ModelConfig& cfg, bool training) {
  (void)out_ch;
  if (skip) {
    POLYSEG_CHECK(skip->dim(2) == 2 * x.dim(2) && skip->dim(3) == 2 * x.dim(3),
                  prefix << ": skip spatial side " << skip->dim(2)
                         << " must be exactly twice the input side " << x.dim(2));
  }
  TensorT<T> h = ops::upsample2x(x);
  if (skip) h = ops::concat_channels(h, *skip);
  h = ops::relu(conv_bn_named(h, prefix + ".conv1", prefix + ".bn1", params, cfg, training));
  h = ops::relu(conv_bn_named(h, prefix + ".conv2", prefix + ".bn2", params, cfg, training));
  return h;
}

template <class T>
TensorT<T> forward(const TensorT<T>& image, const ParamsT<T>& params, const ModelConfig& cfg,
                   bool training) {
  EncoderTapsT<T> taps = encoder_forward(image, params, cfg, training);
  TensorT<T> h = decoder_block(taps.bridge, &taps.t4, cfg.decoder_channels[0], "decoder.block1",
                               params, cfg, training);
  h = decoder_block(h, &taps.t3, cfg.decoder_channels[1], "decoder.block2", params, cfg, training);
  h = decoder_block(h, &taps.t2, cfg.decoder_channels[2], "decoder.block3", params, cfg, training);
  h = decoder_block(h, &taps.t1, cfg.decoder_channels[3], "decoder.block4", params, cfg, training);
  // no full-resolution tap exists ahead of the stride-2 stem
  h = decoder_block<T>(h, nullptr, cfg.decoder_channels[4], "decoder.block5", params, cfg,
                       training);
  const TensorT<T>& bias = params.at("head.conv.bias");
  h = ops::conv2d(h, params.at("head.conv.weight"), &bias, 1, 0, 1);
  h = ops::sigmoid(h);
  POLYSEG_CHECK(h.dim(1) == 1 && h.dim(2) == image.dim(2) && h.dim(3) == image.dim(3),
                "forward output shape " << h.shape().str() << " does not match input");
  return h;
}

#define POLYSEG_MODEL_INSTANTIATE(T)                                                             \
  template ParamsT<T> param_init<T>(const ModelConfig&, uint64_t);                               \
  template TensorT<T> inverted_residual<T>(const TensorT<T>&, const std::string&, int, int, int, \
                                           int, const ParamsT<T>&, const ModelConfig&, bool);    \
  template EncoderTapsT<T> encoder_forward<T>(const TensorT<T>&, const ParamsT<T>&,              \
                                              const ModelConfig&, bool);                         \
  template TensorT<T> decoder_block<T>(const TensorT<T>&, const std::type_identity_t<TensorT<T>>*, \
                                       int, const std::string&, const ParamsT<T>&,               \
                                       const ModelConfig&, bool);                                \
  template TensorT<T> forward<T>(const TensorT<T>&, const ParamsT<T>&, const ModelConfig&, bool);

POLYSEG_MODEL_INSTANTIATE(float)
POLYSEG_MODEL_INSTANTIATE(double)

#undef POLYSEG_MODEL_INSTANTIATE

}  // namespace polyseg::model
