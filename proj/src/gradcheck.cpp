#include "polyseg/gradcheck.hpp"

#include <cmath>

#include "polyseg/kernels.hpp"
#include "polyseg/model.hpp"
#include "polyseg/ops.hpp"
#include "polyseg/rng.hpp"
#include "polyseg/train.hpp"

namespace polyseg::gradcheck {

namespace {

constexpr double kDenomFloor = 1e-2;

double rel_err(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), kDenomFloor});
  return std::abs(a - b) / denom;
}

DTensor random_tensor(const Shape& shape, rng::SplitMix64& r, double lo = -2.0, double hi = 2.0) {
  DTensor t(shape);
  for (double& v : t.data()) v = r.uniform(lo, hi);
  return t;
}

// Uniform draws nudged away from the kinks of relu (0) and relu6 (0 and 6).
DTensor random_away_from_kinks(const Shape& shape, rng::SplitMix64& r) {
  DTensor t(shape);
  for (double& v : t.data()) {
    do {
      v = r.uniform(-3.0, 9.0);
    } while (std::abs(v) < 0.1 || std::abs(v - 6.0) < 0.1);
  }
  return t;
}

}  // namespace

CheckResult check_op(const std::string& name, std::vector<DTensor> inputs,
                     const std::function<DTensor(const std::vector<DTensor>&)>& fwd,
                     double tolerance, double h, uint64_t seed) {
  // fixed per-element weights give every output entry a distinct pull on the loss
  DTensor weights;
  std::vector<std::vector<double>> analytic(inputs.size());
  {
    TapeT<double> tape;
    TapeT<double>::Scope scope(tape);
    DTensor out = fwd(inputs);
    weights = tensor_init<double>(out.shape(), InitScheme::uniform(0.5, 1.5, rng::mix(seed, 7)));
    DTensor loss = ops::reduce_mean(ops::mul(out, weights));
    tape.backward(loss);
    for (size_t i = 0; i < inputs.size(); ++i) {
      if (!inputs[i].requires_grad()) continue;
      auto g = inputs[i].grad();
      analytic[i].assign(g.begin(), g.end());
    }
  }

  // FD path: forward evaluations only
  auto loss_value = [&]() {
    DTensor out = fwd(inputs);
    return kernels::dot(out.data_ptr(), weights.data_ptr(), size_t(out.numel())) /
           double(out.numel());
  };

  CheckResult result{name, 0.0, tolerance, false};
  for (size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i].requires_grad()) continue;
    auto data = inputs[i].data();
    for (size_t e = 0; e < data.size(); ++e) {
      const double saved = data[e];
      data[e] = saved + h;
      const double up = loss_value();
      data[e] = saved - h;
      const double down = loss_value();
      data[e] = saved;
      const double fd = (up - down) / (2.0 * h);
      result.max_rel_err = std::max(result.max_rel_err, rel_err(analytic[i][e], fd));
    }
  }
  result.pass = result.max_rel_err < tolerance;
  return result;
}

std::vector<CheckResult> run_op_suite(uint64_t seed) {
  rng::SplitMix64 r(seed);
  std::vector<CheckResult> results;

  auto grad = [](DTensor t) {
    t.set_requires_grad(true);
    return t;
  };

  {  // conv2d, 3x3 with bias
    auto x = grad(random_tensor(Shape{2, 3, 5, 5}, r));
    auto w = grad(random_tensor(Shape{4, 3, 3, 3}, r));
    auto b = grad(random_tensor(Shape{4}, r));
    results.push_back(check_op("conv2d", {x, w, b}, [](const std::vector<DTensor>& in) {
      return ops::conv2d(in[0], in[1], &in[2], 1, 1, 1);
    }));
  }
  {  // conv2d, stride 2, no bias
    auto x = grad(random_tensor(Shape{2, 3, 5, 5}, r));
    auto w = grad(random_tensor(Shape{4, 3, 3, 3}, r));
    results.push_back(check_op("conv2d_stride2", {x, w}, [](const std::vector<DTensor>& in) {
      return ops::conv2d(in[0], in[1], nullptr, 2, 1, 1);
    }));
  }
  {  // grouped
    auto x = grad(random_tensor(Shape{2, 4, 5, 5}, r));
    auto w = grad(random_tensor(Shape{6, 2, 3, 3}, r));
    results.push_back(check_op("conv2d_grouped", {x, w}, [](const std::vector<DTensor>& in) {
      return ops::conv2d(in[0], in[1], nullptr, 1, 1, 2);
    }));
  }
  {  // depthwise
    auto x = grad(random_tensor(Shape{2, 3, 5, 5}, r));
    auto w = grad(random_tensor(Shape{3, 1, 3, 3}, r));
    results.push_back(check_op("conv2d_depthwise", {x, w}, [](const std::vector<DTensor>& in) {
      return ops::conv2d(in[0], in[1], nullptr, 1, 1, 3);
    }));
  }
  {  // train-mode batchnorm; fresh running state per evaluation keeps fwd pure
    auto x = grad(random_tensor(Shape{2, 3, 5, 5}, r));
    auto g = grad(random_tensor(Shape{3}, r, 0.5, 1.5));
    auto b = grad(random_tensor(Shape{3}, r));
    results.push_back(check_op("batchnorm2d", {x, g, b}, [](const std::vector<DTensor>& in) {
      DTensor rm = DTensor::zeros(Shape{3});
      DTensor rv = DTensor::ones(Shape{3});
      return ops::batchnorm2d(in[0], in[1], in[2], rm, rv, true, 0.1, 1e-5);
    }));
  }
  {
    auto x = grad(random_away_from_kinks(Shape{2, 3, 5, 5}, r));
    results.push_back(check_op("relu", {x}, [](const std::vector<DTensor>& in) {
      return ops::relu(in[0]);
    }));
  }
  {
    auto x = grad(random_away_from_kinks(Shape{2, 3, 5, 5}, r));
    results.push_back(check_op("relu6", {x}, [](const std::vector<DTensor>& in) {
      return ops::relu6(in[0]);
    }));
  }
  {
    auto x = grad(random_tensor(Shape{2, 3, 5, 5}, r, -4.0, 4.0));
    results.push_back(check_op("sigmoid", {x}, [](const std::vector<DTensor>& in) {
      return ops::sigmoid(in[0]);
    }));
  }
  {
    auto x = grad(random_tensor(Shape{2, 3, 5, 5}, r));
    results.push_back(check_op("upsample2x", {x}, [](const std::vector<DTensor>& in) {
      return ops::upsample2x(in[0]);
    }));
  }
  {
    auto a = grad(random_tensor(Shape{2, 2, 5, 5}, r));
    auto b = grad(random_tensor(Shape{2, 3, 5, 5}, r));
    results.push_back(check_op("concat_channels", {a, b}, [](const std::vector<DTensor>& in) {
      return ops::concat_channels(in[0], in[1]);
    }));
  }
  {
    auto a = grad(random_tensor(Shape{2, 3, 5, 5}, r));
    auto b = grad(random_tensor(Shape{2, 3, 5, 5}, r));
    results.push_back(check_op("add", {a, b}, [](const std::vector<DTensor>& in) {
      return ops::add(in[0], in[1]);
    }));
  }
  {
    auto a = grad(random_tensor(Shape{2, 3, 5, 5}, r));
    auto b = grad(random_tensor(Shape{2, 3, 5, 5}, r));
    results.push_back(check_op("mul", {a, b}, [](const std::vector<DTensor>& in) {
      return ops::mul(in[0], in[1]);
    }));
  }
  {
    auto x = grad(random_tensor(Shape{2, 3, 5, 5}, r));
    results.push_back(check_op("reduce_mean", {x}, [](const std::vector<DTensor>& in) {
      return ops::reduce_mean(in[0]);
    }));
  }
  {
    auto x = grad(random_tensor(Shape{2, 3, 5, 5}, r));
    results.push_back(check_op("reduce_sum", {x}, [](const std::vector<DTensor>& in) {
      return ops::reduce_sum(in[0]);
    }));
  }
  {  // dice loss on probabilities vs a random binary mask
    auto p = grad(random_tensor(Shape{1, 1, 4, 4}, r, 0.05, 0.95));
    DTensor t(Shape{1, 1, 4, 4});
    for (double& v : t.data()) v = r.bernoulli(0.5) ? 1.0 : 0.0;
    results.push_back(check_op("dice_loss", {p, t}, [](const std::vector<DTensor>& in) {
      return train::dice_loss(in[0], in[1], 1e-6);
    }));
  }
  return results;
}

CheckResult check_model_end_to_end(int input_side, double width_multiplier, int n_weights,
                                   double tolerance, double h, uint64_t seed) {
  model::ModelConfig cfg;
  cfg.input_side = input_side;
  cfg.width_multiplier = width_multiplier;
  cfg.validate();

  auto params = model::param_init<double>(cfg, rng::mix(seed, 1));
  rng::SplitMix64 r(rng::mix(seed, 2));
  DTensor image = random_tensor(Shape{1, cfg.in_channels, input_side, input_side}, r, 0.0, 1.0);

  // analytic gradients via one train-mode forward/backward
  {
    TapeT<double> tape;
    TapeT<double>::Scope scope(tape);
    DTensor out = model::forward(image, params, cfg, true);
    DTensor loss = ops::reduce_mean(out);
    tape.backward(loss);
  }

  // learnable tensors in map order, with cumulative element offsets
  std::vector<std::string> names;
  std::vector<int64_t> sizes;
  int64_t total = 0;
  for (const auto& [name, t] : params.tensors) {
    if (!t.requires_grad()) continue;
    names.push_back(name);
    sizes.push_back(t.numel());
    total += t.numel();
  }

  auto loss_value = [&]() {
    DTensor out = model::forward(image, params, cfg, true);
    return kernels::sum(out.data_ptr(), size_t(out.numel())) / double(out.numel());
  };

  CheckResult result{"model_end_to_end", 0.0, tolerance, false};
  for (int k = 0; k < n_weights; ++k) {
    int64_t flat = int64_t(r.next_u64() % uint64_t(total));
    size_t which = 0;
    while (flat >= sizes[which]) {
      flat -= sizes[which];
      ++which;
    }
    auto& tensor = params.at(names[which]);
    const double analytic = tensor.grad()[size_t(flat)];

    auto data = tensor.data();
    const double saved = data[size_t(flat)];
    data[size_t(flat)] = saved + h;
    const double up = loss_value();
    data[size_t(flat)] = saved - h;
    const double down = loss_value();
    data[size_t(flat)] = saved;
    const double fd = (up - down) / (2.0 * h);
    result.max_rel_err = std::max(result.max_rel_err, rel_err(analytic, fd));
  }
  result.pass = result.max_rel_err < tolerance;
  return result;
}

}  // namespace polyseg::gradcheck
