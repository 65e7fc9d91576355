#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "polyseg/tensor.hpp"

// Finite-difference verification of the backward rules. Everything runs in
// 64-bit. The FD side only evaluates forward passes, so it stays independent
// of the gradient code it is checking.

namespace polyseg::gradcheck {

using DTensor = TensorT<double>;

struct CheckResult {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// Scalarizes the op as loss = mean(fwd(inputs) * W) for a fixed random W,
// computes tape gradients, then central differences (f(x+h)-f(x-h))/(2h)
// for every element of every requires_grad input. `fwd` must be pure.
CheckResult check_op(const std::string& name, std::vector<DTensor> inputs,
                     const std::function<DTensor(const std::vector<DTensor>&)>& fwd,
                     double tolerance = 1e-6, double h = 1e-5, uint64_t seed = 0x5eed);

// Layer-op suite: conv2d (plain, strided, grouped, depthwise, biased),
// train-mode batchnorm2d, relu/relu6/sigmoid, upsample2x, concat_channels,
// add, mul, reduce_mean/sum, and dice_loss, on random tensors of at most
// 2x3x5x5.
std::vector<CheckResult> run_op_suite(uint64_t seed = 1234);

// d(mean output)/d(weight) on a small end-to-end model, checked at
// `n_weights` randomly chosen weight entries.
CheckResult check_model_end_to_end(int input_side = 32, double width_multiplier = 0.25,
                                   int n_weights = 20, double tolerance = 1e-4, double h = 1e-5,
                                   uint64_t seed = 99);

}  // namespace polyseg::gradcheck
