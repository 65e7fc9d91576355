#pragma once

#include <cstdint>
#include <limits>
#include <string>

#include "polyseg/model.hpp"
#include "polyseg/train.hpp"

// Checkpoint container. On-disk layout:
//   magic "UMNV2CK1" (8 bytes)
//   u32 LE version = 1
//   u32 LE tensor count
//   per tensor, sorted by name:
//     u16 LE name length, UTF-8 name, u8 rank, u32 LE extent per dim,
//     raw 32-bit LE values
//   u32 LE metadata length, JSON metadata
//     (epoch, best_val_loss, model_config, train_config, rng_state)
// Weights and BN running stats keep their parameter names; optimizer
// accumulators are stored as "optim.sq_grad.<name>" / "optim.sq_update.<name>".
// save -> load -> save is byte-identical.

namespace polyseg::ckpt {

struct Checkpoint {
  model::ModelConfig model_config;
  train::TrainConfig train_config;
  model::Params params;
  train::AdadeltaState opt;
  int epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  uint64_t rng_state = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

// Validates magic, version, and every tensor shape against the embedded
// ModelConfig; errors name the offending tensor.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace polyseg::ckpt
