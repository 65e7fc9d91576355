#pragma once

#include <string>

#include "polyseg/data.hpp"
#include "polyseg/model.hpp"
#include "polyseg/train.hpp"

// Flat JSON run configuration for the CLI. Unknown keys are rejected by
// name; parse -> serialize -> parse is a fixed point. Command-line flags
// override file values.

namespace polyseg::cli {

struct RunConfig {
  std::string dataset_root;
  std::string manifest;
  std::string out_dir = "out";

  model::ModelConfig model;
  train::TrainConfig train;

  // augmentation knobs, applied in the order crop, rotate, hflip, vflip, grid
  int center_crop_side = 0;  // 0 disables the crop
  double rotate_max_deg = 90.0;
  double rotate_p = 1.0;
  double hflip_p = 0.5;
  double vflip_p = 0.5;
  int grid_steps = 5;
  double grid_limit = 0.3;
  double grid_p = 0.5;

  data::AugmentSpec augment_spec() const;

  static RunConfig from_json_text(const std::string& text);
  static RunConfig from_json_file(const std::string& path);
  std::string to_json_text() const;  // canonical, key-sorted
};

}  // namespace polyseg::cli
