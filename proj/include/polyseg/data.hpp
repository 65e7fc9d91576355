#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "polyseg/rng.hpp"
#include "polyseg/tensor.hpp"

// Dataset loading, the 80/10/10 split, and geometric augmentations that are
// always applied identically to an image and its mask. Layout on disk:
// <root>/images/*.{jpg,png}, <root>/masks/*.{jpg,png}, matched by filename
// stem. Augmentation is online: it runs per training iteration and never
// touches validation or test samples.

namespace polyseg::data {

struct Sample {
  std::string id;
  Tensor image;  // 3 x H x W, values in [0,1]
  Tensor mask;   // 1 x H x W, values in {0,1}
};

struct DatasetSplit {
  std::vector<std::string> train, val, test;
  uint64_t seed = 0;
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
};

struct AugmentOp {
  enum class Kind { center_crop, random_rotate, hflip, vflip, grid_distortion };
  Kind kind = Kind::hflip;
  double p = 1.0;          // firing probability
  int crop_side = 0;       // center_crop
  double max_deg = 90.0;   // random_rotate: angle ~ U[-max_deg, max_deg]
  int steps = 5;           // grid_distortion
  double limit = 0.3;      // grid_distortion cell scale ~ U[1-limit, 1+limit]
};

struct AugmentSpec {
  std::vector<AugmentOp> ops;
  uint64_t seed = 0;

  // rotate up to +-90, both flips at p=0.5, grid distortion (5 cells,
  // limit 0.3) at p=0.5; no center crop.
  static AugmentSpec defaults(uint64_t seed = 0);
  static AugmentSpec none() { return {}; }
  void validate(int image_side) const;
};

// Filename stems present in both directories; throws listing every orphan
// image or mask.
std::vector<std::string> list_matched_ids(const std::string& images_dir,
                                          const std::string& masks_dir);

// Decodes, resizes (image bilinear, mask nearest) to target_side, scales
// pixels to [0,1] and binarizes masks at >127. Sorted by id.
std::vector<Sample> load_dataset(const std::string& images_dir, const std::string& masks_dir,
                                 int target_side);

// v / 255.0 exactly, shape-preserving.
Tensor normalize(const std::vector<uint8_t>& raw, const Shape& shape);

// Deterministic shuffle + partition; |val| = round(r1*N), |test| = round(r2*N),
// remainder to train.
DatasetSplit split_dataset(std::vector<std::string> ids, std::array<double, 3> ratios,
                           uint64_t seed);

// Lines of "<id>\t<train|val|test>".
void write_manifest(const std::string& path, const DatasetSplit& split);
DatasetSplit read_manifest(const std::string& path);

Sample center_crop(const Sample& s, int side);

enum class FlipAxis { horizontal, vertical };
Sample flip(const Sample& s, FlipAxis axis);

// Rotation about the image center, zero fill outside the frame; image
// bilinear, mask nearest. Exact right angles use the index permutation, so
// rotating a square by 90 gives out(r,c) = in(c, H-1-r) exactly.
Sample random_rotate(const Sample& s, double angle_deg);

// Per-axis piecewise-linear remap: each of `steps` cells is scaled by a
// factor from [1-limit, 1+limit], renormalized so the ends stay pinned.
Sample grid_distortion(const Sample& s, int steps, double limit, rng::SplitMix64& r);

// Applies spec.ops in order; each op fires per its probability, and image
// and mask always receive identical geometric parameters.
Sample augment(const Sample& s, const AugmentSpec& spec, rng::SplitMix64& r);

}  // namespace polyseg::data
