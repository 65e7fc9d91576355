#include "polyseg/data.hpp"

#include <algorithm>
#include <cstring>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "polyseg/image.hpp"

namespace fs = std::filesystem;

namespace polyseg::data {

namespace {

bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".ppm" || ext == ".pgm";
}

std::map<std::string, fs::path> scan_dir(const std::string& dir) {
  POLYSEG_CHECK(fs::is_directory(dir), "'" << dir << "' is not a directory");
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !has_image_extension(entry.path())) continue;
    out.emplace(entry.path().stem().string(), entry.path());
  }
  return out;
}

Tensor binarize_mask(const Tensor& gray255) {
  Tensor out(gray255.shape());
  auto in = gray255.data();
  auto o = out.data();
  for (size_t i = 0; i < o.size(); ++i) o[i] = in[i] > 127.0f ? 1.0f : 0.0f;
  return out;
}

// src coordinates of every output pixel, per axis (piecewise-linear maps
// stay separable).
struct AxisMap {
  std::vector<double> src;  // src coordinate per dst index
};

Tensor remap_bilinear(const Tensor& src, const std::vector<double>& sx,
                      const std::vector<double>& sy) {
  const int C = int(src.dim(0)), H = int(src.dim(1)), W = int(src.dim(2));
  Tensor dst(src.shape());
  for (int c = 0; c < C; ++c) {
    const float* plane = src.data_ptr() + size_t(c) * H * W;
    float* oplane = dst.data_ptr() + size_t(c) * H * W;
    for (int y = 0; y < H; ++y) {
      const double fy = sy[size_t(y)];
      for (int x = 0; x < W; ++x) {
        const double fx = sx[size_t(x)];
        float v = 0.0f;
        if (fy >= 0.0 && fy <= H - 1 && fx >= 0.0 && fx <= W - 1) {
          const int y0 = int(fy);
          const int y1 = y0 + 1 < H ? y0 + 1 : y0;
          const int x0 = int(fx);
          const int x1 = x0 + 1 < W ? x0 + 1 : x0;
          const double wy = fy - y0, wx = fx - x0;
          const double top = plane[y0 * W + x0] * (1 - wx) + plane[y0 * W + x1] * wx;
          const double bot = plane[y1 * W + x0] * (1 - wx) + plane[y1 * W + x1] * wx;
          v = float(top * (1 - wy) + bot * wy);
        }
        oplane[y * W + x] = v;
      }
    }
  }
  return dst;
}

Tensor remap_nearest(const Tensor& src, const std::vector<double>& sx,
                     const std::vector<double>& sy) {
  const int C = int(src.dim(0)), H = int(src.dim(1)), W = int(src.dim(2));
  Tensor dst(src.shape());
  for (int c = 0; c < C; ++c) {
    const float* plane = src.data_ptr() + size_t(c) * H * W;
    float* oplane = dst.data_ptr() + size_t(c) * H * W;
    for (int y = 0; y < H; ++y) {
      const long ny = std::lround(sy[size_t(y)]);
      for (int x = 0; x < W; ++x) {
        const long nx = std::lround(sx[size_t(x)]);
        float v = 0.0f;
        if (ny >= 0 && ny < H && nx >= 0 && nx < W) v = plane[ny * W + nx];
        oplane[y * W + x] = v;
      }
    }
  }
  return dst;
}

// Exact right-angle rotation; quarters counted in the same direction as the
// general path below.
Tensor rotate_exact(const Tensor& src, int quarters) {
  const int C = int(src.dim(0)), H = int(src.dim(1)), W = int(src.dim(2));
  if (quarters == 0) return src.clone();
  Tensor dst(src.shape());
  for (int c = 0; c < C; ++c) {
    const float* plane = src.data_ptr() + size_t(c) * H * W;
    float* oplane = dst.data_ptr() + size_t(c) * H * W;
    for (int r = 0; r < H; ++r)
      for (int col = 0; col < W; ++col) {
        float v;
        if (quarters == 2) {
          v = plane[(H - 1 - r) * W + (W - 1 - col)];
        } else if (quarters == 1) {
          v = plane[col * W + (H - 1 - r)];  // out(r,c) = in(c, H-1-r)
        } else {
          v = plane[(W - 1 - col) * W + r];  // 270 degrees
        }
        oplane[r * W + col] = v;
      }
  }
  return dst;
}

}  // namespace

AugmentSpec AugmentSpec::defaults(uint64_t seed) {
  AugmentSpec spec;
  spec.seed = seed;
  AugmentOp rot;
  rot.kind = AugmentOp::Kind::random_rotate;
  rot.p = 1.0;
  rot.max_deg = 90.0;
  AugmentOp hf;
  hf.kind = AugmentOp::Kind::hflip;
  hf.p = 0.5;
  AugmentOp vf;
  vf.kind = AugmentOp::Kind::vflip;
  vf.p = 0.5;
  AugmentOp grid;
  grid.kind = AugmentOp::Kind::grid_distortion;
  grid.p = 0.5;
  grid.steps = 5;
  grid.limit = 0.3;
  spec.ops = {rot, hf, vf, grid};
  return spec;
}

void AugmentSpec::validate(int image_side) const {
  for (const AugmentOp& op : ops) {
    POLYSEG_CHECK(op.p >= 0.0 && op.p <= 1.0, "augment probability " << op.p << " outside [0,1]");
    switch (op.kind) {
      case AugmentOp::Kind::center_crop:
        POLYSEG_CHECK(op.crop_side >= 1 && op.crop_side <= image_side,
                      "crop side " << op.crop_side << " exceeds image side " << image_side);
        break;
      case AugmentOp::Kind::random_rotate:
        POLYSEG_CHECK(op.max_deg >= 0.0 && op.max_deg <= 180.0,
                      "rotate max_deg " << op.max_deg << " outside [0,180]");
        break;
      case AugmentOp::Kind::grid_distortion:
        POLYSEG_CHECK(op.steps >= 2, "grid_distortion steps " << op.steps << " must be >= 2");
        POLYSEG_CHECK(op.limit >= 0.0 && op.limit < 1.0,
                      "grid_distortion limit " << op.limit << " outside [0,1)");
        break;
      default:
        break;
    }
  }
}

std::vector<std::string> list_matched_ids(const std::string& images_dir,
                                          const std::string& masks_dir) {
  auto images = scan_dir(images_dir);
  auto masks = scan_dir(masks_dir);
  std::vector<std::string> orphan_images, orphan_masks, ids;
  for (const auto& [id, path] : images) {
    if (masks.count(id)) ids.push_back(id);
    else orphan_images.push_back(id);
  }
  for (const auto& [id, path] : masks)
    if (!images.count(id)) orphan_masks.push_back(id);
  if (!orphan_images.empty() || !orphan_masks.empty()) {
    std::string msg = "unmatched dataset entries:";
    for (const auto& id : orphan_images) msg += " image '" + id + "' has no mask;";
    for (const auto& id : orphan_masks) msg += " mask '" + id + "' has no image;";
    throw std::invalid_argument(msg);
  }
  return ids;  // std::map iteration is already sorted
}

std::vector<Sample> load_dataset(const std::string& images_dir, const std::string& masks_dir,
                                 int target_side) {
  POLYSEG_CHECK(target_side >= 1, "target side must be >= 1");
  auto ids = list_matched_ids(images_dir, masks_dir);
  auto images = scan_dir(images_dir);
  auto masks = scan_dir(masks_dir);

  std::vector<Sample> out;
  out.reserve(ids.size());
  for (const std::string& id : ids) {
    img::ImageU8 im = img::decode(images.at(id).string());
    img::ImageU8 mk = img::decode(masks.at(id).string());

    Tensor image = img::to_planar(im);
    if (image.dim(0) == 1) {  // grayscale input: replicate to 3 channels
      Tensor rgb(Shape{3, image.dim(1), image.dim(2)});
      for (int c = 0; c < 3; ++c)
        std::copy(image.data().begin(), image.data().end(),
                  rgb.data().begin() + c * image.dim(1) * image.dim(2));
      image = rgb;
    }
    POLYSEG_CHECK(image.dim(0) == 3, "image '" << id << "' has unsupported channel count");
    image = img::resize_bilinear(image, target_side, target_side);
    for (float& v : image.data()) v = v / 255.0f;

    Tensor mask = img::to_planar(mk);
    if (mask.dim(0) != 1) {  // color-saved masks: first channel carries the label
      Tensor gray(Shape{1, mask.dim(1), mask.dim(2)});
      std::copy(mask.data().begin(), mask.data().begin() + mask.dim(1) * mask.dim(2),
                gray.data().begin());
      mask = gray;
    }
    mask = img::resize_nearest(mask, target_side, target_side);
    mask = binarize_mask(mask);

    out.push_back(Sample{id, std::move(image), std::move(mask)});
  }
  return out;
}

Tensor normalize(const std::vector<uint8_t>& raw, const Shape& shape) {
  POLYSEG_CHECK(int64_t(raw.size()) == shape.numel(),
                "normalize: " << raw.size() << " bytes vs shape " << shape.str());
  Tensor t(shape);
  auto out = t.data();
  for (size_t i = 0; i < raw.size(); ++i) out[i] = float(raw[i]) / 255.0f;
  return t;
}

DatasetSplit split_dataset(std::vector<std::string> ids, std::array<double, 3> ratios,
                           uint64_t seed) {
  POLYSEG_CHECK(ids.size() >= 3, "split requires at least 3 samples, got " << ids.size());
  const double total = ratios[0] + ratios[1] + ratios[2];
  POLYSEG_CHECK(std::abs(total - 1.0) <= 1e-9, "split ratios sum to " << total << ", expected 1");
  for (double r : ratios) POLYSEG_CHECK(r >= 0.0, "split ratio " << r << " is negative");

  std::sort(ids.begin(), ids.end());  // independent of filesystem order
  rng::SplitMix64 r(seed);
  for (size_t i = ids.size() - 1; i > 0; --i) {
    const size_t j = size_t(r.next_u64() % (i + 1));
    std::swap(ids[i], ids[j]);
  }

  const auto n = int64_t(ids.size());
  const auto n_val = int64_t(std::llround(ratios[1] * double(n)));
  const auto n_test = int64_t(std::llround(ratios[2] * double(n)));
  POLYSEG_CHECK(n_val + n_test <= n, "split ratios leave no training samples");
  const int64_t n_train = n - n_val - n_test;  // remainder goes to train

  DatasetSplit split;
  split.seed = seed;
  split.ratios = ratios;
  split.train.assign(ids.begin(), ids.begin() + n_train);
  split.val.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
  split.test.assign(ids.begin() + n_train + n_val, ids.end());
  return split;
}

void write_manifest(const std::string& path, const DatasetSplit& split) {
  std::ofstream out(path, std::ios::binary);
  POLYSEG_CHECK(bool(out), "cannot write manifest '" << path << "'");
  for (const auto& id : split.train) out << id << "\ttrain\n";
  for (const auto& id : split.val) out << id << "\tval\n";
  for (const auto& id : split.test) out << id << "\ttest\n";
}

DatasetSplit read_manifest(const std::string& path) {
  std::ifstream in(path);
  POLYSEG_CHECK(bool(in), "cannot read manifest '" << path << "'");
  DatasetSplit split;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    POLYSEG_CHECK(tab != std::string::npos,
                  "manifest '" << path << "' line " << line_no << " has no tab separator");
    const std::string id = line.substr(0, tab);
    const std::string name = line.substr(tab + 1);
    if (name == "train") split.train.push_back(id);
    else if (name == "val") split.val.push_back(id);
    else if (name == "test") split.test.push_back(id);
    else
      POLYSEG_CHECK(false, "manifest '" << path << "' line " << line_no << " names unknown split '"
                                        << name << "'");
  }
  return split;
}

Sample center_crop(const Sample& s, int side) {
  const int H = int(s.image.dim(1)), W = int(s.image.dim(2));
  POLYSEG_CHECK(side >= 1 && side <= H && side <= W,
                "crop side " << side << " exceeds image " << H << "x" << W);
  const int oy = (H - side) / 2;
  const int ox = (W - side) / 2;
  auto crop = [&](const Tensor& t) {
    const int C = int(t.dim(0));
    Tensor out(Shape{C, side, side});
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < side; ++y)
        std::memcpy(out.data_ptr() + (size_t(c) * side + size_t(y)) * side,
                    t.data_ptr() + (size_t(c) * H + size_t(y + oy)) * W + ox,
                    size_t(side) * sizeof(float));
    return out;
  };
  return Sample{s.id, crop(s.image), crop(s.mask)};
}

Sample flip(const Sample& s, FlipAxis axis) {
  auto do_flip = [&](const Tensor& t) {
    const int C = int(t.dim(0)), H = int(t.dim(1)), W = int(t.dim(2));
    Tensor out(t.shape());
    for (int c = 0; c < C; ++c) {
      const float* plane = t.data_ptr() + size_t(c) * H * W;
      float* oplane = out.data_ptr() + size_t(c) * H * W;
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          const int sy = axis == FlipAxis::vertical ? H - 1 - y : y;
          const int sx = axis == FlipAxis::horizontal ? W - 1 - x : x;
          oplane[y * W + x] = plane[sy * W + sx];
        }
    }
    return out;
  };
  return Sample{s.id, do_flip(s.image), do_flip(s.mask)};
}

Sample random_rotate(const Sample& s, double angle_deg) {
  POLYSEG_CHECK(angle_deg >= -180.0 && angle_deg <= 180.0,
                "rotation angle " << angle_deg << " outside [-180, 180]");
  const int H = int(s.image.dim(1)), W = int(s.image.dim(2));

  const double quarters = angle_deg / 90.0;
  if (quarters == std::floor(quarters)) {
    int q = int(quarters) % 4;
    if (q < 0) q += 4;
    if (q == 0) return Sample{s.id, s.image.clone(), s.mask.clone()};
    if (q == 2 || H == W)
      return Sample{s.id, rotate_exact(s.image, q), rotate_exact(s.mask, q)};
    // non-square right angles fall through to the resampling path
  }

  const double rad = angle_deg * 3.14159265358979323846 / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  const double cx = (W - 1) / 2.0, cy = (H - 1) / 2.0;
  // separable lookup is impossible for rotation; build full maps
  const int C = int(s.image.dim(0));
  auto rotate_tensor = [&](const Tensor& t, bool bilinear) {
    Tensor out(t.shape());
    const int Ct = int(t.dim(0));
    for (int c = 0; c < Ct; ++c) {
      const float* plane = t.data_ptr() + size_t(c) * H * W;
      float* oplane = out.data_ptr() + size_t(c) * H * W;
      for (int y = 0; y < H; ++y) {
        const double dy = y - cy;
        for (int x = 0; x < W; ++x) {
          const double dx = x - cx;
          const double fx = cs * dx - sn * dy + cx;
          const double fy = sn * dx + cs * dy + cy;
          float v = 0.0f;
          if (bilinear) {
            if (fy >= 0.0 && fy <= H - 1 && fx >= 0.0 && fx <= W - 1) {
              const int y0 = int(fy);
              const int y1 = y0 + 1 < H ? y0 + 1 : y0;
              const int x0 = int(fx);
              const int x1 = x0 + 1 < W ? x0 + 1 : x0;
              const double wy = fy - y0, wx = fx - x0;
              const double top = plane[y0 * W + x0] * (1 - wx) + plane[y0 * W + x1] * wx;
              const double bot = plane[y1 * W + x0] * (1 - wx) + plane[y1 * W + x1] * wx;
              v = float(top * (1 - wy) + bot * wy);
            }
          } else {
            const long ny = std::lround(fy), nx = std::lround(fx);
            if (ny >= 0 && ny < H && nx >= 0 && nx < W) v = plane[ny * W + nx];
          }
          oplane[y * W + x] = v;
        }
      }
    }
    return out;
  };
  (void)C;
  return Sample{s.id, rotate_tensor(s.image, true), rotate_tensor(s.mask, false)};
}

namespace {

// dst->src map for one axis: `steps` cells with scaled extents, renormalized
// so both endpoints stay fixed.
std::vector<double> grid_axis_map(int extent, int steps, const std::vector<double>& factors) {
  const double last = double(extent - 1);
  double fsum = 0.0;
  for (double f : factors) fsum += f;
  const double base = last / steps;

  std::vector<double> dst_knots(static_cast<size_t>(steps) + 1, 0.0);
  for (int i = 0; i < steps; ++i)
    dst_knots[size_t(i) + 1] = dst_knots[size_t(i)] + base * factors[size_t(i)] * steps / fsum;
  dst_knots[size_t(steps)] = last;  // pin the boundary exactly

  std::vector<double> map(static_cast<size_t>(extent));
  int cell = 0;
  for (int t = 0; t < extent; ++t) {
    if (t == extent - 1) {
      map[size_t(t)] = last;
      break;
    }
    while (cell + 1 < steps && double(t) >= dst_knots[size_t(cell) + 1]) ++cell;
    const double d0 = dst_knots[size_t(cell)], d1 = dst_knots[size_t(cell) + 1];
    const double s0 = base * cell, s1 = base * (cell + 1);
    map[size_t(t)] = s0 + (double(t) - d0) * (s1 - s0) / (d1 - d0);
  }
  return map;
}

}  // namespace

Sample grid_distortion(const Sample& s, int steps, double limit, rng::SplitMix64& r) {
  POLYSEG_CHECK(steps >= 2, "grid_distortion steps " << steps << " must be >= 2");
  POLYSEG_CHECK(limit >= 0.0 && limit < 1.0, "grid_distortion limit " << limit << " outside [0,1)");
  const int H = int(s.image.dim(1)), W = int(s.image.dim(2));

  std::vector<double> fx(static_cast<size_t>(steps));
  std::vector<double> fy(static_cast<size_t>(steps));
  for (double& f : fx) f = r.uniform(1.0 - limit, 1.0 + limit);
  for (double& f : fy) f = r.uniform(1.0 - limit, 1.0 + limit);

  if (limit == 0.0) return Sample{s.id, s.image.clone(), s.mask.clone()};

  const auto sx = grid_axis_map(W, steps, fx);
  const auto sy = grid_axis_map(H, steps, fy);
  return Sample{s.id, remap_bilinear(s.image, sx, sy), remap_nearest(s.mask, sx, sy)};
}

Sample augment(const Sample& s, const AugmentSpec& spec, rng::SplitMix64& r) {
  spec.validate(int(s.image.dim(2)));
  Sample cur{s.id, s.image, s.mask};
  for (const AugmentOp& op : spec.ops) {
    const bool fire = r.bernoulli(op.p);  // one draw per op keeps streams aligned
    if (!fire) continue;
    switch (op.kind) {
      case AugmentOp::Kind::center_crop:
        cur = center_crop(cur, op.crop_side);
        break;
      case AugmentOp::Kind::random_rotate:
        cur = random_rotate(cur, r.uniform(-op.max_deg, op.max_deg));
        break;
      case AugmentOp::Kind::hflip:
        cur = flip(cur, FlipAxis::horizontal);
        break;
      case AugmentOp::Kind::vflip:
        cur = flip(cur, FlipAxis::vertical);
        break;
      case AugmentOp::Kind::grid_distortion:
        cur = grid_distortion(cur, op.steps, op.limit, r);
        break;
    }
  }
  return cur;
}

}  // namespace polyseg::data
