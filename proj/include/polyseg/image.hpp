#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "polyseg/tensor.hpp"

// 8-bit image decode/encode (PNG, JPEG, binary PPM/PGM) and resampling.

namespace polyseg::img {

// Interleaved 8-bit pixels, channels = 1 (gray) or 3 (RGB).
struct ImageU8 {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<uint8_t> pixels;

  uint8_t at(int y, int x, int c) const {
    return pixels[size_t((y * width + x) * channels + c)];
  }
  size_t size_bytes() const { return size_t(width) * size_t(height) * size_t(channels); }
};

// Container picked by file magic; throws with the path on undecodable input.
ImageU8 decode(const std::string& path);

void encode_png(const std::string& path, const ImageU8& img);
void encode_jpeg(const std::string& path, const ImageU8& img, int quality = 95);
void encode_ppm(const std::string& path, const ImageU8& img);

// Planar float tensor (C x H x W), raw 0..255 values.
Tensor to_planar(const ImageU8& img);

// Interleaved image from a planar tensor holding 0..255 values (rounded).
ImageU8 from_planar(const Tensor& t);

// Half-pixel-center bilinear resample of a planar C x H x W tensor.
Tensor resize_bilinear(const Tensor& src, int out_h, int out_w);

// Nearest-neighbor resample; never invents new values (masks stay binary).
Tensor resize_nearest(const Tensor& src, int out_h, int out_w);

}  // namespace polyseg::img
