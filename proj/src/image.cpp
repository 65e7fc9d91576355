#include "polyseg/image.hpp"

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <jpeglib.h>
#include <png.h>

namespace polyseg::img {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& why) {
  throw std::runtime_error("cannot decode '" + path + "': " + why);
}

ImageU8 decode_png_file(const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    fail(path, image.message[0] ? image.message : "png read error");

  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

  ImageU8 out;
  out.width = int(image.width);
  out.height = int(image.height);
  out.channels = color ? 3 : 1;
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    fail(path, image.message[0] ? image.message : "png read error");
  }
  return out;
}

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  std::longjmp(err->jump, 1);
}

ImageU8 decode_jpeg_file(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) fail(path, "cannot open file");

  jpeg_decompress_struct cinfo;
  JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    std::fclose(fp);
    fail(path, "jpeg decode error");
  }

  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, fp);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);

  ImageU8 out;
  out.width = int(cinfo.output_width);
  out.height = int(cinfo.output_height);
  out.channels = int(cinfo.output_components);
  out.pixels.resize(out.size_bytes());
  const size_t stride = size_t(out.width) * size_t(out.channels);
  while (cinfo.output_scanline < cinfo.output_height) {
    uint8_t* row = out.pixels.data() + size_t(cinfo.output_scanline) * stride;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  std::fclose(fp);
  return out;
}

// Binary P5 (gray) / P6 (rgb), maxval <= 255.
ImageU8 decode_pnm_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open file");
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P6") fail(path, "unsupported PNM magic '" + magic + "'");

  auto next_int = [&]() {
    // skips whitespace and '#' comments
    for (;;) {
      int c = in.peek();
      if (c == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    int v = -1;
    in >> v;
    return v;
  };

  const int w = next_int(), h = next_int(), maxval = next_int();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) fail(path, "bad PNM header");
  in.get();  // single whitespace after maxval

  ImageU8 out;
  out.width = w;
  out.height = h;
  out.channels = magic == "P6" ? 3 : 1;
  out.pixels.resize(out.size_bytes());
  in.read(reinterpret_cast<char*>(out.pixels.data()), std::streamsize(out.pixels.size()));
  if (in.gcount() != std::streamsize(out.pixels.size())) fail(path, "truncated PNM payload");
  return out;
}

}  // namespace

ImageU8 decode(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) fail(path, "cannot open file");
  unsigned char magic[8] = {};
  probe.read(reinterpret_cast<char*>(magic), 8);
  probe.close();

  static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  if (std::memcmp(magic, png_sig, 8) == 0) return decode_png_file(path);
  if (magic[0] == 0xff && magic[1] == 0xd8) return decode_jpeg_file(path);
  if (magic[0] == 'P' && (magic[1] == '5' || magic[1] == '6')) return decode_pnm_file(path);
  fail(path, "unrecognized image format");
}

void encode_png(const std::string& path, const ImageU8& img) {
  POLYSEG_CHECK(img.channels == 1 || img.channels == 3,
                "encode_png supports 1 or 3 channels, got " << img.channels);
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = png_uint_32(img.width);
  image.height = png_uint_32(img.height);
  image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels.data(), 0, nullptr))
    throw std::runtime_error("cannot write PNG '" + path + "': " +
                             (image.message[0] ? image.message : "png write error"));
}

void encode_jpeg(const std::string& path, const ImageU8& img, int quality) {
  POLYSEG_CHECK(img.channels == 1 || img.channels == 3,
                "encode_jpeg supports 1 or 3 channels, got " << img.channels);
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw std::runtime_error("cannot write '" + path + "'");

  jpeg_compress_struct cinfo;
  JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::fclose(fp);
    throw std::runtime_error("jpeg encode error for '" + path + "'");
  }

  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, fp);
  cinfo.image_width = JDIMENSION(img.width);
  cinfo.image_height = JDIMENSION(img.height);
  cinfo.input_components = img.channels;
  cinfo.in_color_space = img.channels == 3 ? JCS_RGB : JCS_GRAYSCALE;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  const size_t stride = size_t(img.width) * size_t(img.channels);
  while (cinfo.next_scanline < cinfo.image_height) {
    const uint8_t* row = img.pixels.data() + size_t(cinfo.next_scanline) * stride;
    JSAMPROW rows[1] = {const_cast<JSAMPROW>(row)};
    jpeg_write_scanlines(&cinfo, rows, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::fclose(fp);
}

void encode_ppm(const std::string& path, const ImageU8& img) {
  POLYSEG_CHECK(img.channels == 1 || img.channels == 3,
                "encode_ppm supports 1 or 3 channels, got " << img.channels);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << (img.channels == 3 ? "P6" : "P5") << "\n"
      << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()), std::streamsize(img.pixels.size()));
}

Tensor to_planar(const ImageU8& img) {
  Tensor t(Shape{img.channels, img.height, img.width});
  auto out = t.data();
  const int C = img.channels, H = img.height, W = img.width;
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        out[size_t((c * H + y) * W + x)] = float(img.pixels[size_t((y * W + x) * C + c)]);
  return t;
}

ImageU8 from_planar(const Tensor& t) {
  POLYSEG_CHECK(t.rank() == 3, "from_planar expects C x H x W, got " << t.shape().str());
  ImageU8 img;
  img.channels = int(t.dim(0));
  img.height = int(t.dim(1));
  img.width = int(t.dim(2));
  POLYSEG_CHECK(img.channels == 1 || img.channels == 3,
                "from_planar supports 1 or 3 channels, got " << img.channels);
  img.pixels.resize(img.size_bytes());
  auto in = t.data();
  const int C = img.channels, H = img.height, W = img.width;
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        float v = std::round(in[size_t((c * H + y) * W + x)]);
        v = v < 0.0f ? 0.0f : (v > 255.0f ? 255.0f : v);
        img.pixels[size_t((y * W + x) * C + c)] = uint8_t(v);
      }
  return img;
}

Tensor resize_bilinear(const Tensor& src, int out_h, int out_w) {
  POLYSEG_CHECK(src.rank() == 3, "resize expects C x H x W, got " << src.shape().str());
  POLYSEG_CHECK(out_h > 0 && out_w > 0, "resize target must be positive");
  const int C = int(src.dim(0)), H = int(src.dim(1)), W = int(src.dim(2));
  if (H == out_h && W == out_w) return src.clone();
  Tensor dst(Shape{C, out_h, out_w});
  const double sy = double(H) / out_h;
  const double sx = double(W) / out_w;
  for (int c = 0; c < C; ++c) {
    const float* plane = src.data_ptr() + size_t(c) * H * W;
    float* oplane = dst.data_ptr() + size_t(c) * out_h * out_w;
    for (int y = 0; y < out_h; ++y) {
      double fy = (y + 0.5) * sy - 0.5;
      fy = fy < 0 ? 0 : (fy > H - 1 ? H - 1 : fy);
      const int y0 = int(fy);
      const int y1 = y0 + 1 < H ? y0 + 1 : y0;
      const double wy = fy - y0;
      for (int x = 0; x < out_w; ++x) {
        double fx = (x + 0.5) * sx - 0.5;
        fx = fx < 0 ? 0 : (fx > W - 1 ? W - 1 : fx);
        const int x0 = int(fx);
        const int x1 = x0 + 1 < W ? x0 + 1 : x0;
        const double wx = fx - x0;
        const double top = plane[y0 * W + x0] * (1 - wx) + plane[y0 * W + x1] * wx;
        const double bot = plane[y1 * W + x0] * (1 - wx) + plane[y1 * W + x1] * wx;
        oplane[y * out_w + x] = float(top * (1 - wy) + bot * wy);
      }
    }
  }
  return dst;
}

Tensor resize_nearest(const Tensor& src, int out_h, int out_w) {
  POLYSEG_CHECK(src.rank() == 3, "resize expects C x H x W, got " << src.shape().str());
  POLYSEG_CHECK(out_h > 0 && out_w > 0, "resize target must be positive");
  const int C = int(src.dim(0)), H = int(src.dim(1)), W = int(src.dim(2));
  if (H == out_h && W == out_w) return src.clone();
  Tensor dst(Shape{C, out_h, out_w});
  const double sy = double(H) / out_h;
  const double sx = double(W) / out_w;
  std::vector<int> xs(static_cast<size_t>(out_w));
  for (int x = 0; x < out_w; ++x) {
    int v = int((x + 0.5) * sx);
    xs[size_t(x)] = v < W ? v : W - 1;
  }
  for (int c = 0; c < C; ++c) {
    const float* plane = src.data_ptr() + size_t(c) * H * W;
    float* oplane = dst.data_ptr() + size_t(c) * out_h * out_w;
    for (int y = 0; y < out_h; ++y) {
      int yy = int((y + 0.5) * sy);
      yy = yy < H ? yy : H - 1;
      for (int x = 0; x < out_w; ++x) oplane[y * out_w + x] = plane[yy * W + xs[size_t(x)]];
    }
  }
  return dst;
}

}  // namespace polyseg::img
