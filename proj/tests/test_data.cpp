#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "polyseg/data.hpp"
#include "polyseg/image.hpp"
#include "polyseg/rng.hpp"

using namespace polyseg;
namespace fs = std::filesystem;

namespace {

bool tensors_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data_ptr(), b.data_ptr(), size_t(a.numel()) * sizeof(float)) == 0;
}

data::Sample make_sample(int side, uint64_t seed) {
  data::Sample s;
  s.id = "synthetic";
  s.image = Tensor(Shape{3, side, side});
  s.mask = Tensor(Shape{1, side, side});
  rng::SplitMix64 r(seed);
  for (float& v : s.image.data()) v = float(r.uniform(0, 1));
  for (float& v : s.mask.data()) v = r.bernoulli(0.3) ? 1.0f : 0.0f;
  return s;
}

bool mask_is_binary(const Tensor& m) {
  for (float v : m.data())
    if (v != 0.0f && v != 1.0f) return false;
  return true;
}

// Unique temp dir per test run.
fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("polyseg_test_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("normalize: endpoints, exact division, and round-trip") {
  std::vector<uint8_t> raw = {0, 51, 255, 128};
  Tensor t = data::normalize(raw, Shape{4});
  CHECK(t.data()[0] == 0.0f);
  CHECK(t.data()[1] == 0.2f);
  CHECK(t.data()[2] == 1.0f);

  rng::SplitMix64 r(5);
  std::vector<uint8_t> all(256);
  for (size_t i = 0; i < all.size(); ++i) all[i] = uint8_t(i);
  Tensor n = data::normalize(all, Shape{256});
  for (size_t i = 0; i < all.size(); ++i)
    CHECK(uint8_t(std::lround(n.data()[i] * 255.0f)) == all[i]);
}

TEST_CASE("split_dataset: sizes, disjointness, determinism over N in {3,10,1000}") {
  for (size_t n : {size_t(3), size_t(10), size_t(1000)}) {
    std::vector<std::string> ids;
    for (size_t i = 0; i < n; ++i) ids.push_back("img" + std::to_string(i));
    auto split = data::split_dataset(ids, {0.8, 0.1, 0.1}, 42);

    const auto n_val = size_t(std::llround(0.1 * double(n)));
    const auto n_test = size_t(std::llround(0.1 * double(n)));
    CHECK(split.val.size() == n_val);
    CHECK(split.test.size() == n_test);
    CHECK(split.train.size() == n - n_val - n_test);

    std::set<std::string> seen;
    for (const auto& part : {split.train, split.val, split.test})
      for (const auto& id : part) CHECK(seen.insert(id).second);  // disjoint
    CHECK(seen.size() == n);  // union is the full set

    auto again = data::split_dataset(ids, {0.8, 0.1, 0.1}, 42);
    CHECK(again.train == split.train);
    CHECK(again.val == split.val);
    CHECK(again.test == split.test);
  }
}

TEST_CASE("split_dataset: N=1000 gives 800/100/100 and different seeds permute") {
  std::vector<std::string> ids;
  for (int i = 0; i < 1000; ++i) ids.push_back("k" + std::to_string(i));
  auto base = data::split_dataset(ids, {0.8, 0.1, 0.1}, 0);
  CHECK(base.train.size() == 800);
  CHECK(base.val.size() == 100);
  CHECK(base.test.size() == 100);
  int distinct = 0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    auto other = data::split_dataset(ids, {0.8, 0.1, 0.1}, seed);
    if (other.train != base.train) ++distinct;
  }
  CHECK(distinct == 5);
}

TEST_CASE("split_dataset: bad ratios are rejected") {
  std::vector<std::string> ids = {"a", "b", "c"};
  CHECK_THROWS_AS(data::split_dataset(ids, {0.8, 0.1, 0.2}, 0), std::invalid_argument);
}

TEST_CASE("manifest round-trip") {
  auto dir = temp_dir("manifest");
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("s" + std::to_string(i));
  auto split = data::split_dataset(ids, {0.8, 0.1, 0.1}, 7);
  const std::string path = (dir / "split.tsv").string();
  data::write_manifest(path, split);
  auto back = data::read_manifest(path);
  CHECK(back.train == split.train);
  CHECK(back.val == split.val);
  CHECK(back.test == split.test);
  fs::remove_all(dir);
}

TEST_CASE("center_crop: identity at full side, offset formula, binarity") {
  auto s = make_sample(8, 3);
  auto full = data::center_crop(s, 8);
  CHECK(tensors_equal(full.image, s.image));

  // 4x4 crop to side 2 keeps rows/cols {1,2}
  data::Sample tiny;
  tiny.id = "t";
  tiny.image = Tensor(Shape{3, 4, 4});
  tiny.mask = Tensor(Shape{1, 4, 4});
  for (int i = 0; i < 16; ++i) tiny.mask.data()[size_t(i)] = float(i % 2);
  for (int64_t c = 0; c < 3; ++c)
    for (int i = 0; i < 16; ++i) tiny.image.data()[size_t(c * 16 + i)] = float(i);
  auto cropped = data::center_crop(tiny, 2);
  CHECK(cropped.image.shape() == Shape{3, 2, 2});
  CHECK(cropped.image.at({0, 0, 0}) == 5.0f);   // row 1, col 1
  CHECK(cropped.image.at({0, 1, 1}) == 10.0f);  // row 2, col 2
  CHECK(mask_is_binary(cropped.mask));

  CHECK_THROWS_AS(data::center_crop(tiny, 5), std::invalid_argument);
}

TEST_CASE("flip: involution, point values, pixel sum preserved") {
  auto s = make_sample(6, 9);
  for (auto axis : {data::FlipAxis::horizontal, data::FlipAxis::vertical}) {
    auto twice = data::flip(data::flip(s, axis), axis);
    CHECK(tensors_equal(twice.image, s.image));
    CHECK(tensors_equal(twice.mask, s.mask));
  }

  data::Sample m;
  m.id = "m";
  m.image = Tensor(Shape{3, 2, 2});
  m.mask = Tensor(Shape{1, 2, 2}, {1, 0, 0, 0});
  auto flipped = data::flip(m, data::FlipAxis::horizontal);
  CHECK(flipped.mask.at({0, 0, 0}) == 0.0f);
  CHECK(flipped.mask.at({0, 0, 1}) == 1.0f);
  CHECK(flipped.mask.at({0, 1, 0}) == 0.0f);

  double before = 0, after = 0;
  for (float v : s.image.data()) before += v;
  const auto vflipped = data::flip(s, data::FlipAxis::vertical);
  for (float v : vflipped.image.data()) after += v;
  CHECK(before == doctest::Approx(after));
}

TEST_CASE("random_rotate: angle 0 is the identity") {
  auto s = make_sample(6, 13);
  auto r = data::random_rotate(s, 0.0);
  CHECK(tensors_equal(r.image, s.image));
  CHECK(tensors_equal(r.mask, s.mask));
}

TEST_CASE("random_rotate: 90 degrees matches the index permutation exactly") {
  auto s = make_sample(6, 17);
  auto r = data::random_rotate(s, 90.0);
  const int H = 6, W = 6;
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t row = 0; row < H; ++row)
      for (int64_t col = 0; col < W; ++col)
        CHECK(r.image.at({c, row, col}) == s.image.at({c, col, H - 1 - row}));
  for (int64_t row = 0; row < H; ++row)
    for (int64_t col = 0; col < W; ++col)
      CHECK(r.mask.at({0, row, col}) == s.mask.at({0, col, H - 1 - row}));
}

TEST_CASE("random_rotate: four quarter turns compose to the identity") {
  auto s = make_sample(8, 19);
  auto r = s;
  for (int i = 0; i < 4; ++i) r = data::random_rotate(r, 90.0);
  CHECK(tensors_equal(r.image, s.image));
  CHECK(tensors_equal(r.mask, s.mask));
}

TEST_CASE("random_rotate: arbitrary angles keep the mask binary and the shape fixed") {
  auto s = make_sample(16, 23);
  rng::SplitMix64 r(31);
  for (int i = 0; i < 20; ++i) {
    auto rotated = data::random_rotate(s, r.uniform(-180, 180));
    CHECK(rotated.image.shape() == s.image.shape());
    CHECK(rotated.mask.shape() == s.mask.shape());
    CHECK(mask_is_binary(rotated.mask));
  }
}

TEST_CASE("grid_distortion: limit 0 is the identity bitwise") {
  auto s = make_sample(16, 29);
  rng::SplitMix64 r(5);
  auto g = data::grid_distortion(s, 5, 0.0, r);
  CHECK(tensors_equal(g.image, s.image));
  CHECK(tensors_equal(g.mask, s.mask));
}

TEST_CASE("grid_distortion: shape preserved, mask binary, corners fixed") {
  auto s = make_sample(17, 31);
  rng::SplitMix64 r(8);
  for (int trial = 0; trial < 25; ++trial) {
    auto g = data::grid_distortion(s, 4, 0.3, r);
    CHECK(g.image.shape() == s.image.shape());
    CHECK(mask_is_binary(g.mask));
    const int64_t S = 17;
    for (int64_t c = 0; c < 3; ++c) {
      CHECK(g.image.at({c, 0, 0}) == s.image.at({c, 0, 0}));
      CHECK(g.image.at({c, 0, S - 1}) == s.image.at({c, 0, S - 1}));
      CHECK(g.image.at({c, S - 1, 0}) == s.image.at({c, S - 1, 0}));
      CHECK(g.image.at({c, S - 1, S - 1}) == s.image.at({c, S - 1, S - 1}));
    }
  }
}

TEST_CASE("augment: all-p-zero spec is the identity; same seed twice is bit-identical") {
  auto s = make_sample(12, 37);
  data::AugmentSpec spec = data::AugmentSpec::defaults(0);
  for (auto& op : spec.ops) op.p = 0.0;
  rng::SplitMix64 r(1);
  auto out = data::augment(s, spec, r);
  CHECK(tensors_equal(out.image, s.image));

  data::AugmentSpec live = data::AugmentSpec::defaults(0);
  rng::SplitMix64 r1(12345), r2(12345);
  auto a = data::augment(s, live, r1);
  auto b = data::augment(s, live, r2);
  CHECK(tensors_equal(a.image, b.image));
  CHECK(tensors_equal(a.mask, b.mask));
}

TEST_CASE("augment: 1000 random draws keep the mask binary and the shape fixed") {
  auto s = make_sample(12, 41);
  data::AugmentSpec spec = data::AugmentSpec::defaults(7);
  for (int i = 0; i < 1000; ++i) {
    rng::SplitMix64 r(rng::derive_seed(spec.seed, s.id, uint64_t(i)));
    auto out = data::augment(s, spec, r);
    REQUIRE(out.mask.shape() == s.mask.shape());
    REQUIRE(out.image.shape() == s.image.shape());
    REQUIRE(mask_is_binary(out.mask));
  }
}

TEST_CASE("augment: image channel matching the mask transforms in lockstep") {
  // channel 0 of the image replicates the mask; after any augmentation the
  // nearest-vs-bilinear difference is the only divergence allowed
  const int side = 16;
  data::Sample s;
  s.id = "lockstep";
  s.image = Tensor(Shape{3, side, side});
  s.mask = Tensor(Shape{1, side, side});
  rng::SplitMix64 init(43);
  for (int i = 0; i < side * side; ++i) {
    const float bit = init.bernoulli(0.4) ? 1.0f : 0.0f;
    s.mask.data()[size_t(i)] = bit;
    s.image.data()[size_t(i)] = bit;  // channel 0 mirrors the mask
  }

  // flips are pure permutations: lockstep must be exact
  for (auto axis : {data::FlipAxis::horizontal, data::FlipAxis::vertical}) {
    auto f = data::flip(s, axis);
    for (int i = 0; i < side * side; ++i)
      CHECK(f.image.data()[size_t(i)] == f.mask.data()[size_t(i)]);
  }

  // rotation: binarizing the bilinear channel at 0.5 must reproduce the
  // nearest-sampled mask away from interpolation boundaries; just assert
  // overlap is overwhelming
  auto rot = data::random_rotate(s, 33.0);
  int agree = 0, total = 0;
  for (int i = 0; i < side * side; ++i) {
    const float hard = rot.image.data()[size_t(i)] > 0.5f ? 1.0f : 0.0f;
    agree += hard == rot.mask.data()[size_t(i)];
    ++total;
  }
  CHECK(double(agree) / total > 0.9);
}

TEST_CASE("dataset round-trip through PNG files on disk") {
  auto dir = temp_dir("dataset");
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");

  rng::SplitMix64 r(55);
  const int side = 24;
  for (int i = 0; i < 4; ++i) {
    img::ImageU8 image;
    image.width = side;
    image.height = side;
    image.channels = 3;
    image.pixels.resize(image.size_bytes());
    for (auto& p : image.pixels) p = uint8_t(r.next_u64() % 256);
    img::ImageU8 mask;
    mask.width = side;
    mask.height = side;
    mask.channels = 1;
    mask.pixels.resize(mask.size_bytes());
    for (auto& p : mask.pixels) p = r.bernoulli(0.4) ? 255 : 0;
    const std::string id = "case" + std::to_string(i);
    img::encode_png((dir / "images" / (id + ".png")).string(), image);
    img::encode_png((dir / "masks" / (id + ".png")).string(), mask);
  }

  auto samples = data::load_dataset((dir / "images").string(), (dir / "masks").string(), side);
  REQUIRE(samples.size() == 4);
  for (const auto& s : samples) {
    CHECK(s.image.shape() == Shape{3, side, side});
    CHECK(s.mask.shape() == Shape{1, side, side});
    CHECK(mask_is_binary(s.mask));
    float lo = 1e9f, hi = -1e9f;
    for (float v : s.image.data()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    CHECK(lo >= 0.0f);
    CHECK(hi <= 1.0f);
  }

  // orphan image -> error listing the id
  img::ImageU8 orphan;
  orphan.width = 4;
  orphan.height = 4;
  orphan.channels = 3;
  orphan.pixels.assign(orphan.size_bytes(), 100);
  img::encode_png((dir / "images" / "lonely.png").string(), orphan);
  CHECK_THROWS_WITH_AS(
      data::load_dataset((dir / "images").string(), (dir / "masks").string(), side),
      doctest::Contains("lonely"), std::invalid_argument);

  fs::remove_all(dir);
}

TEST_CASE("empty dataset directories load as an empty list") {
  auto dir = temp_dir("empty");
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  auto samples = data::load_dataset((dir / "images").string(), (dir / "masks").string(), 16);
  CHECK(samples.empty());
  fs::remove_all(dir);
}

TEST_CASE("PNG and PPM codecs round-trip pixel-exactly") {
  auto dir = temp_dir("codec");
  rng::SplitMix64 r(77);
  for (int channels : {1, 3}) {
    img::ImageU8 image;
    image.width = 13;
    image.height = 9;
    image.channels = channels;
    image.pixels.resize(image.size_bytes());
    for (auto& p : image.pixels) p = uint8_t(r.next_u64() % 256);

    const std::string png = (dir / ("t" + std::to_string(channels) + ".png")).string();
    img::encode_png(png, image);
    auto back = img::decode(png);
    CHECK(back.width == image.width);
    CHECK(back.height == image.height);
    CHECK(back.channels == channels);
    CHECK(back.pixels == image.pixels);

    const std::string ppm = (dir / ("t" + std::to_string(channels) + ".ppm")).string();
    img::encode_ppm(ppm, image);
    auto back2 = img::decode(ppm);
    CHECK(back2.pixels == image.pixels);
  }
  CHECK_THROWS_AS(img::decode((dir / "missing.png").string()), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("JPEG codec: smooth images survive the lossy round trip") {
  auto dir = temp_dir("jpeg");
  img::ImageU8 image;
  image.width = 32;
  image.height = 32;
  image.channels = 3;
  image.pixels.resize(image.size_bytes());
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c)  // smooth ramp, no uint8 wraparound
        image.pixels[size_t((y * 32 + x) * 3 + c)] = uint8_t(2 * (x + y) + 20 * c);

  const std::string path = (dir / "ramp.jpg").string();
  img::encode_jpeg(path, image, 95);
  auto back = img::decode(path);
  REQUIRE(back.width == 32);
  REQUIRE(back.height == 32);
  REQUIRE(back.channels == 3);
  int max_diff = 0;
  for (size_t i = 0; i < back.pixels.size(); ++i)
    max_diff = std::max(max_diff, std::abs(int(back.pixels[i]) - int(image.pixels[i])));
  CHECK(max_diff <= 16);  // quality-95 quantization on a smooth ramp

  // a nominally black/white jpeg mask still binarizes cleanly through loading
  img::ImageU8 mask;
  mask.width = 32;
  mask.height = 32;
  mask.channels = 1;
  mask.pixels.assign(32 * 32, 0);
  for (int y = 8; y < 24; ++y)
    for (int x = 8; x < 24; ++x) mask.pixels[size_t(y * 32 + x)] = 255;
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  img::encode_jpeg((dir / "images" / "m.jpg").string(), image, 95);
  img::encode_jpeg((dir / "masks" / "m.jpg").string(), mask, 95);
  auto samples = data::load_dataset((dir / "images").string(), (dir / "masks").string(), 32);
  REQUIRE(samples.size() == 1);
  CHECK(mask_is_binary(samples[0].mask));
  fs::remove_all(dir);
}

TEST_CASE("undecodable image files raise errors naming the file") {
  auto dir = temp_dir("corrupt");
  {
    std::ofstream bad((dir / "bad.png").string(), std::ios::binary);
    bad << "\x89PNG\r\n\x1a\n this is not a real png body";
  }
  CHECK_THROWS_WITH_AS(img::decode((dir / "bad.png").string()), doctest::Contains("bad.png"),
                       std::runtime_error);
  {
    std::ofstream junk((dir / "junk.png").string(), std::ios::binary);
    junk << "not an image at all";
  }
  CHECK_THROWS_WITH_AS(img::decode((dir / "junk.png").string()), doctest::Contains("junk.png"),
                       std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("mask loading binarizes 0/255 inputs to exactly {0,1}") {
  auto dir = temp_dir("binarize");
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  img::ImageU8 image;
  image.width = 8;
  image.height = 8;
  image.channels = 3;
  image.pixels.assign(image.size_bytes(), 10);
  img::ImageU8 mask = image;
  mask.channels = 1;
  mask.pixels.assign(64, 0);
  for (int i = 0; i < 32; ++i) mask.pixels[size_t(i)] = 255;
  img::encode_png((dir / "images" / "a.png").string(), image);
  img::encode_png((dir / "masks" / "a.png").string(), mask);
  auto samples = data::load_dataset((dir / "images").string(), (dir / "masks").string(), 8);
  REQUIRE(samples.size() == 1);
  CHECK(mask_is_binary(samples[0].mask));
  double sum = 0;
  for (float v : samples[0].mask.data()) sum += v;
  CHECK(sum == doctest::Approx(32));
  fs::remove_all(dir);
}
