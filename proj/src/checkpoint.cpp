#include "polyseg/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "config_json.hpp"

namespace polyseg::ckpt {

namespace {

constexpr char kMagic[8] = {'U', 'M', 'N', 'V', '2', 'C', 'K', '1'};
constexpr uint32_t kVersion = 1;

void put_u16(std::string& out, uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

class Reader {
 public:
  Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

  const uint8_t* take(size_t n) {
    POLYSEG_CHECK(pos_ + n <= data_.size(), "checkpoint '" << path_ << "' is truncated");
    const auto* p = reinterpret_cast<const uint8_t*>(data_.data()) + pos_;
    pos_ += n;
    return p;
  }
  uint16_t u16() {
    const uint8_t* p = take(2);
    return uint16_t(p[0] | (uint16_t(p[1]) << 8));
  }
  uint32_t u32() {
    const uint8_t* p = take(4);
    return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
  }
  float f32() {
    const uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  bool exhausted() const { return pos_ == data_.size(); }

 private:
  std::string data_;
  std::string path_;
  size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  // one sorted view over weights, BN stats, and optimizer accumulators
  std::map<std::string, const Tensor*> all;
  for (const auto& [name, t] : ckpt.params.tensors) all.emplace(name, &t);
  for (const auto& [name, slot] : ckpt.opt.slots) {
    all.emplace("optim.sq_grad." + name, &slot.sq_grad);
    all.emplace("optim.sq_update." + name, &slot.sq_update);
  }

  std::string out;
  out.append(kMagic, 8);
  put_u32(out, kVersion);
  put_u32(out, uint32_t(all.size()));
  for (const auto& [name, t] : all) {
    POLYSEG_CHECK(name.size() < 65536, "tensor name too long: '" << name << "'");
    put_u16(out, uint16_t(name.size()));
    out.append(name);
    out.push_back(char(t->rank()));
    for (int i = 0; i < t->rank(); ++i) put_u32(out, uint32_t(t->dim(i)));
    for (float v : t->data()) put_f32(out, v);
  }

  nlohmann::json meta;
  meta["epoch"] = ckpt.epoch;
  if (std::isfinite(ckpt.best_val_loss)) meta["best_val_loss"] = ckpt.best_val_loss;
  else meta["best_val_loss"] = nullptr;
  meta["model_config"] = cfgjson::model_config_to_json(ckpt.model_config);
  meta["train_config"] = cfgjson::train_config_to_json(ckpt.train_config);
  meta["rng_state"] = ckpt.rng_state;
  const std::string meta_text = meta.dump();
  put_u32(out, uint32_t(meta_text.size()));
  out.append(meta_text);

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  POLYSEG_CHECK(bool(file), "cannot write checkpoint '" << path << "'");
  file.write(out.data(), std::streamsize(out.size()));
  POLYSEG_CHECK(bool(file), "short write on checkpoint '" << path << "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  POLYSEG_CHECK(bool(file), "cannot read checkpoint '" << path << "'");
  std::string data((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  Reader r(std::move(data), path);

  const uint8_t* magic = r.take(8);
  POLYSEG_CHECK(std::memcmp(magic, kMagic, 8) == 0,
                "'" << path << "' is not a checkpoint (bad magic)");
  const uint32_t version = r.u32();
  POLYSEG_CHECK(version == kVersion,
                "checkpoint '" << path << "' has unsupported version " << version);

  const uint32_t count = r.u32();
  std::map<std::string, Tensor> tensors;
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t name_len = r.u16();
    std::string name(reinterpret_cast<const char*>(r.take(name_len)), name_len);
    const auto rank = int(*r.take(1));
    POLYSEG_CHECK(rank <= 4, "tensor '" << name << "' has rank " << rank << " > 4");
    Shape shape;
    shape.rank = rank;
    for (int d = 0; d < rank; ++d) shape.d[size_t(d)] = r.u32();
    Tensor t(shape);
    for (float& v : t.data()) v = r.f32();
    POLYSEG_CHECK(tensors.emplace(name, std::move(t)).second,
                  "duplicate tensor '" << name << "' in checkpoint");
  }

  const uint32_t meta_len = r.u32();
  const std::string meta_text(reinterpret_cast<const char*>(r.take(meta_len)), meta_len);
  POLYSEG_CHECK(r.exhausted(), "trailing bytes after checkpoint metadata in '" << path << "'");

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_text);
  } catch (const std::exception& e) {
    POLYSEG_CHECK(false, "checkpoint '" << path << "' metadata is not valid JSON: " << e.what());
  }

  Checkpoint ckpt;
  ckpt.model_config = cfgjson::model_config_from_json(meta.at("model_config"));
  ckpt.train_config = cfgjson::train_config_from_json(meta.at("train_config"));
  ckpt.epoch = meta.at("epoch").get<int>();
  const auto& bvl = meta.at("best_val_loss");
  ckpt.best_val_loss = bvl.is_null() ? std::numeric_limits<double>::infinity() : bvl.get<double>();
  ckpt.rng_state = meta.at("rng_state").get<uint64_t>();

  // reconstruct the parameter map against the embedded config
  for (const auto& info : model::parameter_table(ckpt.model_config)) {
    auto it = tensors.find(info.name);
    POLYSEG_CHECK(it != tensors.end(), "checkpoint is missing tensor '" << info.name << "'");
    POLYSEG_CHECK(it->second.shape() == info.shape,
                  "tensor '" << info.name << "' has shape " << it->second.shape().str()
                             << ", expected " << info.shape.str());
    it->second.set_requires_grad(info.learnable);
    ckpt.params.tensors.emplace(info.name, it->second);
    if (info.learnable) {
      for (const char* kind : {"optim.sq_grad.", "optim.sq_update."}) {
        auto ot = tensors.find(std::string(kind) + info.name);
        POLYSEG_CHECK(ot != tensors.end(),
                      "checkpoint is missing tensor '" << kind << info.name << "'");
        POLYSEG_CHECK(ot->second.shape() == info.shape,
                      "tensor '" << ot->first << "' has shape " << ot->second.shape().str()
                                 << ", expected " << info.shape.str());
      }
      ckpt.opt.slots.emplace(
          info.name, train::AdadeltaState::Slot{tensors.at("optim.sq_grad." + info.name),
                                                tensors.at("optim.sq_update." + info.name)});
    }
    tensors.erase(it);
  }
  for (const auto& [name, t] : tensors) {
    POLYSEG_CHECK(name.rfind("optim.", 0) == 0,
                  "checkpoint contains unexpected tensor '" << name << "'");
    const std::string base = name.substr(name.find('.', 6) + 1);
    POLYSEG_CHECK(ckpt.opt.slots.count(base) != 0,
                  "checkpoint contains orphan optimizer tensor '" << name << "'");
  }
  return ckpt;
}

}  // namespace polyseg::ckpt
