#include "polyseg/runconfig.hpp"

#include <fstream>
#include <set>

#include "config_json.hpp"

namespace polyseg::cli {

data::AugmentSpec RunConfig::augment_spec() const {
  data::AugmentSpec spec;
  spec.seed = train.seed;
  if (center_crop_side > 0) {
    data::AugmentOp op;
    op.kind = data::AugmentOp::Kind::center_crop;
    op.p = 1.0;
    op.crop_side = center_crop_side;
    spec.ops.push_back(op);
  }
  {
    data::AugmentOp op;
    op.kind = data::AugmentOp::Kind::random_rotate;
    op.p = rotate_p;
    op.max_deg = rotate_max_deg;
    spec.ops.push_back(op);
  }
  {
    data::AugmentOp op;
    op.kind = data::AugmentOp::Kind::hflip;
    op.p = hflip_p;
    spec.ops.push_back(op);
  }
  {
    data::AugmentOp op;
    op.kind = data::AugmentOp::Kind::vflip;
    op.p = vflip_p;
    spec.ops.push_back(op);
  }
  {
    data::AugmentOp op;
    op.kind = data::AugmentOp::Kind::grid_distortion;
    op.p = grid_p;
    op.steps = grid_steps;
    op.limit = grid_limit;
    spec.ops.push_back(op);
  }
  return spec;
}

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "dataset_root",   "manifest",       "out_dir",
      "input_side",     "width_multiplier", "decoder_channels", "bn_eps", "bn_momentum",
      "learning_rate",  "batch_size",     "max_epochs",       "early_stop_patience",
      "threshold",      "dice_smooth",    "adadelta_rho",     "adadelta_eps", "seed",
      "center_crop_side", "rotate_max_deg", "rotate_p",       "hflip_p", "vflip_p",
      "grid_steps",     "grid_limit",     "grid_p"};
  return keys;
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    POLYSEG_CHECK(false, "config is not valid JSON: " << e.what());
  }
  POLYSEG_CHECK(j.is_object(), "config root must be a JSON object");
  for (const auto& [key, value] : j.items())
    POLYSEG_CHECK(known_keys().count(key) != 0, "unknown config key '" << key << "'");

  RunConfig cfg;
  auto get_to = [&](const char* key, auto& dst) {
    if (j.contains(key)) dst = j.at(key).get<std::decay_t<decltype(dst)>>();
  };
  get_to("dataset_root", cfg.dataset_root);
  get_to("manifest", cfg.manifest);
  get_to("out_dir", cfg.out_dir);

  get_to("input_side", cfg.model.input_side);
  get_to("width_multiplier", cfg.model.width_multiplier);
  if (j.contains("decoder_channels")) {
    const auto& dec = j.at("decoder_channels");
    POLYSEG_CHECK(dec.is_array() && dec.size() == 5, "decoder_channels must hold 5 ints");
    for (size_t i = 0; i < 5; ++i) cfg.model.decoder_channels[i] = dec[i].get<int>();
  }
  get_to("bn_eps", cfg.model.bn_eps);
  get_to("bn_momentum", cfg.model.bn_momentum);

  get_to("learning_rate", cfg.train.learning_rate);
  get_to("batch_size", cfg.train.batch_size);
  get_to("max_epochs", cfg.train.max_epochs);
  get_to("early_stop_patience", cfg.train.early_stop_patience);
  get_to("threshold", cfg.train.threshold);
  get_to("dice_smooth", cfg.train.dice_smooth);
  get_to("adadelta_rho", cfg.train.adadelta_rho);
  get_to("adadelta_eps", cfg.train.adadelta_eps);
  get_to("seed", cfg.train.seed);

  get_to("center_crop_side", cfg.center_crop_side);
  get_to("rotate_max_deg", cfg.rotate_max_deg);
  get_to("rotate_p", cfg.rotate_p);
  get_to("hflip_p", cfg.hflip_p);
  get_to("vflip_p", cfg.vflip_p);
  get_to("grid_steps", cfg.grid_steps);
  get_to("grid_limit", cfg.grid_limit);
  get_to("grid_p", cfg.grid_p);

  cfg.model.validate();
  cfg.train.validate();
  return cfg;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  POLYSEG_CHECK(bool(in), "cannot read config '" << path << "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_text(text);
}

std::string RunConfig::to_json_text() const {
  nlohmann::json j;
  j["dataset_root"] = dataset_root;
  j["manifest"] = manifest;
  j["out_dir"] = out_dir;
  j["input_side"] = model.input_side;
  j["width_multiplier"] = model.width_multiplier;
  j["decoder_channels"] = model.decoder_channels;
  j["bn_eps"] = model.bn_eps;
  j["bn_momentum"] = model.bn_momentum;
  j["learning_rate"] = train.learning_rate;
  j["batch_size"] = train.batch_size;
  j["max_epochs"] = train.max_epochs;
  j["early_stop_patience"] = train.early_stop_patience;
  j["threshold"] = train.threshold;
  j["dice_smooth"] = train.dice_smooth;
  j["adadelta_rho"] = train.adadelta_rho;
  j["adadelta_eps"] = train.adadelta_eps;
  j["seed"] = train.seed;
  j["center_crop_side"] = center_crop_side;
  j["rotate_max_deg"] = rotate_max_deg;
  j["rotate_p"] = rotate_p;
  j["hflip_p"] = hflip_p;
  j["vflip_p"] = vflip_p;
  j["grid_steps"] = grid_steps;
  j["grid_limit"] = grid_limit;
  j["grid_p"] = grid_p;
  return j.dump(2) + "\n";
}

}  // namespace polyseg::cli
