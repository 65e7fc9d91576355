#pragma once

#include "json.hpp"
#include "polyseg/model.hpp"
#include "polyseg/train.hpp"

// JSON forms of the config structs, shared by the checkpoint metadata and
// the run-config file. Numbers round-trip exactly through nlohmann's
// shortest-representation printing.

namespace polyseg::cfgjson {

inline nlohmann::json model_config_to_json(const model::ModelConfig& cfg) {
  nlohmann::json j;
  j["input_side"] = cfg.input_side;
  j["in_channels"] = cfg.in_channels;
  j["width_multiplier"] = cfg.width_multiplier;
  j["decoder_channels"] = cfg.decoder_channels;
  j["bn_eps"] = cfg.bn_eps;
  j["bn_momentum"] = cfg.bn_momentum;
  nlohmann::json plan = nlohmann::json::array();
  for (const auto& b : cfg.encoder_plan)
    plan.push_back({{"t", b.expansion}, {"c", b.out_channels}, {"n", b.repeats}, {"s", b.stride}});
  j["encoder_plan"] = plan;
  return j;
}

inline model::ModelConfig model_config_from_json(const nlohmann::json& j) {
  model::ModelConfig cfg;
  cfg.input_side = j.at("input_side").get<int>();
  cfg.in_channels = j.at("in_channels").get<int>();
  cfg.width_multiplier = j.at("width_multiplier").get<double>();
  const auto dec = j.at("decoder_channels");
  POLYSEG_CHECK(dec.is_array() && dec.size() == 5,
                "decoder_channels must be an array of 5 ints");
  for (size_t i = 0; i < 5; ++i) cfg.decoder_channels[i] = dec[i].get<int>();
  cfg.bn_eps = j.at("bn_eps").get<double>();
  cfg.bn_momentum = j.at("bn_momentum").get<double>();
  cfg.encoder_plan.clear();
  for (const auto& b : j.at("encoder_plan"))
    cfg.encoder_plan.push_back({b.at("t").get<int>(), b.at("c").get<int>(), b.at("n").get<int>(),
                                b.at("s").get<int>()});
  cfg.validate();
  return cfg;
}

inline nlohmann::json train_config_to_json(const train::TrainConfig& cfg) {
  nlohmann::json j;
  j["learning_rate"] = cfg.learning_rate;
  j["batch_size"] = cfg.batch_size;
  j["max_epochs"] = cfg.max_epochs;
  j["early_stop_patience"] = cfg.early_stop_patience;
  j["threshold"] = cfg.threshold;
  j["dice_smooth"] = cfg.dice_smooth;
  j["adadelta_rho"] = cfg.adadelta_rho;
  j["adadelta_eps"] = cfg.adadelta_eps;
  j["seed"] = cfg.seed;
  return j;
}

inline train::TrainConfig train_config_from_json(const nlohmann::json& j) {
  train::TrainConfig cfg;
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.max_epochs = j.at("max_epochs").get<int>();
  cfg.early_stop_patience = j.at("early_stop_patience").get<int>();
  cfg.threshold = j.at("threshold").get<double>();
  cfg.dice_smooth = j.at("dice_smooth").get<double>();
  cfg.adadelta_rho = j.at("adadelta_rho").get<double>();
  cfg.adadelta_eps = j.at("adadelta_eps").get<double>();
  cfg.seed = j.at("seed").get<uint64_t>();
  cfg.validate();
  return cfg;
}

}  // namespace polyseg::cfgjson
