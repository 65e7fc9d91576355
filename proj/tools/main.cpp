#include <cstdint>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"polyseg - binary polyp segmentation toolkit"};
  app.require_subcommand(1);

  // split
  auto* split = app.add_subcommand("split", "write an 80/10/10 train/val/test manifest");
  std::string split_data;
  uint64_t split_seed = 42;
  std::string split_manifest;
  split->add_option("--data", split_data, "dataset root containing images/ and masks/")
      ->required();
  split->add_option("--seed", split_seed, "shuffle seed");
  std::string split_out = "out";
  split->add_option("--out", split_out, "output directory");
  split->add_option("--manifest", split_manifest, "manifest path (default <out>/split.tsv)");

  // train
  auto* train = app.add_subcommand("train", "train from a JSON config, write best.ckpt");
  std::string train_config;
  std::string train_out;
  std::string train_resume;
  uint64_t train_seed = 0;
  train->add_option("--config", train_config, "JSON run config")->required();
  train->add_option("--out", train_out, "override the config's output directory");
  auto* train_seed_opt = train->add_option("--seed", train_seed, "override the config's seed");
  train->add_option("--resume", train_resume, "checkpoint to continue from");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a manifest split");
  std::string eval_ckpt, eval_data, eval_manifest, eval_split = "test", eval_out;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
  eval->add_option("--data", eval_data, "dataset root")->required();
  eval->add_option("--manifest", eval_manifest, "split manifest")->required();
  eval->add_option("--split", eval_split, "train|val|test");
  eval->add_option("--out", eval_out, "directory for the JSON record");

  // predict
  auto* predict = app.add_subcommand("predict", "write probability and mask PNGs");
  std::string pred_ckpt, pred_input, pred_out = "out";
  double pred_threshold = 0.5;
  predict->add_option("--checkpoint", pred_ckpt, "checkpoint path")->required();
  predict->add_option("--input", pred_input, "image file or directory")->required();
  predict->add_option("--out", pred_out, "output directory");
  predict->add_option("--threshold", pred_threshold, "foreground threshold");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  std::string gc_scale = "tiny";
  gradcheck->add_option("--scale", gc_scale, "tiny|small");

  CLI11_PARSE(app, argc, argv);

  if (split->parsed()) {
    const std::string manifest =
        split_manifest.empty() ? split_out + "/split.tsv" : split_manifest;
    return polyseg::cli::cmd_split(split_data, split_seed, manifest);
  }
  if (train->parsed())
    return polyseg::cli::cmd_train(train_config, train_out, train_seed_opt->count() > 0,
                                   train_seed, train_resume);
  if (eval->parsed())
    return polyseg::cli::cmd_eval(eval_ckpt, eval_data, eval_manifest, eval_split, eval_out);
  if (predict->parsed())
    return polyseg::cli::cmd_predict(pred_ckpt, pred_input, pred_out, pred_threshold);
  if (gradcheck->parsed()) return polyseg::cli::cmd_gradcheck(gc_scale);
  return 1;
}
