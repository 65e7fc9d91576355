#pragma once

#include <cstdint>
#include <string>

// CLI subcommand implementations; each returns a process exit code.

namespace polyseg::cli {

int cmd_split(const std::string& dataset_root, uint64_t seed, const std::string& out_manifest);

int cmd_train(const std::string& config_path, const std::string& out_override,
              bool has_seed_override, uint64_t seed_override, const std::string& resume_path);

int cmd_eval(const std::string& checkpoint_path, const std::string& dataset_root,
             const std::string& manifest_path, const std::string& split_name,
             const std::string& out_dir);

int cmd_predict(const std::string& checkpoint_path, const std::string& input_path,
                const std::string& out_dir, double threshold);

int cmd_gradcheck(const std::string& scale);

}  // namespace polyseg::cli
