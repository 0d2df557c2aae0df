#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "bm3/trainer.hpp"

namespace bm3 {

/// Flat JSON run configuration. Relative paths resolve against the config file.
struct RunConfig {
  std::filesystem::path dataset_dir;  // output of `prepare`
  std::filesystem::path visual_features;
  std::filesystem::path textual_features;
  std::filesystem::path out_dir;
  TrainConfig train;
  GridSpec grid{{1, 2}, {0.3, 0.5}, {0.1, 0.01}};
};

/// Throws ConfigError listing every offending field.
RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Normalized config (absolute paths, every field explicit).
std::string run_config_json(const RunConfig& config);

struct PrepareArgs {
  std::filesystem::path input;
  int k = 5;
  std::uint64_t seed = 2023;
  std::filesystem::path out_dir;
};

void cmd_prepare(const PrepareArgs& args, std::ostream& out);
void cmd_train(const std::filesystem::path& config_path, std::ostream& out);
void cmd_evaluate(const std::filesystem::path& checkpoint_dir, Phase phase, const std::filesystem::path& data_dir,
                  const std::filesystem::path& out_file, std::ostream& out);
void cmd_ablate(const std::filesystem::path& config_path, std::ostream& out);
void cmd_grid(const std::filesystem::path& config_path, std::ostream& out);

/// Parses argv and dispatches. Returns 0 on success, 2 config error, 3 data
/// error, 4 numeric divergence.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bm3
