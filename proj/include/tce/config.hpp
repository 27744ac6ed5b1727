#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "tce/data.hpp"
#include "tce/eval.hpp"
#include "tce/nn.hpp"
#include "tce/trainer.hpp"

namespace tce {

// Merged run configuration: file values then --set overrides, every field
// addressable by a dotted key (train.lr, loss.temperature, ...). Component
// seeds derive from the root seed unless pinned explicitly.
struct RunConfig {
  uint64_t seed = 0;
  SyntheticSpec synth;
  AugmentationConfig aug;
  nn::EncoderConfig encoder;
  TrainConfig train;
  EvalConfig eval;
  int metrics_sample_count = 375;

  bool synth_seed_set = false;
  bool train_seed_set = false;
  bool eval_seed_set = false;

  // Fill derived seeds. Call after all overrides are applied.
  void finalize();
};

// Sets one dotted key. Throws ConfigError for unknown keys or bad values.
void apply_kv(RunConfig& config, const std::string& key, const std::string& value);

// Flat "key = value" text, UTF-8, '#' comments. Returns pairs in file order.
std::vector<std::pair<std::string, std::string>> read_config_file(
    const std::filesystem::path& path);

void apply_all(RunConfig& config,
               const std::vector<std::pair<std::string, std::string>>& pairs);

// "key=value" (as passed to --set) -> pair. Throws ConfigError without '='.
std::pair<std::string, std::string> split_kv(const std::string& arg);

// One line per key: name, default, description. Shown under --help.
std::string config_help();

}  // namespace tce
