#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ecgdnn/consolidate.hpp"
#include "ecgdnn/model.hpp"
#include "ecgdnn/synth.hpp"
#include "ecgdnn/train.hpp"

namespace ecgdnn::cli {

struct SplitSpec {
  SplitMode mode = SplitMode::ByPatient;
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct EvalOptions {
  std::size_t bootstrap_resamples = 0;  // 0 disables the bootstrap
  double hr_band = 5.0;                 // bpm around the consensus line
};

struct TextOptions {
  std::optional<double> threshold;  // override the rule base value
  std::optional<std::size_t> negation_window;
};

/// Every tunable of every module, addressed by dotted key.
struct RunConfig {
  ArchitectureConfig arch;
  TrainConfig train;
  SplitSpec split;
  ConsolidationConfig consolidate;
  CorpusSpec synth;
  EvalOptions eval;
  TextOptions text;
  std::size_t predict_batch_size = 32;
};

struct ConfigKey {
  std::string key;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<ConfigKey>& config_keys();

/// Applies one key=value; unknown keys and unparsable values throw InputError.
void apply_setting(RunConfig& config, const std::string& assignment);

/// key=value per line; blank lines and lines starting with '#' are skipped.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

std::map<std::string, std::string> effective_config(const RunConfig& config);

}  // namespace ecgdnn::cli
