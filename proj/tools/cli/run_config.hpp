#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dmssn/metrics.hpp"
#include "dmssn/training.hpp"

namespace dmssn::cli {

inline constexpr int kConfigVersion = 1;

/// Everything a run can be configured with. Keys are flat and dotted,
/// e.g. `scene.height` or `train.lr`.
struct RunConfig {
  std::uint64_t seed = 0;
  int scene_count = 20;
  SceneRecipe scene;
  ModelConfig model;
  PreprocessConfig preprocess;
  std::string profile = "desk";
  double teacher_lr = 0.002;
  int teacher_batch = 4;
  int teacher_epochs = 20;
  double train_lr = 0.002;
  int train_batch = 4;
  int train_epochs = 30;
  double weight_decay = 0.01;
  double val_fraction = 0.2;
  double augment_probability = 0.5;
  double scale_min = 1.0;
  double scale_max = 1.25;
  HsLossOptions hs;
  SodLossOptions sod;
  EvalOptions metrics;
  int diagnose_bins = 256;
  int diagnose_runs = 10;

  TrainConfig teacher_config() const;
  TrainConfig dmssn_config() const;
  void validate() const;
};

struct KeyDef {
  std::string key;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

/// Every accepted key, in the order they are written by to_text().
const std::vector<KeyDef>& config_keys();

/// Parses `key = value` lines; `#` starts a comment. Requires
/// `config_version = 1`; rejects unknown and repeated keys.
std::map<std::string, std::string> parse_config_text(const std::string& text, const std::string& origin = "<config>");

/// Applies settings on top of the defaults. `train.profile` is applied
/// first so explicit keys override the preset it selects.
RunConfig build_config(const std::map<std::string, std::string>& settings);

/// A complete config file for `cfg`.
std::string to_text(const RunConfig& cfg);

}  // namespace dmssn::cli
