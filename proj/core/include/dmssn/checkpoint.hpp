#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "dmssn/autograd.hpp"

namespace dmssn {

inline constexpr int kCheckpointFormatVersion = 1;

/// Named parameter arrays plus the training manifest.
///
/// On disk: `<dir>/manifest.json` and one raw little-endian float64 file per
/// array under `<dir>/arrays/`.
struct Checkpoint {
  std::string stage;  // "teacher" or "dmssn"
  int epoch = 0;
  std::uint64_t seed = 0;
  std::vector<double> loss_history;  // tail, most recent last
  nlohmann::json architecture;       // hashed into config_hash
  nlohmann::json hyperparameters;
  nlohmann::json extra;  // preprocessing settings, teacher hashes, ...
  std::map<std::string, Tensor> arrays;

  std::string config_hash() const;
  /// Throws ConfigError unless `arch` hashes to this checkpoint's config hash.
  void require_architecture(const nlohmann::json& arch) const;
};

/// 64-bit FNV-1a as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);
std::string architecture_hash(const nlohmann::json& architecture);
/// Hash over every parameter's name, shape and exact bytes.
std::string parameter_hash(const NamedParams& params);

/// Copies current parameter values into `ckpt.arrays`.
void capture_parameters(const NamedParams& params, Checkpoint& ckpt);
/// Writes arrays back into parameters; every parameter must be present
/// with a matching shape.
void restore_parameters(const Checkpoint& ckpt, const NamedParams& params);

/// Refuses to replace an existing directory unless `overwrite`.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir, bool overwrite = false);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace dmssn
