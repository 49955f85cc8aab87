#pragma once

#include <cstdint>
#include <vector>

#include "dmssn/nn.hpp"

namespace dmssn {

struct MssBlockConfig {
  int channels = 32;
  int heads_per_group = 2;
  int reduction = 1;  // K: kernel and stride of the key/value reduction
  int ffn_ratio = 4;

  int head_dim() const { return channels / heads_per_group; }
  void validate() const;
};

struct MsstStageConfig {
  int blocks = 2;
  int channels = 32;
  int stride = 2;     // patch-embedding stride
  int reduction = 1;  // K for every block in the stage
};

struct MsstConfig {
  int in_channels = 8;
  std::vector<MsstStageConfig> stages = {{2, 32, 4, 8}, {2, 64, 2, 4}, {2, 128, 2, 2}, {2, 256, 2, 1}};
  int heads_per_group = 2;
  int ffn_ratio = 4;

  int num_stages() const { return static_cast<int>(stages.size()); }
  MssBlockConfig block_config(int stage) const;
  /// Smallest side length every stage divides evenly.
  int min_input_size() const;
  void validate() const;
};

struct PyramidFeatures {
  std::vector<Var> maps;  // F_1 .. F_L, finest first

  int size() const { return static_cast<int>(maps.size()); }
  const Var& operator[](int i) const { return maps[static_cast<std::size_t>(i)]; }
};

/// Strided convolution (kernel = stride, no padding) followed by LayerNorm.
struct PatchEmbed {
  nn::Conv2d proj;
  nn::LayerNorm norm;

  PatchEmbed() = default;
  PatchEmbed(int in, int out, int stride, nn::Rng& rng);

  /// The convolution alone.
  Var project(const Var& x) const;
  Var operator()(const Var& x) const { return norm(project(x)); }
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct QkvMaps {
  Var q1, q2;  // H x W x C each
  Var e_hat;   // H/K x W/K x C
  Var k1, v1;  // spectral group
  Var k2, v2;  // spatial group
};

/// Multi-head attention over one group; every query attends to all keys.
Var group_attention(const Var& q, const Var& k, const Var& v, int heads);

class MssBlock {
 public:
  MssBlock() = default;
  MssBlock(const MssBlockConfig& cfg, nn::Rng& rng);

  QkvMaps compute_qkv(const Var& e) const;
  Var operator()(const Var& e) const;
  /// Zeroes the attention projection and the last FFN layer, making the
  /// block an exact identity.
  void zero_output_layers();
  const MssBlockConfig& config() const { return cfg_; }
  void collect(const std::string& prefix, NamedParams& out) const;

  nn::Linear query;  // C -> 2C
  nn::Conv2d reduce;
  nn::Linear key1, value1;
  nn::SharedSpatialConv key2, value2;
  nn::Linear proj;  // 2C -> C
  nn::LayerNorm ffn_norm;
  nn::Linear fc1, fc2;

 private:
  MssBlockConfig cfg_;
};

class Msst {
 public:
  Msst(const MsstConfig& cfg, std::uint64_t seed);

  PyramidFeatures forward(const Var& x) const;
  const MsstConfig& config() const { return cfg_; }
  NamedParams parameters() const;

  struct Stage {
    PatchEmbed embed;
    std::vector<MssBlock> blocks;
  };
  std::vector<Stage> stages;

 private:
  MsstConfig cfg_;
};

}  // namespace dmssn
