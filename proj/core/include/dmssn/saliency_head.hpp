#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmssn/hsi_data.hpp"
#include "dmssn/msst.hpp"

namespace dmssn {

/// Which pyramid stages feed the top-down chain.
enum class FusionMode {
  kMultiple,  // every stage
  kSingleU,   // coarsest stage only
  kSingleB,   // finest stage only
  kDoubleUB,  // finest and coarsest
};

FusionMode parse_fusion_mode(const std::string& name);
std::string fusion_mode_name(FusionMode mode);

struct FpnConfig {
  int fused_channels = 64;
  FusionMode mode = FusionMode::kMultiple;

  void validate() const;
};

/// omega(x) + bilinear x2 upsample of y. `y` must already have omega's
/// output width and exactly half of x's spatial size.
Var fuse(const Var& x, const Var& y, const nn::Linear& omega);

class FpnHead {
 public:
  FpnHead(std::vector<int> stage_channels, const FpnConfig& cfg, std::uint64_t seed);

  /// Top-down fusion, 3x3 head to one channel, bilinear upsample to
  /// out_h x out_w, logistic. Returns an out_h x out_w x 1 map.
  Var forward(const PyramidFeatures& p, int out_h, int out_w) const;
  /// The fused map before the head.
  Var fused(const PyramidFeatures& p) const;

  const FpnConfig& config() const { return cfg_; }
  int num_stages() const { return static_cast<int>(lateral.size()); }
  NamedParams parameters() const;

  std::vector<nn::Linear> lateral;  // one projection per stage
  nn::Conv2d head;

 private:
  std::vector<int> selected_stages() const;
  FpnConfig cfg_;
};

SaliencyMask predict_saliency(const FpnHead& head, const PyramidFeatures& p, int out_h, int out_w);

}  // namespace dmssn
