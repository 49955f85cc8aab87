#include "dmssn/saliency_head.hpp"

#include "dmssn/error.hpp"

namespace dmssn {

FusionMode parse_fusion_mode(const std::string& name) {
  if (name == "multiple") return FusionMode::kMultiple;
  if (name == "single_u") return FusionMode::kSingleU;
  if (name == "single_b") return FusionMode::kSingleB;
  if (name == "double_ub") return FusionMode::kDoubleUB;
  throw ConfigError("unknown fusion mode '" + name + "' (expected multiple, single_u, single_b or double_ub)");
}

std::string fusion_mode_name(FusionMode mode) {
  switch (mode) {
    case FusionMode::kMultiple: return "multiple";
    case FusionMode::kSingleU: return "single_u";
    case FusionMode::kSingleB: return "single_b";
    case FusionMode::kDoubleUB: return "double_ub";
  }
  return "multiple";
}

void FpnConfig::validate() const {
  if (fused_channels < 1) throw ConfigError("fpn: fused width must be >= 1");
}

Var fuse(const Var& x, const Var& y, const nn::Linear& omega) {
  const Tensor& xv = x.value();
  const Tensor& yv = y.value();
  require_map(xv, "fuse");
  require_map(yv, "fuse");
  if (2 * yv.height() != xv.height() || 2 * yv.width() != xv.width()) {
    throw ShapeError("fuse: y is " + std::to_string(yv.height()) + "x" + std::to_string(yv.width()) +
                     " but must be exactly half of x's " + std::to_string(xv.height()) + "x" +
                     std::to_string(xv.width()));
  }
  if (yv.channels() != omega.out()) throw ShapeError("fuse: y must have the fused width");
  return ops::add(omega(x), ops::resize_bilinear(y, xv.height(), xv.width()));
}

FpnHead::FpnHead(std::vector<int> stage_channels, const FpnConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  if (stage_channels.size() < 2 && cfg.mode != FusionMode::kSingleB && cfg.mode != FusionMode::kSingleU) {
    throw ConfigError("fpn: fusion needs at least 2 pyramid stages");
  }
  if (stage_channels.empty()) throw ConfigError("fpn: no pyramid stages");
  nn::Rng rng(seed);
  for (int c : stage_channels) lateral.emplace_back(c, cfg.fused_channels, rng);
  head = nn::Conv2d(cfg.fused_channels, 1, 3, 1, 1, rng);
}

std::vector<int> FpnHead::selected_stages() const {
  const int last = num_stages() - 1;
  switch (cfg_.mode) {
    case FusionMode::kSingleU: return {last};
    case FusionMode::kSingleB: return {0};
    case FusionMode::kDoubleUB: return {0, last};
    case FusionMode::kMultiple: break;
  }
  std::vector<int> all(static_cast<std::size_t>(num_stages()));
  for (int i = 0; i <= last; ++i) all[static_cast<std::size_t>(i)] = i;
  return all;
}

Var FpnHead::fused(const PyramidFeatures& p) const {
  if (p.size() != num_stages()) {
    throw ShapeError("fpn: head built for " + std::to_string(num_stages()) + " stages, pyramid has " +
                     std::to_string(p.size()));
  }
  const std::vector<int> sel = selected_stages();
  int top = sel.back();
  Var acc = lateral[static_cast<std::size_t>(top)](p[top]);
  for (auto it = sel.rbegin() + 1; it != sel.rend(); ++it) {
    const int i = *it;
    if (i + 1 == top) {
      acc = fuse(p[i], acc, lateral[static_cast<std::size_t>(i)]);
    } else {
      const Tensor& v = p[i].value();
      acc = ops::add(lateral[static_cast<std::size_t>(i)](p[i]), ops::resize_bilinear(acc, v.height(), v.width()));
    }
    top = i;
  }
  return acc;
}

Var FpnHead::forward(const PyramidFeatures& p, int out_h, int out_w) const {
  Var logits = head(fused(p));
  return ops::sigmoid(ops::resize_bilinear(logits, out_h, out_w));
}

NamedParams FpnHead::parameters() const {
  NamedParams out;
  for (std::size_t i = 0; i < lateral.size(); ++i) lateral[i].collect("head.lateral" + std::to_string(i), out);
  head.collect("head.out", out);
  return out;
}

SaliencyMask predict_saliency(const FpnHead& head, const PyramidFeatures& p, int out_h, int out_w) {
  return mask_from_tensor(head.forward(p, out_h, out_w).value());
}

}  // namespace dmssn
