#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "dmssn/hsi_data.hpp"

namespace dmssn::cli {

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB
};

/// Three bands at 3/4, 1/2 and 1/4 of the spectrum as R, G, B, each
/// stretched to its own maximum.
RgbImage pseudo_color(const HyperCube& cube);
RgbImage gray(const SaliencyMask& mask);
/// Panels side by side with a 2-pixel white gutter.
RgbImage side_by_side(const std::vector<RgbImage>& panels);

void write_png(const RgbImage& image, const std::filesystem::path& path);

}  // namespace dmssn::cli
