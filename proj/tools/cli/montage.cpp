#include "montage.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "dmssn/error.hpp"

namespace dmssn::cli {
namespace {

std::uint8_t byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

RgbImage pseudo_color(const HyperCube& cube) {
  RgbImage img{cube.width, cube.height, std::vector<std::uint8_t>(static_cast<std::size_t>(cube.width) * cube.height * 3)};
  const int bands[3] = {cube.bands * 3 / 4, cube.bands / 2, cube.bands / 4};
  for (int ch = 0; ch < 3; ++ch) {
    double hi = 0.0;
    for (int r = 0; r < cube.height; ++r)
      for (int c = 0; c < cube.width; ++c) hi = std::max(hi, static_cast<double>(cube.at(r, c, bands[ch])));
    const double inv = hi > 0 ? 1.0 / hi : 0.0;
    for (int r = 0; r < cube.height; ++r)
      for (int c = 0; c < cube.width; ++c) {
        img.pixels[(static_cast<std::size_t>(r) * cube.width + c) * 3 + ch] = byte(cube.at(r, c, bands[ch]) * inv);
      }
  }
  return img;
}

RgbImage gray(const SaliencyMask& mask) {
  RgbImage img{mask.width, mask.height, {}};
  img.pixels.reserve(mask.size() * 3);
  for (double v : mask.values) img.pixels.insert(img.pixels.end(), 3, byte(v));
  return img;
}

RgbImage side_by_side(const std::vector<RgbImage>& panels) {
  constexpr int kGutter = 2;
  RgbImage out;
  for (const auto& p : panels) {
    out.width += p.width;
    out.height = std::max(out.height, p.height);
  }
  if (!panels.empty()) out.width += kGutter * static_cast<int>(panels.size() - 1);
  out.pixels.assign(static_cast<std::size_t>(out.width) * out.height * 3, 255);
  int left = 0;
  for (const auto& p : panels) {
    for (int r = 0; r < p.height; ++r) {
      std::copy_n(&p.pixels[static_cast<std::size_t>(r) * p.width * 3], p.width * 3,
                  &out.pixels[(static_cast<std::size_t>(r) * out.width + left) * 3]);
    }
    left += p.width + kGutter;
  }
  return out;
}

void write_png(const RgbImage& image, const std::filesystem::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> f(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < image.height; ++r) {
    png_write_row(png, image.pixels.data() + static_cast<std::size_t>(r) * image.width * 3);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace dmssn::cli
