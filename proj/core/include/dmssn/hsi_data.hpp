#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dmssn/error.hpp"
#include "dmssn/tensor.hpp"

namespace dmssn {

/// H x W x C reflectance cube. Values are stored band-interleaved-by-pixel
/// in memory (a pixel's spectrum is contiguous); files use BSQ.
struct HyperCube {
  int height = 0;
  int width = 0;
  int bands = 0;
  std::vector<float> values;
  std::vector<double> band_centers;  // nm, optional

  HyperCube() = default;
  HyperCube(int h, int w, int c, float fill = 0.0f);

  float& at(int y, int x, int b) { return values[index(y, x, b)]; }
  float at(int y, int x, int b) const { return values[index(y, x, b)]; }
  std::span<const float> spectrum(int y, int x) const {
    return {values.data() + index(y, x, 0), static_cast<std::size_t>(bands)};
  }
  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  std::size_t index(int y, int x, int b) const {
    return (static_cast<std::size_t>(y) * width + x) * bands + b;
  }

  /// Throws ShapeError / DataError if the cube violates its invariants.
  void validate() const;
  bool operator==(const HyperCube&) const = default;
};

/// H x W map: binary ground truth or a predicted saliency in [0, 1].
struct SaliencyMask {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  SaliencyMask() = default;
  SaliencyMask(int h, int w, double fill = 0.0);

  double& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return values.size(); }
  bool is_binary() const;
  std::size_t count_positive() const;
  bool operator==(const SaliencyMask&) const = default;
};

Tensor to_tensor(const HyperCube& cube);
HyperCube cube_from_tensor(const Tensor& t);
/// H x W x 1 tensor view of a mask.
Tensor to_tensor(const SaliencyMask& mask);
SaliencyMask mask_from_tensor(const Tensor& t);

// ---------------------------------------------------------------------------
// Synthetic scenes

enum class ShapeKind { kRectangle, kEllipse };

struct SceneObject {
  ShapeKind kind = ShapeKind::kRectangle;
  double center_row = 0;  // in pixel units; pixel (r, c) has centre (r + .5, c + .5)
  double center_col = 0;
  double size_rows = 0;  // full extent
  double size_cols = 0;
  int material = 0;
};

struct SceneSpec {
  int height = 64;
  int width = 64;
  int bands = 32;
  std::vector<std::vector<double>> material_curves;  // n_materials x bands
  std::vector<SceneObject> objects;                  // painted in order
  int background_material = 0;
  std::vector<int> salient_materials;
  double noise_sigma = 0.0;
  double illumination_gradient = 0.0;  // left-to-right attenuation in [0, 1]
  std::uint64_t seed = 0;

  int n_materials() const { return static_cast<int>(material_curves.size()); }
  bool is_salient(int material) const;
  void validate() const;
};

/// True when the pixel centre of (row, col) lies inside the object.
bool shape_contains(const SceneObject& object, int row, int col);

/// Renders the scene. Each pixel carries its material prototype scaled by
/// (1 - gradient * col / (W - 1)) plus N(0, sigma^2) noise, clamped at 0.
/// The mask is 1 exactly on pixels whose final material is salient.
std::pair<HyperCube, SaliencyMask> generate_synthetic_scene(const SceneSpec& spec);

/// Parameters for drawing whole scene specs from a shared material library.
/// Library material 0 is the salient material in every scene, so the task
/// is learnable across scenes.
struct SceneRecipe {
  int height = 64;
  int width = 64;
  int bands = 32;
  int materials_min = 4;
  int materials_max = 8;
  int salient_objects_max = 2;
  int distractor_objects_max = 2;
  double object_size_min = 0.25;  // fraction of the shorter image side
  double object_size_max = 0.45;
  double noise_sigma = 0.01;
  double illumination_gradient = 0.2;
  std::uint64_t library_seed = 1234;
};

std::vector<std::vector<double>> material_library(int count, int bands, std::uint64_t seed);
SceneSpec random_scene_spec(const SceneRecipe& recipe, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Files

/// Error raised by load_cube, tagged with what went wrong.
class CubeFormatError : public IoError {
 public:
  enum class Kind {
    kMissingField,
    kDimensionMismatch,
    kInterleaveMismatch,
    kUnknownDataType,
    kByteOrder,
    kTruncatedPayload,
  };
  CubeFormatError(Kind kind, const std::string& what) : IoError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Payload file paired with an ENVI header (`scene.hdr` -> `scene.raw`).
std::filesystem::path payload_path_for(const std::filesystem::path& header);

/// Writes an ENVI header at `header` plus a BSQ little-endian float32 payload.
void save_cube(const HyperCube& cube, const std::filesystem::path& header);
HyperCube load_cube(const std::filesystem::path& header);

/// Binary PGM (P5, maxval 255); values are round(255 * v).
void save_mask(const SaliencyMask& mask, const std::filesystem::path& path);
/// Reads a P5 PGM, scaling samples to [0, 1].
SaliencyMask load_mask(const std::filesystem::path& path);

struct DatasetManifest {
  struct Entry {
    std::filesystem::path cube;
    std::filesystem::path mask;
  };
  std::vector<Entry> entries;
  std::string split = "train";

  /// Every referenced file exists and each cube matches its mask's size.
  void validate() const;
};

/// Lines are `cube_path<TAB>mask_path`; relative paths resolve against the
/// manifest's directory. `# split = test` sets the split tag.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Preprocessing

/// Affine map of all values onto [0, 1]. Throws DataError on a constant cube.
HyperCube normalize_cube(const HyperCube& cube);

struct AugmentParams {
  double scale_min = 1.0;
  double scale_max = 1.0;
  int crop_height = 0;  // 0 means "input height"
  int crop_width = 0;
  std::uint64_t seed = 0;
};

/// A drawn random scale plus the centre crop that follows it.
struct AugmentPlan {
  int in_height = 0;
  int in_width = 0;
  int scaled_height = 0;
  int scaled_width = 0;
  int crop_top = 0;
  int crop_left = 0;
  int crop_height = 0;
  int crop_width = 0;
};

AugmentPlan plan_augment(int height, int width, const AugmentParams& params);
/// Bilinear resample per band, then crop.
HyperCube apply_augment(const AugmentPlan& plan, const HyperCube& cube);
/// Nearest-neighbour resample, crop, re-binarize at 0.5.
SaliencyMask apply_augment(const AugmentPlan& plan, const SaliencyMask& mask);

std::pair<HyperCube, SaliencyMask> augment(const HyperCube& cube, const SaliencyMask& mask,
                                           const AugmentParams& params);

}  // namespace dmssn
