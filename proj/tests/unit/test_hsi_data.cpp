#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "dmssn/hsi_data.hpp"
#include "test_support.hpp"

using namespace dmssn;
using testing::Rng;

namespace {

SceneSpec one_object_spec() {
  SceneSpec s;
  s.height = 16;
  s.width = 16;
  s.bands = 8;
  s.material_curves = material_library(2, 8, 7);
  s.background_material = 1;
  s.salient_materials = {0};
  s.objects = {{ShapeKind::kRectangle, 8, 8, 6, 5, 0}};
  return s;
}

}  // namespace

TEST_CASE("noise-free object pixels equal the salient prototype exactly") {
  SceneSpec s = one_object_spec();
  auto [cube, mask] = generate_synthetic_scene(s);
  int checked = 0;
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) {
      const int m = mask.at(r, c) > 0.5 ? 0 : 1;
      for (int b = 0; b < 8; ++b) CHECK(cube.at(r, c, b) == static_cast<float>(s.material_curves[m][b]));
      checked += m == 0;
    }
  // 6 rows x 6 cols of pixel centres fall on the closed rectangle
  CHECK(checked == 36);
}

TEST_CASE("generation is deterministic in the seed") {
  SceneSpec s = one_object_spec();
  s.noise_sigma = 0.05;
  s.illumination_gradient = 0.3;
  s.seed = 99;
  auto a = generate_synthetic_scene(s);
  auto b = generate_synthetic_scene(s);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  s.seed = 100;
  CHECK_FALSE(generate_synthetic_scene(s).first == a.first);
}

TEST_CASE("mask area equals an independent rasterization") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    SceneSpec s;
    s.height = s.width = 16;
    s.bands = 8;
    s.material_curves = material_library(2, 8, trial);
    s.background_material = 1;
    s.salient_materials = {0};
    s.noise_sigma = 0.01;
    s.seed = static_cast<std::uint64_t>(trial);
    std::uniform_real_distribution<double> size(2.0, 9.0);
    for (int k = 0; k < 2; ++k) {
      SceneObject o;
      o.kind = k % 2 ? ShapeKind::kEllipse : ShapeKind::kRectangle;
      o.size_rows = size(rng);
      o.size_cols = size(rng);
      o.center_row = std::uniform_real_distribution<double>(o.size_rows / 2, 16 - o.size_rows / 2)(rng);
      o.center_col = std::uniform_real_distribution<double>(o.size_cols / 2, 16 - o.size_cols / 2)(rng);
      o.material = 0;
      s.objects.push_back(o);
    }
    auto [cube, mask] = generate_synthetic_scene(s);
    const auto oracle = testing::oracle_material_map(s);
    std::size_t expected = 0;
    for (std::size_t i = 0; i < oracle.size(); ++i) {
      expected += oracle[i] == 0;
      CHECK(mask.values[i] == (oracle[i] == 0 ? 1.0 : 0.0));
    }
    CHECK(mask.count_positive() == expected);
  }
}

TEST_CASE("objects outside the image are rejected with their index") {
  SceneSpec s = one_object_spec();
  s.objects.push_back({ShapeKind::kEllipse, 15, 15, 6, 6, 0});
  try {
    s.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("exceeds") != std::string::npos);
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
  CHECK_THROWS_AS(generate_synthetic_scene(s), ConfigError);
}

TEST_CASE("scene specs need distinct curves and one salient set") {
  SceneSpec s = one_object_spec();
  s.material_curves[1] = s.material_curves[0];
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = one_object_spec();
  s.salient_materials.clear();
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = one_object_spec();
  s.salient_materials = {1};
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("random scene specs are valid and contain the salient material") {
  SceneRecipe r;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SceneSpec s = random_scene_spec(r, seed);
    CHECK_NOTHROW(s.validate());
    auto [cube, mask] = generate_synthetic_scene(s);
    CHECK(cube.height == 64);
    CHECK(cube.bands == 32);
    CHECK(mask.count_positive() > 0);
    CHECK(mask.count_positive() < mask.size());
  }
}

TEST_CASE("cube save/load roundtrip is exact") {
  testing::TempDir dir;
  Rng rng(3);
  HyperCube cube = testing::random_cube(5, 7, 4, rng, -2.0f, 3.0f);
  cube.band_centers = {400.5, 500.25, 600.125, 700};
  save_cube(cube, dir.file("c.hdr"));
  CHECK(std::filesystem::exists(dir.file("c.raw")));
  HyperCube back = load_cube(dir.file("c.hdr"));
  CHECK(back == cube);
}

TEST_CASE("payload bytes follow the little-endian BSQ layout") {
  testing::TempDir dir;
  HyperCube cube(2, 2, 2);
  // (y, x, b) -> distinct values
  cube.at(0, 0, 0) = 1.0f;
  cube.at(0, 1, 0) = 2.0f;
  cube.at(1, 0, 0) = -0.5f;
  cube.at(1, 1, 0) = 0.25f;
  cube.at(0, 0, 1) = 3.0f;
  cube.at(0, 1, 1) = 0.0f;
  cube.at(1, 0, 1) = 1.5f;
  cube.at(1, 1, 1) = -2.0f;
  save_cube(cube, dir.file("c.hdr"));
  std::ifstream in(dir.file("c.raw"), std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  // IEEE-754 single precision, hand encoded
  const std::vector<unsigned char> expected = {
      0x00, 0x00, 0x80, 0x3f,  // 1.0
      0x00, 0x00, 0x00, 0x40,  // 2.0
      0x00, 0x00, 0x00, 0xbf,  // -0.5
      0x00, 0x00, 0x80, 0x3e,  // 0.25
      0x00, 0x00, 0x40, 0x40,  // 3.0
      0x00, 0x00, 0x00, 0x00,  // 0.0
      0x00, 0x00, 0xc0, 0x3f,  // 1.5
      0x00, 0x00, 0x00, 0xc0,  // -2.0
  };
  CHECK(bytes == expected);

  // and the reverse direction from hand-written bytes
  std::ofstream out(dir.file("c.raw"), std::ios::binary | std::ios::trunc);
  std::vector<unsigned char> mine = expected;
  std::swap_ranges(mine.begin(), mine.begin() + 4, mine.begin() + 4);
  out.write(reinterpret_cast<const char*>(mine.data()), static_cast<std::streamsize>(mine.size()));
  out.close();
  HyperCube back = load_cube(dir.file("c.hdr"));
  CHECK(back.at(0, 0, 0) == 2.0f);
  CHECK(back.at(0, 1, 0) == 1.0f);
  CHECK(back.at(1, 1, 1) == -2.0f);
}

TEST_CASE("malformed cube files raise distinct errors") {
  testing::TempDir dir;
  HyperCube cube(3, 3, 8, 0.5f);
  save_cube(cube, dir.file("c.hdr"));

  auto kind_of = [&](auto mutate) {
    save_cube(cube, dir.file("c.hdr"));
    mutate();
    try {
      load_cube(dir.file("c.hdr"));
    } catch (const CubeFormatError& e) {
      return static_cast<int>(e.kind());
    }
    return -1;
  };
  auto rewrite_header = [&](const std::string& from, const std::string& to) {
    std::ifstream in(dir.file("c.hdr"));
    std::string text((std::istreambuf_iterator<char>(in)), {});
    in.close();
    text.replace(text.find(from), from.size(), to);
    std::ofstream(dir.file("c.hdr")) << text;
  };

  using K = CubeFormatError::Kind;
  CHECK(kind_of([&] { std::filesystem::resize_file(dir.file("c.raw"), 7 * 9 * 4); }) ==
        static_cast<int>(K::kTruncatedPayload));
  CHECK(kind_of([&] { rewrite_header("interleave = bsq", "interleave = bil"); }) ==
        static_cast<int>(K::kInterleaveMismatch));
  CHECK(kind_of([&] { rewrite_header("data type = 4", "data type = 12"); }) == static_cast<int>(K::kUnknownDataType));
  CHECK(kind_of([&] { rewrite_header("byte order = 0", "byte order = 1"); }) == static_cast<int>(K::kByteOrder));
  CHECK(kind_of([&] { rewrite_header("bands = 8", "bands = 0"); }) == static_cast<int>(K::kDimensionMismatch));
  CHECK(kind_of([&] { rewrite_header("bands = 8", "bands = 6"); }) == static_cast<int>(K::kDimensionMismatch));
  CHECK(kind_of([&] { rewrite_header("lines = 3\n", ""); }) == static_cast<int>(K::kMissingField));
}

TEST_CASE("masks roundtrip through PGM") {
  testing::TempDir dir;
  Rng rng(5);
  SaliencyMask m = testing::random_binary_mask(6, 9, rng);
  save_mask(m, dir.file("m.pgm"));
  CHECK(load_mask(dir.file("m.pgm")) == m);
  SaliencyMask soft(1, 3);
  soft.values = {0.0, 0.5, 1.0};
  save_mask(soft, dir.file("s.pgm"));
  SaliencyMask back = load_mask(dir.file("s.pgm"));
  CHECK(back.values[1] == doctest::Approx(128.0 / 255.0));
}

TEST_CASE("manifest roundtrip resolves relative paths") {
  testing::TempDir dir;
  HyperCube cube(4, 4, 2, 1.0f);
  SaliencyMask mask(4, 4);
  save_cube(cube, dir.file("a.hdr"));
  save_mask(mask, dir.file("a.pgm"));
  DatasetManifest m;
  m.split = "test";
  m.entries.push_back({dir.file("a.hdr"), dir.file("a.pgm")});
  save_manifest(m, dir.file("manifest.tsv"));
  DatasetManifest back = load_manifest(dir.file("manifest.tsv"));
  REQUIRE(back.entries.size() == 1);
  CHECK(back.split == "test");
  CHECK(std::filesystem::equivalent(back.entries[0].cube, dir.file("a.hdr")));
  CHECK_NOTHROW(back.validate());

  std::ofstream(dir.file("rel.tsv")) << "a.hdr\ta.pgm\n";
  CHECK_NOTHROW(load_manifest(dir.file("rel.tsv")).validate());
  std::ofstream(dir.file("bad.tsv")) << "missing.hdr\ta.pgm\n";
  CHECK_THROWS_AS(load_manifest(dir.file("bad.tsv")).validate(), IoError);

  save_mask(SaliencyMask(5, 4), dir.file("b.pgm"));
  std::ofstream(dir.file("mismatch.tsv")) << "a.hdr\tb.pgm\n";
  CHECK_THROWS_AS(load_manifest(dir.file("mismatch.tsv")).validate(), ShapeError);
}

TEST_CASE("normalize_cube") {
  HyperCube unit(1, 1, 2);
  unit.values = {0.0f, 1.0f};
  CHECK(normalize_cube(unit) == unit);

  HyperCube c(1, 1, 3);
  c.values = {2.0f, 4.0f, 6.0f};
  CHECK(normalize_cube(c).values == std::vector<float>{0.0f, 0.5f, 1.0f});

  CHECK_THROWS_AS(normalize_cube(HyperCube(2, 2, 2, 3.0f)), DataError);

  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    HyperCube r = testing::random_cube(4, 5, 3, rng, -10.0f, 10.0f);
    HyperCube n = normalize_cube(r);
    auto argmax = [](const std::vector<float>& v) { return std::max_element(v.begin(), v.end()) - v.begin(); };
    CHECK(argmax(n.values) == argmax(r.values));
    CHECK(*std::min_element(n.values.begin(), n.values.end()) >= 0.0f);
    CHECK(*std::max_element(n.values.begin(), n.values.end()) <= 1.0f);
  }
}

TEST_CASE("augment examples") {
  Rng rng(9);
  HyperCube cube = testing::random_cube(12, 10, 3, rng);
  SaliencyMask mask = testing::random_binary_mask(12, 10, rng);
  auto [c1, m1] = augment(cube, mask, {1.0, 1.0, 12, 10, 0});
  CHECK(c1 == cube);
  CHECK(m1 == mask);

  HyperCube flat(6, 6, 4, 0.375f);
  auto [c2, m2] = augment(flat, SaliencyMask(6, 6), {2.0, 2.0, 8, 8, 0});
  CHECK(c2.height == 8);
  CHECK(c2.width == 8);
  for (float v : c2.values) CHECK(v == doctest::Approx(0.375f));

  SaliencyMask sq(16, 16);
  for (int r = 4; r < 12; ++r)
    for (int c = 4; c < 12; ++c) sq.at(r, c) = 1.0;
  auto [c3, m3] = augment(HyperCube(16, 16, 2, 1.0f), sq, {0.5, 0.5, 8, 8, 0});
  SaliencyMask expected(8, 8);
  for (int r = 2; r < 6; ++r)
    for (int c = 2; c < 6; ++c) expected.at(r, c) = 1.0;
  CHECK(m3 == expected);

  CHECK_THROWS_AS(augment(cube, mask, {0.5, 0.5, 12, 10, 0}), ConfigError);
  CHECK_THROWS_AS(augment(cube, mask, {0.0, 1.0, 0, 0, 0}), ConfigError);
}

TEST_CASE("augmented positives map back into the original positive region") {
  Rng rng(10);
  for (int t = 0; t < 30; ++t) {
    const int h = 10 + static_cast<int>(rng() % 12), w = 10 + static_cast<int>(rng() % 12);
    SaliencyMask mask = testing::random_binary_mask(h, w, rng, 0.3);
    AugmentParams p{0.6, 1.8, 1, 1, rng()};
    AugmentPlan plan = plan_augment(h, w, p);
    p.crop_height = std::min(h, plan.scaled_height);
    p.crop_width = std::min(w, plan.scaled_width);
    plan = plan_augment(h, w, p);
    SaliencyMask out = apply_augment(plan, mask);
    CHECK(out.is_binary());
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) {
        if (out.at(y, x) < 0.5) continue;
        const double sy = (y + plan.crop_top + 0.5) * h / plan.scaled_height - 0.5;
        const double sx = (x + plan.crop_left + 0.5) * w / plan.scaled_width - 0.5;
        bool found = false;
        for (int dy = -1; dy <= 1 && !found; ++dy)
          for (int dx = -1; dx <= 1 && !found; ++dx) {
            const int yy = static_cast<int>(std::lround(sy)) + dy, xx = static_cast<int>(std::lround(sx)) + dx;
            if (yy >= 0 && xx >= 0 && yy < h && xx < w && mask.at(yy, xx) > 0.5) found = true;
          }
        CHECK(found);
      }
  }
}
