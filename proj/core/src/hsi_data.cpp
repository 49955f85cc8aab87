#include "dmssn/hsi_data.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "dmssn/ops.hpp"

namespace dmssn {
namespace fs = std::filesystem;

HyperCube::HyperCube(int h, int w, int c, float fill)
    : height(h), width(w), bands(c), values(static_cast<std::size_t>(h) * w * c, fill) {}

void HyperCube::validate() const {
  if (height < 1 || width < 1 || bands < 2) {
    throw ShapeError("hypercube must be at least 1x1x2, got " + std::to_string(height) + "x" +
                     std::to_string(width) + "x" + std::to_string(bands));
  }
  if (values.size() != pixels() * static_cast<std::size_t>(bands)) {
    throw ShapeError("hypercube value count does not match its dimensions");
  }
  if (!band_centers.empty() && band_centers.size() != static_cast<std::size_t>(bands)) {
    throw ShapeError("hypercube band_centers has the wrong length");
  }
  for (float v : values) {
    if (!std::isfinite(v)) throw DataError("hypercube contains a non-finite value");
  }
}

SaliencyMask::SaliencyMask(int h, int w, double fill)
    : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

bool SaliencyMask::is_binary() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

std::size_t SaliencyMask::count_positive() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](double v) { return v >= 0.5; }));
}

Tensor to_tensor(const HyperCube& cube) {
  Tensor t = Tensor::map(cube.height, cube.width, cube.bands);
  std::copy(cube.values.begin(), cube.values.end(), t.data());
  return t;
}

HyperCube cube_from_tensor(const Tensor& t) {
  require_map(t, "cube_from_tensor");
  HyperCube cube(t.height(), t.width(), t.channels());
  for (std::size_t i = 0; i < t.size(); ++i) cube.values[i] = static_cast<float>(t[i]);
  return cube;
}

Tensor to_tensor(const SaliencyMask& mask) { return Tensor({mask.height, mask.width, 1}, mask.values); }

SaliencyMask mask_from_tensor(const Tensor& t) {
  require_map(t, "mask_from_tensor");
  if (t.channels() != 1) throw ShapeError("mask_from_tensor: expected a single channel");
  SaliencyMask m(t.height(), t.width());
  std::copy(t.data(), t.data() + t.size(), m.values.begin());
  return m;
}

// ---------------------------------------------------------------------------

bool SceneSpec::is_salient(int material) const {
  return std::find(salient_materials.begin(), salient_materials.end(), material) != salient_materials.end();
}

namespace {

std::string describe(const SceneObject& o, std::size_t index) {
  std::ostringstream os;
  os << "object " << index << " (" << (o.kind == ShapeKind::kRectangle ? "rectangle" : "ellipse")
     << " centred at row " << o.center_row << ", col " << o.center_col << ", size " << o.size_rows << "x"
     << o.size_cols << ")";
  return os.str();
}

}  // namespace

void SceneSpec::validate() const {
  if (height < 1 || width < 1 || bands < 2) throw ConfigError("scene must be at least 1x1x2");
  if (material_curves.empty()) throw ConfigError("scene needs at least one material");
  for (const auto& curve : material_curves) {
    if (curve.size() != static_cast<std::size_t>(bands)) {
      throw ConfigError("material curve length differs from band count");
    }
    for (double v : curve) {
      if (!std::isfinite(v)) throw ConfigError("material curve contains a non-finite value");
    }
  }
  for (std::size_t a = 0; a < material_curves.size(); ++a) {
    for (std::size_t b = a + 1; b < material_curves.size(); ++b) {
      double d2 = 0.0;
      for (int i = 0; i < bands; ++i) {
        const double d = material_curves[a][static_cast<std::size_t>(i)] - material_curves[b][static_cast<std::size_t>(i)];
        d2 += d * d;
      }
      if (d2 <= 0.0) {
        throw ConfigError("materials " + std::to_string(a) + " and " + std::to_string(b) + " have identical curves");
      }
    }
  }
  const int n = n_materials();
  if (background_material < 0 || background_material >= n) throw ConfigError("background material out of range");
  if (salient_materials.empty()) throw ConfigError("scene must designate a salient material set");
  for (int m : salient_materials) {
    if (m < 0 || m >= n) throw ConfigError("salient material index out of range");
    if (m == background_material) throw ConfigError("the background material cannot be salient");
  }
  if (noise_sigma < 0 || !std::isfinite(noise_sigma)) throw ConfigError("noise_sigma must be >= 0");
  if (illumination_gradient < 0 || illumination_gradient > 1) {
    throw ConfigError("illumination_gradient must lie in [0, 1]");
  }
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const SceneObject& o = objects[i];
    if (o.material < 0 || o.material >= n) throw ConfigError(describe(o, i) + " uses an unknown material");
    if (o.size_rows <= 0 || o.size_cols <= 0) throw ConfigError(describe(o, i) + " has a non-positive size");
    const double top = o.center_row - o.size_rows / 2, bottom = o.center_row + o.size_rows / 2;
    const double left = o.center_col - o.size_cols / 2, right = o.center_col + o.size_cols / 2;
    if (top < 0 || left < 0 || bottom > height || right > width) {
      throw ConfigError(describe(o, i) + " exceeds the " + std::to_string(height) + "x" + std::to_string(width) +
                        " image bounds");
    }
  }
}

bool shape_contains(const SceneObject& o, int row, int col) {
  const double dy = row + 0.5 - o.center_row;
  const double dx = col + 0.5 - o.center_col;
  const double ry = o.size_rows / 2, rx = o.size_cols / 2;
  if (o.kind == ShapeKind::kRectangle) return std::abs(dy) <= ry && std::abs(dx) <= rx;
  return (dy / ry) * (dy / ry) + (dx / rx) * (dx / rx) <= 1.0;
}

std::pair<HyperCube, SaliencyMask> generate_synthetic_scene(const SceneSpec& spec) {
  spec.validate();
  const int h = spec.height, w = spec.width, c = spec.bands;
  std::vector<int> material(static_cast<std::size_t>(h) * w, spec.background_material);
  for (const SceneObject& o : spec.objects) {
    for (int r = 0; r < h; ++r) {
      for (int col = 0; col < w; ++col) {
        if (shape_contains(o, r, col)) material[static_cast<std::size_t>(r) * w + col] = o.material;
      }
    }
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  HyperCube cube(h, w, c);
  SaliencyMask mask(h, w);
  for (int r = 0; r < h; ++r) {
    for (int col = 0; col < w; ++col) {
      const int m = material[static_cast<std::size_t>(r) * w + col];
      const double illum = w > 1 ? 1.0 - spec.illumination_gradient * col / (w - 1) : 1.0;
      const auto& curve = spec.material_curves[static_cast<std::size_t>(m)];
      for (int b = 0; b < c; ++b) {
        double v = curve[static_cast<std::size_t>(b)] * illum;
        if (spec.noise_sigma > 0) v += spec.noise_sigma * noise(rng);
        cube.at(r, col, b) = static_cast<float>(std::max(v, 0.0));
      }
      mask.at(r, col) = spec.is_salient(m) ? 1.0 : 0.0;
    }
  }
  cube.band_centers.resize(static_cast<std::size_t>(c));
  for (int b = 0; b < c; ++b) cube.band_centers[static_cast<std::size_t>(b)] = 400.0 + 600.0 * b / std::max(1, c - 1);
  return {std::move(cube), std::move(mask)};
}

std::vector<std::vector<double>> material_library(int count, int bands, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> base(0.15, 0.6), amp(-0.25, 0.35), centre(0.0, 1.0), width(0.08, 0.3);
  // Distinct curves: RMS difference of at least 0.05 between any two.
  const double min_dist2 = 0.05 * 0.05 * bands;
  std::vector<std::vector<double>> lib;
  int attempts = 0;
  while (static_cast<int>(lib.size()) < count) {
    if (++attempts > 10000) throw ConfigError("could not draw distinct material curves");
    std::vector<double> curve(static_cast<std::size_t>(bands), base(rng));
    for (int bump = 0; bump < 3; ++bump) {
      const double a = amp(rng), mu = centre(rng), s = width(rng);
      for (int b = 0; b < bands; ++b) {
        const double t = bands > 1 ? static_cast<double>(b) / (bands - 1) : 0.0;
        curve[static_cast<std::size_t>(b)] += a * std::exp(-(t - mu) * (t - mu) / (2 * s * s));
      }
    }
    for (double& v : curve) v = std::clamp(v, 0.02, 0.98);
    bool distinct = true;
    for (const auto& other : lib) {
      double d2 = 0.0;
      for (int b = 0; b < bands; ++b) {
        const double d = curve[static_cast<std::size_t>(b)] - other[static_cast<std::size_t>(b)];
        d2 += d * d;
      }
      distinct = distinct && d2 >= min_dist2;
    }
    if (distinct) lib.push_back(std::move(curve));
  }
  return lib;
}

SceneSpec random_scene_spec(const SceneRecipe& recipe, std::uint64_t seed) {
  if (recipe.materials_min < 2 || recipe.materials_max < recipe.materials_min) {
    throw ConfigError("scene recipe needs 2 <= materials_min <= materials_max");
  }
  if (recipe.salient_objects_max < 1) throw ConfigError("scene recipe needs at least one salient object");
  if (recipe.object_size_min <= 0 || recipe.object_size_max > 1 || recipe.object_size_min > recipe.object_size_max) {
    throw ConfigError("scene recipe object sizes must satisfy 0 < min <= max <= 1");
  }
  const auto library = material_library(recipe.materials_max, recipe.bands, recipe.library_seed);
  std::mt19937_64 rng(seed);
  auto uniform_int = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  SceneSpec spec;
  spec.height = recipe.height;
  spec.width = recipe.width;
  spec.bands = recipe.bands;
  spec.noise_sigma = recipe.noise_sigma;
  spec.illumination_gradient = recipe.illumination_gradient;
  spec.seed = seed ^ 0x9e3779b97f4a7c15ULL;

  const int n = uniform_int(recipe.materials_min, recipe.materials_max);
  std::vector<int> others(static_cast<std::size_t>(recipe.materials_max - 1));
  for (std::size_t i = 0; i < others.size(); ++i) others[i] = static_cast<int>(i) + 1;
  std::shuffle(others.begin(), others.end(), rng);
  spec.material_curves.push_back(library[0]);
  for (int i = 0; i < n - 1; ++i) spec.material_curves.push_back(library[static_cast<std::size_t>(others[static_cast<std::size_t>(i)])]);
  spec.salient_materials = {0};
  spec.background_material = 1;

  const double side = std::min(recipe.height, recipe.width);
  auto place = [&](int material) {
    SceneObject o;
    o.kind = uniform_int(0, 1) == 0 ? ShapeKind::kRectangle : ShapeKind::kEllipse;
    o.size_rows = std::round(uniform(recipe.object_size_min, recipe.object_size_max) * side);
    o.size_cols = std::round(uniform(recipe.object_size_min, recipe.object_size_max) * side);
    o.size_rows = std::clamp(o.size_rows, 1.0, static_cast<double>(recipe.height));
    o.size_cols = std::clamp(o.size_cols, 1.0, static_cast<double>(recipe.width));
    o.center_row = uniform(o.size_rows / 2, recipe.height - o.size_rows / 2);
    o.center_col = uniform(o.size_cols / 2, recipe.width - o.size_cols / 2);
    o.material = material;
    spec.objects.push_back(o);
  };
  if (n > 2) {
    const int distractors = uniform_int(0, recipe.distractor_objects_max);
    for (int i = 0; i < distractors; ++i) place(uniform_int(2, n - 1));
  }
  const int salient = uniform_int(1, recipe.salient_objects_max);
  for (int i = 0; i < salient; ++i) place(0);
  return spec;
}

// ---------------------------------------------------------------------------

fs::path payload_path_for(const fs::path& header) {
  fs::path p = header;
  p.replace_extension(".raw");
  return p;
}

namespace {

void write_le_float(std::ostream& os, float v) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  const unsigned char bytes[4] = {static_cast<unsigned char>(bits & 0xffu), static_cast<unsigned char>((bits >> 8) & 0xffu),
                                  static_cast<unsigned char>((bits >> 16) & 0xffu),
                                  static_cast<unsigned char>((bits >> 24) & 0xffu)};
  os.write(reinterpret_cast<const char*>(bytes), 4);
}

float read_le_float(const unsigned char* b) {
  const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                             (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return std::bit_cast<float>(bits);
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return s;
}

// ENVI header: `key = value`, values in braces may span lines.
std::map<std::string, std::string> parse_envi_header(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open cube header " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "ENVI") {
    throw CubeFormatError(CubeFormatError::Kind::kMissingField, path.string() + " does not start with 'ENVI'");
  }
  std::map<std::string, std::string> fields;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = lower(trim(line.substr(0, eq)));
    std::string value = trim(line.substr(eq + 1));
    if (!value.empty() && value.front() == '{') {
      while (value.find('}') == std::string::npos) {
        std::string more;
        if (!std::getline(in, more)) {
          throw CubeFormatError(CubeFormatError::Kind::kMissingField, "unterminated '{' for key '" + key + "'");
        }
        value += " " + trim(more);
      }
      value = trim(value.substr(1, value.find('}') - 1));
    }
    fields[key] = value;
  }
  return fields;
}

long parse_long(const std::map<std::string, std::string>& f, const std::string& key, const fs::path& path) {
  const auto it = f.find(key);
  if (it == f.end()) {
    throw CubeFormatError(CubeFormatError::Kind::kMissingField, path.string() + " has no '" + key + "' field");
  }
  try {
    std::size_t used = 0;
    const long v = std::stol(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw CubeFormatError(CubeFormatError::Kind::kMissingField, path.string() + ": '" + key + "' is not an integer");
  }
}

}  // namespace

void save_cube(const HyperCube& cube, const fs::path& header) {
  cube.validate();
  {
    std::ofstream hdr(header);
    if (!hdr) throw IoError("cannot write cube header " + header.string());
    hdr << "ENVI\n"
        << "description = {dmssn hyperspectral cube}\n"
        << "samples = " << cube.width << "\n"
        << "lines = " << cube.height << "\n"
        << "bands = " << cube.bands << "\n"
        << "header offset = 0\n"
        << "file type = ENVI Standard\n"
        << "data type = 4\n"
        << "interleave = bsq\n"
        << "byte order = 0\n";
    if (!cube.band_centers.empty()) {
      hdr << "wavelength units = nm\nwavelength = {";
      hdr.precision(17);
      for (std::size_t i = 0; i < cube.band_centers.size(); ++i) hdr << (i ? ", " : "") << cube.band_centers[i];
      hdr << "}\n";
    }
    if (!hdr) throw IoError("failed writing " + header.string());
  }
  std::ofstream raw(payload_path_for(header), std::ios::binary);
  if (!raw) throw IoError("cannot write cube payload " + payload_path_for(header).string());
  for (int b = 0; b < cube.bands; ++b) {
    for (int y = 0; y < cube.height; ++y) {
      for (int x = 0; x < cube.width; ++x) write_le_float(raw, cube.at(y, x, b));
    }
  }
  if (!raw) throw IoError("failed writing " + payload_path_for(header).string());
}

HyperCube load_cube(const fs::path& header) {
  using Kind = CubeFormatError::Kind;
  const auto f = parse_envi_header(header);
  const long width = parse_long(f, "samples", header);
  const long height = parse_long(f, "lines", header);
  const long bands = parse_long(f, "bands", header);
  if (width < 1 || height < 1 || bands < 2) {
    throw CubeFormatError(Kind::kDimensionMismatch, header.string() + ": invalid dimensions " + std::to_string(height) +
                                                         "x" + std::to_string(width) + "x" + std::to_string(bands));
  }
  const long dtype = parse_long(f, "data type", header);
  if (dtype != 4) {
    throw CubeFormatError(Kind::kUnknownDataType,
                          header.string() + ": data type " + std::to_string(dtype) + " unsupported (need 4, float32)");
  }
  const auto il = f.find("interleave");
  if (il == f.end() || lower(il->second) != "bsq") {
    throw CubeFormatError(Kind::kInterleaveMismatch,
                          header.string() + ": interleave '" + (il == f.end() ? std::string() : il->second) +
                              "' unsupported (need bsq)");
  }
  if (f.count("byte order") && parse_long(f, "byte order", header) != 0) {
    throw CubeFormatError(Kind::kByteOrder, header.string() + ": only little-endian (byte order = 0) is supported");
  }
  const long offset = f.count("header offset") ? parse_long(f, "header offset", header) : 0;

  HyperCube cube(static_cast<int>(height), static_cast<int>(width), static_cast<int>(bands));
  if (const auto wl = f.find("wavelength"); wl != f.end()) {
    std::stringstream ss(wl->second);
    std::string item;
    while (std::getline(ss, item, ',')) cube.band_centers.push_back(std::stod(trim(item)));
    if (cube.band_centers.size() != static_cast<std::size_t>(bands)) {
      throw CubeFormatError(Kind::kDimensionMismatch, header.string() + ": wavelength list length differs from bands");
    }
  }

  const fs::path payload = payload_path_for(header);
  std::ifstream raw(payload, std::ios::binary);
  if (!raw) throw IoError("cannot open cube payload " + payload.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(raw)), std::istreambuf_iterator<char>());
  const std::size_t expected = cube.values.size() * 4 + static_cast<std::size_t>(offset);
  if (bytes.size() < expected) {
    throw CubeFormatError(Kind::kTruncatedPayload, payload.string() + ": payload has " + std::to_string(bytes.size()) +
                                                       " bytes, header implies " + std::to_string(expected));
  }
  if (bytes.size() > expected) {
    throw CubeFormatError(Kind::kDimensionMismatch, payload.string() + ": payload has " + std::to_string(bytes.size()) +
                                                        " bytes, header implies " + std::to_string(expected));
  }
  const unsigned char* p = bytes.data() + offset;
  for (int b = 0; b < cube.bands; ++b) {
    for (int y = 0; y < cube.height; ++y) {
      for (int x = 0; x < cube.width; ++x, p += 4) cube.at(y, x, b) = read_le_float(p);
    }
  }
  return cube;
}

void save_mask(const SaliencyMask& mask, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write mask " + path.string());
  out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  std::vector<unsigned char> bytes(mask.values.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(mask.values[i], 0.0, 1.0) * 255.0));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

SaliencyMask load_mask(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open mask " + path.string());
  auto token = [&in, &path]() {
    std::string t;
    while (in) {
      const int ch = in.get();
      if (ch == '#') {
        std::string skip;
        std::getline(in, skip);
      } else if (std::isspace(ch)) {
        if (!t.empty()) return t;
      } else if (ch == EOF) {
        break;
      } else {
        t.push_back(static_cast<char>(ch));
      }
    }
    if (t.empty()) throw IoError(path.string() + ": truncated PGM header");
    return t;
  };
  if (token() != "P5") throw IoError(path.string() + ": not a binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::invalid_argument&) {
    throw IoError(path.string() + ": malformed PGM header");
  }
  if (w < 1 || h < 1 || maxval < 1 || maxval > 255) throw IoError(path.string() + ": unsupported PGM geometry/maxval");
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw IoError(path.string() + ": truncated PGM data");
  SaliencyMask mask(h, w);
  for (std::size_t i = 0; i < bytes.size(); ++i) mask.values[i] = static_cast<double>(bytes[i]) / maxval;
  return mask;
}

namespace {

// Reads only the geometry of a cube header / PGM, for manifest validation.
std::pair<int, int> header_dims(const fs::path& header) {
  const auto f = parse_envi_header(header);
  return {static_cast<int>(parse_long(f, "lines", header)), static_cast<int>(parse_long(f, "samples", header))};
}

}  // namespace

void DatasetManifest::validate() const {
  if (entries.empty()) throw DataError("dataset manifest is empty");
  for (const auto& e : entries) {
    if (!fs::exists(e.cube)) throw IoError("manifest references missing cube " + e.cube.string());
    if (!fs::exists(payload_path_for(e.cube))) {
      throw IoError("manifest cube " + e.cube.string() + " has no payload " + payload_path_for(e.cube).string());
    }
    if (!fs::exists(e.mask)) throw IoError("manifest references missing mask " + e.mask.string());
    const auto [h, w] = header_dims(e.cube);
    const SaliencyMask m = load_mask(e.mask);
    if (m.height != h || m.width != w) {
      throw ShapeError("manifest pair " + e.cube.string() + " / " + e.mask.string() + " differ in size");
    }
  }
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  DatasetManifest m;
  const fs::path base = path.parent_path();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      const auto eq = t.find('=');
      if (eq != std::string::npos && trim(t.substr(1, eq - 1)) == "split") m.split = trim(t.substr(eq + 1));
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected cube_path<TAB>mask_path");
    }
    fs::path cube = trim(line.substr(0, tab));
    fs::path mask = trim(line.substr(tab + 1));
    if (cube.is_relative()) cube = base / cube;
    if (mask.is_relative()) mask = base / mask;
    m.entries.push_back({cube, mask});
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << "# split = " << manifest.split << "\n";
  const fs::path base = path.parent_path();
  for (const auto& e : manifest.entries) {
    out << fs::relative(e.cube, base.empty() ? fs::path(".") : base).generic_string() << '\t'
        << fs::relative(e.mask, base.empty() ? fs::path(".") : base).generic_string() << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------

HyperCube normalize_cube(const HyperCube& cube) {
  if (cube.values.empty()) throw DataError("cannot normalize an empty cube");
  const auto [lo, hi] = std::minmax_element(cube.values.begin(), cube.values.end());
  const double mn = *lo, mx = *hi;
  if (!(mx > mn)) throw DataError("cannot normalize a constant cube (min == max)");
  HyperCube out = cube;
  const double range = mx - mn;
  for (float& v : out.values) v = static_cast<float>(std::clamp((v - mn) / range, 0.0, 1.0));
  return out;
}

AugmentPlan plan_augment(int height, int width, const AugmentParams& params) {
  if (params.scale_min <= 0 || params.scale_max < params.scale_min) {
    throw ConfigError("augment scale range must satisfy 0 < min <= max");
  }
  double s = params.scale_min;
  if (params.scale_max > params.scale_min) {
    std::mt19937_64 rng(params.seed);
    s = std::uniform_real_distribution<double>(params.scale_min, params.scale_max)(rng);
  }
  AugmentPlan plan;
  plan.in_height = height;
  plan.in_width = width;
  plan.scaled_height = std::max(1, static_cast<int>(std::lround(height * s)));
  plan.scaled_width = std::max(1, static_cast<int>(std::lround(width * s)));
  plan.crop_height = params.crop_height > 0 ? params.crop_height : height;
  plan.crop_width = params.crop_width > 0 ? params.crop_width : width;
  if (plan.crop_height > plan.scaled_height || plan.crop_width > plan.scaled_width) {
    throw ConfigError("crop " + std::to_string(plan.crop_height) + "x" + std::to_string(plan.crop_width) +
                      " is larger than the scaled image " + std::to_string(plan.scaled_height) + "x" +
                      std::to_string(plan.scaled_width));
  }
  plan.crop_top = (plan.scaled_height - plan.crop_height) / 2;
  plan.crop_left = (plan.scaled_width - plan.crop_width) / 2;
  return plan;
}

HyperCube apply_augment(const AugmentPlan& plan, const HyperCube& cube) {
  if (cube.height != plan.in_height || cube.width != plan.in_width) throw ShapeError("augment plan/cube size mismatch");
  const Tensor scaled = ops::resize_bilinear(to_tensor(cube), plan.scaled_height, plan.scaled_width);
  HyperCube out(plan.crop_height, plan.crop_width, cube.bands);
  out.band_centers = cube.band_centers;
  for (int y = 0; y < plan.crop_height; ++y) {
    for (int x = 0; x < plan.crop_width; ++x) {
      for (int b = 0; b < cube.bands; ++b) {
        out.at(y, x, b) = static_cast<float>(scaled.at(y + plan.crop_top, x + plan.crop_left, b));
      }
    }
  }
  return out;
}

SaliencyMask apply_augment(const AugmentPlan& plan, const SaliencyMask& mask) {
  if (mask.height != plan.in_height || mask.width != plan.in_width) throw ShapeError("augment plan/mask size mismatch");
  SaliencyMask out(plan.crop_height, plan.crop_width);
  for (int y = 0; y < plan.crop_height; ++y) {
    const int sy = y + plan.crop_top;
    const int src_y = std::min(mask.height - 1, static_cast<int>((sy + 0.5) * mask.height / plan.scaled_height));
    for (int x = 0; x < plan.crop_width; ++x) {
      const int sx = x + plan.crop_left;
      const int src_x = std::min(mask.width - 1, static_cast<int>((sx + 0.5) * mask.width / plan.scaled_width));
      out.at(y, x) = mask.at(src_y, src_x) >= 0.5 ? 1.0 : 0.0;
    }
  }
  return out;
}

std::pair<HyperCube, SaliencyMask> augment(const HyperCube& cube, const SaliencyMask& mask,
                                           const AugmentParams& params) {
  if (cube.height != mask.height || cube.width != mask.width) throw ShapeError("augment: cube and mask differ in size");
  const AugmentPlan plan = plan_augment(cube.height, cube.width, params);
  return {apply_augment(plan, cube), apply_augment(plan, mask)};
}

}  // namespace dmssn
