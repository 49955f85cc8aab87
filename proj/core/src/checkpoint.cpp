#include "dmssn/checkpoint.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "dmssn/error.hpp"

namespace dmssn {
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool safe_name(const std::string& name) {
  if (name.empty()) return false;
  for (char c : name) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-')) return false;
  }
  return name.find("..") == std::string::npos;
}

void write_le_doubles(const Tensor& t, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (double v : t.values()) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
  }
  if (!out) throw IoError("failed writing " + path.string());
}

Tensor read_le_doubles(const fs::path& path, std::vector<int> shape) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  Tensor t(std::move(shape));
  for (double& v : t.values()) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw IoError("truncated array file " + path.string());
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    v = std::bit_cast<double>(bits);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw IoError("array file " + path.string() + " is too long");
  return t;
}

}  // namespace

std::string fnv1a_hex(std::string_view bytes) { return hex(fnv1a(kFnvOffset, bytes.data(), bytes.size())); }

std::string architecture_hash(const nlohmann::json& architecture) { return fnv1a_hex(architecture.dump()); }

std::string Checkpoint::config_hash() const { return architecture_hash(architecture); }

void Checkpoint::require_architecture(const nlohmann::json& arch) const {
  if (architecture_hash(arch) != config_hash()) {
    throw ConfigError("checkpoint architecture " + config_hash() + " does not match the configuration (" +
                      architecture_hash(arch) + "): expected " + architecture.dump() + ", got " + arch.dump());
  }
}

std::string parameter_hash(const NamedParams& params) {
  std::uint64_t h = kFnvOffset;
  for (const auto& [name, p] : params) {
    h = fnv1a(h, name.data(), name.size());
    for (int d : p.shape()) h = fnv1a(h, &d, sizeof d);
    h = fnv1a(h, p.value().data(), p.value().size() * sizeof(double));
  }
  return hex(h);
}

void capture_parameters(const NamedParams& params, Checkpoint& ckpt) {
  for (const auto& [name, p] : params) {
    if (!p.value().all_finite()) throw TrainingError("parameter " + name + " is not finite");
    ckpt.arrays[name] = p.value();
  }
}

void restore_parameters(const Checkpoint& ckpt, const NamedParams& params) {
  for (const auto& [name, p] : params) {
    auto it = ckpt.arrays.find(name);
    if (it == ckpt.arrays.end()) throw ConfigError("checkpoint has no array named " + name);
    if (it->second.shape() != p.shape()) {
      throw ShapeError("checkpoint array " + name + " has shape " + shape_string(it->second.shape()) + ", model expects " +
                       shape_string(p.shape()));
    }
    Var v = p;
    v.mutable_value() = it->second;
  }
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& dir, bool overwrite) {
  if (fs::exists(dir)) {
    if (!overwrite) throw IoError("checkpoint directory " + dir.string() + " exists (pass --force to overwrite)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir / "arrays");
  nlohmann::ordered_json m;
  m["format_version"] = kCheckpointFormatVersion;
  m["stage"] = ckpt.stage;
  m["epoch"] = ckpt.epoch;
  m["seed"] = ckpt.seed;
  m["config_hash"] = ckpt.config_hash();
  m["loss_history_tail"] = ckpt.loss_history;
  m["architecture"] = ckpt.architecture;
  m["hyperparameters"] = ckpt.hyperparameters;
  m["extra"] = ckpt.extra;
  auto arrays = nlohmann::ordered_json::array();
  for (const auto& [name, t] : ckpt.arrays) {
    if (!safe_name(name)) throw IoError("unsafe array name '" + name + "'");
    if (!t.all_finite()) throw TrainingError("array " + name + " is not finite");
    const std::string file = "arrays/" + name + ".bin";
    write_le_doubles(t, dir / file);
    arrays.push_back({{"name", name}, {"shape", t.shape()}, {"dtype", "<f8"}, {"file", file}});
  }
  m["arrays"] = arrays;
  std::ofstream out(dir / "manifest.json");
  out << m.dump(2) << "\n";
  if (!out) throw IoError("failed writing " + (dir / "manifest.json").string());
}

Checkpoint load_checkpoint(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("no checkpoint manifest at " + (dir / "manifest.json").string());
  Checkpoint c;
  try {
    const auto m = nlohmann::json::parse(in);
    if (m.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw IoError("unsupported checkpoint format version " + m.at("format_version").dump());
    }
    c.stage = m.at("stage").get<std::string>();
    c.epoch = m.at("epoch").get<int>();
    c.seed = m.at("seed").get<std::uint64_t>();
    c.loss_history = m.at("loss_history_tail").get<std::vector<double>>();
    c.architecture = m.at("architecture");
    c.hyperparameters = m.at("hyperparameters");
    c.extra = m.value("extra", nlohmann::json::object());
    if (m.at("config_hash").get<std::string>() != c.config_hash()) {
      throw IoError("checkpoint manifest config_hash does not match its architecture section");
    }
    for (const auto& a : m.at("arrays")) {
      const auto name = a.at("name").get<std::string>();
      if (!safe_name(name)) throw IoError("unsafe array name '" + name + "'");
      if (a.at("dtype").get<std::string>() != "<f8") throw IoError("array " + name + " has unsupported dtype");
      const std::string file = "arrays/" + name + ".bin";
      if (a.at("file").get<std::string>() != file) throw IoError("array " + name + " points outside arrays/");
      c.arrays[name] = read_le_doubles(dir / file, a.at("shape").get<std::vector<int>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint manifest: " + std::string(e.what()));
  }
  return c;
}

}  // namespace dmssn
