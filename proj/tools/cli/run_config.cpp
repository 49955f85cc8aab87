#include "run_config.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "dmssn/error.hpp"

namespace dmssn::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end || v.empty()) {
    throw ConfigError(key + ": cannot parse '" + v + "' as a " + (std::is_integral_v<T> ? "integer" : "number"));
  }
  return out;
}

int to_int(const std::string& k, const std::string& v) { return parse_number<int>(k, v); }
double to_double(const std::string& k, const std::string& v) { return parse_number<double>(k, v); }
std::uint64_t to_u64(const std::string& k, const std::string& v) { return parse_number<std::uint64_t>(k, v); }

bool to_bool(const std::string& k, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(k + ": expected true or false, got '" + v + "'");
}

std::vector<int> to_list(const std::string& k, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_int(k, trim(item)));
  if (out.empty()) throw ConfigError(k + ": expected a comma-separated list");
  return out;
}

// Shortest text that parses back to the same double.
std::string num(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

// MSST stages are configured column-wise; each list sets one field per stage.
void set_stage_field(RunConfig& c, const std::string& k, const std::string& v, int MsstStageConfig::*field) {
  const std::vector<int> vals = to_list(k, v);
  auto& stages = c.model.msst.stages;
  if (stages.size() != vals.size()) {
    stages.resize(vals.size(), stages.empty() ? MsstStageConfig{} : stages.back());
  }
  for (std::size_t i = 0; i < vals.size(); ++i) stages[i].*field = vals[i];
}

std::string get_stage_field(const RunConfig& c, int MsstStageConfig::*field) {
  std::vector<int> v;
  for (const auto& s : c.model.msst.stages) v.push_back(s.*field);
  return join(v);
}

#define KEY_INT(name, help, member) \
  {name, help, [](RunConfig& c, const std::string& v) { c.member = to_int(name, v); }, \
   [](const RunConfig& c) { return std::to_string(c.member); }}
#define KEY_DOUBLE(name, help, member) \
  {name, help, [](RunConfig& c, const std::string& v) { c.member = to_double(name, v); }, \
   [](const RunConfig& c) { return num(c.member); }}
#define KEY_STAGES(name, help, field) \
  {name, help, [](RunConfig& c, const std::string& v) { set_stage_field(c, name, v, &MsstStageConfig::field); }, \
   [](const RunConfig& c) { return get_stage_field(c, &MsstStageConfig::field); }}

void apply_profile(RunConfig& c, const std::string& v) {
  TrainConfig t, d;
  if (v == "full") {
    t = TrainConfig::full_teacher();
    d = TrainConfig::full_dmssn();
  } else if (v == "desk") {
    t = TrainConfig::desk_teacher();
    d = TrainConfig::desk_dmssn();
  } else {
    throw ConfigError("train.profile: expected desk or full, got '" + v + "'");
  }
  c.profile = v;
  c.teacher_lr = t.learning_rate, c.teacher_batch = t.batch_size, c.teacher_epochs = t.epochs;
  c.train_lr = d.learning_rate, c.train_batch = d.batch_size, c.train_epochs = d.epochs;
}

}  // namespace

const std::vector<KeyDef>& config_keys() {
  static const std::vector<KeyDef> keys = {
      {"seed", "master seed for scenes, initialization and shuffling",
       [](RunConfig& c, const std::string& v) { c.seed = to_u64("seed", v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      KEY_INT("scene.count", "number of scenes written by synth", scene_count),
      KEY_INT("scene.height", "scene height in pixels", scene.height),
      KEY_INT("scene.width", "scene width in pixels", scene.width),
      KEY_INT("scene.bands", "spectral bands per scene", scene.bands),
      KEY_INT("scene.materials_min", "fewest materials per scene", scene.materials_min),
      KEY_INT("scene.materials_max", "most materials per scene", scene.materials_max),
      KEY_INT("scene.salient_objects_max", "most salient objects per scene", scene.salient_objects_max),
      KEY_INT("scene.distractor_objects_max", "most non-salient objects per scene", scene.distractor_objects_max),
      KEY_DOUBLE("scene.object_size_min", "smallest object extent, fraction of the shorter side", scene.object_size_min),
      KEY_DOUBLE("scene.object_size_max", "largest object extent, fraction of the shorter side", scene.object_size_max),
      KEY_DOUBLE("scene.noise_sigma", "additive Gaussian noise std", scene.noise_sigma),
      KEY_DOUBLE("scene.illumination_gradient", "left-to-right attenuation in [0, 1]", scene.illumination_gradient),
      {"scene.library_seed", "seed of the shared material library",
       [](RunConfig& c, const std::string& v) { c.scene.library_seed = to_u64("scene.library_seed", v); },
       [](const RunConfig& c) { return std::to_string(c.scene.library_seed); }},
      KEY_INT("schedule.c", "input bands C", model.schedule.c),
      KEY_INT("schedule.c1", "first teacher width C1", model.schedule.c1),
      KEY_INT("schedule.c2", "second width C2", model.schedule.c2),
      KEY_INT("schedule.c_prime", "encoded width C'", model.schedule.c_prime),
      KEY_STAGES("msst.blocks", "MSS blocks per stage (list)", blocks),
      KEY_STAGES("msst.channels", "stage widths (list)", channels),
      KEY_STAGES("msst.strides", "patch-embedding strides (list)", stride),
      KEY_STAGES("msst.reductions", "key/value reduction K per stage (list)", reduction),
      KEY_INT("msst.heads", "attention heads per group", model.msst.heads_per_group),
      KEY_INT("msst.ffn_ratio", "feed-forward expansion", model.msst.ffn_ratio),
      KEY_INT("fpn.channels", "fused width of the saliency head", model.fpn.fused_channels),
      {"fpn.mode", "stage fusion: multiple, single_u, single_b or double_ub",
       [](RunConfig& c, const std::string& v) { c.model.fpn.mode = parse_fusion_mode(v); },
       [](const RunConfig& c) { return fusion_mode_name(c.model.fpn.mode); }},
      {"preprocess.homogenize", "replace pixels by their GMM material mean",
       [](RunConfig& c, const std::string& v) { c.preprocess.homogenize = to_bool("preprocess.homogenize", v); },
       [](const RunConfig& c) { return std::string(c.preprocess.homogenize ? "true" : "false"); }},
      KEY_INT("gmm.components", "mixture components M", preprocess.gmm_components),
      KEY_INT("gmm.max_iter", "EM iteration cap", preprocess.gmm.max_iter),
      KEY_DOUBLE("gmm.tol", "EM stop tolerance on mean log-likelihood", preprocess.gmm.tol),
      KEY_DOUBLE("gmm.variance_floor", "smallest per-band variance", preprocess.gmm.variance_floor),
      {"train.profile", "hyperparameter preset: desk, or full (large-dataset schedule; its 0.06 rate is unstable with small batches); explicit keys override it", apply_profile,
       [](const RunConfig& c) { return c.profile; }},
      KEY_DOUBLE("teacher.lr", "teacher learning rate", teacher_lr),
      KEY_INT("teacher.batch_size", "teacher batch size", teacher_batch),
      KEY_INT("teacher.epochs", "teacher epochs", teacher_epochs),
      KEY_DOUBLE("train.lr", "DMSSN learning rate", train_lr),
      KEY_INT("train.batch_size", "DMSSN batch size", train_batch),
      KEY_INT("train.epochs", "DMSSN epochs", train_epochs),
      KEY_DOUBLE("train.weight_decay", "AdamW decoupled weight decay", weight_decay),
      KEY_DOUBLE("train.val_fraction", "share of the manifest held out for validation", val_fraction),
      KEY_DOUBLE("augment.probability", "chance a sample is rescaled and cropped", augment_probability),
      KEY_DOUBLE("augment.scale_min", "smallest rescale factor", scale_min),
      KEY_DOUBLE("augment.scale_max", "largest rescale factor", scale_max),
      KEY_DOUBLE("loss.huber_delta", "Huber transition point", hs.huber_delta),
      KEY_DOUBLE("loss.sam_eps", "spectral-angle norm floor", hs.sam_eps),
      KEY_DOUBLE("loss.bce_eps", "BCE probability clamp", sod.bce_eps),
      KEY_INT("loss.ssim_window", "SSIM window side", sod.ssim_window),
      KEY_INT("metrics.thresholds", "threshold count for avgF1 and AUC", metrics.n_thresholds),
      KEY_DOUBLE("metrics.threshold", "binarization threshold for PRE and REC", metrics.threshold),
      KEY_INT("diagnose.bins", "histogram bins for information entropy", diagnose_bins),
      KEY_INT("diagnose.runs", "timed runs for throughput", diagnose_runs),
  };
  return keys;
}

std::map<std::string, std::string> parse_config_text(const std::string& text, const std::string& origin) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool versioned = false;
  const auto& keys = config_keys();
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(body.substr(0, eq)), value = trim(body.substr(eq + 1));
    if (key == "config_version") {
      if (value != std::to_string(kConfigVersion)) {
        throw ConfigError(where + ": unsupported config_version " + value + " (expected " +
                          std::to_string(kConfigVersion) + ")");
      }
      versioned = true;
      continue;
    }
    const bool known = std::any_of(keys.begin(), keys.end(), [&](const KeyDef& k) { return k.key == key; });
    if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
    if (!out.emplace(key, value).second) throw ConfigError(where + ": '" + key + "' is set twice");
  }
  if (!versioned) throw ConfigError(origin + ": missing 'config_version = " + std::to_string(kConfigVersion) + "'");
  return out;
}

RunConfig build_config(const std::map<std::string, std::string>& settings) {
  RunConfig c;
  if (auto it = settings.find("train.profile"); it != settings.end()) apply_profile(c, it->second);
  for (const auto& k : config_keys()) {
    if (k.key == "train.profile") continue;
    if (auto it = settings.find(k.key); it != settings.end()) k.set(c, it->second);
  }
  for (const auto& [key, _] : settings) {
    const auto& keys = config_keys();
    if (std::none_of(keys.begin(), keys.end(), [&](const KeyDef& k) { return k.key == key; })) {
      throw ConfigError("unknown key '" + key + "'");
    }
  }
  c.model.msst.in_channels = c.model.schedule.c_prime;
  c.validate();
  return c;
}

std::string to_text(const RunConfig& cfg) {
  std::string s = "config_version = " + std::to_string(kConfigVersion) + "\n";
  for (const auto& k : config_keys()) s += k.key + " = " + k.get(cfg) + "\n";
  return s;
}

TrainConfig RunConfig::teacher_config() const {
  TrainConfig t = dmssn_config();
  t.stage = TrainStage::kTeacher;
  t.learning_rate = teacher_lr;
  t.batch_size = teacher_batch;
  t.epochs = teacher_epochs;
  return t;
}

TrainConfig RunConfig::dmssn_config() const {
  TrainConfig t;
  t.stage = TrainStage::kDmssn;
  t.learning_rate = train_lr;
  t.batch_size = train_batch;
  t.epochs = train_epochs;
  t.weight_decay = weight_decay;
  t.seed = seed;
  t.augment_probability = augment_probability;
  t.scale_min = scale_min;
  t.scale_max = scale_max;
  t.val_fraction = val_fraction;
  t.n_thresholds = metrics.n_thresholds;
  t.model = model;
  t.preprocess = preprocess;
  t.preprocess.gmm.seed = seed;
  t.hs = hs;
  t.sod = sod;
  return t;
}

void RunConfig::validate() const {
  if (scene_count < 1) throw ConfigError("scene.count must be >= 1");
  if (scene.height < 1 || scene.width < 1 || scene.bands < 1) throw ConfigError("scene dimensions must be >= 1");
  if (scene.materials_min < 2 || scene.materials_max < scene.materials_min) {
    throw ConfigError("scene.materials_min must be >= 2 and <= scene.materials_max");
  }
  if (diagnose_bins < 2) throw ConfigError("diagnose.bins must be >= 2");
  if (diagnose_runs < 1) throw ConfigError("diagnose.runs must be >= 1");
  if (metrics.threshold < 0 || metrics.threshold > 1) throw ConfigError("metrics.threshold must lie in [0, 1]");
  teacher_config().validate();
  dmssn_config().validate();
}

}  // namespace dmssn::cli
