#include "dmssn/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "dmssn/error.hpp"
#include "dmssn/optimizer.hpp"

namespace dmssn {
namespace {

using json = nlohmann::json;

constexpr std::size_t kLossTail = 20;

json schedule_json(const ChannelSchedule& s) { return {{"c", s.c}, {"c1", s.c1}, {"c2", s.c2}, {"c_prime", s.c_prime}}; }

ChannelSchedule schedule_from(const json& j) {
  return {j.at("c").get<int>(), j.at("c1").get<int>(), j.at("c2").get<int>(), j.at("c_prime").get<int>()};
}

std::vector<double> tail(const std::vector<double>& v) {
  const std::size_t n = std::min(v.size(), kLossTail);
  return {v.end() - static_cast<std::ptrdiff_t>(n), v.end()};
}

void emit(const TrainConfig& cfg, const json& j) {
  if (cfg.log) cfg.log(j.dump());
}

// Edge-replicating pad of an H x W x C map to out_h x out_w.
Tensor pad_edge(const Tensor& x, int out_h, int out_w) {
  if (out_h == x.height() && out_w == x.width()) return x;
  Tensor y = Tensor::map(out_h, out_w, x.channels());
  for (int r = 0; r < out_h; ++r) {
    const int sr = std::min(r, x.height() - 1);
    for (int c = 0; c < out_w; ++c) {
      const int sc = std::min(c, x.width() - 1);
      std::copy_n(&x.at(sr, sc, 0), x.channels(), &y.at(r, c, 0));
    }
  }
  return y;
}

struct Augmented {
  Tensor raw;
  Tensor g;
  Tensor mask;
};

Augmented draw_sample(const Sample& s, const TrainConfig& cfg, std::mt19937_64& rng) {
  const bool apply = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < cfg.augment_probability;
  const std::uint64_t seed = rng();
  if (!apply || cfg.scale_max <= 1.0) {
    return {to_tensor(s.raw), to_tensor(s.homogenized), to_tensor(s.mask)};
  }
  AugmentParams p;
  p.scale_min = cfg.scale_min;
  p.scale_max = cfg.scale_max;
  p.seed = seed;
  const AugmentPlan plan = plan_augment(s.raw.height, s.raw.width, p);
  return {to_tensor(apply_augment(plan, s.raw)), to_tensor(apply_augment(plan, s.homogenized)),
          to_tensor(apply_augment(plan, s.mask))};
}

void check_finite_loss(double loss, int step, int batch_index, const std::string& id) {
  if (!std::isfinite(loss)) {
    throw TrainingError("non-finite loss at step " + std::to_string(step) + ", batch index " +
                        std::to_string(batch_index) + " (" + id + ")");
  }
}

void check_finite_grads(const NamedParams& params, int step) {
  for (const auto& [name, p] : params) {
    if (!p.grad().empty() && !p.grad().all_finite()) {
      throw TrainingError("non-finite gradient for " + name + " at step " + std::to_string(step));
    }
  }
}

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

int steps_per_epoch(std::size_t n, int batch) { return static_cast<int>((n + static_cast<std::size_t>(batch) - 1) / batch); }

void require_teacher_compatible(const ChannelSchedule& teacher, const ChannelSchedule& student) {
  if (teacher.c != student.c) {
    throw ConfigError("teacher expects " + std::to_string(teacher.c) + " bands but the configuration has " +
                      std::to_string(student.c));
  }
  if (teacher.c2 != student.c2) {
    throw ConfigError("distillation pair (E_T^2, E_S^1) mismatch: teacher C2 = " + std::to_string(teacher.c2) +
                      ", student C2 = " + std::to_string(student.c2));
  }
  if (teacher.c_prime != student.c_prime) {
    throw ConfigError("distillation pair (E_T, E_S) mismatch: teacher C' = " + std::to_string(teacher.c_prime) +
                      ", student C' = " + std::to_string(student.c_prime));
  }
}

}  // namespace

std::string stage_name(TrainStage stage) { return stage == TrainStage::kTeacher ? "teacher" : "dmssn"; }

TrainStage parse_stage(const std::string& name) {
  if (name == "teacher") return TrainStage::kTeacher;
  if (name == "dmssn") return TrainStage::kDmssn;
  throw ConfigError("unknown training stage '" + name + "' (expected teacher or dmssn)");
}

void PreprocessConfig::validate() const {
  if (gmm_components < 1) throw ConfigError("gmm.components must be >= 1");
  if (gmm.max_iter < 1) throw ConfigError("gmm.max_iter must be >= 1");
  if (!(gmm.variance_floor > 0)) throw ConfigError("gmm.variance_floor must be > 0");
}

json PreprocessConfig::to_json() const {
  return {{"homogenize", homogenize},
          {"gmm_components", gmm_components},
          {"gmm_max_iter", gmm.max_iter},
          {"gmm_tol", gmm.tol},
          {"gmm_variance_floor", gmm.variance_floor},
          {"gmm_seed", gmm.seed},
          {"gmm_max_samples", gmm.max_samples}};
}

PreprocessConfig PreprocessConfig::from_json(const json& j) {
  PreprocessConfig p;
  p.homogenize = j.at("homogenize").get<bool>();
  p.gmm_components = j.at("gmm_components").get<int>();
  p.gmm.max_iter = j.at("gmm_max_iter").get<int>();
  p.gmm.tol = j.at("gmm_tol").get<double>();
  p.gmm.variance_floor = j.at("gmm_variance_floor").get<double>();
  p.gmm.seed = j.at("gmm_seed").get<std::uint64_t>();
  p.gmm.max_samples = j.at("gmm_max_samples").get<std::size_t>();
  return p;
}

void ModelConfig::validate() const {
  schedule.validate();
  msst.validate();
  fpn.validate();
  if (msst.in_channels != schedule.c_prime) {
    throw ConfigError("msst input width " + std::to_string(msst.in_channels) + " must equal C' = " +
                      std::to_string(schedule.c_prime));
  }
}

json ModelConfig::to_json() const {
  json stages = json::array();
  for (const auto& s : msst.stages) {
    stages.push_back({{"blocks", s.blocks}, {"channels", s.channels}, {"stride", s.stride}, {"reduction", s.reduction}});
  }
  return {{"schedule", schedule_json(schedule)},
          {"msst",
           {{"in_channels", msst.in_channels},
            {"heads_per_group", msst.heads_per_group},
            {"ffn_ratio", msst.ffn_ratio},
            {"stages", stages}}},
          {"fpn", {{"fused_channels", fpn.fused_channels}, {"mode", fusion_mode_name(fpn.mode)}}}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig m;
  m.schedule = schedule_from(j.at("schedule"));
  const json& ms = j.at("msst");
  m.msst.in_channels = ms.at("in_channels").get<int>();
  m.msst.heads_per_group = ms.at("heads_per_group").get<int>();
  m.msst.ffn_ratio = ms.at("ffn_ratio").get<int>();
  m.msst.stages.clear();
  for (const auto& s : ms.at("stages")) {
    m.msst.stages.push_back({s.at("blocks").get<int>(), s.at("channels").get<int>(), s.at("stride").get<int>(),
                             s.at("reduction").get<int>()});
  }
  m.fpn.fused_channels = j.at("fpn").at("fused_channels").get<int>();
  m.fpn.mode = parse_fusion_mode(j.at("fpn").at("mode").get<std::string>());
  m.validate();
  return m;
}

namespace {
std::vector<int> stage_widths(const MsstConfig& m) {
  std::vector<int> w;
  for (const auto& s : m.stages) w.push_back(s.channels);
  return w;
}
}  // namespace

DmssnModel::DmssnModel(const ModelConfig& cfg, std::uint64_t seed)
    : student((cfg.validate(), cfg.schedule), seed),
      msst(cfg.msst, seed + 1),
      head(stage_widths(cfg.msst), cfg.fpn, seed + 2),
      cfg_(cfg) {}

DmssnModel::Output DmssnModel::forward(const Var& g) const {
  Output out;
  out.student = student.forward(g);
  out.pyramid = msst.forward(out.student.e);
  out.saliency = head.forward(out.pyramid, g.value().height(), g.value().width());
  return out;
}

NamedParams DmssnModel::parameters() const {
  NamedParams p = student.parameters();
  for (auto& x : msst.parameters()) p.push_back(std::move(x));
  for (auto& x : head.parameters()) p.push_back(std::move(x));
  return p;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) throw ConfigError("train.lr must be finite and >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (weight_decay < 0) throw ConfigError("train.weight_decay must be >= 0");
  if (augment_probability < 0 || augment_probability > 1) throw ConfigError("augment.probability must lie in [0, 1]");
  if (scale_min < 1.0 || scale_max < scale_min) throw ConfigError("augment scale range must satisfy 1 <= min <= max");
  if (val_fraction < 0 || val_fraction >= 1) throw ConfigError("train.val_fraction must lie in [0, 1)");
  if (n_thresholds < 1) throw ConfigError("metrics.thresholds must be >= 1");
  // the teacher stage never builds the backbone
  if (stage == TrainStage::kTeacher) {
    model.schedule.validate();
  } else {
    model.validate();
  }
  preprocess.validate();
}

json TrainConfig::hyperparameters_json() const {
  return {{"stage", stage_name(stage)},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"weight_decay", weight_decay},
          {"optimizer", "adamw"},
          {"schedule", "cosine"},
          {"augment_probability", augment_probability},
          {"scale_min", scale_min},
          {"scale_max", scale_max},
          {"val_fraction", val_fraction},
          {"huber_delta", hs.huber_delta},
          {"sam_eps", hs.sam_eps},
          {"bce_eps", sod.bce_eps}};
}

TrainConfig TrainConfig::full_teacher() {
  TrainConfig c;
  c.stage = TrainStage::kTeacher;
  c.learning_rate = 0.002;
  c.batch_size = 4;
  c.epochs = 50;
  return c;
}

TrainConfig TrainConfig::full_dmssn() {
  TrainConfig c;
  c.stage = TrainStage::kDmssn;
  c.learning_rate = 0.06;
  c.batch_size = 12;
  c.epochs = 100;
  return c;
}

TrainConfig TrainConfig::desk_teacher() {
  TrainConfig c = full_teacher();
  c.epochs = 20;
  return c;
}

TrainConfig TrainConfig::desk_dmssn() {
  TrainConfig c = full_dmssn();
  c.learning_rate = 0.002;
  c.batch_size = 4;
  c.epochs = 30;
  return c;
}

Sample prepare_sample(const HyperCube& cube, const SaliencyMask& mask, const PreprocessConfig& pre, std::string id) {
  if (cube.height != mask.height || cube.width != mask.width) {
    throw ShapeError("sample " + id + ": cube and mask sizes differ");
  }
  Sample s;
  s.id = std::move(id);
  s.raw = normalize_cube(cube);
  s.homogenized = pre.homogenize ? homogenize_cube(s.raw, pre.gmm_components, pre.gmm) : s.raw;
  s.mask = mask;
  return s;
}

std::vector<Sample> load_samples(const DatasetManifest& manifest, const PreprocessConfig& pre) {
  manifest.validate();
  std::vector<Sample> out;
  for (const auto& e : manifest.entries) {
    out.push_back(prepare_sample(load_cube(e.cube), load_mask(e.mask), pre, e.cube.filename().string()));
  }
  return out;
}

std::pair<std::vector<Sample>, std::vector<Sample>> split_validation(std::vector<Sample> samples, double fraction) {
  std::stable_sort(samples.begin(), samples.end(),
                   [](const Sample& a, const Sample& b) { return fnv1a_hex(a.id) < fnv1a_hex(b.id); });
  const auto n_val = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(samples.size())));
  if (n_val >= samples.size() && !samples.empty()) throw DataError("validation split would leave no training data");
  std::vector<Sample> val(std::make_move_iterator(samples.begin()),
                          std::make_move_iterator(samples.begin() + static_cast<std::ptrdiff_t>(n_val)));
  std::vector<Sample> train(std::make_move_iterator(samples.begin() + static_cast<std::ptrdiff_t>(n_val)),
                            std::make_move_iterator(samples.end()));
  return {std::move(train), std::move(val)};
}

json teacher_architecture(const ChannelSchedule& schedule) {
  return {{"kind", "teacher"}, {"schedule", schedule_json(schedule)}};
}

json dmssn_architecture(const ModelConfig& model) { return {{"kind", "dmssn"}, {"model", model.to_json()}}; }

Checkpoint pretrain_teacher(const std::vector<Sample>& data, const TrainConfig& cfg, TrainSummary* summary) {
  cfg.validate();
  if (cfg.stage != TrainStage::kTeacher) throw ConfigError("pretrain_teacher needs stage = teacher");
  if (data.empty()) throw DataError("pretrain_teacher: no training samples");
  TeacherAutoencoder teacher(cfg.model.schedule, cfg.seed);
  const NamedParams params = teacher.parameters();
  AdamW opt(params, {0.9, 0.999, 1e-8, cfg.weight_decay});
  std::mt19937_64 rng(cfg.seed ^ 0x5eedULL);
  const int per_epoch = steps_per_epoch(data.size(), cfg.batch_size);
  const int total = per_epoch * cfg.epochs;

  Checkpoint best;
  double best_loss = std::numeric_limits<double>::infinity();
  TrainSummary local;
  int step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = shuffled(data.size(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double inv = 1.0 / static_cast<double>(end - start);
      double batch_loss = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        const Sample& s = data[order[b]];
        const Augmented a = draw_sample(s, cfg, rng);
        const TeacherActivations act = teacher.forward(constant(a.g));
        Var loss = hs_loss(act.d, constant(a.raw), cfg.hs);
        check_finite_loss(loss.value().item(), step, static_cast<int>(b - start), s.id);
        batch_loss += loss.value().item() * inv;
        backward(loss, inv);
      }
      check_finite_grads(params, step);
      opt.step(cosine_lr(cfg.learning_rate, step, total));
      opt.zero_grad();
      emit(cfg, {{"step", step}, {"epoch", epoch}, {"L_T", batch_loss}});
      epoch_loss += batch_loss * static_cast<double>(end - start);
      ++step;
    }
    epoch_loss /= static_cast<double>(data.size());
    local.epoch_loss.push_back(epoch_loss);
    emit(cfg, {{"epoch", epoch}, {"train_loss", epoch_loss}});
    if (epoch_loss < best_loss) {
      best_loss = epoch_loss;
      best.arrays.clear();
      capture_parameters(params, best);
      best.epoch = epoch;
      local.best_epoch = epoch;
    }
  }
  local.steps = step;
  best.stage = "teacher";
  best.seed = cfg.seed;
  best.loss_history = tail(local.epoch_loss);
  best.architecture = teacher_architecture(cfg.model.schedule);
  best.hyperparameters = cfg.hyperparameters_json();
  best.extra = {{"preprocess", cfg.preprocess.to_json()}};
  if (summary) *summary = std::move(local);
  return best;
}

Checkpoint pretrain_teacher(const DatasetManifest& manifest, const TrainConfig& cfg, TrainSummary* summary) {
  cfg.validate();
  return pretrain_teacher(load_samples(manifest, cfg.preprocess), cfg, summary);
}

TeacherAutoencoder load_teacher(const Checkpoint& ckpt) {
  if (ckpt.stage != "teacher") throw ConfigError("checkpoint stage is '" + ckpt.stage + "', expected a teacher");
  const ChannelSchedule schedule = schedule_from(ckpt.architecture.at("schedule"));
  TeacherAutoencoder t(schedule, 0);
  restore_parameters(ckpt, t.parameters());
  return t;
}

DmssnModel load_dmssn(const Checkpoint& ckpt) {
  if (ckpt.stage != "dmssn") throw ConfigError("checkpoint stage is '" + ckpt.stage + "', expected dmssn");
  DmssnModel m(ModelConfig::from_json(ckpt.architecture.at("model")), 0);
  restore_parameters(ckpt, m.parameters());
  return m;
}

PreprocessConfig load_preprocess(const Checkpoint& ckpt) {
  if (!ckpt.extra.contains("preprocess")) return {};
  return PreprocessConfig::from_json(ckpt.extra.at("preprocess"));
}

Checkpoint train_dmssn(const std::vector<Sample>& train, const std::vector<Sample>& val, const Checkpoint& teacher_ckpt,
                       const TrainConfig& cfg, TrainSummary* summary) {
  cfg.validate();
  if (cfg.stage != TrainStage::kDmssn) throw ConfigError("train_dmssn needs stage = dmssn");
  if (train.empty()) throw DataError("train_dmssn: no training samples");
  TeacherAutoencoder teacher = load_teacher(teacher_ckpt);
  require_teacher_compatible(teacher.schedule(), cfg.model.schedule);
  const NamedParams teacher_params = teacher.parameters();
  set_trainable(teacher_params, false);

  TrainSummary local;
  local.teacher_hash_before = parameter_hash(teacher_params);

  DmssnModel model(cfg.model, cfg.seed);
  const NamedParams params = model.parameters();
  AdamW opt(params, {0.9, 0.999, 1e-8, cfg.weight_decay});
  std::mt19937_64 rng(cfg.seed ^ 0xd155ULL);
  const int per_epoch = steps_per_epoch(train.size(), cfg.batch_size);
  const int total = per_epoch * cfg.epochs;

  Checkpoint best;
  double best_score = -std::numeric_limits<double>::infinity();
  int step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = shuffled(train.size(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double inv = 1.0 / static_cast<double>(end - start);
      double l_s = 0, l_sod = 0, l_dis = 0, l = 0;
      for (std::size_t b = start; b < end; ++b) {
        const Sample& s = train[order[b]];
        const Augmented a = draw_sample(s, cfg, rng);
        const Var g = constant(a.g);
        const DmssnModel::Output out = model.forward(g);
        LossReport report;
        Var ls = hs_loss(out.student.d, constant(a.raw), cfg.hs, &report.recon);
        Var lsod = sod_loss(out.saliency, a.mask, cfg.sod, &report.sod);
        Var ldis = distillation_loss(teacher.forward(g), out.student, cfg.hs, &report.dis_pairs);
        Var loss = ops::add(ops::add(ls, lsod), ldis);
        check_finite_loss(loss.value().item(), step, static_cast<int>(b - start), s.id);
        backward(loss, inv);
        l_s += report.l_s() * inv;
        l_sod += report.l_sod() * inv;
        l_dis += report.l_dis() * inv;
        l += report.total() * inv;
      }
      check_finite_grads(params, step);
      opt.step(cosine_lr(cfg.learning_rate, step, total));
      opt.zero_grad();
      emit(cfg, {{"step", step}, {"L_S", l_s}, {"L_sod", l_sod}, {"L_dis", l_dis}, {"L", l}});
      epoch_loss += l * static_cast<double>(end - start);
      ++step;
    }
    epoch_loss /= static_cast<double>(train.size());
    local.epoch_loss.push_back(epoch_loss);
    double score = -epoch_loss;
    json epoch_log = {{"epoch", epoch}, {"train_loss", epoch_loss}};
    if (!val.empty()) {
      const double f1 = evaluate_model(model, val, cfg.n_thresholds).avg_f1;
      local.val_avg_f1.push_back(f1);
      epoch_log["val_avg_f1"] = f1;
      score = f1;
    }
    emit(cfg, epoch_log);
    if (score > best_score) {
      best_score = score;
      best.arrays.clear();
      capture_parameters(params, best);
      best.epoch = epoch;
      local.best_epoch = epoch;
    }
  }
  local.steps = step;
  local.teacher_hash_after = parameter_hash(teacher_params);
  if (local.teacher_hash_after != local.teacher_hash_before) {
    throw TrainingError("teacher parameters changed during training");
  }

  best.stage = "dmssn";
  best.seed = cfg.seed;
  best.loss_history = tail(local.epoch_loss);
  best.architecture = dmssn_architecture(cfg.model);
  best.hyperparameters = cfg.hyperparameters_json();
  best.extra = {{"preprocess", cfg.preprocess.to_json()},
                {"teacher_config_hash", teacher_ckpt.config_hash()},
                {"teacher_hash_before", local.teacher_hash_before},
                {"teacher_hash_after", local.teacher_hash_after}};
  if (!val.empty()) best.extra["best_val_avg_f1"] = best_score;
  if (summary) *summary = std::move(local);
  return best;
}

Checkpoint train_dmssn(const DatasetManifest& manifest, const Checkpoint& teacher, const TrainConfig& cfg,
                       TrainSummary* summary) {
  cfg.validate();
  auto [train, val] = split_validation(load_samples(manifest, cfg.preprocess), cfg.val_fraction);
  return train_dmssn(train, val, teacher, cfg, summary);
}

StudentAutoencoder train_student_autoencoder(const std::vector<Sample>& data, const TeacherAutoencoder* teacher,
                                             const TrainConfig& cfg, TrainSummary* summary) {
  cfg.validate();
  if (data.empty()) throw DataError("train_student_autoencoder: no training samples");
  if (teacher) require_teacher_compatible(teacher->schedule(), cfg.model.schedule);
  StudentAutoencoder student(cfg.model.schedule, cfg.seed);
  const NamedParams params = student.parameters();
  AdamW opt(params, {0.9, 0.999, 1e-8, cfg.weight_decay});
  std::mt19937_64 rng(cfg.seed ^ 0xae5ULL);
  const int total = steps_per_epoch(data.size(), cfg.batch_size) * cfg.epochs;
  TrainSummary local;
  int step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = shuffled(data.size(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t b = start; b < end; ++b) {
        const Sample& s = data[order[b]];
        const Augmented a = draw_sample(s, cfg, rng);
        const Var g = constant(a.g);
        const StudentActivations act = student.forward(g);
        Var loss = hs_loss(act.d, constant(a.raw), cfg.hs);
        if (teacher) loss = ops::add(loss, distillation_loss(teacher->forward(g), act, cfg.hs));
        check_finite_loss(loss.value().item(), step, static_cast<int>(b - start), s.id);
        epoch_loss += loss.value().item();
        backward(loss, inv);
      }
      check_finite_grads(params, step);
      opt.step(cosine_lr(cfg.learning_rate, step, total));
      opt.zero_grad();
      ++step;
    }
    local.epoch_loss.push_back(epoch_loss / static_cast<double>(data.size()));
    emit(cfg, {{"epoch", epoch}, {"train_loss", local.epoch_loss.back()}});
  }
  local.steps = step;
  local.best_epoch = cfg.epochs;
  if (summary) *summary = std::move(local);
  return student;
}

SaliencyMask predict(const DmssnModel& model, const Tensor& g) {
  require_map(g, "predict");
  const int m = model.msst.config().min_input_size();
  const int h = g.height(), w = g.width();
  const int ph = (h + m - 1) / m * m, pw = (w + m - 1) / m * m;
  const DmssnModel::Output out = model.forward(constant(pad_edge(g, ph, pw)));
  const Tensor& y = out.saliency.value();
  SaliencyMask mask(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) mask.at(r, c) = y.at(r, c, 0);
  return mask;
}

SaliencyMask infer(const HyperCube& cube, const DmssnModel& model, const PreprocessConfig& pre, const InferOptions& opts) {
  const int c = model.config().schedule.c;
  if (cube.bands != c) {
    throw ShapeError("cube has " + std::to_string(cube.bands) + " bands but the model expects " + std::to_string(c));
  }
  const HyperCube normalized = normalize_cube(cube);
  const HyperCube g =
      opts.homogenize && pre.homogenize ? homogenize_cube(normalized, pre.gmm_components, pre.gmm) : normalized;
  return predict(model, to_tensor(g));
}

SaliencyMask infer(const HyperCube& cube, const Checkpoint& ckpt, const InferOptions& opts) {
  return infer(cube, load_dmssn(ckpt), load_preprocess(ckpt), opts);
}

EvalReport evaluate_model(const DmssnModel& model, const std::vector<Sample>& samples, int n_thresholds) {
  std::vector<EvalReport> reports;
  for (const Sample& s : samples) {
    reports.push_back(evaluate(predict(model, to_tensor(s.homogenized)), s.mask, {n_thresholds, 0.5}));
  }
  return average_reports(reports);
}

}  // namespace dmssn
