#pragma once

#include <cstdint>
#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "dmssn/autoencoders.hpp"
#include "dmssn/checkpoint.hpp"
#include "dmssn/homogenization.hpp"
#include "dmssn/hsi_data.hpp"
#include "dmssn/metrics.hpp"
#include "dmssn/msst.hpp"
#include "dmssn/objectives.hpp"
#include "dmssn/saliency_head.hpp"

namespace dmssn {

enum class TrainStage { kTeacher, kDmssn };

std::string stage_name(TrainStage stage);
TrainStage parse_stage(const std::string& name);

struct PreprocessConfig {
  bool homogenize = true;
  int gmm_components = 10;
  GmmOptions gmm;

  void validate() const;
  nlohmann::json to_json() const;
  static PreprocessConfig from_json(const nlohmann::json& j);
};

struct ModelConfig {
  ChannelSchedule schedule;
  MsstConfig msst;  // msst.in_channels must equal schedule.c_prime
  FpnConfig fpn;

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

/// Student encoder -> MSST -> FPN head.
class DmssnModel {
 public:
  DmssnModel(const ModelConfig& cfg, std::uint64_t seed);

  struct Output {
    StudentActivations student;
    PyramidFeatures pyramid;
    Var saliency;  // H x W x 1 in (0, 1)
  };

  /// `g` must have spatial sides divisible by msst.min_input_size().
  Output forward(const Var& g) const;
  const ModelConfig& config() const { return cfg_; }
  NamedParams parameters() const;

  StudentAutoencoder student;
  Msst msst;
  FpnHead head;

 private:
  ModelConfig cfg_;
};

struct TrainConfig {
  TrainStage stage = TrainStage::kDmssn;
  double learning_rate = 0.002;
  int batch_size = 4;
  int epochs = 30;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
  double augment_probability = 0.5;
  double scale_min = 1.0;
  double scale_max = 1.25;
  double val_fraction = 0.2;
  int n_thresholds = 255;
  ModelConfig model;
  PreprocessConfig preprocess;
  HsLossOptions hs;
  SodLossOptions sod;
  /// Receives one JSON object per line: per-step losses and per-epoch summaries.
  std::function<void(const std::string&)> log;

  void validate() const;
  nlohmann::json hyperparameters_json() const;

  static TrainConfig full_teacher();
  static TrainConfig full_dmssn();
  static TrainConfig desk_teacher();
  static TrainConfig desk_dmssn();
};

/// A normalized cube, its homogenized counterpart and the mask.
struct Sample {
  std::string id;
  HyperCube raw;
  HyperCube homogenized;
  SaliencyMask mask;
};

Sample prepare_sample(const HyperCube& cube, const SaliencyMask& mask, const PreprocessConfig& pre, std::string id);
std::vector<Sample> load_samples(const DatasetManifest& manifest, const PreprocessConfig& pre);
/// Orders samples by a hash of their id and sends the first ceil(fraction * n)
/// to validation. Returns (train, validation).
std::pair<std::vector<Sample>, std::vector<Sample>> split_validation(std::vector<Sample> samples, double fraction);

struct TrainSummary {
  std::vector<double> epoch_loss;
  std::vector<double> val_avg_f1;
  int best_epoch = 0;
  int steps = 0;
  std::string teacher_hash_before;
  std::string teacher_hash_after;
};

nlohmann::json teacher_architecture(const ChannelSchedule& schedule);
nlohmann::json dmssn_architecture(const ModelConfig& model);

/// Optimizes the teacher on L_T = L_hs(D_T, I) with G as input. Keeps the
/// lowest-loss epoch.
Checkpoint pretrain_teacher(const std::vector<Sample>& data, const TrainConfig& cfg, TrainSummary* summary = nullptr);
Checkpoint pretrain_teacher(const DatasetManifest& manifest, const TrainConfig& cfg, TrainSummary* summary = nullptr);
TeacherAutoencoder load_teacher(const Checkpoint& ckpt);

/// Joint training under L = L_S + L_sod + L_dis with a frozen teacher. Keeps
/// the epoch with the best validation avgF1 (lowest training loss when
/// `val` is empty).
Checkpoint train_dmssn(const std::vector<Sample>& train, const std::vector<Sample>& val, const Checkpoint& teacher,
                       const TrainConfig& cfg, TrainSummary* summary = nullptr);
Checkpoint train_dmssn(const DatasetManifest& manifest, const Checkpoint& teacher, const TrainConfig& cfg,
                       TrainSummary* summary = nullptr);
DmssnModel load_dmssn(const Checkpoint& ckpt);
PreprocessConfig load_preprocess(const Checkpoint& ckpt);

/// Student autoencoder alone, on L_S plus L_dis when `teacher` is given.
StudentAutoencoder train_student_autoencoder(const std::vector<Sample>& data, const TeacherAutoencoder* teacher,
                                             const TrainConfig& cfg, TrainSummary* summary = nullptr);

/// Saliency for an already preprocessed input map (H x W x C); pads to a
/// valid size by edge replication and crops back.
SaliencyMask predict(const DmssnModel& model, const Tensor& g);

struct InferOptions {
  bool homogenize = true;
};

/// normalize -> (homogenize) -> student encoder -> MSST -> head.
SaliencyMask infer(const HyperCube& cube, const DmssnModel& model, const PreprocessConfig& pre,
                   const InferOptions& opts = {});
SaliencyMask infer(const HyperCube& cube, const Checkpoint& ckpt, const InferOptions& opts = {});

/// Mean metrics of the model over preprocessed samples.
EvalReport evaluate_model(const DmssnModel& model, const std::vector<Sample>& samples, int n_thresholds = 255);

}  // namespace dmssn
