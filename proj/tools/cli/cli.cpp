#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "dmssn/diagnostics.hpp"
#include "dmssn/error.hpp"
#include "montage.hpp"
#include "run_config.hpp"

namespace dmssn::cli {
namespace fs = std::filesystem;
namespace {

// Bad invocations that are not library errors (missing inputs, refusing to overwrite).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::string workdir;
  bool force = false;
  std::map<std::string, std::string> overrides;

  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() || workdir.empty() ? path : fs::path(workdir) / path;
  }

  void guard(const fs::path& p) const {
    if (fs::exists(p) && !force) throw UsageError(p.string() + " exists; pass --force to overwrite");
  }

  RunConfig load() const {
    std::map<std::string, std::string> settings;
    if (!config.empty()) {
      const fs::path p = resolve(config);
      std::ifstream in(p);
      if (!in) throw UsageError("cannot read config " + p.string());
      std::stringstream ss;
      ss << in.rdbuf();
      settings = parse_config_text(ss.str(), p.string());
    }
    if (const char* env = std::getenv("DMSSN_SEED"); env && *env) settings["seed"] = env;
    for (const auto& [k, v] : overrides) settings[k] = v;
    return build_config(settings);
  }
};

std::function<void(const std::string&)> make_logger(const std::optional<fs::path>& path, std::ostream& err,
                                                    std::shared_ptr<std::ofstream>& file) {
  if (path) {
    file = std::make_shared<std::ofstream>(*path);
    if (!*file) throw IoError("cannot write log " + path->string());
  }
  return [file, &err](const std::string& line) {
    if (file) *file << line << '\n';
    const auto j = nlohmann::json::parse(line);
    if (j.contains("train_loss")) {
      err << "epoch " << j["epoch"] << " loss " << j["train_loss"].get<double>();
      if (j.contains("val_avg_f1")) err << " val avgF1 " << j["val_avg_f1"].get<double>();
      err << '\n';
    }
  };
}

std::uint64_t scene_seed(std::uint64_t seed, int i) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(i + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void require_bands(const std::vector<Sample>& data, int c) {
  for (const Sample& s : data) {
    if (s.raw.bands != c) {
      throw ConfigError(s.id + " has " + std::to_string(s.raw.bands) + " bands but schedule.c is " + std::to_string(c));
    }
  }
}

struct EncoderRun {
  std::string name;
  std::size_t params = 0;
  std::function<std::pair<Tensor, Tensor>(const Sample&)> encode;  // (encoding, reconstruction)
};

EncodingDiagnostics diagnose_encoder(const EncoderRun& enc, const std::vector<Sample>& data, const RunConfig& cfg) {
  EncodingDiagnostics d;
  d.name = enc.name;
  d.param_count = enc.params;
  for (const Sample& s : data) {
    const auto [e, r] = enc.encode(s);
    d.ie += information_entropy(e, cfg.diagnose_bins).bits;
    d.scc += spectral_correlation(e, s.raw).scc;
    const ReconstructionError err = reconstruction_error(r, to_tensor(s.raw));
    d.recon_mse += err.mse;
    d.recon_mae += err.mae;
  }
  const double n = static_cast<double>(data.size());
  d.ie /= n, d.scc /= n, d.recon_mse /= n, d.recon_mae /= n;
  d.throughput = measure_throughput([&] { enc.encode(data.front()); }, cfg.diagnose_runs);
  return d;
}

void write_text(const std::string& text, const std::optional<fs::path>& path, std::ostream& out) {
  if (!path) {
    out << text;
    return;
  }
  std::ofstream f(*path);
  if (!f || !(f << text)) throw IoError("cannot write " + path->string());
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hyperspectral salient object detection with distilled spectral encoding and MSST attention"};
  app.name("dmssn");
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all", "Print help for every subcommand");

  Common common;
  app.add_option("--config", common.config, "Config file of `key = value` lines with config_version = 1");
  app.add_option("--workdir", common.workdir, "Directory that relative paths resolve against");
  app.add_flag("--force", common.force, "Allow replacing existing outputs");
  const RunConfig defaults;
  for (const KeyDef& k : config_keys()) {
    app.add_option_function<std::string>(
           "--" + k.key, [&common, key = k.key](const std::string& v) { common.overrides[key] = v; },
           "[config key " + k.key + "] " + k.help + " (default " + k.get(defaults) + ")")
        ->group("Config overrides");
  }

  std::string out_path, data, teacher, model, cube, gt, pred, montage, log_path;
  bool no_homogenize = false, json = false, ablate = false;

  auto* synth = app.add_subcommand("synth", "Write synthetic scenes, masks and a manifest");
  synth->add_option("--out", out_path, "Output directory")->required();

  auto* pretrain = app.add_subcommand("pretrain-teacher", "Stage 1: pre-train the teacher autoencoder");
  pretrain->add_option("--data", data, "Dataset manifest")->required();
  pretrain->add_option("--out", out_path, "Checkpoint directory")->required();
  pretrain->add_option("--log", log_path, "Write JSON-lines metrics here");

  auto* train = app.add_subcommand("train", "Stage 2: train DMSSN with the frozen teacher");
  train->add_option("--data", data, "Dataset manifest")->required();
  train->add_option("--teacher", teacher, "Teacher checkpoint from pretrain-teacher");
  train->add_option("--out", out_path, "Checkpoint directory")->required();
  train->add_option("--log", log_path, "Write JSON-lines metrics here");

  auto* infer_cmd = app.add_subcommand("infer", "Predict a saliency map for one cube");
  infer_cmd->add_option("--model", model, "DMSSN checkpoint")->required();
  infer_cmd->add_option("--cube", cube, "ENVI header of the cube")->required();
  infer_cmd->add_option("--out", out_path, "Output PGM")->required();
  infer_cmd->add_option("--montage", montage, "Also write a PNG: pseudo-color | ground truth | prediction");
  infer_cmd->add_option("--gt", gt, "Ground-truth PGM for the montage");
  infer_cmd->add_flag("--no-homogenize", no_homogenize, "Skip spectral homogenization");

  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  eval->add_option("--pred", pred, "Predicted PGM");
  eval->add_option("--gt", gt, "Ground-truth PGM");
  eval->add_option("--model", model, "DMSSN checkpoint (with --data)");
  eval->add_option("--data", data, "Dataset manifest (with --model)");
  eval->add_option("--out", out_path, "Write the report here instead of stdout");
  eval->add_flag("--json", json, "Emit JSON instead of a table");

  auto* diagnose = app.add_subcommand("diagnose", "Encoding diagnostics: speed, #param, IE, SCC, MSE, MAE");
  diagnose->add_option("--data", data, "Dataset manifest")->required();
  diagnose->add_option("--teacher", teacher, "Teacher checkpoint")->required();
  diagnose->add_option("--model", model, "DMSSN checkpoint whose student encoder is measured");
  diagnose->add_flag("--ablate", ablate, "Also train pure and distilled student autoencoders on equal budgets");
  diagnose->add_option("--out", out_path, "Write the table here instead of stdout");
  diagnose->add_flag("--json", json, "Emit JSON lines instead of a table");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kInvalid;
  }

  try {
    const RunConfig cfg = common.load();
    auto opt_path = [&](const std::string& p) { return p.empty() ? std::nullopt : std::optional<fs::path>(common.resolve(p)); };

    if (synth->parsed()) {
      const fs::path dir = common.resolve(out_path);
      const fs::path manifest_path = dir / "manifest.tsv";
      common.guard(manifest_path);
      fs::create_directories(dir);
      DatasetManifest manifest;
      for (int i = 0; i < cfg.scene_count; ++i) {
        const auto [hc, mask] = generate_synthetic_scene(random_scene_spec(cfg.scene, scene_seed(cfg.seed, i)));
        char stem[32];
        std::snprintf(stem, sizeof stem, "scene_%03d", i);
        const fs::path c = dir / (std::string(stem) + ".hdr"), m = dir / (std::string(stem) + "_mask.pgm");
        save_cube(hc, c);
        save_mask(mask, m);
        manifest.entries.push_back({c, m});
      }
      save_manifest(manifest, manifest_path);
      std::ofstream(dir / "synth.cfg") << to_text(cfg);
      out << "wrote " << cfg.scene_count << " scenes and " << manifest_path.string() << '\n';
      return kOk;
    }

    if (pretrain->parsed()) {
      const fs::path dst = common.resolve(out_path);
      common.guard(dst);
      TrainConfig tc = cfg.teacher_config();
      std::shared_ptr<std::ofstream> log_file;
      tc.log = make_logger(opt_path(log_path), err, log_file);
      const auto samples = load_samples(load_manifest(common.resolve(data)), tc.preprocess);
      require_bands(samples, tc.model.schedule.c);
      TrainSummary summary;
      Checkpoint ck = pretrain_teacher(samples, tc, &summary);
      ck.extra["run_config"] = to_text(cfg);
      save_checkpoint(ck, dst, common.force);
      out << "teacher: best epoch " << summary.best_epoch << " of " << tc.epochs << ", loss "
          << summary.epoch_loss[static_cast<std::size_t>(summary.best_epoch - 1)] << " -> " << dst.string() << '\n';
      return kOk;
    }

    if (train->parsed()) {
      if (teacher.empty()) {
        throw UsageError(
            "train needs a pre-trained teacher checkpoint (--teacher). Training has two stages: run "
            "`dmssn pretrain-teacher` first, then pass its output to `dmssn train --teacher`.");
      }
      const fs::path dst = common.resolve(out_path);
      common.guard(dst);
      TrainConfig tc = cfg.dmssn_config();
      std::shared_ptr<std::ofstream> log_file;
      tc.log = make_logger(opt_path(log_path), err, log_file);
      const Checkpoint tk = load_checkpoint(common.resolve(teacher));
      auto [tr, val] = split_validation(load_samples(load_manifest(common.resolve(data)), tc.preprocess), tc.val_fraction);
      require_bands(tr, tc.model.schedule.c);
      TrainSummary summary;
      Checkpoint ck = train_dmssn(tr, val, tk, tc, &summary);
      ck.extra["run_config"] = to_text(cfg);
      save_checkpoint(ck, dst, common.force);
      out << "dmssn: best epoch " << summary.best_epoch << " of " << tc.epochs;
      if (!summary.val_avg_f1.empty()) {
        out << ", validation avgF1 " << summary.val_avg_f1[static_cast<std::size_t>(summary.best_epoch - 1)];
      }
      out << ", teacher hash " << summary.teacher_hash_after << " (unchanged) -> " << dst.string() << '\n';
      return kOk;
    }

    if (infer_cmd->parsed()) {
      const fs::path dst = common.resolve(out_path);
      common.guard(dst);
      if (!montage.empty()) common.guard(common.resolve(montage));
      const Checkpoint ck = load_checkpoint(common.resolve(model));
      const HyperCube hc = load_cube(common.resolve(cube));
      const SaliencyMask y = infer(hc, ck, {!no_homogenize});
      save_mask(y, dst);
      if (!montage.empty()) {
        std::vector<RgbImage> panels = {pseudo_color(normalize_cube(hc))};
        if (!gt.empty()) panels.push_back(gray(load_mask(common.resolve(gt))));
        panels.push_back(gray(y));
        write_png(side_by_side(panels), common.resolve(montage));
      }
      out << "wrote " << dst.string() << '\n';
      return kOk;
    }

    if (eval->parsed()) {
      EvalReport report;
      if (!pred.empty() || !gt.empty()) {
        if (pred.empty() || gt.empty()) throw UsageError("eval needs both --pred and --gt");
        report = evaluate(load_mask(common.resolve(pred)), load_mask(common.resolve(gt)), cfg.metrics);
      } else if (!model.empty() && !data.empty()) {
        const Checkpoint ck = load_checkpoint(common.resolve(model));
        const DmssnModel m = load_dmssn(ck);
        const PreprocessConfig pre = load_preprocess(ck);
        std::vector<EvalReport> reports;
        for (const auto& e : load_manifest(common.resolve(data)).entries) {
          reports.push_back(evaluate(infer(load_cube(e.cube), m, pre), load_mask(e.mask), cfg.metrics));
        }
        report = average_reports(reports);
      } else {
        throw UsageError("eval needs --pred and --gt, or --model and --data");
      }
      const auto dst = opt_path(out_path);
      if (dst) common.guard(*dst);
      write_text(json ? report.to_json() + "\n" : report.to_table(), dst, out);
      return kOk;
    }

    if (diagnose->parsed()) {
      const auto dst = opt_path(out_path);
      if (dst) common.guard(*dst);
      const Checkpoint tk = load_checkpoint(common.resolve(teacher));
      const TeacherAutoencoder t = load_teacher(tk);
      const auto samples = load_samples(load_manifest(common.resolve(data)), load_preprocess(tk));
      require_bands(samples, t.schedule().c);
      const int k = t.schedule().c_prime;

      auto ae = [](std::string name, const auto& net) {
        return EncoderRun{std::move(name), parameter_count(net.parameters()), [&net](const Sample& s) {
                            const auto a = net.forward(constant(to_tensor(s.homogenized)));
                            return std::make_pair(a.e.value(), a.d.value());
                          }};
      };
      std::vector<EncoderRun> runs = {ae("teacher", t)};
      std::optional<DmssnModel> dm;
      if (!model.empty()) {
        dm.emplace(load_dmssn(load_checkpoint(common.resolve(model))));
        runs.push_back(ae("dmssn student", dm->student));
      }
      std::optional<StudentAutoencoder> pure, distilled;
      if (ablate) {
        TrainConfig tc = cfg.dmssn_config();
        tc.model.schedule = t.schedule();
        tc.model.msst.in_channels = k;
        pure.emplace(train_student_autoencoder(samples, nullptr, tc));
        distilled.emplace(train_student_autoencoder(samples, &t, tc));
        runs.push_back(ae("student (pure)", *pure));
        runs.push_back(ae("student (distilled)", *distilled));
      }
      runs.push_back({"pca", 0, [k](const Sample& s) {
                        const PcaResult p = pca_reduce(s.homogenized, k);
                        return std::make_pair(p.scores, pca_reconstruct(p));
                      }});

      std::vector<EncodingDiagnostics> rows;
      for (const auto& r : runs) rows.push_back(diagnose_encoder(r, samples, cfg));
      std::string text;
      if (json) {
        for (const auto& r : rows) text += r.to_json() + "\n";
      } else {
        text = diagnostics_table(rows);
      }
      write_text(text, dst, out);
      return kOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const ConfigError& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return kInvalid;
  } catch (const ShapeError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    err << "failed: " << e.what() << '\n';
    return kFailed;
  }
  return kInvalid;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace dmssn::cli
