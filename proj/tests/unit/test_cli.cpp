#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cli/cli.hpp"
#include "cli/run_config.hpp"
#include "doctest.h"
#include "dmssn/error.hpp"
#include "test_support.hpp"

using namespace dmssn;
using namespace dmssn::cli;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

const char* kTiny = R"(config_version = 1
seed = 3
scene.count = 4
scene.height = 16
scene.width = 16
scene.bands = 8
scene.materials_min = 2
scene.materials_max = 3
schedule.c = 8
schedule.c1 = 6
schedule.c2 = 4
schedule.c_prime = 2
msst.blocks = 1,1,1,1
msst.channels = 4,4,8,8
msst.strides = 2,2,2,2
msst.reductions = 4,2,1,1
msst.heads = 1
msst.ffn_ratio = 2
fpn.channels = 4
gmm.components = 4
teacher.epochs = 2
train.epochs = 2
metrics.thresholds = 15
diagnose.runs = 1
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Workspace {
  testing::TempDir dir;
  Workspace() { std::ofstream(dir.file("tiny.cfg")) << kTiny; }
  std::vector<std::string> with(std::vector<std::string> args) const {
    args.insert(args.end(), {"--workdir", dir.path(), "--config", "tiny.cfg"});
    return args;
  }
};

}  // namespace

TEST_CASE("config text parsing") {
  CHECK(parse_config_text("config_version = 1\nseed = 4  # trailing\n\n").at("seed") == "4");
  CHECK_THROWS_AS(parse_config_text("seed = 4\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("config_version = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("config_version = 1\nseed\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("config_version = 1\nseed = 1\nseed = 2\n"), ConfigError);
  try {
    parse_config_text("config_version = 1\n\nscene.hieght = 3\n", "c.cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("c.cfg:3: unknown key 'scene.hieght'") != std::string::npos);
  }
  CHECK_THROWS_AS(build_config({{"scene.height", "12x"}}), ConfigError);
  CHECK_THROWS_AS(build_config({{"preprocess.homogenize", "maybe"}}), ConfigError);
  CHECK_THROWS_AS(build_config({{"fpn.mode", "triple"}}), ConfigError);
  CHECK_THROWS_AS(build_config({{"schedule.c2", "30"}}), ConfigError);  // breaks C >= C1 >= C2 >= C'
}

TEST_CASE("config text roundtrips") {
  const RunConfig d = build_config({});
  CHECK(to_text(build_config(parse_config_text(to_text(d)))) == to_text(d));
  testing::Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    std::map<std::string, std::string> s = {
        {"seed", std::to_string(rng() % 1000)},
        {"scene.height", std::to_string(8 + rng() % 64)},
        {"scene.noise_sigma", std::to_string(0.001 * static_cast<double>(rng() % 100))},
        {"train.lr", std::to_string(1e-4 * static_cast<double>(1 + rng() % 100))},
        {"msst.blocks", std::to_string(rng() % 3) + ",1,2,1"},
    };
    const RunConfig c = build_config(s);
    CHECK(to_text(build_config(parse_config_text(to_text(c)))) == to_text(c));
  }
}

TEST_CASE("training profiles and explicit overrides") {
  const RunConfig full = build_config({{"train.profile", "full"}});
  CHECK(full.teacher_config().learning_rate == 0.002);
  CHECK(full.teacher_config().epochs == 50);
  CHECK(full.dmssn_config().learning_rate == 0.06);
  CHECK(full.dmssn_config().batch_size == 12);
  CHECK(full.dmssn_config().epochs == 100);
  // explicit keys win whatever their position
  const RunConfig mixed = build_config({{"train.lr", "0.01"}, {"train.profile", "full"}});
  CHECK(mixed.dmssn_config().learning_rate == 0.01);
  CHECK(mixed.dmssn_config().epochs == 100);
  const RunConfig desk = build_config({});
  CHECK(desk.dmssn_config().learning_rate == 0.002);
  CHECK(desk.dmssn_config().epochs == 30);
  CHECK(desk.teacher_config().stage == TrainStage::kTeacher);
  CHECK(desk.model.msst.in_channels == desk.model.schedule.c_prime);
}

TEST_CASE("help lists every flag with its config key") {
  Result r = call({"--help"});
  CHECK(r.code == 0);
  for (const KeyDef& k : config_keys()) {
    CHECK(r.out.find("--" + k.key + " ") != std::string::npos);
    CHECK(r.out.find("[config key " + k.key + "]") != std::string::npos);
  }
  for (const char* sub : {"synth", "pretrain-teacher", "train", "infer", "eval", "diagnose"}) {
    CHECK(r.out.find(sub) != std::string::npos);
  }
}

TEST_CASE("usage errors exit 1") {
  CHECK(call({}).code == 1);
  CHECK(call({"frobnicate"}).code == 1);
  Result r = call({"synth", "--out", "x", "--no-such-flag"});
  CHECK(r.code == 1);
  CHECK(!r.err.empty());
  CHECK(call({"synth"}).code == 1);  // --out is required
  CHECK(call({"synth", "--out", "x", "--scene.height", "abc"}).code == 1);
  CHECK(call({"synth", "--out", "x", "--config", "/nonexistent/c.cfg"}).code == 1);
}

TEST_CASE("synth writes scenes and refuses to overwrite") {
  Workspace ws;
  Result r = call(ws.with({"synth", "--out", "data"}));
  REQUIRE(r.code == 0);
  const DatasetManifest m = load_manifest(ws.dir.file("data/manifest.tsv"));
  CHECK(m.entries.size() == 4);
  CHECK_NOTHROW(m.validate());
  const HyperCube c = load_cube(m.entries[0].cube);
  CHECK(c.height == 16);
  CHECK(c.bands == 8);

  CHECK(call(ws.with({"synth", "--out", "data"})).code == 1);
  CHECK(call(ws.with({"synth", "--out", "data", "--force"})).code == 0);
}

TEST_CASE("DMSSN_SEED overrides the config seed") {
  Workspace ws;
  REQUIRE(call(ws.with({"synth", "--out", "a", "--seed", "11"})).code == 0);
  REQUIRE(call(ws.with({"synth", "--out", "b"})).code == 0);
  ::setenv("DMSSN_SEED", "11", 1);
  const int env_code = call(ws.with({"synth", "--out", "c"})).code;
  ::setenv("DMSSN_SEED", "eleven", 1);
  const int bad_code = call(ws.with({"synth", "--out", "d"})).code;
  ::unsetenv("DMSSN_SEED");
  REQUIRE(env_code == 0);
  CHECK(bad_code == 1);
  const std::string a = slurp(ws.dir.file("a/scene_001.raw"));
  CHECK(a == slurp(ws.dir.file("c/scene_001.raw")));
  CHECK(a != slurp(ws.dir.file("b/scene_001.raw")));
}

TEST_CASE("eval on identical maps and train without a teacher") {
  Workspace ws;
  REQUIRE(call(ws.with({"synth", "--out", "data"})).code == 0);
  Result e = call(ws.with({"eval", "--pred", "data/scene_000_mask.pgm", "--gt", "data/scene_000_mask.pgm", "--json"}));
  REQUIRE(e.code == 0);
  auto j = nlohmann::json::parse(e.out);
  CHECK(j["mae"] == 0.0);
  CHECK(j["cc"] == 1.0);
  Result table = call(ws.with({"eval", "--pred", "data/scene_000_mask.pgm", "--gt", "data/scene_000_mask.pgm"}));
  CHECK(table.out.find("MAE") != std::string::npos);
  CHECK(call(ws.with({"eval", "--pred", "data/scene_000_mask.pgm"})).code == 1);
  CHECK(call(ws.with({"eval", "--pred", "missing.pgm", "--gt", "data/scene_000_mask.pgm"})).code == 2);

  Result t = call(ws.with({"train", "--data", "data/manifest.tsv", "--out", "model"}));
  CHECK(t.code == 1);
  CHECK(t.err.find("pretrain-teacher") != std::string::npos);
  CHECK(!fs::exists(ws.dir.file("model")));
}

TEST_CASE("two-stage pipeline through the CLI") {
  Workspace ws;
  REQUIRE(call(ws.with({"synth", "--out", "data"})).code == 0);
  Result p = call(ws.with({"pretrain-teacher", "--data", "data/manifest.tsv", "--out", "teacher", "--log", "t.jsonl"}));
  REQUIRE(p.code == 0);
  CHECK(load_checkpoint(ws.dir.file("teacher")).stage == "teacher");
  CHECK(call(ws.with({"pretrain-teacher", "--data", "data/manifest.tsv", "--out", "teacher"})).code == 1);

  Result t = call(ws.with({"train", "--data", "data/manifest.tsv", "--teacher", "teacher", "--out", "model", "--log",
                           "train.jsonl"}));
  REQUIRE(t.code == 0);
  std::ifstream log(ws.dir.file("train.jsonl"));
  std::string line;
  int steps = 0;
  while (std::getline(log, line)) {
    auto j = nlohmann::json::parse(line);
    if (j.contains("step")) {
      ++steps;
      CHECK(j.contains("L_S"));
      CHECK(j.contains("L_sod"));
      CHECK(j.contains("L_dis"));
      CHECK(j.contains("L"));
    }
  }
  CHECK(steps > 0);

  Result i = call(ws.with({"infer", "--model", "model", "--cube", "data/scene_002.hdr", "--out", "p.pgm", "--gt",
                           "data/scene_002_mask.pgm", "--montage", "p.png"}));
  REQUIRE(i.code == 0);
  const SaliencyMask y = load_mask(ws.dir.file("p.pgm"));
  CHECK(y.height == 16);
  CHECK(y.width == 16);
  CHECK(slurp(ws.dir.file("p.png")).substr(1, 3) == "PNG");
  CHECK(call(ws.with({"infer", "--model", "model", "--cube", "data/scene_002.hdr", "--out", "p.pgm"})).code == 1);
  CHECK(call(ws.with({"infer", "--model", "teacher", "--cube", "data/scene_002.hdr", "--out", "q.pgm"})).code == 1);

  Result ev = call(ws.with({"eval", "--model", "model", "--data", "data/manifest.tsv", "--json"}));
  REQUIRE(ev.code == 0);
  CHECK(nlohmann::json::parse(ev.out)["images"] == 4);

  Result d = call(ws.with({"diagnose", "--data", "data/manifest.tsv", "--teacher", "teacher", "--model", "model",
                           "--json"}));
  REQUIRE(d.code == 0);
  std::istringstream rows(d.out);
  std::vector<std::string> names;
  while (std::getline(rows, line)) names.push_back(nlohmann::json::parse(line)["name"]);
  CHECK(names == std::vector<std::string>{"teacher", "dmssn student", "pca"});

  Result ab = call(ws.with({"diagnose", "--data", "data/manifest.tsv", "--teacher", "teacher", "--ablate"}));
  REQUIRE(ab.code == 0);
  CHECK(ab.out.find("student (pure)") != std::string::npos);
  CHECK(ab.out.find("student (distilled)") != std::string::npos);
  CHECK(ab.out.find("SCC") != std::string::npos);

  // a model trained for 8 bands rejects a 16-band cube
  HyperCube wide(16, 16, 16);
  for (std::size_t k = 0; k < wide.values.size(); ++k) wide.values[k] = static_cast<float>(k % 7);
  save_cube(wide, ws.dir.file("wide.hdr"));
  CHECK(call(ws.with({"infer", "--model", "model", "--cube", "wide.hdr", "--out", "w.pgm"})).code == 1);
}
