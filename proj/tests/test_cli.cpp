// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cystseg/bundle.hpp"
#include "cystseg/cli.hpp"
#include "cystseg/volume.hpp"
#include "test_util.hpp"

using namespace cystseg;
using testutil::TempDir;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

// A 32^3 dataset and a few-step schedule keep the end-to-end runs fast.
std::string small_config(const TempDir& dir) {
  const auto path = dir / "cfg.json";
  write(path, R"({
    "train": {"iterations": 6, "snapshot_at": [2, 4, 6], "learning_rate": 0.01},
    "transform": {"t": 8},
    "phantom": {"dims": [32, 32, 32], "organ_axis_min": 4, "organ_axis_max": 6, "center_jitter": 2,
                "cyst_radius_min": 1.5, "cyst_radius_max": 2.0, "distractor_count": 1,
                "distractor_radius_min": 2, "distractor_radius_max": 3, "conformance_t": 8}
  })");
  return path.string();
}

}  // namespace

TEST_CASE("config precedence: flag over file over default") {
  RunConfig cfg;
  CHECK(cfg.jobs == 1);
  CHECK(cfg.train.iterations == 3000);
  apply_config_json(cfg, R"({"seed": 9, "jobs": 3, "train": {"iterations": 50}, "transform": {"t": 7}})");
  CHECK(*cfg.seed == 9);
  CHECK(cfg.jobs == 3);
  CHECK(cfg.train.iterations == 50);
  CHECK(cfg.transform.t == 7);
  CHECK(cfg.train.learning_rate == 3e-2);
  CHECK_THROWS_AS(apply_config_json(cfg, "{"), Error);
  CHECK_THROWS_AS(apply_config_json(cfg, R"({"jobs": "many"})"), Error);

  TempDir dir("prec");
  const auto path = dir / "c.json";
  write(path, R"({"seed": 4, "n": 5, "phantom": {"dims": [16, 16, 16], "organ_axis_min": 3, "organ_axis_max": 4,
                  "center_jitter": 1, "cyst_radius_min": 1, "cyst_radius_max": 1.5, "distractor_count": 0,
                  "conformance_t": 6}})");
  REQUIRE(cli({"gen", "--config", path.string(), "--out", (dir / "a").string()}).code == kExitOk);
  REQUIRE(cli({"gen", "--config", path.string(), "--seed", "5", "--out", (dir / "b").string()}).code == kExitOk);
  const auto ma = nlohmann::json::parse(slurp(dir / "a/manifest.json"));
  const auto mb = nlohmann::json::parse(slurp(dir / "b/manifest.json"));
  CHECK(ma.at("master_seed") == 4);
  CHECK(mb.at("master_seed") == 5);
  CHECK(ma.at("n") == 5);
  CHECK(ma.at("spec").at("dims")[0] == 16);
}

TEST_CASE("exit codes for validation and runtime failures") {
  TempDir dir("codes");
  const Run no_seed = cli({"gen", "--out", (dir / "d").string()});
  CHECK(no_seed.code == kExitValidation);
  CHECK(no_seed.err.find("--seed") != std::string::npos);
  CHECK(cli({}).code == kExitValidation);
  CHECK(cli({"bogus"}).code == kExitValidation);
  CHECK(cli({"crossval", "--mode", "sideways"}).code == kExitValidation);
  CHECK(cli({"gen", "--seed", "1", "--n", "2", "--out", (dir / "d").string()}).code == kExitRuntime);
  CHECK(cli({"train", "--seed", "1", "--data", (dir / "none").string(), "--out", (dir / "m").string()}).code ==
        kExitValidation);
  CHECK(cli({"gen", "--help"}).code == kExitOk);
}

TEST_CASE("gradcheck passes and the corrupted hook fails") {
  const Run ok = cli({"gradcheck"});
  CHECK(ok.code == kExitOk);
  CHECK(ok.out.find("PASS") != std::string::npos);
  for (const char* t : {"layer0.weights", "layer0.biases", "layer1.weights", "layer1.biases", "layer2.weights",
                        "layer2.biases"})
    CHECK(ok.out.find(t) != std::string::npos);
  const Run bad = cli({"gradcheck", "--corrupt-gradient"});
  CHECK(bad.code != kExitOk);
  CHECK(bad.out.find("FAIL") != std::string::npos);
}

TEST_CASE("gen, train, predict and crossval end to end") {
  TempDir dir("e2e");
  const std::string cfg = small_config(dir);
  const std::string data = (dir / "data").string();
  REQUIRE(cli({"gen", "--config", cfg, "--seed", "7", "--n", "8", "--out", data}).code == kExitOk);
  CHECK(std::filesystem::exists(dir / "data/case_007.vxl"));
  CHECK(std::filesystem::exists(dir / "data/case_007.pancreas.msk"));
  CHECK(std::filesystem::exists(dir / "data/case_007.cyst.msk"));
  const std::string first = slurp(dir / "data/case_003.vxl");
  REQUIRE(cli({"gen", "--config", cfg, "--seed", "7", "--n", "8", "--out", (dir / "data2").string()}).code == kExitOk);
  CHECK(slurp(dir / "data2/case_003.vxl") == first);
  CHECK(slurp(dir / "data2/manifest.json") == slurp(dir / "data/manifest.json"));

  const std::string models = (dir / "models").string();
  REQUIRE(cli({"train", "--config", cfg, "--seed", "3", "--data", data, "--out", models}).code == kExitOk);
  for (const char* stage : {"pancreas", "cyst"})
    for (const char* view : {"coronal", "sagittal", "axial"})
      for (const char* it : {"2", "4", "6"})
        CHECK(std::filesystem::exists(dir / (std::string("models/") + stage + "/" + view + "/" + it + ".prm")));
  REQUIRE(cli({"train", "--config", cfg, "--seed", "3", "--data", data, "--out", (dir / "models2").string(), "--jobs",
               "3"})
              .code == kExitOk);
  CHECK(slurp(dir / "models2/cyst/axial/6.prm") == slurp(dir / "models/cyst/axial/6.prm"));

  const std::string base = (dir / "base").string();
  REQUIRE(cli({"train", "--config", cfg, "--seed", "3", "--data", data, "--out", base, "--mode", "baseline"}).code ==
          kExitOk);
  CHECK(std::filesystem::exists(dir / "base/baseline/axial/6.prm"));
  CHECK_FALSE(std::filesystem::exists(dir / "base/pancreas"));

  const std::string pred = (dir / "pred").string();
  REQUIRE(cli({"predict", "--models", models, "--data", data, "--case", "case_002", "--out", pred}).code == kExitOk);
  const auto report = nlohmann::json::parse(slurp(dir / "pred/case_002.report.json"));
  CHECK(report.at("mode") == "cascade");
  CHECK(report.contains("cyst_dsc"));
  CHECK(report.contains("missed"));
  CHECK(load_mask(dir / "pred/case_002.pred.cyst.msk").dims() == Dims{32, 32, 32});
  const std::string cyst_mask = slurp(dir / "pred/case_002.pred.cyst.msk");
  REQUIRE(cli({"predict", "--models", models, "--data", data, "--case", "case_002", "--out", pred}).code == kExitOk);
  CHECK(slurp(dir / "pred/case_002.pred.cyst.msk") == cyst_mask);

  REQUIRE(cli({"predict", "--models", models, "--data", data, "--case", "case_002", "--out", pred, "--gt-pancreas"})
              .code == kExitOk);
  const auto oracle = nlohmann::json::parse(slurp(dir / "pred/case_002.report.json"));
  CHECK(oracle.at("mode") == "oracle");
  CHECK(oracle.at("pancreas_dsc") == 1.0);
  CHECK(cli({"predict", "--models", models, "--data", data, "--case", "case_999", "--out", pred}).code != kExitOk);

  const std::string cv1 = (dir / "cv1").string(), cv2 = (dir / "cv2").string();
  REQUIRE(cli({"crossval", "--config", cfg, "--seed", "11", "--data", data, "--out", cv1}).code == kExitOk);
  REQUIRE(cli({"crossval", "--config", cfg, "--seed", "11", "--data", data, "--out", cv2, "--jobs", "4"}).code ==
          kExitOk);
  const std::string csv = slurp(dir / "cv1/results.csv");
  CHECK(csv == slurp(dir / "cv2/results.csv"));
  CHECK(slurp(dir / "cv1/summary.json") == slurp(dir / "cv2/summary.json"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 3 * 8);
  const auto summary = nlohmann::json::parse(slurp(dir / "cv1/summary.json"));
  for (const char* m : {"cascade", "oracle", "baseline"}) CHECK(summary.at("cyst").contains(m));
}

TEST_CASE("an empty stage-1 output yields an all-zero cyst mask and the miss flag") {
  TempDir dir("miss");
  const Dims d{12, 12, 12};
  Volume v(d, {}, 10.0f);
  save_volume(v, dir / "case_000.vxl");
  BinaryMask cyst(d);
  cyst.at(6, 6, 6) = 1;
  save_mask(cyst, dir / "case_000.cyst.msk");

  Bundle b;
  b.manifest.mode = "cascade";
  StageModels zero;
  for (ViewAxis a : kAllViews) zero.view(a).push_back({zero_params(), 1});
  b.pancreas = zero;
  b.cyst = zero;
  save_bundle(b, dir / "models");

  REQUIRE(cli({"predict", "--models", (dir / "models").string(), "--data", dir.path().string(), "--case",
               "case_000", "--out", (dir / "out").string()})
              .code == kExitOk);
  const auto report = nlohmann::json::parse(slurp(dir / "out/case_000.report.json"));
  CHECK(report.at("missed") == true);
  CHECK(report.at("cyst_dsc") == 0.0);
  CHECK(report.at("region").is_null());
  CHECK(load_mask(dir / "out/case_000.pred.cyst.msk").count() == 0);
}
