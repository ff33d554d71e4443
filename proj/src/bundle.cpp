// SPDX-License-Identifier: Apache-2.0
#include "cystseg/bundle.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "byte_io.hpp"

namespace cystseg {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kParamMagic = "PRM1";

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(Errc::missing_file, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_failure, "cannot write " + p.string());
  out << text;
}

}  // namespace

void save_snapshot(const Snapshot& s, const fs::path& path) {
  s.params.validate();
  detail::ByteWriter out;
  out.magic(kParamMagic);
  out.u32(s.iteration);
  out.f32(s.params.input_scale);
  out.f32(s.params.input_offset);
  out.u32(static_cast<std::uint32_t>(s.params.layers.size()));
  for (const ConvLayer& L : s.params.layers) {
    out.u32(L.in_channels);
    out.u32(L.out_channels);
    out.u32(L.kernel);
    out.u32(static_cast<std::uint32_t>(L.activation));
  }
  out.u64(s.params.parameter_count());
  for (const ConvLayer& L : s.params.layers) {
    for (float w : L.weights) out.f32(w);
    for (float b : L.biases) out.f32(b);
  }
  out.write_to(path);
}

Snapshot load_snapshot(const fs::path& path) {
  auto in = detail::ByteReader::from_file(path);
  in.expect_magic(kParamMagic);
  Snapshot s;
  s.iteration = in.u32();
  s.params.input_scale = in.f32();
  s.params.input_offset = in.f32();
  const std::uint32_t n_layers = in.u32();
  if (n_layers > 64) throw Error(Errc::shape_mismatch, "implausible layer count in " + path.string());
  s.params.layers.resize(n_layers);
  for (ConvLayer& L : s.params.layers) {
    L.in_channels = in.u32();
    L.out_channels = in.u32();
    L.kernel = in.u32();
    const std::uint32_t act = in.u32();
    if (act > 1) throw Error(Errc::shape_mismatch, "unknown activation tag in " + path.string());
    L.activation = static_cast<Activation>(act);
  }
  const std::uint64_t count = in.u64();
  std::uint64_t expected = 0;
  for (const ConvLayer& L : s.params.layers) expected += L.weight_count() + L.out_channels;
  if (count != expected) throw Error(Errc::shape_mismatch, "parameter count disagrees with architecture");
  in.need(count * 4);
  for (ConvLayer& L : s.params.layers) {
    L.weights.resize(L.weight_count());
    L.biases.resize(L.out_channels);
    for (float& w : L.weights) w = in.f32();
    for (float& b : L.biases) b = in.f32();
  }
  if (in.remaining() != 0) throw Error(Errc::shape_mismatch, "trailing bytes in " + path.string());
  s.params.validate();
  return s;
}

void save_stage(const StageModels& models, Stage stage, const fs::path& root) {
  models.validate();
  for (ViewAxis a : kAllViews) {
    const fs::path dir = root / stage_name(stage) / view_name(a);
    fs::create_directories(dir);
    for (const Snapshot& s : models.view(a)) save_snapshot(s, dir / (std::to_string(s.iteration) + ".prm"));
  }
}

StageModels load_stage(Stage stage, const fs::path& root) {
  StageModels models;
  for (ViewAxis a : kAllViews) {
    const fs::path dir = root / stage_name(stage) / view_name(a);
    if (!fs::is_directory(dir)) throw Error(Errc::missing_file, "missing snapshot directory " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".prm") files.push_back(e.path());
    }
    auto& list = models.view(a);
    for (const fs::path& f : files) list.push_back(load_snapshot(f));
    std::sort(list.begin(), list.end(), [](const Snapshot& x, const Snapshot& y) { return x.iteration < y.iteration; });
  }
  models.validate();
  return models;
}

std::string manifest_json(const BundleManifest& m) {
  nlohmann::ordered_json j;
  j["mode"] = m.mode;
  j["seed"] = m.seed;
  j["train"] = {{"learning_rate", m.train.learning_rate},
                {"iterations", m.train.iterations},
                {"snapshot_at", m.train.snapshot_at},
                {"seed", m.train.seed},
                {"smooth", m.train.smooth}};
  j["transform"] = {{"t", m.transform.t},
                    {"prob_threshold", m.transform.prob_threshold},
                    {"crop_margin", m.transform.crop_margin}};
  nlohmann::ordered_json seeds;
  const std::vector<Stage> stages = m.mode == "baseline" ? std::vector<Stage>{Stage::baseline}
                                                          : std::vector<Stage>{Stage::pancreas, Stage::cyst};
  for (Stage s : stages) {
    for (ViewAxis a : kAllViews) {
      seeds[std::string(stage_name(s))][std::string(view_name(a))] = stage_view_seed(m.train.seed, s, a);
    }
  }
  j["model_seeds"] = seeds;
  return j.dump(2) + "\n";
}

BundleManifest parse_manifest(const std::string& text) {
  BundleManifest m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.mode = j.at("mode").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    const auto& t = j.at("train");
    m.train.learning_rate = t.at("learning_rate").get<double>();
    m.train.iterations = t.at("iterations").get<std::uint32_t>();
    m.train.snapshot_at = t.at("snapshot_at").get<std::vector<std::uint32_t>>();
    m.train.seed = t.at("seed").get<std::uint64_t>();
    m.train.smooth = t.at("smooth").get<double>();
    const auto& x = j.at("transform");
    m.transform.t = x.at("t").get<double>();
    m.transform.prob_threshold = x.at("prob_threshold").get<double>();
    m.transform.crop_margin = x.at("crop_margin").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::validation, std::string("bad bundle manifest: ") + e.what());
  }
  return m;
}

void save_bundle(const Bundle& b, const fs::path& root) {
  fs::create_directories(root);
  if (b.pancreas) save_stage(*b.pancreas, Stage::pancreas, root);
  if (b.cyst) save_stage(*b.cyst, Stage::cyst, root);
  if (b.baseline) save_stage(*b.baseline, Stage::baseline, root);
  write_text(root / "manifest.json", manifest_json(b.manifest));
}

Bundle load_bundle(const fs::path& root) {
  Bundle b;
  b.manifest = parse_manifest(read_text(root / "manifest.json"));
  if (b.manifest.mode == "baseline") {
    b.baseline = load_stage(Stage::baseline, root);
  } else if (b.manifest.mode == "cascade") {
    b.pancreas = load_stage(Stage::pancreas, root);
    b.cyst = load_stage(Stage::cyst, root);
  } else {
    throw Error(Errc::validation, "bundle mode must be cascade or baseline");
  }
  return b;
}

}  // namespace cystseg
