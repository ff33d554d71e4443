// SPDX-License-Identifier: Apache-2.0
#include "cystseg/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cystseg/bundle.hpp"
#include "cystseg/eval.hpp"
#include "cystseg/gradcheck.hpp"
#include "cystseg/pipeline.hpp"

namespace cystseg {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::missing_file, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_failure, "cannot write " + p.string());
  out << text;
  if (!out) throw Error(Errc::io_failure, "write failed: " + p.string());
}

ojson phantom_to_json(const PhantomSpec& s) {
  ojson j;
  j["dims"] = {s.dims.nx, s.dims.ny, s.dims.nz};
  j["spacing"] = {s.spacing.sx, s.spacing.sy, s.spacing.sz};
  j["center_jitter"] = s.center_jitter;
  j["organ_axis_min"] = s.organ_axis_min;
  j["organ_axis_max"] = s.organ_axis_max;
  j["boundary_noise"] = s.boundary_noise;
  j["cyst_radius_min"] = s.cyst_radius_min;
  j["cyst_radius_max"] = s.cyst_radius_max;
  j["p_inside"] = s.p_inside;
  j["background_mean"] = s.background_mean;
  j["organ_mean"] = s.organ_mean;
  j["cyst_mean"] = s.cyst_mean;
  j["noise_sigma"] = s.noise_sigma;
  j["distractor_count"] = s.distractor_count;
  j["distractor_radius_min"] = s.distractor_radius_min;
  j["distractor_radius_max"] = s.distractor_radius_max;
  j["containment_target"] = s.containment_target;
  j["conformance_t"] = s.conformance_t;
  j["max_attempts"] = s.max_attempts;
  return j;
}

template <class T>
void take(const nlohmann::json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

void phantom_from_json(const nlohmann::json& j, PhantomSpec& s) {
  if (j.contains("dims")) {
    const auto d = j.at("dims").get<std::vector<std::size_t>>();
    if (d.size() != 3) throw Error(Errc::validation, "phantom.dims needs three entries");
    s.dims = {d[0], d[1], d[2]};
  }
  if (j.contains("spacing")) {
    const auto d = j.at("spacing").get<std::vector<float>>();
    if (d.size() != 3) throw Error(Errc::validation, "phantom.spacing needs three entries");
    s.spacing = {d[0], d[1], d[2]};
  }
  take(j, "center_jitter", s.center_jitter);
  take(j, "organ_axis_min", s.organ_axis_min);
  take(j, "organ_axis_max", s.organ_axis_max);
  take(j, "boundary_noise", s.boundary_noise);
  take(j, "cyst_radius_min", s.cyst_radius_min);
  take(j, "cyst_radius_max", s.cyst_radius_max);
  take(j, "p_inside", s.p_inside);
  take(j, "background_mean", s.background_mean);
  take(j, "organ_mean", s.organ_mean);
  take(j, "cyst_mean", s.cyst_mean);
  take(j, "noise_sigma", s.noise_sigma);
  take(j, "distractor_count", s.distractor_count);
  take(j, "distractor_radius_min", s.distractor_radius_min);
  take(j, "distractor_radius_max", s.distractor_radius_max);
  take(j, "containment_target", s.containment_target);
  take(j, "conformance_t", s.conformance_t);
  take(j, "max_attempts", s.max_attempts);
}

struct LoadedCase {
  std::string id;
  Volume volume;
  std::optional<BinaryMask> pancreas;
  std::optional<BinaryMask> cyst;
};

std::vector<std::string> dataset_ids(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(Errc::missing_file, "data directory not found: " + dir.string());
  std::vector<std::string> ids;
  const fs::path manifest = dir / "manifest.json";
  if (fs::exists(manifest)) {
    const auto j = nlohmann::json::parse(read_file(manifest));
    for (const auto& c : j.at("cases")) ids.push_back(c.at("case_id").get<std::string>());
    return ids;
  }
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".vxl") ids.push_back(e.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

LoadedCase load_case(const fs::path& dir, const std::string& id, bool require_masks) {
  LoadedCase c;
  c.id = id;
  c.volume = load_volume(dir / (id + ".vxl"));
  const fs::path pm = dir / (id + ".pancreas.msk"), cm = dir / (id + ".cyst.msk");
  if (require_masks || fs::exists(pm)) c.pancreas = load_mask(pm);
  if (require_masks || fs::exists(cm)) c.cyst = load_mask(cm);
  return c;
}

std::vector<PhantomCase> load_dataset(const fs::path& dir) {
  std::vector<PhantomCase> cases;
  for (const std::string& id : dataset_ids(dir)) {
    LoadedCase c = load_case(dir, id, true);
    PhantomCase pc;
    pc.case_id = id;
    pc.volume = std::move(c.volume);
    pc.pancreas = std::move(*c.pancreas);
    pc.cyst = std::move(*c.cyst);
    cases.push_back(std::move(pc));
  }
  if (cases.empty()) throw Error(Errc::empty_dataset, "no cases in " + dir.string());
  return cases;
}

std::uint64_t require_seed(const RunConfig& cfg) {
  if (!cfg.seed) throw Error(Errc::validation, "--seed is required (no implicit seeds)");
  return *cfg.seed;
}

void require_dir(const fs::path& p, const char* flag) {
  if (p.empty()) throw Error(Errc::validation, std::string(flag) + " is required");
}

int cmd_gen(const RunConfig& cfg, std::ostream& out) {
  const std::uint64_t seed = require_seed(cfg);
  require_dir(cfg.out_dir, "--out");
  cfg.phantom.validate();
  const auto cases = generate_dataset(cfg.n, cfg.phantom, seed, cfg.jobs);
  fs::create_directories(cfg.out_dir);

  ojson manifest;
  manifest["master_seed"] = seed;
  manifest["n"] = cases.size();
  manifest["spec"] = phantom_to_json(cfg.phantom);
  ojson list = ojson::array();
  std::size_t contained = 0;
  for (const PhantomCase& c : cases) {
    save_volume(c.volume, cfg.out_dir / (c.case_id + ".vxl"));
    save_mask(c.pancreas, cfg.out_dir / (c.case_id + ".pancreas.msk"));
    save_mask(c.cyst, cfg.out_dir / (c.case_id + ".cyst.msk"));
    const double ratio = containment_stat(c);
    if (ratio >= 0.95) ++contained;
    list.push_back({{"case_id", c.case_id},
                    {"seed", c.seed},
                    {"containment", ratio},
                    {"cyst_voxels", c.cyst.count()},
                    {"pancreas_voxels", c.pancreas.count()}});
  }
  manifest["cases"] = list;
  manifest["contained_cases"] = contained;
  manifest["contained_fraction"] = double(contained) / double(cases.size());
  write_file(cfg.out_dir / "manifest.json", manifest.dump(2) + "\n");
  out << "generated " << cases.size() << " cases in " << cfg.out_dir.string() << " (" << contained
      << " with >=95% containment)\n";
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const std::uint64_t seed = require_seed(cfg);
  require_dir(cfg.data_dir, "--data");
  require_dir(cfg.out_dir, "--out");
  const std::string mode = cfg.modes.empty() ? "cascade" : cfg.modes.front();
  if (mode != "cascade" && mode != "baseline") {
    throw Error(Errc::validation, "train --mode must be cascade or baseline");
  }
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  tc.validate();
  cfg.transform.validate();

  const auto data = load_dataset(cfg.data_dir);
  Bundle bundle;
  bundle.manifest = {mode, tc, cfg.transform, seed};
  if (mode == "cascade") {
    std::vector<OrganCase> organ;
    std::vector<FullCase> full;
    for (const PhantomCase& c : data) {
      organ.push_back({c.volume, c.pancreas});
      full.push_back({c.volume, c.pancreas, c.cyst});
    }
    bundle.pancreas = train_stage1(organ, tc, cfg.jobs);
    bundle.cyst = train_stage2(full, tc, cfg.transform, cfg.jobs);
  } else {
    std::vector<FullCase> full;
    for (const PhantomCase& c : data) full.push_back({c.volume, c.pancreas, c.cyst});
    bundle.baseline = train_baseline(full, tc, cfg.jobs);
  }
  save_bundle(bundle, cfg.out_dir);
  out << "trained " << mode << " bundle on " << data.size() << " cases into " << cfg.out_dir.string() << "\n";
  return kExitOk;
}

int cmd_predict(const RunConfig& cfg, std::ostream& out) {
  require_dir(cfg.model_dir, "--models");
  require_dir(cfg.data_dir, "--data");
  require_dir(cfg.out_dir, "--out");
  if (cfg.case_id.empty()) throw Error(Errc::validation, "--case is required");
  const Bundle bundle = load_bundle(cfg.model_dir);
  const LoadedCase c = load_case(cfg.data_dir, cfg.case_id, cfg.gt_pancreas);
  fs::create_directories(cfg.out_dir);

  ojson report;
  report["case_id"] = c.id;
  std::optional<BinaryMask> pancreas_pred;
  BinaryMask cyst_pred;
  std::optional<Box> region;
  if (bundle.manifest.mode == "baseline") {
    if (cfg.gt_pancreas) throw Error(Errc::validation, "--gt-pancreas needs a cascade bundle");
    report["mode"] = "baseline";
    cyst_pred = baseline_predict(c.volume, *bundle.baseline, cfg.jobs);
  } else {
    CascadeOutput o;
    if (cfg.gt_pancreas) {
      report["mode"] = "oracle";
      o = oracle_predict(c.volume, *c.pancreas, *bundle.cyst, bundle.manifest.transform, cfg.jobs);
    } else {
      report["mode"] = "cascade";
      o = cascade_predict(c.volume, CascadeModels{*bundle.pancreas, *bundle.cyst, bundle.manifest.transform},
                          cfg.jobs);
    }
    pancreas_pred = std::move(o.pancreas_pred);
    cyst_pred = std::move(o.cyst_pred);
    region = o.region;
  }

  if (pancreas_pred) save_mask(*pancreas_pred, cfg.out_dir / (c.id + ".pred.pancreas.msk"));
  save_mask(cyst_pred, cfg.out_dir / (c.id + ".pred.cyst.msk"));

  if (region) {
    report["region"] = {{"offset", {region->offset.ox, region->offset.oy, region->offset.oz}},
                        {"dims", {region->dims.nx, region->dims.ny, region->dims.nz}}};
  } else {
    report["region"] = nullptr;
  }
  if (pancreas_pred) report["pancreas_voxels"] = pancreas_pred->count();
  report["cyst_voxels"] = cyst_pred.count();
  if (pancreas_pred && c.pancreas) report["pancreas_dsc"] = dsc_metric(*pancreas_pred, *c.pancreas);
  if (c.cyst) {
    const double d = dsc_metric(cyst_pred, *c.cyst);
    report["cyst_dsc"] = d;
    report["missed"] = d == 0.0 && !c.cyst->empty_foreground();
  } else {
    report["missed"] = cyst_pred.empty_foreground();
  }
  write_file(cfg.out_dir / (c.id + ".report.json"), report.dump(2) + "\n");
  out << report.dump() << "\n";
  return kExitOk;
}

int cmd_crossval(const RunConfig& cfg, std::ostream& out) {
  const std::uint64_t seed = require_seed(cfg);
  require_dir(cfg.data_dir, "--data");
  require_dir(cfg.out_dir, "--out");
  std::set<Mode> modes;
  for (const std::string& m : cfg.modes) modes.insert(parse_mode(m));
  if (modes.empty()) modes = {Mode::cascade, Mode::oracle, Mode::baseline};

  CrossValConfig cv;
  cv.train = cfg.train;
  cv.train.seed = seed;
  cv.transform = cfg.transform;
  cv.fold_seed = seed;
  cv.jobs = cfg.jobs;
  const auto data = load_dataset(cfg.data_dir);
  const auto reports = cross_validate(data, cv, modes);
  fs::create_directories(cfg.out_dir);
  write_file(cfg.out_dir / "results.csv", results_csv(reports));
  write_file(cfg.out_dir / "summary.json", summary_json(reports));
  for (const auto& [mode, r] : reports) {
    out << std::left << std::setw(9) << mode_name(mode) << " cyst DSC " << std::fixed << std::setprecision(4)
        << r.cyst.mean << " +/- " << r.cyst.std << "  max/min " << r.cyst.max << "/" << r.cyst.min
        << "  misses " << r.cyst.miss_count << "/" << r.cyst.n << "\n";
  }
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& cfg, std::ostream& out) {
  GradCheckOptions o;
  o.seed = cfg.seed.value_or(0);
  if (cfg.corrupt_gradient) o.corrupt_factor = 1.01;
  const GradCheckReport r = run_gradcheck(o);
  out << std::scientific << std::setprecision(3);
  out << "loss gradient: " << r.loss_instances << " instances, max rel error " << r.loss_max_rel_error
      << " (tolerance " << o.loss_tolerance << ")\n";
  for (const TensorCheck& t : r.tensors) {
    out << "  " << std::left << std::setw(16) << t.name << " " << std::setw(5) << t.count
        << " entries, max rel error " << t.max_rel_error << "\n";
  }
  out << "network gradient: " << r.network_instances << " instances (" << r.network_rejected
      << " kink-straddling draws redrawn), max rel error " << r.network_max_rel_error << " (tolerance " << o.network_tolerance
      << ")\n";
  out << (r.passed ? "PASS" : "FAIL") << "\n";
  return r.passed ? kExitOk : kExitRuntime;
}

}  // namespace

void apply_config_json(RunConfig& cfg, const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    take(j, "jobs", cfg.jobs);
    take(j, "n", cfg.n);
    if (j.contains("mode")) cfg.modes = {j.at("mode").get<std::string>()};
    take(j, "modes", cfg.modes);
    if (j.contains("data")) cfg.data_dir = j.at("data").get<std::string>();
    if (j.contains("models")) cfg.model_dir = j.at("models").get<std::string>();
    if (j.contains("out")) cfg.out_dir = j.at("out").get<std::string>();
    if (j.contains("train")) {
      const auto& t = j.at("train");
      take(t, "learning_rate", cfg.train.learning_rate);
      take(t, "iterations", cfg.train.iterations);
      take(t, "snapshot_at", cfg.train.snapshot_at);
      take(t, "smooth", cfg.train.smooth);
    }
    if (j.contains("transform")) {
      const auto& t = j.at("transform");
      take(t, "t", cfg.transform.t);
      take(t, "crop_margin", cfg.transform.crop_margin);
    }
    if (j.contains("phantom")) phantom_from_json(j.at("phantom"), cfg.phantom);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::validation, std::string("bad config: ") + e.what());
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Organ-guided two-stage lesion segmentation"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs, n;
  std::optional<std::string> out_dir, data_dir, model_dir;
  std::vector<std::string> modes;
  std::optional<double> lr, t;
  std::optional<std::uint32_t> iterations;
  std::string case_id;
  bool gt_pancreas = false, corrupt = false;

  auto shared = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "reproducibility seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--mode", modes, "cascade | baseline | oracle")
        ->check(CLI::IsMember({"cascade", "baseline", "oracle"}));
  };
  auto training = [&](CLI::App* sub) {
    sub->add_option("--data", data_dir, "dataset directory");
    sub->add_option("--iterations", iterations, "SGD steps per model");
    sub->add_option("--lr", lr, "learning rate");
    sub->add_option("--t", t, "organ distance threshold (voxels)");
  };

  CLI::App* gen = app.add_subcommand("gen", "generate a phantom dataset");
  shared(gen);
  gen->add_option("--n", n, "number of cases");
  CLI::App* train_cmd = app.add_subcommand("train", "train a model bundle");
  shared(train_cmd);
  training(train_cmd);
  CLI::App* predict = app.add_subcommand("predict", "segment one case");
  shared(predict);
  predict->add_option("--models", model_dir, "model bundle directory");
  predict->add_option("--data", data_dir, "dataset directory");
  predict->add_option("--case", case_id, "case id")->required();
  predict->add_flag("--gt-pancreas", gt_pancreas, "use the ground-truth organ mask (oracle mode)");
  CLI::App* crossval = app.add_subcommand("crossval", "4-fold cross-validation");
  shared(crossval);
  training(crossval);
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  shared(gradcheck);
  gradcheck->add_flag("--corrupt-gradient", corrupt)->group("");  // negative-control hook

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) apply_config_json(cfg, read_file(config_path));
    if (seed) cfg.seed = seed;
    if (jobs) cfg.jobs = *jobs;
    if (n) cfg.n = *n;
    if (out_dir) cfg.out_dir = *out_dir;
    if (data_dir) cfg.data_dir = *data_dir;
    if (model_dir) cfg.model_dir = *model_dir;
    if (!modes.empty()) cfg.modes = modes;
    if (lr) cfg.train.learning_rate = *lr;
    if (iterations) cfg.train.iterations = *iterations;
    if (t) cfg.transform.t = *t;
    cfg.case_id = case_id;
    cfg.gt_pancreas = gt_pancreas;
    cfg.corrupt_gradient = corrupt;

    if (gen->parsed()) return cmd_gen(cfg, out);
    if (train_cmd->parsed()) return cmd_train(cfg, out);
    if (predict->parsed()) return cmd_predict(cfg, out);
    if (crossval->parsed()) return cmd_crossval(cfg, out);
    return cmd_gradcheck(cfg, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    const bool validation = e.code() == Errc::validation || e.code() == Errc::invalid_argument ||
                            e.code() == Errc::missing_file;
    return validation ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("cystseg");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run_cli(int(argv.size()), argv.data(), out, err);
}

}  // namespace cystseg
