// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "cystseg/bundle.hpp"
#include "cystseg/cli.hpp"
#include "cystseg/eval.hpp"
#include "cystseg/loss.hpp"
#include "cystseg/model.hpp"
#include "cystseg/phantom.hpp"
#include "cystseg/pipeline.hpp"
#include "cystseg/transform.hpp"
#include "test_util.hpp"

using namespace cystseg;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel_error(double analytic, double fd) { return std::abs(analytic - fd) / (std::abs(fd) + 1e-8); }

Outcome loss_gradient() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  std::bernoulli_distribution bit(0.35);
  double worst = 0;
  for (int inst = 0; inst < 100; ++inst) {
    std::vector<double> c(64);
    std::vector<std::uint8_t> t(64);
    for (auto& v : c) v = u(rng);
    for (auto& v : t) v = bit(rng);
    const auto g = dsc_loss_grad(c, t);
    for (std::size_t k = 0; k < c.size(); ++k) {
      const double keep = c[k];
      c[k] = keep + 1e-4;
      const double up = dsc_loss(c, t).dsc;
      c[k] = keep - 1e-4;
      const double down = dsc_loss(c, t).dsc;
      c[k] = keep;
      worst = std::max(worst, rel_error(g[k], (up - down) / 2e-4));
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-5 && secs < 5.0, fmt("100 instances, max rel error %.2e, %.2fs", worst, secs)};
}

Outcome network_gradient() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  std::normal_distribution<float> pixel(0.0f, 0.3f);
  std::uniform_real_distribution<float> bias(-0.3f, 0.3f);
  std::bernoulli_distribution bit(0.3);
  constexpr double h = 1e-3;
  std::vector<double> worst(6, 0.0);
  int accepted = 0, redrawn = 0;
  while (accepted < 3 && redrawn < 1000) {
    ModelParams p = init_params(rng(), 1.0f, 0.0f);
    for (auto& L : p.layers)
      for (float& b : L.biases) b = bias(rng);
    Plane<float> s(8, 8);
    for (float& v : s.data) v = pixel(rng);
    std::vector<std::uint8_t> t(64);
    for (auto& v : t) v = bit(rng);

    const ForwardResult base = forward(p, s);
    const auto g = dsc_loss_grad(base.pred.data, t);
    Plane<double> up(8, 8);
    for (std::size_t i = 0; i < 64; ++i) up.data[i] = -g[i];
    const ParamGrads an = backward(p, base.cache, up);

    bool kink = false;
    auto objective = [&](const ModelParams& q) {
      const ForwardResult r = forward(q, s);
      for (std::size_t l = 1; l < r.cache.activations.size() - 1; ++l)
        for (std::size_t i = 0; i < r.cache.activations[l].size(); ++i)
          kink |= (r.cache.activations[l][i] > 0) != (base.cache.activations[l][i] > 0);
      return dsc_loss(r.pred.data, t).objective;
    };
    std::vector<double> local(6, 0.0);
    for (std::size_t l = 0; l < 3 && !kink; ++l)
      for (int which = 0; which < 2 && !kink; ++which) {
        auto& values = which == 0 ? p.layers[l].weights : p.layers[l].biases;
        const auto& grads = which == 0 ? an.weights[l] : an.biases[l];
        for (std::size_t k = 0; k < values.size() && !kink; ++k) {
          const float keep = values[k];
          const float hi = float(keep + h), lo = float(keep - h);
          values[k] = hi;
          const double a = objective(p);
          values[k] = lo;
          const double b = objective(p);
          values[k] = keep;
          local[2 * l + std::size_t(which)] =
              std::max(local[2 * l + std::size_t(which)], rel_error(grads[k], (a - b) / (double(hi) - double(lo))));
        }
      }
    if (kink) {
      ++redrawn;
      continue;
    }
    for (std::size_t i = 0; i < 6; ++i) worst[i] = std::max(worst[i], local[i]);
    ++accepted;
  }
  const double m = *std::max_element(worst.begin(), worst.end());
  const double secs = seconds_since(t0);
  return {accepted == 3 && m < 1e-3 && secs < 60.0,
          fmt("6 tensors x %d slices (%d kink draws redrawn), max rel error %.2e "
              "[w0 %.1e b0 %.1e w1 %.1e b1 %.1e w2 %.1e b2 %.1e], %.2fs",
              accepted, redrawn, m, worst[0], worst[1], worst[2], worst[3], worst[4], worst[5], secs)};
}

Outcome distance_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(303);
  const Dims d{16, 16, 16};
  const double ts[] = {1, 2, 5, 15};
  const double densities[] = {0.0005, 0.002, 0.01, 0.05};
  int equal = 0;
  for (int inst = 0; inst < 200; ++inst) {
    TransformParams p;
    p.t = ts[inst % 4];
    const BinaryMask src = testutil::random_mask(d, densities[(inst / 4) % 4], rng);
    equal += distance_mask(src, p, d) == brute_force_distance_mask(src, p, d);
  }
  const double secs = seconds_since(t0);
  return {equal == 200 && secs < 30.0, fmt("%d/200 instances identical, %.2fs", equal, secs)};
}

Outcome factorization() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  const Dims d{16, 16, 16};
  int identical = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const Volume x = testutil::random_volume(d, rng);
    ProbMap p(d);
    for (float& v : p.values()) v = u(rng) < 0.005f ? 0.5f + 0.5f * u(rng) + 1e-3f : 0.5f * u(rng);
    for (float& v : p.values()) v = std::min(v, 1.0f);
    ProbMap q = p;
    for (float& v : q.values()) {
      const float eps = 0.1f * u(rng);
      v = v > 0.5f ? std::max(std::nextafter(0.5f, 1.0f), v - eps) : std::min(0.5f, v + eps);
    }
    TransformParams tp;
    tp.t = 1.0 + double(inst % 6);
    const Volume a = apply_transform(x, p, tp), b = apply_transform(x, q, tp);
    bool same = true;
    for (std::size_t i = 0; i < a.size(); ++i)
      same &= std::bit_cast<std::uint32_t>(a[i]) == std::bit_cast<std::uint32_t>(b[i]);
    identical += same;
  }

  PhantomSpec spec;
  spec.dims = {32, 32, 32};
  spec.organ_axis_min = 5;
  spec.organ_axis_max = 7;
  spec.center_jitter = 2;
  spec.distractor_count = 1;
  spec.distractor_radius_min = 2;
  spec.distractor_radius_max = 3;
  spec.conformance_t = 8;
  const auto data = generate_dataset(4, spec, 17);
  std::vector<OrganCase> organ;
  std::vector<FullCase> full;
  for (const PhantomCase& c : data) {
    organ.push_back({c.volume, c.pancreas});
    full.push_back({c.volume, c.pancreas, c.cyst});
  }
  TrainConfig cfg;
  cfg.iterations = 90;
  cfg.snapshot_at = {10, 20, 30, 40, 50, 60, 70, 80, 90};
  cfg.seed = 23;
  TransformParams tp;
  tp.t = 8;
  const StageModels alone = train_stage1(organ, cfg);
  const StageModels cyst = train_stage2(full, cfg, tp);
  const StageModels with_stage2 = train_stage1(organ, cfg);
  bool snaps_equal = alone == with_stage2;
  for (ViewAxis a : kAllViews)
    for (std::size_t k = 0; k < alone.view(a).size(); ++k)
      for (std::size_t l = 0; l < 3; ++l) {
        const auto& wa = alone.view(a)[k].params.layers[l].weights;
        const auto& wb = with_stage2.view(a)[k].params.layers[l].weights;
        for (std::size_t i = 0; i < wa.size(); ++i)
          snaps_equal &= std::bit_cast<std::uint32_t>(wa[i]) == std::bit_cast<std::uint32_t>(wb[i]);
      }
  (void)cyst;
  return {identical == 50 && snaps_equal,
          fmt("(a) %d/50 sub-threshold perturbations bit-identical; (b) stage-1 snapshots %s with stage 2 trained in "
              "the same run",
              identical, snaps_equal ? "bit-identical" : "DIFFER")};
}

Outcome fusion_laws() {
  const Dims d{2, 2, 2};
  std::array<BinaryMask, 3> views{BinaryMask(d), BinaryMask(d), BinaryMask(d)};
  for (std::size_t pattern = 0; pattern < 8; ++pattern)
    for (std::size_t v = 0; v < 3; ++v) views[v][pattern] = (pattern >> v) & 1u;
  const BinaryMask fused = fuse_views(views);
  int agree = 0;
  for (std::size_t pattern = 0; pattern < 8; ++pattern) {
    const int votes = std::popcount(pattern);
    agree += fused[pattern] == (votes >= 2 ? 1 : 0);
  }

  std::mt19937_64 rng(505);
  int monotone = 0, idempotent = 0, instances = 0;
  for (int inst = 0; inst < 5; ++inst) {
    const Volume v = testutil::random_volume({12, 10, 8}, rng);
    std::vector<Snapshot> snaps;
    for (std::uint32_t k = 0; k < 5; ++k, ++instances) {
      ModelParams p = init_params(rng());
      p.layers[2].biases[0] = 0.4f * (float(k) - 2.0f);
      snaps.push_back({p, k + 1});
      const ViewAxis axis = kAllViews[k % 3];
      const BinaryMask before = snaps.size() == 1 ? BinaryMask(v.dims())
                                                  : predict_view(std::span<const Snapshot>(snaps).first(k), v, axis);
      const BinaryMask now = predict_view(snaps, v, axis);
      bool sub = true;
      for (std::size_t i = 0; i < now.size(); ++i) sub &= !(before[i] && !now[i]);
      monotone += sub;
      const std::vector<Snapshot> nine(9, snaps.back());
      const std::vector<Snapshot> one{snaps.back()};
      idempotent += predict_view(nine, v, axis) == predict_view(one, v, axis);
    }
  }
  return {agree == 8 && monotone == instances && idempotent == instances,
          fmt("majority matches %d/8 view-bit patterns; union monotone %d/%d, idempotent %d/%d", agree, monotone,
              instances, idempotent, instances)};
}

Outcome dataset_statistics() {
  const auto t0 = Clock::now();
  const PhantomSpec spec;
  const auto cases = generate_dataset(24, spec, 7);
  std::size_t contained = 0, small = 0;
  double largest = 0;
  for (const PhantomCase& c : cases) {
    const double frac = double(c.cyst.count()) / double(spec.dims.voxels());
    largest = std::max(largest, frac);
    small += frac < 0.001;
    contained += containment_stat(c) >= 0.95;
  }
  const double secs = seconds_since(t0);
  return {small == 24 && contained >= 20 && secs < 60.0,
          fmt("cyst fraction < 0.1%% in %zu/24 cases (max %.4f%%), >=95%% containment in %zu/24, %.2fs", small,
              100 * largest, contained, secs)};
}

Outcome benchmark_ordering() {
  const auto t0 = Clock::now();
  const PhantomSpec spec;
  const auto data = generate_dataset(24, spec, 7);
  CrossValConfig cfg;
  cfg.train.seed = 11;
  cfg.fold_seed = 11;
  cfg.jobs = std::max(1u, std::thread::hardware_concurrency());
  const std::set<Mode> modes{Mode::cascade, Mode::oracle, Mode::baseline};
  const auto r = cross_validate(data, cfg, modes);
  const double secs = seconds_since(t0);

  cfg.jobs = 1;
  const auto again = cross_validate(data, cfg, modes);
  const bool reproducible = results_csv(again) == results_csv(r) && summary_json(again) == summary_json(r);

  const EvalStats& o = r.at(Mode::oracle).cyst;
  const EvalStats& c = r.at(Mode::cascade).cyst;
  const EvalStats& b = r.at(Mode::baseline).cyst;
  const bool order = o.mean >= c.mean && c.mean > b.mean && c.miss_count <= b.miss_count;
  return {order && reproducible && secs < 1800.0,
          fmt("cyst DSC oracle %.4f (misses %zu) / cascade %.4f (misses %zu) / baseline %.4f (misses %zu); "
              "pancreas DSC cascade %.4f; %s across --jobs; %.0fs with %zu jobs",
              o.mean, o.miss_count, c.mean, c.miss_count, b.mean, b.miss_count, r.at(Mode::cascade).pancreas->mean,
              reproducible ? "bit-reproducible" : "NOT reproducible", secs,
              std::size_t(std::max(1u, std::thread::hardware_concurrency())))};
}

Outcome memorization() {
  const auto t0 = Clock::now();
  const PhantomCase c = generate_phantom(PhantomSpec{}, 808);
  std::size_t best = 0, best_count = 0;
  for (std::size_t z = 0; z < c.volume.dims().nz; ++z) {
    const Plane<std::uint8_t> s = extract_slice<std::uint8_t>(c.pancreas, ViewAxis::axial, z);
    const std::size_t n = std::size_t(std::count(s.data.begin(), s.data.end(), 1));
    if (n > best_count) {
      best_count = n;
      best = z;
    }
  }
  const std::vector<TrainingPair> one{{extract_slice<float>(c.volume, ViewAxis::axial, best),
                                       extract_slice<std::uint8_t>(c.pancreas, ViewAxis::axial, best)}};
  TrainConfig cfg;
  cfg.seed = 5;
  const auto snaps = train(one, cfg);
  const Plane<double> pred = predict_slice(snaps.back().params, one[0].slice);
  double inter = 0, a = 0, g = 0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double p = pred.data[i] > 0.5 ? 1.0 : 0.0;
    inter += p * one[0].target.data[i];
    a += p;
    g += one[0].target.data[i];
  }
  const double dsc = 2 * inter / (a + g);
  const double secs = seconds_since(t0);
  return {dsc >= 0.9 && secs < 60.0, fmt("64x64 organ slice, %u steps, DSC %.4f, %.2fs", cfg.iterations, dsc, secs)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome round_trips() {
  testutil::TempDir dir("accept9");
  std::mt19937_64 rng(909);
  bool ok = true;
  std::string notes;

  const Volume v = testutil::random_volume({7, 5, 3}, rng);
  save_volume(v, dir / "v.vxl");
  const Volume vb = load_volume(dir / "v.vxl");
  bool vol_ok = vb.spacing() == v.spacing() && vb.dims() == v.dims();
  for (std::size_t i = 0; i < v.size(); ++i) vol_ok &= std::bit_cast<std::uint32_t>(vb[i]) == std::bit_cast<std::uint32_t>(v[i]);
  save_volume(vb, dir / "v2.vxl");
  vol_ok &= slurp(dir / "v.vxl") == slurp(dir / "v2.vxl");

  const BinaryMask m = testutil::random_mask({6, 6, 6}, 0.3, rng);
  save_mask(m, dir / "m.msk");
  bool mask_ok = load_mask(dir / "m.msk") == m;
  save_mask(load_mask(dir / "m.msk"), dir / "m2.msk");
  mask_ok &= slurp(dir / "m.msk") == slurp(dir / "m2.msk");

  Bundle b;
  b.manifest.mode = "cascade";
  b.manifest.seed = 3;
  for (auto* stage : {&b.pancreas, &b.cyst}) {
    StageModels s;
    for (ViewAxis a : kAllViews) s.view(a).push_back({init_params(rng()), 1000});
    *stage = s;
  }
  save_bundle(b, dir / "bundle");
  const Bundle bb = load_bundle(dir / "bundle");
  bool bundle_ok = *bb.pancreas == *b.pancreas && *bb.cyst == *b.cyst && bb.manifest.train == b.manifest.train;
  save_bundle(bb, dir / "bundle2");
  bundle_ok &= slurp(dir / "bundle/manifest.json") == slurp(dir / "bundle2/manifest.json");
  bundle_ok &= slurp(dir / "bundle/cyst/axial/1000.prm") == slurp(dir / "bundle2/cyst/axial/1000.prm");
  ok = vol_ok && mask_ok && bundle_ok;
  notes += fmt("VXL %s, MSK %s, PRM+manifest %s; ", vol_ok ? "ok" : "FAIL", mask_ok ? "ok" : "FAIL",
               bundle_ok ? "ok" : "FAIL");

  {
    std::ofstream cfg(dir / "cfg.json");
    cfg << R"({"n": 8, "train": {"iterations": 60, "snapshot_at": [20, 40, 60]}, "transform": {"t": 10},
               "phantom": {"dims": [32, 32, 32], "organ_axis_min": 5, "organ_axis_max": 7, "center_jitter": 2,
                           "distractor_count": 1, "distractor_radius_min": 2, "distractor_radius_max": 3,
                           "conformance_t": 10}})";
  }
  const std::string cfg = (dir / "cfg.json").string();
  std::ostringstream out, err;
  int rc = run_cli({"gen", "--config", cfg, "--seed", "21", "--out", (dir / "data").string()}, out, err);
  const std::string data = (dir / "data").string();
  const unsigned hw = std::max(2u, std::thread::hardware_concurrency());
  rc |= run_cli({"crossval", "--config", cfg, "--seed", "21", "--data", data, "--out", (dir / "cv_a").string()}, out,
                err);
  rc |= run_cli({"crossval", "--config", cfg, "--seed", "21", "--data", data, "--out", (dir / "cv_b").string()}, out,
                err);
  rc |= run_cli({"crossval", "--config", cfg, "--seed", "21", "--data", data, "--out", (dir / "cv_c").string(),
                 "--jobs", std::to_string(hw)},
                out, err);
  bool cv_ok = rc == 0;
  for (const char* f : {"results.csv", "summary.json"}) {
    const std::string a = slurp(dir / "cv_a" / f);
    cv_ok &= !a.empty() && a == slurp(dir / "cv_b" / f) && a == slurp(dir / "cv_c" / f);
  }
  ok &= cv_ok;
  notes += fmt("crossval x3 (--jobs 1, 1, %u) CSV/JSON %s", hw, cv_ok ? "byte-identical" : "DIFFER");
  if (rc != 0) notes += " [cli error: " + err.str() + "]";
  return {ok, notes};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "loss gradient vs central differences", loss_gradient},
      {2, "network gradient vs central differences", network_gradient},
      {3, "distance mask equals brute-force oracle", distance_oracle},
      {4, "factorization of the two stages", factorization},
      {5, "fusion and snapshot-union laws", fusion_laws},
      {6, "phantom dataset statistics", dataset_statistics},
      {7, "benchmark ordering oracle >= cascade > baseline", benchmark_ordering},
      {8, "single-slice memorization", memorization},
      {9, "round trips and crossval determinism", round_trips},
  };
  std::set<int> only;  // optional criterion ids on the command line
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failures = 0, ran = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    ++ran;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("[%s] %d. %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failures, ran);
  return failures == 0 ? 0 : 1;
}
