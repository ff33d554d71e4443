// SPDX-License-Identifier: Apache-2.0
#include "cystseg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cystseg/parallel.hpp"
#include "cystseg/pipeline.hpp"

namespace cystseg {

double dsc_metric(const BinaryMask& a, const BinaryMask& g) {
  require_same_dims(a.dims(), g.dims(), "dsc_metric");
  std::size_t na = 0, ng = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i];
    ng += g[i];
    both += a[i] & g[i];
  }
  if (na + ng == 0) return 1.0;
  return 2.0 * double(both) / double(na + ng);
}

std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::cascade: return "cascade";
    case Mode::oracle: return "oracle";
    case Mode::baseline: return "baseline";
  }
  return "?";
}

Mode parse_mode(std::string_view name) {
  for (Mode m : {Mode::cascade, Mode::oracle, Mode::baseline}) {
    if (mode_name(m) == name) return m;
  }
  throw Error(Errc::validation, "unknown mode '" + std::string(name) + "'");
}

EvalStats aggregate(const std::vector<CaseResult>& results, Field field) {
  std::vector<double> vals;
  EvalStats s;
  for (const CaseResult& r : results) {
    if (field == Field::pancreas) {
      if (r.pancreas_dsc) vals.push_back(*r.pancreas_dsc);
    } else {
      vals.push_back(r.cyst_dsc);
      if (r.missed) ++s.miss_count;
    }
  }
  if (vals.empty()) throw Error(Errc::empty_dataset, "no results to aggregate");
  s.n = vals.size();
  double sum = 0.0;
  for (double v : vals) sum += v;
  s.mean = sum / double(s.n);
  double sq = 0.0;
  for (double v : vals) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / double(s.n));
  s.max = *std::max_element(vals.begin(), vals.end());
  s.min = *std::min_element(vals.begin(), vals.end());
  return s;
}

FoldSplit make_folds(const std::vector<std::string>& case_ids, std::uint64_t seed) {
  if (case_ids.size() < 4) throw Error(Errc::too_few_cases, "4-fold split needs at least 4 cases");
  std::vector<std::string> order = case_ids;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  FoldSplit split;
  split.seed = seed;
  for (std::size_t i = 0; i < order.size(); ++i) split.folds[i % 4].push_back(order[i]);
  return split;
}

namespace {

struct TrainJob {
  std::size_t fold;
  Stage stage;
  std::size_t view;
};

CaseResult score_case(const PhantomCase& c, Mode mode, const BinaryMask* pancreas_pred, const BinaryMask& cyst_pred) {
  CaseResult r;
  r.case_id = c.case_id;
  r.mode = mode;
  if (pancreas_pred) r.pancreas_dsc = dsc_metric(*pancreas_pred, c.pancreas);
  r.cyst_dsc = dsc_metric(cyst_pred, c.cyst);
  r.missed = r.cyst_dsc == 0.0 && !c.cyst.empty_foreground();
  return r;
}

}  // namespace

std::map<Mode, ModeReport> cross_validate(const std::vector<PhantomCase>& dataset, const CrossValConfig& config,
                                          const std::set<Mode>& modes) {
  if (modes.empty()) throw Error(Errc::validation, "no evaluation modes requested");
  config.train.validate();
  config.transform.validate();

  std::vector<std::string> ids;
  std::map<std::string, std::size_t> index_of;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    ids.push_back(dataset[i].case_id);
    if (!index_of.emplace(dataset[i].case_id, i).second) {
      throw Error(Errc::validation, "duplicate case id " + dataset[i].case_id);
    }
  }
  const FoldSplit split = make_folds(ids, config.fold_seed);
  const std::size_t jobs = std::max<std::size_t>(1, config.jobs);

  const bool need_cascade = modes.count(Mode::cascade) > 0;
  const bool need_cyst = need_cascade || modes.count(Mode::oracle) > 0;
  const bool need_baseline = modes.count(Mode::baseline) > 0;

  // Stage-2 inputs use ground-truth organ masks, so they are fold-independent.
  std::vector<CroppedCase> cropped(need_cyst ? dataset.size() : 0);
  parallel_for(cropped.size(), jobs, [&](std::size_t i) {
    cropped[i] = prepare_stage2_case(dataset[i].volume, dataset[i].pancreas, dataset[i].cyst, config.transform);
  });

  std::vector<TrainJob> train_jobs;
  for (std::size_t f = 0; f < 4; ++f) {
    for (std::size_t v = 0; v < 3; ++v) {
      if (need_cascade) train_jobs.push_back({f, Stage::pancreas, v});
      if (need_cyst) train_jobs.push_back({f, Stage::cyst, v});
      if (need_baseline) train_jobs.push_back({f, Stage::baseline, v});
    }
  }

  // models[fold][stage]
  std::array<std::array<StageModels, 3>, 4> models;
  parallel_for(train_jobs.size(), jobs, [&](std::size_t j) {
    const TrainJob& job = train_jobs[j];
    std::vector<VolumeMask> refs;
    for (std::size_t f = 0; f < 4; ++f) {
      if (f == job.fold) continue;
      for (const std::string& id : split.folds[f]) {
        const std::size_t i = index_of.at(id);
        switch (job.stage) {
          case Stage::pancreas: refs.push_back({&dataset[i].volume, &dataset[i].pancreas}); break;
          case Stage::cyst: refs.push_back({&cropped[i].volume, &cropped[i].cyst}); break;
          case Stage::baseline: refs.push_back({&dataset[i].volume, &dataset[i].cyst}); break;
        }
      }
    }
    models[job.fold][std::size_t(job.stage)].per_view[job.view] =
        train_view(refs, config.train, job.stage, kAllViews[job.view]);
  });

  struct PredictJob {
    std::size_t fold;
    std::size_t case_index;
    Mode mode;
  };
  std::vector<PredictJob> predict_jobs;
  for (std::size_t f = 0; f < 4; ++f) {
    for (const std::string& id : split.folds[f]) {
      for (Mode m : modes) predict_jobs.push_back({f, index_of.at(id), m});
    }
  }
  std::vector<CaseResult> results(predict_jobs.size());
  parallel_for(predict_jobs.size(), jobs, [&](std::size_t j) {
    const PredictJob& job = predict_jobs[j];
    const PhantomCase& c = dataset[job.case_index];
    const auto& fold_models = models[job.fold];
    switch (job.mode) {
      case Mode::cascade: {
        const CascadeModels cm{fold_models[std::size_t(Stage::pancreas)], fold_models[std::size_t(Stage::cyst)],
                               config.transform};
        const CascadeOutput out = cascade_predict(c.volume, cm);
        results[j] = score_case(c, job.mode, &out.pancreas_pred, out.cyst_pred);
        break;
      }
      case Mode::oracle: {
        const CascadeOutput out =
            oracle_predict(c.volume, c.pancreas, fold_models[std::size_t(Stage::cyst)], config.transform);
        results[j] = score_case(c, job.mode, &out.pancreas_pred, out.cyst_pred);
        break;
      }
      case Mode::baseline: {
        const BinaryMask pred = baseline_predict(c.volume, fold_models[std::size_t(Stage::baseline)]);
        results[j] = score_case(c, job.mode, nullptr, pred);
        break;
      }
    }
  });

  std::map<Mode, ModeReport> reports;
  for (CaseResult& r : results) reports[r.mode].cases.push_back(std::move(r));
  for (auto& [mode, report] : reports) {
    std::sort(report.cases.begin(), report.cases.end(),
              [](const CaseResult& a, const CaseResult& b) { return a.case_id < b.case_id; });
    report.cyst = aggregate(report.cases, Field::cyst);
    if (mode != Mode::baseline) report.pancreas = aggregate(report.cases, Field::pancreas);
  }
  return reports;
}

std::string results_csv(const std::map<Mode, ModeReport>& reports) {
  std::ostringstream out;
  out << "case_id,mode,pancreas_dsc,cyst_dsc,missed\n";
  char buf[64];
  for (const auto& [mode, report] : reports) {
    for (const CaseResult& r : report.cases) {
      out << r.case_id << ',' << mode_name(mode) << ',';
      if (r.pancreas_dsc) {
        std::snprintf(buf, sizeof buf, "%.6f", *r.pancreas_dsc);
        out << buf;
      }
      std::snprintf(buf, sizeof buf, "%.6f", r.cyst_dsc);
      out << ',' << buf << ',' << (r.missed ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

namespace {

nlohmann::ordered_json stats_json(const EvalStats& s) {
  nlohmann::ordered_json j;
  j["mean"] = s.mean;
  j["std"] = s.std;
  j["max"] = s.max;
  j["min"] = s.min;
  j["miss_count"] = s.miss_count;
  j["n"] = s.n;
  return j;
}

}  // namespace

std::string summary_json(const std::map<Mode, ModeReport>& reports) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json cyst;
  for (const auto& [mode, report] : reports) cyst[std::string(mode_name(mode))] = stats_json(report.cyst);
  j["cyst"] = cyst;
  nlohmann::ordered_json pancreas = nlohmann::ordered_json::object();
  for (const auto& [mode, report] : reports) {
    if (report.pancreas) pancreas[std::string(mode_name(mode))] = stats_json(*report.pancreas);
  }
  j["pancreas"] = pancreas;
  return j.dump(2) + "\n";
}

}  // namespace cystseg
