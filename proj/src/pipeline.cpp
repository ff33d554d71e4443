// SPDX-License-Identifier: Apache-2.0
#include "cystseg/pipeline.hpp"

#include <algorithm>
#include <string>

#include "cystseg/parallel.hpp"
#include "seed.hpp"

namespace cystseg {

void StageModels::validate() const {
  for (ViewAxis a : kAllViews) {
    if (view(a).empty()) {
      throw Error(Errc::validation, "no snapshots for view " + std::string(view_name(a)));
    }
  }
}

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::pancreas: return "pancreas";
    case Stage::cyst: return "cyst";
    case Stage::baseline: return "baseline";
  }
  return "?";
}

std::uint64_t stage_view_seed(std::uint64_t seed, Stage stage, ViewAxis view) {
  return detail::mix_seed(seed, 0x5700 + 16 * std::uint64_t(stage) + std::uint64_t(view));
}

std::vector<TrainingPair> slice_dataset(std::span<const VolumeMask> cases, ViewAxis axis) {
  std::vector<TrainingPair> out;
  for (const VolumeMask& c : cases) {
    require_same_dims(c.volume->dims(), c.mask->dims(), "training volume and target");
    const std::size_t n = extent_along(c.volume->dims(), axis);
    for (std::size_t k = 0; k < n; ++k) {
      out.push_back({extract_slice<float>(*c.volume, axis, k), extract_slice<std::uint8_t>(*c.mask, axis, k)});
    }
  }
  return out;
}

CroppedCase prepare_stage2_case(const Volume& x, const BinaryMask& pstar, const BinaryMask& cstar,
                                const TransformParams& params) {
  require_same_dims(x.dims(), pstar.dims(), "stage-2 volume and organ mask");
  require_same_dims(x.dims(), cstar.dims(), "stage-2 volume and cyst mask");
  if (pstar.empty_foreground()) {
    throw Error(Errc::empty_region, "stage-2 training case has an empty organ mask");
  }
  const BinaryMask keep = distance_mask(pstar, params, x.dims());
  const CroppedRegion region = crop_to_region(mask_volume(x, keep), keep, params.crop_margin);
  CroppedCase out{region.volume, crop_mask(cstar, region.box()), region.box()};
  return out;
}

std::vector<TrainingPair> positive_slices(std::vector<TrainingPair> pairs) {
  std::erase_if(pairs, [](const TrainingPair& p) {
    return std::none_of(p.target.data.begin(), p.target.data.end(), [](std::uint8_t b) { return b != 0; });
  });
  return pairs;
}

std::vector<Snapshot> train_view(std::span<const VolumeMask> cases, const TrainConfig& config, Stage stage,
                                 ViewAxis axis) {
  const std::vector<TrainingPair> data = positive_slices(slice_dataset(cases, axis));
  if (data.empty()) throw Error(Errc::empty_dataset, "no training slice contains foreground");
  TrainConfig c = config;
  c.seed = stage_view_seed(config.seed, stage, axis);
  return train(data, c);
}

StageModels train_views(std::span<const VolumeMask> cases, const TrainConfig& config, Stage stage,
                        std::size_t jobs) {
  if (cases.empty()) throw Error(Errc::empty_dataset, "no training cases");
  StageModels models;
  parallel_for(kAllViews.size(), jobs,
               [&](std::size_t v) { models.per_view[v] = train_view(cases, config, stage, kAllViews[v]); });
  return models;
}

StageModels train_stage1(std::span<const OrganCase> cases, const TrainConfig& config, std::size_t jobs) {
  std::vector<VolumeMask> refs;
  for (const OrganCase& c : cases) refs.push_back({&c.volume, &c.pancreas});
  return train_views(refs, config, Stage::pancreas, jobs);
}

StageModels train_stage2(std::span<const FullCase> cases, const TrainConfig& config,
                         const TransformParams& params, std::size_t jobs) {
  if (cases.empty()) throw Error(Errc::empty_dataset, "no training cases");
  std::vector<CroppedCase> cropped(cases.size());
  parallel_for(cases.size(), jobs, [&](std::size_t i) {
    cropped[i] = prepare_stage2_case(cases[i].volume, cases[i].pancreas, cases[i].cyst, params);
  });
  std::vector<VolumeMask> refs;
  for (const CroppedCase& c : cropped) refs.push_back({&c.volume, &c.cyst});
  return train_views(refs, config, Stage::cyst, jobs);
}

StageModels train_baseline(std::span<const FullCase> cases, const TrainConfig& config, std::size_t jobs) {
  std::vector<VolumeMask> refs;
  for (const FullCase& c : cases) refs.push_back({&c.volume, &c.cyst});
  return train_views(refs, config, Stage::baseline, jobs);
}

BinaryMask predict_view(std::span<const Snapshot> snapshots, const Volume& v, ViewAxis axis) {
  if (snapshots.empty()) throw Error(Errc::validation, "no snapshots to predict with");
  const std::size_t n = extent_along(v.dims(), axis);
  std::vector<Plane<float>> slices;
  slices.reserve(n);
  for (std::size_t k = 0; k < n; ++k) slices.push_back(extract_slice<float>(v, axis, k));

  BinaryMask united(v.dims());
  std::vector<Plane<float>> probs(n);
  for (const Snapshot& s : snapshots) {
    for (std::size_t k = 0; k < n; ++k) {
      const Plane<double> p = predict_slice(s.params, slices[k]);
      probs[k] = Plane<float>(p.width, p.height);
      for (std::size_t i = 0; i < p.data.size(); ++i) probs[k].data[i] = float(p.data[i]);
    }
    const BinaryMask m = binarize(assemble_probmap(probs, axis, v.dims()));
    for (std::size_t i = 0; i < m.size(); ++i) united[i] |= m[i];
  }
  return united;
}

BinaryMask fuse_views(const std::array<BinaryMask, 3>& masks) {
  require_same_dims(masks[0].dims(), masks[1].dims(), "fuse_views");
  require_same_dims(masks[0].dims(), masks[2].dims(), "fuse_views");
  BinaryMask out(masks[0].dims());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (masks[0][i] + masks[1][i] + masks[2][i]) >= 2 ? 1 : 0;
  }
  return out;
}

BinaryMask predict_stage(const StageModels& models, const Volume& v, std::size_t jobs) {
  models.validate();
  std::array<BinaryMask, 3> per_view;
  parallel_for(kAllViews.size(), jobs, [&](std::size_t k) {
    per_view[k] = predict_view(models.per_view[k], v, kAllViews[k]);
  });
  return fuse_views(per_view);
}

CascadeOutput segment_with_organ(const Volume& v, BinaryMask organ, const StageModels& cyst_models,
                                 const TransformParams& params, std::size_t jobs) {
  require_same_dims(v.dims(), organ.dims(), "organ mask");
  CascadeOutput out{std::move(organ), std::nullopt, BinaryMask(v.dims())};
  if (out.pancreas_pred.empty_foreground()) return out;  // stage-1 miss: all background

  const BinaryMask keep = distance_mask(out.pancreas_pred, params, v.dims());
  const CroppedRegion region = crop_to_region(mask_volume(v, keep), keep, params.crop_margin);
  const BinaryMask local = predict_stage(cyst_models, region.volume, jobs);
  BinaryMask full = paste_back(local, region.box(), v.dims());
  for (std::size_t i = 0; i < full.size(); ++i) full[i] &= keep[i];
  out.region = region.box();
  out.cyst_pred = std::move(full);
  return out;
}

CascadeOutput cascade_predict_with(const Volume& v, const OrganPredictor& stage1, const StageModels& cyst_models,
                                   const TransformParams& params, std::size_t jobs) {
  return segment_with_organ(v, stage1(v), cyst_models, params, jobs);
}

CascadeOutput cascade_predict(const Volume& v, const CascadeModels& models, std::size_t jobs) {
  const auto stage1 = [&](const Volume& x) { return predict_stage(models.pancreas, x, jobs); };
  return cascade_predict_with(v, stage1, models.cyst, models.transform, jobs);
}

CascadeOutput oracle_predict(const Volume& v, const BinaryMask& pstar, const StageModels& cyst_models,
                             const TransformParams& params, std::size_t jobs) {
  if (pstar.empty_foreground()) throw Error(Errc::empty_region, "oracle organ mask is empty");
  return segment_with_organ(v, pstar, cyst_models, params, jobs);
}

BinaryMask baseline_predict(const Volume& v, const StageModels& whole_volume_cyst_models, std::size_t jobs) {
  return predict_stage(whole_volume_cyst_models, v, jobs);
}

}  // namespace cystseg
