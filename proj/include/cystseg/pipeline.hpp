// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "cystseg/model.hpp"
#include "cystseg/transform.hpp"
#include "cystseg/volume.hpp"

namespace cystseg {

/// Snapshot ensembles for one stage, one list per view.
struct StageModels {
  std::array<std::vector<Snapshot>, 3> per_view;

  const std::vector<Snapshot>& view(ViewAxis a) const { return per_view[std::size_t(a)]; }
  std::vector<Snapshot>& view(ViewAxis a) { return per_view[std::size_t(a)]; }

  void validate() const;
  bool operator==(const StageModels&) const = default;
};

struct CascadeModels {
  StageModels pancreas;
  StageModels cyst;
  TransformParams transform;
};

struct CascadeOutput {
  BinaryMask pancreas_pred;
  std::optional<Box> region;  // empty when stage 1 found nothing
  BinaryMask cyst_pred;
};

/// Model tags; each (stage, view) pair trains from its own derived seed.
enum class Stage : std::uint8_t { pancreas = 0, cyst = 1, baseline = 2 };

std::string_view stage_name(Stage s);
std::uint64_t stage_view_seed(std::uint64_t seed, Stage stage, ViewAxis view);

struct VolumeMask {
  const Volume* volume;
  const BinaryMask* mask;
};

/// Slice pairs along `axis` for every (volume, target) pair.
std::vector<TrainingPair> slice_dataset(std::span<const VolumeMask> cases, ViewAxis axis);

/// Drops pairs whose target slice has no foreground.
std::vector<TrainingPair> positive_slices(std::vector<TrainingPair> pairs);

/// Stage-2 training input for one case: X' = sigma[X, P*] cropped to the preserved region,
/// and C* cropped to the same box.
struct CroppedCase {
  Volume volume;
  BinaryMask cyst;
  Box box;
};
CroppedCase prepare_stage2_case(const Volume& x, const BinaryMask& pstar, const BinaryMask& cstar,
                                const TransformParams& params);

/// Trains the model for one view on the foreground-bearing slices of `cases`.
std::vector<Snapshot> train_view(std::span<const VolumeMask> cases, const TrainConfig& config, Stage stage,
                                 ViewAxis axis);

/// Trains one model per view on the foreground-bearing slices of `cases`; views may run
/// concurrently.
StageModels train_views(std::span<const VolumeMask> cases, const TrainConfig& config, Stage stage,
                        std::size_t jobs = 1);

struct OrganCase {
  Volume volume;
  BinaryMask pancreas;
};

struct FullCase {
  Volume volume;
  BinaryMask pancreas;
  BinaryMask cyst;
};

StageModels train_stage1(std::span<const OrganCase> cases, const TrainConfig& config, std::size_t jobs = 1);
StageModels train_stage2(std::span<const FullCase> cases, const TrainConfig& config,
                         const TransformParams& params, std::size_t jobs = 1);
/// Single-stage cyst models on whole volumes (no organ guidance).
StageModels train_baseline(std::span<const FullCase> cases, const TrainConfig& config, std::size_t jobs = 1);

/// Union over snapshots of the binarized (p > 0.5) per-slice predictions along `axis`.
BinaryMask predict_view(std::span<const Snapshot> snapshots, const Volume& v, ViewAxis axis);

/// Voxel is foreground iff at least two of the three views mark it.
BinaryMask fuse_views(const std::array<BinaryMask, 3>& masks);

/// predict_view for all three views, then fuse_views.
BinaryMask predict_stage(const StageModels& models, const Volume& v, std::size_t jobs = 1);

using OrganPredictor = std::function<BinaryMask(const Volume&)>;

/// Stage 2 given an organ mask: transform, crop, predict, paste back, and keep only the
/// voxels the transform preserved.
CascadeOutput segment_with_organ(const Volume& v, BinaryMask organ, const StageModels& cyst_models,
                                 const TransformParams& params, std::size_t jobs = 1);

CascadeOutput cascade_predict(const Volume& v, const CascadeModels& models, std::size_t jobs = 1);
CascadeOutput cascade_predict_with(const Volume& v, const OrganPredictor& stage1, const StageModels& cyst_models,
                                   const TransformParams& params, std::size_t jobs = 1);
CascadeOutput oracle_predict(const Volume& v, const BinaryMask& pstar, const StageModels& cyst_models,
                             const TransformParams& params, std::size_t jobs = 1);
BinaryMask baseline_predict(const Volume& v, const StageModels& whole_volume_cyst_models, std::size_t jobs = 1);

}  // namespace cystseg
