// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "cystseg/model.hpp"
#include "cystseg/pipeline.hpp"

namespace cystseg {

/// PRM1 snapshot file:
///   "PRM1" | u32 iteration | f32 input_scale | f32 input_offset | u32 layer_count |
///   per layer: u32 in_channels, out_channels, kernel, activation |
///   u64 value_count | value_count f32 (per layer: weights then biases), all little-endian.
void save_snapshot(const Snapshot& s, const std::filesystem::path& path);
Snapshot load_snapshot(const std::filesystem::path& path);

/// Writes `{root}/{stage}/{view}/{iteration}.prm` for every snapshot.
void save_stage(const StageModels& models, Stage stage, const std::filesystem::path& root);
StageModels load_stage(Stage stage, const std::filesystem::path& root);

struct BundleManifest {
  std::string mode;  // "cascade" or "baseline"
  TrainConfig train;
  TransformParams transform;
  std::uint64_t seed = 0;
};

/// Model bundle directory: stage subtrees plus manifest.json.
struct Bundle {
  BundleManifest manifest;
  std::optional<StageModels> pancreas;
  std::optional<StageModels> cyst;
  std::optional<StageModels> baseline;
};

void save_bundle(const Bundle& b, const std::filesystem::path& root);
Bundle load_bundle(const std::filesystem::path& root);

std::string manifest_json(const BundleManifest& m);
BundleManifest parse_manifest(const std::string& text);

}  // namespace cystseg
