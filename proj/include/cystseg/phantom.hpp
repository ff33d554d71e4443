// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cystseg/volume.hpp"

namespace cystseg {

/// Parameters of the synthetic organ-plus-lesion generator.
///
/// The organ is a noisy ellipsoid, the cyst a small sphere placed inside the organ with
/// probability p_inside and straddling its boundary otherwise. Distractors are blobs with
/// cyst-like intensity placed far from the organ (beyond conformance_t plus their radius),
/// standing in for the other structures a whole-slice model has to reject.
struct PhantomSpec {
  Dims dims{64, 64, 64};
  Spacing spacing{};

  double center_jitter = 4.0;  // organ center offset, +/- voxels per axis
  double organ_axis_min = 7.0;
  double organ_axis_max = 11.0;
  double boundary_noise = 0.12;  // relative radial perturbation

  double cyst_radius_min = 3.0;
  double cyst_radius_max = 3.9;
  double p_inside = 0.92;

  float background_mean = 0.0f;
  float organ_mean = 100.0f;
  float cyst_mean = 124.0f;
  float noise_sigma = 20.0f;

  std::uint32_t distractor_count = 3;
  double distractor_radius_min = 3.0;
  double distractor_radius_max = 5.0;

  double containment_target = 0.92;
  double conformance_t = 15.0;
  std::uint32_t max_attempts = 64;

  void validate() const;
  bool operator==(const PhantomSpec&) const = default;
};

struct PhantomCase {
  std::string case_id;
  std::uint64_t seed = 0;
  Volume volume;
  BinaryMask pancreas;
  BinaryMask cyst;
  BinaryMask distractors;  // not ground truth; kept for diagnostics and intensity checks
};

/// Throws Errc::rejection_budget_exceeded if no conforming case is found in max_attempts.
PhantomCase generate_phantom(const PhantomSpec& spec, std::uint64_t seed, std::string case_id = "case_000");

std::vector<PhantomCase> generate_dataset(std::size_t n, const PhantomSpec& spec, std::uint64_t master_seed,
                                          std::size_t jobs = 1);

std::uint64_t case_seed(std::uint64_t master_seed, std::size_t index);
std::string case_id_for(std::size_t index);

/// |P* intersect C*| / |C*|. Throws Errc::empty_region on an empty cyst.
double containment_stat(const BinaryMask& pancreas, const BinaryMask& cyst);
double containment_stat(const PhantomCase& c);

/// Largest distance from a cyst voxel to the nearest organ voxel (voxel units).
double max_cyst_to_organ_distance(const BinaryMask& pancreas, const BinaryMask& cyst);

struct IntensityStats {
  double background_mean = 0.0;
  double organ_mean = 0.0;  // organ voxels that are not cyst
  double cyst_mean = 0.0;
};

/// Realized class means; background excludes organ, cyst and distractor voxels.
IntensityStats intensity_stats(const PhantomCase& c);

}  // namespace cystseg
