// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>

#include "cystseg/volume.hpp"

namespace cystseg {

/// Organ-guided masking of the stage-2 input.
///
/// A voxel i survives iff some voxel j with p_j > prob_threshold lies at Euclidean
/// distance |i - j| < t, measured in voxel index units (spacing is ignored).
struct TransformParams {
  double t = 15.0;
  double prob_threshold = 0.5;
  std::size_t crop_margin = 4;

  void validate() const;
  bool operator==(const TransformParams&) const = default;
};

/// Axis-aligned box inside a parent grid.
struct Box {
  Offset offset;
  Dims dims;

  bool operator==(const Box&) const = default;
};

struct CroppedRegion {
  Volume volume;
  Offset offset;
  Dims parent_dims;

  Box box() const { return {offset, volume.dims()}; }
};

/// Exact test for |i - j| < t given the integer squared distance. Both the fast path and
/// the brute-force oracle decide membership through this one predicate.
bool within_distance(std::int64_t squared_distance, double t) noexcept;

/// Exact squared Euclidean distance from every voxel to the nearest voxel with
/// `source[i] != 0`; voxels with no source anywhere get -1.
std::vector<std::int64_t> squared_distance_to_sources(const Grid3<std::uint8_t>& source);

BinaryMask distance_mask(const ProbMap& p, const TransformParams& params, const Dims& dims);
BinaryMask distance_mask(const BinaryMask& p, const TransformParams& params, const Dims& dims);

/// O(N * M) literal evaluation of the indicator; refuses grids larger than 32^3.
BinaryMask brute_force_distance_mask(const ProbMap& p, const TransformParams& params, const Dims& dims);
BinaryMask brute_force_distance_mask(const BinaryMask& p, const TransformParams& params, const Dims& dims);

Volume apply_transform(const Volume& x, const ProbMap& p, const TransformParams& params);
Volume apply_transform(const Volume& x, const BinaryMask& p, const TransformParams& params);

/// X' with voxels outside `keep` set to zero.
Volume mask_volume(const Volume& x, const BinaryMask& keep);

/// Tight bounding box of `keep`, grown by `margin` per face and clipped to the grid.
/// Throws Errc::empty_region when `keep` has no foreground.
Box bounding_box(const BinaryMask& keep, std::size_t margin);

template <class T>
Grid3<T> crop_grid(const Grid3<T>& grid, const Box& box) {
  const Dims& p = grid.dims();
  if (box.offset.ox + box.dims.nx > p.nx || box.offset.oy + box.dims.ny > p.ny ||
      box.offset.oz + box.dims.nz > p.nz) {
    throw Error(Errc::dims_mismatch, "crop box exceeds parent grid");
  }
  Grid3<T> out(box.dims);
  for (std::size_t z = 0; z < box.dims.nz; ++z) {
    for (std::size_t y = 0; y < box.dims.ny; ++y) {
      for (std::size_t x = 0; x < box.dims.nx; ++x) {
        out.at(x, y, z) = grid.at(x + box.offset.ox, y + box.offset.oy, z + box.offset.oz);
      }
    }
  }
  return out;
}

/// Inverse of crop_grid: crop contents placed at the box, zero elsewhere.
template <class T>
Grid3<T> paste_grid(const Grid3<T>& crop, const Box& box, const Dims& parent) {
  require_same_dims(crop.dims(), box.dims, "paste_back crop dims");
  if (box.offset.ox + box.dims.nx > parent.nx || box.offset.oy + box.dims.ny > parent.ny ||
      box.offset.oz + box.dims.nz > parent.nz) {
    throw Error(Errc::dims_mismatch, "crop box exceeds parent grid");
  }
  Grid3<T> out(parent);
  for (std::size_t z = 0; z < box.dims.nz; ++z) {
    for (std::size_t y = 0; y < box.dims.ny; ++y) {
      for (std::size_t x = 0; x < box.dims.nx; ++x) {
        out.at(x + box.offset.ox, y + box.offset.oy, z + box.offset.oz) = crop.at(x, y, z);
      }
    }
  }
  return out;
}

CroppedRegion crop_to_region(const Volume& xprime, const BinaryMask& keep, std::size_t margin);
BinaryMask crop_mask(const BinaryMask& mask, const Box& box);

ProbMap paste_back(const ProbMap& region_pred, const CroppedRegion& region);
BinaryMask paste_back(const BinaryMask& region_pred, const Box& box, const Dims& parent);

}  // namespace cystseg
