// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "cystseg/error.hpp"

namespace cystseg {

struct Dims {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;

  std::size_t voxels() const noexcept { return nx * ny * nz; }
  bool operator==(const Dims&) const = default;
};

struct Spacing {
  float sx = 1.0f;
  float sy = 1.0f;
  float sz = 1.0f;

  bool operator==(const Spacing&) const = default;
};

struct Offset {
  std::size_t ox = 0;
  std::size_t oy = 0;
  std::size_t oz = 0;

  bool operator==(const Offset&) const = default;
};

void require_same_dims(const Dims& a, const Dims& b, std::string_view what);

/// Dense 3D grid, flat index i = x + nx * (y + ny * z).
template <class T>
class Grid3 {
 public:
  using value_type = T;

  Grid3() = default;

  explicit Grid3(Dims dims, T fill = T{}) : dims_(dims), data_(checked_size(dims), fill) {}

  Grid3(Dims dims, std::vector<T> data) : dims_(dims), data_(std::move(data)) {
    if (data_.size() != checked_size(dims_)) {
      throw Error(Errc::shape_mismatch, "grid payload length does not match dims");
    }
  }

  const Dims& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return x + dims_.nx * (y + dims_.ny * z);
  }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t x, std::size_t y, std::size_t z) { return data_[index(x, y, z)]; }
  const T& at(std::size_t x, std::size_t y, std::size_t z) const { return data_[index(x, y, z)]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  bool operator==(const Grid3&) const = default;

 private:
  static std::size_t checked_size(const Dims& d) {
    if (d.nx == 0 || d.ny == 0 || d.nz == 0) {
      throw Error(Errc::invalid_argument, "grid dims must be positive");
    }
    return d.voxels();
  }

  Dims dims_{};
  std::vector<T> data_;
};

/// Scalar intensity volume (Hounsfield-like) with physical spacing.
class Volume : public Grid3<float> {
 public:
  Volume() = default;
  explicit Volume(Dims dims, Spacing spacing = {}, float fill = 0.0f);
  Volume(Dims dims, Spacing spacing, std::vector<float> data);

  const Spacing& spacing() const noexcept { return spacing_; }

  /// Throws Errc::non_finite if any voxel is NaN or infinite.
  void require_finite() const;

  bool operator==(const Volume&) const = default;

 private:
  Spacing spacing_{};
};

class BinaryMask : public Grid3<std::uint8_t> {
 public:
  using Grid3::Grid3;
  explicit BinaryMask(Grid3<std::uint8_t>&& g) : Grid3(std::move(g)) {}

  std::size_t count() const noexcept;
  bool empty_foreground() const noexcept { return count() == 0; }
};

class ProbMap : public Grid3<float> {
 public:
  using Grid3::Grid3;
  explicit ProbMap(Grid3<float>&& g) : Grid3(std::move(g)) {}
};

/// Voxelwise p > threshold.
BinaryMask binarize(const ProbMap& p, float threshold = 0.5f);

enum class ViewAxis : std::uint8_t { coronal = 0, sagittal = 1, axial = 2 };

inline constexpr std::array<ViewAxis, 3> kAllViews = {ViewAxis::coronal, ViewAxis::sagittal,
                                                      ViewAxis::axial};

std::string_view view_name(ViewAxis axis);
ViewAxis parse_view(std::string_view name);

/// 2D grid, u fastest.
template <class T>
struct Plane {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<T> data;

  Plane() = default;
  Plane(std::size_t w, std::size_t h, T fill = T{}) : width(w), height(h), data(w * h, fill) {}

  T& at(std::size_t u, std::size_t v) { return data[u + width * v]; }
  const T& at(std::size_t u, std::size_t v) const { return data[u + width * v]; }

  bool operator==(const Plane&) const = default;
};

template <class T>
struct SliceStack {
  ViewAxis axis = ViewAxis::axial;
  std::vector<Plane<T>> slices;

  std::size_t count() const noexcept { return slices.size(); }
};

/// Extent of `dims` along `axis`, and the (width, height) of its slices.
std::size_t extent_along(const Dims& dims, ViewAxis axis) noexcept;
std::pair<std::size_t, std::size_t> slice_shape(const Dims& dims, ViewAxis axis) noexcept;

namespace detail {

// coronal: (k, u, v) = (x, y, z); sagittal: (y, x, z); axial: (z, x, y).
inline std::size_t voxel_of(const Dims& d, ViewAxis axis, std::size_t k, std::size_t u,
                            std::size_t v) noexcept {
  switch (axis) {
    case ViewAxis::coronal: return k + d.nx * (u + d.ny * v);
    case ViewAxis::sagittal: return u + d.nx * (k + d.ny * v);
    case ViewAxis::axial: break;
  }
  return u + d.nx * (v + d.ny * k);
}

}  // namespace detail

template <class T>
Plane<T> extract_slice(const Grid3<T>& grid, ViewAxis axis, std::size_t k) {
  const auto [w, h] = slice_shape(grid.dims(), axis);
  Plane<T> out(w, h);
  for (std::size_t v = 0; v < h; ++v) {
    for (std::size_t u = 0; u < w; ++u) {
      out.data[u + w * v] = grid[detail::voxel_of(grid.dims(), axis, k, u, v)];
    }
  }
  return out;
}

template <class T>
SliceStack<T> extract_slices(const Grid3<T>& grid, ViewAxis axis) {
  SliceStack<T> stack;
  stack.axis = axis;
  const std::size_t n = extent_along(grid.dims(), axis);
  stack.slices.reserve(n);
  for (std::size_t k = 0; k < n; ++k) stack.slices.push_back(extract_slice(grid, axis, k));
  return stack;
}

/// Inverse of extract_slices. Throws Errc::shape_mismatch on count or shape disagreement.
template <class T>
Grid3<T> assemble(std::span<const Plane<T>> slices, ViewAxis axis, const Dims& dims) {
  const auto [w, h] = slice_shape(dims, axis);
  if (slices.size() != extent_along(dims, axis)) {
    throw Error(Errc::shape_mismatch, "slice count does not match extent along view axis");
  }
  Grid3<T> out(dims);
  for (std::size_t k = 0; k < slices.size(); ++k) {
    const Plane<T>& s = slices[k];
    if (s.width != w || s.height != h || s.data.size() != w * h) {
      throw Error(Errc::shape_mismatch, "slice shape does not match volume cross-section");
    }
    for (std::size_t v = 0; v < h; ++v) {
      for (std::size_t u = 0; u < w; ++u) out[detail::voxel_of(dims, axis, k, u, v)] = s.data[u + w * v];
    }
  }
  return out;
}

ProbMap assemble_probmap(std::span<const Plane<float>> predictions, ViewAxis axis, const Dims& dims);

Volume load_volume(const std::filesystem::path& path);
void save_volume(const Volume& v, const std::filesystem::path& path);
BinaryMask load_mask(const std::filesystem::path& path);
void save_mask(const BinaryMask& m, const std::filesystem::path& path);

}  // namespace cystseg
