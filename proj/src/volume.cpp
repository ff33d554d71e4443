// SPDX-License-Identifier: Apache-2.0
#include "cystseg/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "byte_io.hpp"

namespace cystseg {

namespace {

constexpr std::string_view kVolumeMagic = "VXL1";
constexpr std::string_view kMaskMagic = "MSK1";

void require_valid_spacing(const Spacing& s) {
  auto ok = [](float v) { return std::isfinite(v) && v > 0.0f; };
  if (!ok(s.sx) || !ok(s.sy) || !ok(s.sz)) {
    throw Error(Errc::invalid_argument, "voxel spacing must be positive and finite");
  }
}

Dims read_dims(detail::ByteReader& in) {
  Dims d;
  d.nx = in.u32();
  d.ny = in.u32();
  d.nz = in.u32();
  if (d.nx == 0 || d.ny == 0 || d.nz == 0) {
    throw Error(Errc::invalid_argument, "zero extent in header of " + in.name());
  }
  return d;
}

void write_dims(detail::ByteWriter& out, const Dims& d) {
  out.u32(static_cast<std::uint32_t>(d.nx));
  out.u32(static_cast<std::uint32_t>(d.ny));
  out.u32(static_cast<std::uint32_t>(d.nz));
}

void require_consumed(const detail::ByteReader& in) {
  if (in.remaining() != 0) {
    throw Error(Errc::shape_mismatch, "payload longer than header declares: " + in.name());
  }
}

}  // namespace

void require_same_dims(const Dims& a, const Dims& b, std::string_view what) {
  if (!(a == b)) {
    throw Error(Errc::dims_mismatch,
                std::string(what) + ": (" + std::to_string(a.nx) + "," + std::to_string(a.ny) + "," +
                    std::to_string(a.nz) + ") vs (" + std::to_string(b.nx) + "," + std::to_string(b.ny) +
                    "," + std::to_string(b.nz) + ")");
  }
}

Volume::Volume(Dims dims, Spacing spacing, float fill) : Grid3<float>(dims, fill), spacing_(spacing) {
  require_valid_spacing(spacing_);
}

Volume::Volume(Dims dims, Spacing spacing, std::vector<float> data)
    : Grid3<float>(dims, std::move(data)), spacing_(spacing) {
  require_valid_spacing(spacing_);
}

void Volume::require_finite() const {
  const auto vals = values();
  const auto bad = std::find_if(vals.begin(), vals.end(), [](float v) { return !std::isfinite(v); });
  if (bad != vals.end()) {
    throw Error(Errc::non_finite,
                "voxel " + std::to_string(std::distance(vals.begin(), bad)) + " is not finite");
  }
}

std::size_t BinaryMask::count() const noexcept {
  const auto vals = values();
  return static_cast<std::size_t>(std::count(vals.begin(), vals.end(), std::uint8_t{1}));
}

BinaryMask binarize(const ProbMap& p, float threshold) {
  BinaryMask out(p.dims());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] > threshold ? 1 : 0;
  return out;
}

std::string_view view_name(ViewAxis axis) {
  switch (axis) {
    case ViewAxis::coronal: return "coronal";
    case ViewAxis::sagittal: return "sagittal";
    case ViewAxis::axial: return "axial";
  }
  return "?";
}

ViewAxis parse_view(std::string_view name) {
  for (ViewAxis a : kAllViews) {
    if (view_name(a) == name) return a;
  }
  throw Error(Errc::invalid_argument, "unknown view '" + std::string(name) + "'");
}

std::size_t extent_along(const Dims& d, ViewAxis axis) noexcept {
  switch (axis) {
    case ViewAxis::coronal: return d.nx;
    case ViewAxis::sagittal: return d.ny;
    case ViewAxis::axial: break;
  }
  return d.nz;
}

std::pair<std::size_t, std::size_t> slice_shape(const Dims& d, ViewAxis axis) noexcept {
  switch (axis) {
    case ViewAxis::coronal: return {d.ny, d.nz};
    case ViewAxis::sagittal: return {d.nx, d.nz};
    case ViewAxis::axial: break;
  }
  return {d.nx, d.ny};
}

ProbMap assemble_probmap(std::span<const Plane<float>> predictions, ViewAxis axis, const Dims& dims) {
  Grid3<float> grid = assemble(predictions, axis, dims);
  for (float v : grid.values()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw Error(Errc::invalid_argument, "probability outside [0,1]");
  }
  return ProbMap(std::move(grid));
}

Volume load_volume(const std::filesystem::path& path) {
  auto in = detail::ByteReader::from_file(path);
  in.expect_magic(kVolumeMagic);
  const Dims dims = read_dims(in);
  Spacing sp;
  sp.sx = in.f32();
  sp.sy = in.f32();
  sp.sz = in.f32();
  in.need(dims.voxels() * 4);
  std::vector<float> data(dims.voxels());
  for (float& v : data) v = in.f32();
  require_consumed(in);
  Volume vol(dims, sp, std::move(data));
  vol.require_finite();
  return vol;
}

void save_volume(const Volume& v, const std::filesystem::path& path) {
  v.require_finite();
  detail::ByteWriter out;
  out.magic(kVolumeMagic);
  write_dims(out, v.dims());
  out.f32(v.spacing().sx);
  out.f32(v.spacing().sy);
  out.f32(v.spacing().sz);
  for (float x : v.values()) out.f32(x);
  out.write_to(path);
}

BinaryMask load_mask(const std::filesystem::path& path) {
  auto in = detail::ByteReader::from_file(path);
  in.expect_magic(kMaskMagic);
  const Dims dims = read_dims(in);
  in.need(dims.voxels());
  BinaryMask m(dims);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const std::uint8_t b = in.byte();
    if (b > 1) {
      throw Error(Errc::invalid_mask_value,
                  "byte " + std::to_string(b) + " at voxel " + std::to_string(i) + " in " + in.name());
    }
    m[i] = b;
  }
  require_consumed(in);
  return m;
}

void save_mask(const BinaryMask& m, const std::filesystem::path& path) {
  detail::ByteWriter out;
  out.magic(kMaskMagic);
  write_dims(out, m.dims());
  for (std::uint8_t b : m.values()) {
    if (b > 1) throw Error(Errc::invalid_mask_value, "mask value outside {0,1}");
    out.byte(b);
  }
  out.write_to(path);
}

}  // namespace cystseg
