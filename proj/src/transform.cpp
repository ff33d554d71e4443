// SPDX-License-Identifier: Apache-2.0
#include "cystseg/transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace cystseg {

namespace {

constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max();

// Lower envelope of parabolas (q, f[q]) evaluated at every integer position. Entries equal
// to kInf are not sources. All arithmetic on small integers, so the result is exact.
void envelope_1d(std::vector<std::int64_t>& f, std::vector<std::int64_t>& out,
                 std::vector<std::int64_t>& v, std::vector<double>& z) {
  const auto n = static_cast<std::int64_t>(f.size());
  std::int64_t k = -1;
  for (std::int64_t q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    double s = -std::numeric_limits<double>::infinity();
    while (k >= 0) {
      const std::int64_t p = v[k];
      s = double((f[q] + q * q) - (f[p] + p * p)) / double(2 * q - 2 * p);
      if (s > z[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = k == 0 ? -std::numeric_limits<double>::infinity() : s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  if (k < 0) {
    std::fill(out.begin(), out.end(), kInf);
    return;
  }
  std::int64_t j = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    while (z[j + 1] < double(i)) ++j;
    const std::int64_t d = i - v[j];
    out[i] = d * d + f[v[j]];
  }
}

// One separable pass along an axis with the given stride and count.
void pass_along(std::vector<std::int64_t>& grid, std::size_t len, std::size_t stride,
                const std::vector<std::size_t>& line_starts) {
  std::vector<std::int64_t> f(len), out(len), v(len);
  std::vector<double> z(len + 1);
  for (std::size_t start : line_starts) {
    for (std::size_t i = 0; i < len; ++i) f[i] = grid[start + i * stride];
    envelope_1d(f, out, v, z);
    for (std::size_t i = 0; i < len; ++i) grid[start + i * stride] = out[i];
  }
}

template <class Map>
Grid3<std::uint8_t> sources_of(const Map& p, const TransformParams& params, const Dims& dims) {
  params.validate();
  require_same_dims(p.dims(), dims, "distance_mask");
  Grid3<std::uint8_t> src(dims);
  for (std::size_t i = 0; i < p.size(); ++i) src[i] = double(p[i]) > params.prob_threshold ? 1 : 0;
  return src;
}

BinaryMask mask_from_sources(const Grid3<std::uint8_t>& src, double t) {
  const auto d2 = squared_distance_to_sources(src);
  BinaryMask out(src.dims());
  for (std::size_t i = 0; i < d2.size(); ++i) out[i] = (d2[i] >= 0 && within_distance(d2[i], t)) ? 1 : 0;
  return out;
}

BinaryMask brute_force(const Grid3<std::uint8_t>& src, double t) {
  const Dims& d = src.dims();
  constexpr std::size_t kMaxVoxels = 32 * 32 * 32;
  if (d.voxels() > kMaxVoxels) {
    throw Error(Errc::grid_too_large, "brute-force oracle is limited to 32^3 voxels");
  }
  struct P { std::int64_t x, y, z; };
  std::vector<P> sources;
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x)
        if (src.at(x, y, z)) sources.push_back({std::int64_t(x), std::int64_t(y), std::int64_t(z)});

  BinaryMask out(d);
  for (std::size_t z = 0; z < d.nz; ++z) {
    for (std::size_t y = 0; y < d.ny; ++y) {
      for (std::size_t x = 0; x < d.nx; ++x) {
        bool hit = false;
        for (const P& s : sources) {
          const std::int64_t dx = std::int64_t(x) - s.x, dy = std::int64_t(y) - s.y, dz = std::int64_t(z) - s.z;
          if (within_distance(dx * dx + dy * dy + dz * dz, t)) {
            hit = true;
            break;
          }
        }
        out.at(x, y, z) = hit ? 1 : 0;
      }
    }
  }
  return out;
}

}  // namespace

void TransformParams::validate() const {
  if (!(t > 0.0) || !std::isfinite(t)) throw Error(Errc::invalid_argument, "distance threshold t must be > 0");
  if (prob_threshold != 0.5) throw Error(Errc::invalid_argument, "probability cutoff is fixed at 0.5");
}

bool within_distance(std::int64_t squared_distance, double t) noexcept {
  return std::sqrt(double(squared_distance)) < t;
}

std::vector<std::int64_t> squared_distance_to_sources(const Grid3<std::uint8_t>& source) {
  const Dims& d = source.dims();
  std::vector<std::int64_t> grid(d.voxels());
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = source[i] ? 0 : kInf;

  std::vector<std::size_t> starts;
  starts.reserve(d.ny * d.nz);
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y) starts.push_back(d.nx * (y + d.ny * z));
  pass_along(grid, d.nx, 1, starts);

  starts.clear();
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t x = 0; x < d.nx; ++x) starts.push_back(x + d.nx * d.ny * z);
  pass_along(grid, d.ny, d.nx, starts);

  starts.clear();
  for (std::size_t y = 0; y < d.ny; ++y)
    for (std::size_t x = 0; x < d.nx; ++x) starts.push_back(x + d.nx * y);
  pass_along(grid, d.nz, d.nx * d.ny, starts);

  for (auto& v : grid) {
    if (v == kInf) v = -1;
  }
  return grid;
}

BinaryMask distance_mask(const ProbMap& p, const TransformParams& params, const Dims& dims) {
  return mask_from_sources(sources_of(p, params, dims), params.t);
}

BinaryMask distance_mask(const BinaryMask& p, const TransformParams& params, const Dims& dims) {
  return mask_from_sources(sources_of(p, params, dims), params.t);
}

BinaryMask brute_force_distance_mask(const ProbMap& p, const TransformParams& params, const Dims& dims) {
  return brute_force(sources_of(p, params, dims), params.t);
}

BinaryMask brute_force_distance_mask(const BinaryMask& p, const TransformParams& params, const Dims& dims) {
  return brute_force(sources_of(p, params, dims), params.t);
}

Volume mask_volume(const Volume& x, const BinaryMask& keep) {
  require_same_dims(x.dims(), keep.dims(), "mask_volume");
  Volume out(x.dims(), x.spacing());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = keep[i] ? x[i] : 0.0f;
  return out;
}

Volume apply_transform(const Volume& x, const ProbMap& p, const TransformParams& params) {
  return mask_volume(x, distance_mask(p, params, x.dims()));
}

Volume apply_transform(const Volume& x, const BinaryMask& p, const TransformParams& params) {
  return mask_volume(x, distance_mask(p, params, x.dims()));
}

Box bounding_box(const BinaryMask& keep, std::size_t margin) {
  const Dims& d = keep.dims();
  std::size_t lo[3] = {d.nx, d.ny, d.nz};
  std::size_t hi[3] = {0, 0, 0};
  bool any = false;
  for (std::size_t z = 0; z < d.nz; ++z) {
    for (std::size_t y = 0; y < d.ny; ++y) {
      for (std::size_t x = 0; x < d.nx; ++x) {
        if (!keep.at(x, y, z)) continue;
        any = true;
        const std::size_t c[3] = {x, y, z};
        for (int a = 0; a < 3; ++a) {
          lo[a] = std::min(lo[a], c[a]);
          hi[a] = std::max(hi[a], c[a]);
        }
      }
    }
  }
  if (!any) throw Error(Errc::empty_region, "keep mask has no foreground voxels");

  const std::size_t ext[3] = {d.nx, d.ny, d.nz};
  std::size_t first[3], count[3];
  for (int a = 0; a < 3; ++a) {
    first[a] = lo[a] > margin ? lo[a] - margin : 0;
    const std::size_t last = std::min(ext[a] - 1, hi[a] + margin);
    count[a] = last - first[a] + 1;
  }
  return Box{{first[0], first[1], first[2]}, {count[0], count[1], count[2]}};
}

CroppedRegion crop_to_region(const Volume& xprime, const BinaryMask& keep, std::size_t margin) {
  require_same_dims(xprime.dims(), keep.dims(), "crop_to_region");
  const Box box = bounding_box(keep, margin);
  Grid3<float> cropped = crop_grid<float>(xprime, box);
  std::vector<float> data(cropped.values().begin(), cropped.values().end());
  return CroppedRegion{Volume(box.dims, xprime.spacing(), std::move(data)), box.offset, xprime.dims()};
}

BinaryMask crop_mask(const BinaryMask& mask, const Box& box) {
  return BinaryMask(crop_grid<std::uint8_t>(mask, box));
}

ProbMap paste_back(const ProbMap& region_pred, const CroppedRegion& region) {
  return ProbMap(paste_grid<float>(region_pred, region.box(), region.parent_dims));
}

BinaryMask paste_back(const BinaryMask& region_pred, const Box& box, const Dims& parent) {
  return BinaryMask(paste_grid<std::uint8_t>(region_pred, box, parent));
}

}  // namespace cystseg
