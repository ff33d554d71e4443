// SPDX-License-Identifier: Apache-2.0
#include "cystseg/phantom.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>

#include "cystseg/parallel.hpp"
#include "cystseg/transform.hpp"
#include "seed.hpp"

namespace cystseg {

namespace {

struct Vec3 {
  double x, y, z;
};

// Low-frequency radial perturbation in [-1, 1] over unit directions.
struct BoundaryNoise {
  Vec3 axis[3];
  double freq[3];
  double phase[3];

  double operator()(const Vec3& dir) const {
    double s = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double proj = dir.x * axis[k].x + dir.y * axis[k].y + dir.z * axis[k].z;
      s += std::sin(freq[k] * proj + phase[k]);
    }
    return s / 3.0;
  }
};

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    Vec3 v{n(rng), n(rng), n(rng)};
    const double len = std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
    if (len > 1e-9) return {v.x / len, v.y / len, v.z / len};
  }
}

BinaryMask render_organ(const PhantomSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(-spec.center_jitter, spec.center_jitter);
  std::uniform_real_distribution<double> semi(spec.organ_axis_min, spec.organ_axis_max);
  std::uniform_real_distribution<double> freq(2.0, 5.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

  const Dims& d = spec.dims;
  const Vec3 c{0.5 * double(d.nx - 1) + jitter(rng), 0.5 * double(d.ny - 1) + jitter(rng),
               0.5 * double(d.nz - 1) + jitter(rng)};
  const Vec3 a{semi(rng), semi(rng), semi(rng)};
  BoundaryNoise noise{};
  for (int k = 0; k < 3; ++k) {
    noise.axis[k] = random_unit(rng);
    noise.freq[k] = freq(rng);
    noise.phase[k] = phase(rng);
  }

  BinaryMask organ(d);
  for (std::size_t z = 0; z < d.nz; ++z) {
    for (std::size_t y = 0; y < d.ny; ++y) {
      for (std::size_t x = 0; x < d.nx; ++x) {
        const Vec3 q{(double(x) - c.x) / a.x, (double(y) - c.y) / a.y, (double(z) - c.z) / a.z};
        const double rho = std::sqrt(q.x * q.x + q.y * q.y + q.z * q.z);
        if (rho < 1e-12) {
          organ.at(x, y, z) = 1;
          continue;
        }
        const double limit = 1.0 + spec.boundary_noise * noise({q.x / rho, q.y / rho, q.z / rho});
        organ.at(x, y, z) = rho <= limit ? 1 : 0;
      }
    }
  }
  return organ;
}

// Voxels with |v - center| <= radius, clipped to the grid.
void stamp_sphere(BinaryMask& m, std::size_t center, double radius) {
  const Dims& d = m.dims();
  const auto cx = std::int64_t(center % d.nx), cy = std::int64_t((center / d.nx) % d.ny),
             cz = std::int64_t(center / (d.nx * d.ny));
  const auto r = std::int64_t(std::ceil(radius));
  const double r2 = radius * radius;
  for (std::int64_t z = cz - r; z <= cz + r; ++z) {
    if (z < 0 || z >= std::int64_t(d.nz)) continue;
    for (std::int64_t y = cy - r; y <= cy + r; ++y) {
      if (y < 0 || y >= std::int64_t(d.ny)) continue;
      for (std::int64_t x = cx - r; x <= cx + r; ++x) {
        if (x < 0 || x >= std::int64_t(d.nx)) continue;
        const double dd = double((x - cx) * (x - cx) + (y - cy) * (y - cy) + (z - cz) * (z - cz));
        if (dd <= r2) m.at(std::size_t(x), std::size_t(y), std::size_t(z)) = 1;
      }
    }
  }
}

BinaryMask invert(const BinaryMask& m) {
  BinaryMask out(m.dims());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] ? 0 : 1;
  return out;
}

template <class Pred>
std::vector<std::size_t> candidates(const std::vector<std::int64_t>& d2, Pred keep) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < d2.size(); ++i) {
    if (keep(d2[i])) out.push_back(i);
  }
  return out;
}

std::size_t pick(const std::vector<std::size_t>& pool, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
  return pool[d(rng)];
}

}  // namespace

void PhantomSpec::validate() const {
  auto fail = [](const char* what) { throw Error(Errc::invalid_argument, what); };
  if (dims.nx < 8 || dims.ny < 8 || dims.nz < 8) fail("phantom grid must be at least 8 voxels per axis");
  if (!(organ_axis_min > 0.0 && organ_axis_min <= organ_axis_max)) fail("invalid organ semi-axis range");
  if (!(cyst_radius_min > 0.0 && cyst_radius_min <= cyst_radius_max)) fail("invalid cyst radius range");
  if (!(distractor_radius_min > 0.0 && distractor_radius_min <= distractor_radius_max)) {
    fail("invalid distractor radius range");
  }
  if (!(p_inside > 0.0 && p_inside <= 1.0)) fail("p_inside must lie in (0, 1]");
  if (!(containment_target >= 0.0 && containment_target <= 1.0)) fail("containment_target must lie in [0, 1]");
  if (!(noise_sigma > 0.0f)) fail("noise sigma must be positive");
  if (!(boundary_noise >= 0.0 && boundary_noise < 1.0)) fail("boundary noise must lie in [0, 1)");
  if (!(center_jitter >= 0.0)) fail("center jitter must be >= 0");
  if (!(conformance_t > 0.0)) fail("conformance distance must be positive");
  if (max_attempts == 0) fail("max_attempts must be positive");
}

std::uint64_t case_seed(std::uint64_t master_seed, std::size_t index) {
  return detail::mix_seed(master_seed, 0xCA5E0000ull + index);
}

std::string case_id_for(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "case_%03zu", index);
  return buf;
}

PhantomCase generate_phantom(const PhantomSpec& spec, std::uint64_t seed, std::string case_id) {
  spec.validate();
  std::mt19937_64 rng(detail::mix_seed(seed, 0xF0));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> cyst_r(spec.cyst_radius_min, spec.cyst_radius_max);
  std::uniform_real_distribution<double> dist_r(spec.distractor_radius_min, spec.distractor_radius_max);

  for (std::uint32_t attempt = 0; attempt < spec.max_attempts; ++attempt) {
    BinaryMask organ = render_organ(spec, rng);
    if (organ.count() == 0) continue;

    // Squared distance to the nearest non-organ voxel (depth inside) and to the organ.
    const auto depth2 = squared_distance_to_sources(invert(organ));
    const auto reach2 = squared_distance_to_sources(organ);

    const double r = cyst_r(rng);
    const bool inside = unit(rng) < spec.p_inside;
    std::vector<std::size_t> pool;
    if (inside) {
      // Non-organ voxels sit at depth 0, so this also restricts centers to the organ.
      pool = candidates(depth2, [&](std::int64_t v) { return v < 0 || double(v) > r * r; });
    } else {
      pool = candidates(reach2, [&](std::int64_t v) { return v > 0 && double(v) <= r * r; });
    }
    if (pool.empty()) continue;

    BinaryMask cyst(spec.dims);
    stamp_sphere(cyst, pick(pool, rng), r);
    if (cyst.count() == 0) continue;
    if (!(max_cyst_to_organ_distance(organ, cyst) < spec.conformance_t)) continue;

    BinaryMask distractors(spec.dims);
    for (std::uint32_t k = 0; k < spec.distractor_count; ++k) {
      const double rd = dist_r(rng);
      const double clear = spec.conformance_t + rd + 1.0;
      const auto far = candidates(reach2, [&](std::int64_t v) { return double(v) >= clear * clear; });
      if (far.empty()) break;
      stamp_sphere(distractors, pick(far, rng), rd);
    }

    Volume vol(spec.dims, spec.spacing, spec.background_mean);
    std::normal_distribution<float> noise(0.0f, spec.noise_sigma);
    for (std::size_t i = 0; i < vol.size(); ++i) {
      float base = spec.background_mean;
      if (cyst[i] || distractors[i]) {
        base = spec.cyst_mean;
      } else if (organ[i]) {
        base = spec.organ_mean;
      }
      vol[i] = base + noise(rng);
    }

    PhantomCase out;
    out.case_id = std::move(case_id);
    out.seed = seed;
    out.volume = std::move(vol);
    out.pancreas = std::move(organ);
    out.cyst = std::move(cyst);
    out.distractors = std::move(distractors);
    return out;
  }
  throw Error(Errc::rejection_budget_exceeded,
              "no conforming phantom after " + std::to_string(spec.max_attempts) + " attempts");
}

std::vector<PhantomCase> generate_dataset(std::size_t n, const PhantomSpec& spec, std::uint64_t master_seed,
                                          std::size_t jobs) {
  if (n < 4) throw Error(Errc::too_few_cases, "a dataset needs at least 4 cases");
  std::vector<PhantomCase> cases(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    cases[i] = generate_phantom(spec, case_seed(master_seed, i), case_id_for(i));
  });
  return cases;
}

double containment_stat(const BinaryMask& pancreas, const BinaryMask& cyst) {
  require_same_dims(pancreas.dims(), cyst.dims(), "containment_stat");
  std::size_t total = 0, inside = 0;
  for (std::size_t i = 0; i < cyst.size(); ++i) {
    if (!cyst[i]) continue;
    ++total;
    if (pancreas[i]) ++inside;
  }
  if (total == 0) throw Error(Errc::empty_region, "cyst mask is empty");
  return double(inside) / double(total);
}

double containment_stat(const PhantomCase& c) { return containment_stat(c.pancreas, c.cyst); }

double max_cyst_to_organ_distance(const BinaryMask& pancreas, const BinaryMask& cyst) {
  require_same_dims(pancreas.dims(), cyst.dims(), "max_cyst_to_organ_distance");
  const auto d2 = squared_distance_to_sources(pancreas);
  std::int64_t worst = 0;
  for (std::size_t i = 0; i < cyst.size(); ++i) {
    if (!cyst[i]) continue;
    if (d2[i] < 0) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, d2[i]);
  }
  return std::sqrt(double(worst));
}

IntensityStats intensity_stats(const PhantomCase& c) {
  double sum[3] = {0, 0, 0};
  std::size_t cnt[3] = {0, 0, 0};
  for (std::size_t i = 0; i < c.volume.size(); ++i) {
    int cls;
    if (c.cyst[i]) {
      cls = 2;
    } else if (c.pancreas[i]) {
      cls = 1;
    } else if (c.distractors[i]) {
      continue;
    } else {
      cls = 0;
    }
    sum[cls] += c.volume[i];
    ++cnt[cls];
  }
  auto mean = [&](int k) { return cnt[k] ? sum[k] / double(cnt[k]) : 0.0; };
  return {mean(0), mean(1), mean(2)};
}

}  // namespace cystseg
