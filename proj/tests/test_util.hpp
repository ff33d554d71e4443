// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "cystseg/volume.hpp"

namespace testutil {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("cystseg_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline cystseg::BinaryMask random_mask(const cystseg::Dims& d, double density, std::mt19937_64& rng) {
  std::bernoulli_distribution bit(density);
  cystseg::BinaryMask m(d);
  for (auto& v : m.values()) v = bit(rng) ? 1 : 0;
  return m;
}

inline cystseg::Volume random_volume(const cystseg::Dims& d, std::mt19937_64& rng) {
  std::normal_distribution<float> g(0.0f, 50.0f);
  cystseg::Volume v(d);
  for (auto& x : v.values()) x = g(rng);
  return v;
}

}  // namespace testutil
