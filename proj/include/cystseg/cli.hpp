// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cystseg/model.hpp"
#include "cystseg/phantom.hpp"
#include "cystseg/transform.hpp"

namespace cystseg {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Everything a subcommand needs. Resolution order: CLI flag, then config file, then the
/// defaults below.
struct RunConfig {
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  std::vector<std::string> modes;  // empty: command default
  std::filesystem::path data_dir;
  std::filesystem::path model_dir;
  std::filesystem::path out_dir;
  std::size_t n = 24;
  std::string case_id;
  bool gt_pancreas = false;
  bool corrupt_gradient = false;

  TrainConfig train;
  TransformParams transform;
  PhantomSpec phantom;
};

/// Applies the keys present in a JSON config document on top of `cfg`.
void apply_config_json(RunConfig& cfg, const std::string& json_text);

/// Parses argv, runs the subcommand, returns the process exit code. Errors are reported on `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cystseg
