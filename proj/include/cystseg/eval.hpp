// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cystseg/model.hpp"
#include "cystseg/phantom.hpp"
#include "cystseg/transform.hpp"
#include "cystseg/volume.hpp"

namespace cystseg {

/// Set DSC 2|A n G| / (|A| + |G|); 1 when both are empty.
double dsc_metric(const BinaryMask& a, const BinaryMask& g);

enum class Mode : std::uint8_t { cascade = 0, oracle = 1, baseline = 2 };

std::string_view mode_name(Mode m);
Mode parse_mode(std::string_view name);

struct CaseResult {
  std::string case_id;
  Mode mode = Mode::cascade;
  std::optional<double> pancreas_dsc;  // absent for the single-stage baseline
  double cyst_dsc = 0.0;
  bool missed = false;  // cyst_dsc == 0 against a nonempty ground truth
};

struct EvalStats {
  double mean = 0.0;
  double std = 0.0;  // population
  double max = 0.0;
  double min = 0.0;
  std::size_t miss_count = 0;
  std::size_t n = 0;
};

enum class Field : std::uint8_t { pancreas, cyst };

/// Throws Errc::empty_dataset on an empty list. Cases without the field are skipped.
EvalStats aggregate(const std::vector<CaseResult>& results, Field field);

struct FoldSplit {
  std::array<std::vector<std::string>, 4> folds;
  std::uint64_t seed = 0;
};

/// Seeded shuffle, then round-robin into 4 folds.
FoldSplit make_folds(const std::vector<std::string>& case_ids, std::uint64_t seed);

struct CrossValConfig {
  TrainConfig train;
  TransformParams transform;
  std::uint64_t fold_seed = 0;
  std::size_t jobs = 1;
};

struct ModeReport {
  std::vector<CaseResult> cases;  // ordered by case_id
  EvalStats cyst;
  std::optional<EvalStats> pancreas;
};

/// Trains on three folds and tests on the fourth, for every fold and requested mode.
std::map<Mode, ModeReport> cross_validate(const std::vector<PhantomCase>& dataset, const CrossValConfig& config,
                                          const std::set<Mode>& modes);

/// `case_id,mode,pancreas_dsc,cyst_dsc,missed`, rows in (mode, case_id) order.
std::string results_csv(const std::map<Mode, ModeReport>& reports);

/// mode -> {mean, std, max, min, miss_count, n}, plus the pancreas row when available.
std::string summary_json(const std::map<Mode, ModeReport>& reports);

}  // namespace cystseg
