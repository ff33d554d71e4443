// SPDX-License-Identifier: Apache-2.0
#include "cystseg/error.hpp"

namespace cystseg {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::missing_file: return "missing-file";
    case Errc::bad_magic: return "bad-magic";
    case Errc::truncated_payload: return "truncated-payload";
    case Errc::non_finite: return "non-finite";
    case Errc::invalid_mask_value: return "invalid-mask-value";
    case Errc::io_failure: return "io-failure";
    case Errc::dims_mismatch: return "dims-mismatch";
    case Errc::shape_mismatch: return "shape-mismatch";
    case Errc::empty_region: return "empty-region";
    case Errc::grid_too_large: return "grid-too-large";
    case Errc::empty_dataset: return "empty-dataset";
    case Errc::cache_mismatch: return "cache-mismatch";
    case Errc::too_few_cases: return "too-few-cases";
    case Errc::rejection_budget_exceeded: return "rejection-budget-exceeded";
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::validation: return "validation";
  }
  return "unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace cystseg
