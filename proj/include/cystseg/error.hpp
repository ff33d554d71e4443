// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cystseg {

enum class Errc {
  missing_file,
  bad_magic,
  truncated_payload,
  non_finite,
  invalid_mask_value,
  io_failure,
  dims_mismatch,
  shape_mismatch,
  empty_region,
  grid_too_large,
  empty_dataset,
  cache_mismatch,
  too_few_cases,
  rejection_budget_exceeded,
  invalid_argument,
  validation,
};

std::string_view to_string(Errc code);

/// Every failure raised by the library carries one of the named codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace cystseg
