// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cystseg {

struct TensorCheck {
  std::string name;  // e.g. "layer0.weights"
  std::size_t count = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  double loss_max_rel_error = 0.0;
  std::size_t loss_instances = 0;
  std::vector<TensorCheck> tensors;
  double network_max_rel_error = 0.0;
  std::size_t network_instances = 0;
  std::size_t network_rejected = 0;  // draws that straddled a ReLU kink
  bool passed = false;
};

struct GradCheckOptions {
  std::uint64_t seed = 0;
  std::size_t loss_instances = 100;
  double loss_step = 1e-4;
  double loss_tolerance = 1e-5;
  std::size_t network_instances = 3;
  std::size_t network_max_attempts = 400;
  double network_step = 1e-3;
  double network_tolerance = 1e-3;
  // Scales every analytic gradient before comparison; anything but 1 must fail.
  double corrupt_factor = 1.0;
};

/// Central finite differences against dsc_loss_grad on random 8x8x1 instances, and against
/// backward() through forward + dsc objective on random 8x8 slices. Network draws where a
/// +/-h perturbation flips any ReLU are redrawn.
GradCheckReport run_gradcheck(const GradCheckOptions& options);

}  // namespace cystseg
