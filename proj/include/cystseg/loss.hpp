// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cystseg/volume.hpp"

namespace cystseg {

inline constexpr double kDefaultSmooth = 1.0;

/// dsc is the (smoothed) Dice similarity; objective = 1 - dsc is what training minimizes.
struct LossValue {
  double dsc = 0.0;
  double objective = 1.0;
};

struct JointLossParams {
  double lambda = 0.5;
};

// dsc = (2 sum c*t + smooth) / (sum c + sum t + smooth). With smooth == 0 and an empty
// denominator the similarity is taken to be 1.
LossValue dsc_loss(std::span<const double> c, std::span<const std::uint8_t> target,
                   double smooth = kDefaultSmooth);
LossValue dsc_loss(const ProbMap& c, const BinaryMask& target, double smooth = kDefaultSmooth);

/// d dsc / d c_k for every k. The gradient of the objective is the negation.
std::vector<double> dsc_loss_grad(std::span<const double> c, std::span<const std::uint8_t> target,
                                  double smooth = kDefaultSmooth);
std::vector<double> dsc_loss_grad(const ProbMap& c, const BinaryMask& target,
                                  double smooth = kDefaultSmooth);

/// lambda * objective_P + (1 - lambda) * objective_C. Diagnostics only: the two stages are
/// optimized separately, so lambda never reaches a gradient.
double joint_loss(const ProbMap& p, const BinaryMask& pstar, const ProbMap& c, const BinaryMask& cstar,
                  const JointLossParams& params, double smooth = kDefaultSmooth);

}  // namespace cystseg
