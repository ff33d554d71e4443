// SPDX-License-Identifier: Apache-2.0
#include "cystseg/loss.hpp"

#include <cmath>

namespace cystseg {

namespace {

struct DiceSums {
  double overlap = 0.0;  // sum c_i * t_i
  double pred = 0.0;     // sum c_i
  double truth = 0.0;    // sum t_i
};

DiceSums sums_of(std::span<const double> c, std::span<const std::uint8_t> t, double smooth) {
  if (c.size() != t.size()) throw Error(Errc::dims_mismatch, "prediction and target sizes differ");
  if (!(smooth >= 0.0)) throw Error(Errc::invalid_argument, "smooth must be >= 0");
  DiceSums s;
  for (std::size_t i = 0; i < c.size(); ++i) {
    s.pred += c[i];
    if (t[i]) {
      s.truth += 1.0;
      s.overlap += c[i];
    }
  }
  return s;
}

std::vector<double> widen(const ProbMap& p) { return {p.values().begin(), p.values().end()}; }

}  // namespace

LossValue dsc_loss(std::span<const double> c, std::span<const std::uint8_t> target, double smooth) {
  const DiceSums s = sums_of(c, target, smooth);
  const double den = s.pred + s.truth + smooth;
  LossValue v;
  v.dsc = den == 0.0 ? 1.0 : (2.0 * s.overlap + smooth) / den;
  v.objective = 1.0 - v.dsc;
  return v;
}

LossValue dsc_loss(const ProbMap& c, const BinaryMask& target, double smooth) {
  require_same_dims(c.dims(), target.dims(), "dsc_loss");
  const auto wide = widen(c);
  return dsc_loss(wide, target.values(), smooth);
}

std::vector<double> dsc_loss_grad(std::span<const double> c, std::span<const std::uint8_t> target,
                                  double smooth) {
  const DiceSums s = sums_of(c, target, smooth);
  const double den = s.pred + s.truth + smooth;
  std::vector<double> g(c.size(), 0.0);
  if (den == 0.0) return g;
  const double num = 2.0 * s.overlap + smooth;
  const double inv_sq = 1.0 / (den * den);
  for (std::size_t k = 0; k < c.size(); ++k) {
    g[k] = ((target[k] ? 2.0 * den : 0.0) - num) * inv_sq;
  }
  return g;
}

std::vector<double> dsc_loss_grad(const ProbMap& c, const BinaryMask& target, double smooth) {
  require_same_dims(c.dims(), target.dims(), "dsc_loss_grad");
  const auto wide = widen(c);
  return dsc_loss_grad(wide, target.values(), smooth);
}

double joint_loss(const ProbMap& p, const BinaryMask& pstar, const ProbMap& c, const BinaryMask& cstar,
                  const JointLossParams& params, double smooth) {
  if (!(params.lambda >= 0.0 && params.lambda <= 1.0)) {
    throw Error(Errc::invalid_argument, "lambda must lie in [0,1]");
  }
  const double lp = dsc_loss(p, pstar, smooth).objective;
  const double lc = dsc_loss(c, cstar, smooth).objective;
  return params.lambda * lp + (1.0 - params.lambda) * lc;
}

}  // namespace cystseg
