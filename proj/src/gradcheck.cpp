// SPDX-License-Identifier: Apache-2.0
#include "cystseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cystseg/loss.hpp"
#include "cystseg/model.hpp"
#include "seed.hpp"

namespace cystseg {

namespace {

double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / (std::abs(numeric) + 1e-8);
}

}  // namespace

GradCheckReport run_gradcheck(const GradCheckOptions& o) {
  GradCheckReport report;
  std::mt19937_64 rng(detail::mix_seed(o.seed, 0x6C));
  std::uniform_real_distribution<double> prob(0.02, 0.98);
  std::bernoulli_distribution bit(0.3);

  constexpr std::size_t kSide = 8;
  for (std::size_t inst = 0; inst < o.loss_instances; ++inst) {
    std::vector<double> c(kSide * kSide);
    std::vector<std::uint8_t> t(c.size());
    for (auto& v : c) v = prob(rng);
    for (auto& v : t) v = bit(rng) ? 1 : 0;
    const auto g = dsc_loss_grad(c, t, kDefaultSmooth);
    for (std::size_t k = 0; k < c.size(); ++k) {
      const double keep = c[k];
      c[k] = keep + o.loss_step;
      const double up = dsc_loss(c, t, kDefaultSmooth).dsc;
      c[k] = keep - o.loss_step;
      const double down = dsc_loss(c, t, kDefaultSmooth).dsc;
      c[k] = keep;
      const double fd = (up - down) / (2.0 * o.loss_step);
      report.loss_max_rel_error = std::max(report.loss_max_rel_error, rel_error(o.corrupt_factor * g[k], fd));
    }
  }
  report.loss_instances = o.loss_instances;

  std::normal_distribution<float> pixel(0.0f, 0.3f);
  const std::size_t n_layers = init_params(0).layers.size();
  for (std::size_t l = 0; l < n_layers; ++l) {
    report.tensors.push_back({"layer" + std::to_string(l) + ".weights", 0, 0.0});
    report.tensors.push_back({"layer" + std::to_string(l) + ".biases", 0, 0.0});
  }

  std::size_t accepted = 0;
  for (std::size_t attempt = 0; accepted < o.network_instances && attempt < o.network_max_attempts; ++attempt) {
    ModelParams params = init_params(detail::mix_seed(o.seed, 0x100 + attempt), 1.0f, 0.0f);
    std::uniform_real_distribution<float> bias(-0.3f, 0.3f);
    for (auto& L : params.layers)
      for (float& b : L.biases) b = bias(rng);

    Plane<float> slice(kSide, kSide);
    for (float& v : slice.data) v = pixel(rng);
    std::vector<std::uint8_t> target(kSide * kSide);
    for (auto& v : target) v = bit(rng) ? 1 : 0;

    const ForwardResult fr = forward(params, slice);
    const auto g = dsc_loss_grad(fr.pred.data, target, kDefaultSmooth);
    Plane<double> dpred(kSide, kSide);
    for (std::size_t i = 0; i < g.size(); ++i) dpred.data[i] = -g[i];
    const ParamGrads analytic = backward(params, fr.cache, dpred);

    // Finite differences are only meaningful if no ReLU changes state inside [-h, h].
    bool smooth = true;
    auto objective = [&](const ModelParams& p) {
      const ForwardResult r = forward(p, slice);
      for (std::size_t l = 0; l + 1 < p.layers.size() && smooth; ++l) {
        if (p.layers[l].activation != Activation::relu) continue;
        const auto& base = fr.cache.activations[l + 1];
        const auto& now = r.cache.activations[l + 1];
        for (std::size_t i = 0; i < base.size(); ++i) {
          if ((base[i] > 0.0) != (now[i] > 0.0)) {
            smooth = false;
            break;
          }
        }
      }
      return dsc_loss(r.pred.data, target, kDefaultSmooth).objective;
    };

    std::vector<TensorCheck> local = report.tensors;
    for (std::size_t l = 0; l < n_layers && smooth; ++l) {
      for (int which = 0; which < 2 && smooth; ++which) {
        std::vector<float>& values = which == 0 ? params.layers[l].weights : params.layers[l].biases;
        const std::vector<double>& grads = which == 0 ? analytic.weights[l] : analytic.biases[l];
        TensorCheck& tc = local[2 * l + std::size_t(which)];
        for (std::size_t k = 0; k < values.size() && smooth; ++k) {
          const float keep = values[k];
          const float up_v = float(double(keep) + o.network_step);
          const float down_v = float(double(keep) - o.network_step);
          values[k] = up_v;
          const double up = objective(params);
          values[k] = down_v;
          const double down = objective(params);
          values[k] = keep;
          const double fd = (up - down) / (double(up_v) - double(down_v));
          tc.max_rel_error = std::max(tc.max_rel_error, rel_error(o.corrupt_factor * grads[k], fd));
          ++tc.count;
        }
      }
    }
    if (!smooth) {
      ++report.network_rejected;
      continue;
    }
    report.tensors = std::move(local);
    ++accepted;
  }
  report.network_instances = accepted;
  for (const TensorCheck& tc : report.tensors) {
    report.network_max_rel_error = std::max(report.network_max_rel_error, tc.max_rel_error);
  }
  report.passed = accepted == o.network_instances &&
                  report.loss_max_rel_error < o.loss_tolerance && report.network_max_rel_error < o.network_tolerance;
  return report;
}

}  // namespace cystseg
