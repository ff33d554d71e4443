// SPDX-License-Identifier: Apache-2.0
#include "cystseg/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "cystseg/loss.hpp"
#include "seed.hpp"

namespace cystseg {

namespace {

struct LayerShape {
  std::uint32_t in, out, kernel;
  Activation act;
};

constexpr LayerShape kArchitecture[] = {
    {1, 8, 3, Activation::relu},
    {8, 8, 3, Activation::relu},
    {8, 1, 1, Activation::sigmoid},
};

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// out[o] = b[o] + sum_i w[o][i] (*) in[i], zero padding, same spatial size.
void conv_forward(const ConvLayer& L, const std::vector<double>& in, std::vector<double>& out,
                  std::size_t w, std::size_t h) {
  const std::size_t plane = w * h;
  const std::ptrdiff_t r = L.kernel / 2;
  out.assign(plane * L.out_channels, 0.0);
  for (std::size_t o = 0; o < L.out_channels; ++o) {
    double* dst = out.data() + o * plane;
    std::fill(dst, dst + plane, double(L.biases[o]));
    for (std::size_t i = 0; i < L.in_channels; ++i) {
      const double* src = in.data() + i * plane;
      for (std::uint32_t ky = 0; ky < L.kernel; ++ky) {
        for (std::uint32_t kx = 0; kx < L.kernel; ++kx) {
          const double wt = L.weights[((o * L.in_channels + i) * L.kernel + ky) * L.kernel + kx];
          const std::ptrdiff_t dy = std::ptrdiff_t(ky) - r, dx = std::ptrdiff_t(kx) - r;
          const std::size_t y0 = dy < 0 ? std::size_t(-dy) : 0, y1 = dy > 0 ? h - std::size_t(dy) : h;
          const std::size_t x0 = dx < 0 ? std::size_t(-dx) : 0, x1 = dx > 0 ? w - std::size_t(dx) : w;
          for (std::size_t y = y0; y < y1; ++y) {
            double* drow = dst + y * w;
            const double* srow = src + (y + dy) * w + dx;
            for (std::size_t x = x0; x < x1; ++x) drow[x] += wt * srow[x];
          }
        }
      }
    }
  }
}

// Accumulates weight/bias gradients and, when din is non-null, the input gradient.
void conv_backward(const ConvLayer& L, const std::vector<double>& in, const std::vector<double>& dout,
                   std::vector<double>& dw, std::vector<double>& db, std::vector<double>* din,
                   std::size_t w, std::size_t h) {
  const std::size_t plane = w * h;
  const std::ptrdiff_t r = L.kernel / 2;
  dw.assign(L.weight_count(), 0.0);
  db.assign(L.out_channels, 0.0);
  if (din) din->assign(plane * L.in_channels, 0.0);
  for (std::size_t o = 0; o < L.out_channels; ++o) {
    const double* g = dout.data() + o * plane;
    double bsum = 0.0;
    for (std::size_t p = 0; p < plane; ++p) bsum += g[p];
    db[o] = bsum;
    for (std::size_t i = 0; i < L.in_channels; ++i) {
      const double* src = in.data() + i * plane;
      double* dsrc = din ? din->data() + i * plane : nullptr;
      for (std::uint32_t ky = 0; ky < L.kernel; ++ky) {
        for (std::uint32_t kx = 0; kx < L.kernel; ++kx) {
          const std::size_t widx = ((o * L.in_channels + i) * L.kernel + ky) * L.kernel + kx;
          const double wt = L.weights[widx];
          const std::ptrdiff_t dy = std::ptrdiff_t(ky) - r, dx = std::ptrdiff_t(kx) - r;
          const std::size_t y0 = dy < 0 ? std::size_t(-dy) : 0, y1 = dy > 0 ? h - std::size_t(dy) : h;
          const std::size_t x0 = dx < 0 ? std::size_t(-dx) : 0, x1 = dx > 0 ? w - std::size_t(dx) : w;
          double acc = 0.0;
          for (std::size_t y = y0; y < y1; ++y) {
            const double* grow = g + y * w;
            const double* srow = src + (y + dy) * w + dx;
            for (std::size_t x = x0; x < x1; ++x) acc += grow[x] * srow[x];
            if (dsrc) {
              double* drow = dsrc + (y + dy) * w + dx;
              for (std::size_t x = x0; x < x1; ++x) drow[x] += wt * grow[x];
            }
          }
          dw[widx] = acc;
        }
      }
    }
  }
}

void require_finite_slice(const Plane<float>& slice) {
  if (slice.width == 0 || slice.height == 0 || slice.data.size() != slice.width * slice.height) {
    throw Error(Errc::shape_mismatch, "slice shape is inconsistent");
  }
  for (float v : slice.data) {
    if (!std::isfinite(v)) throw Error(Errc::non_finite, "non-finite value in input slice");
  }
}

std::vector<double> scaled_input(const ModelParams& params, const Plane<float>& slice) {
  std::vector<double> x(slice.data.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = (double(slice.data[i]) - double(params.input_offset)) * double(params.input_scale);
  return x;
}

void activate(Activation act, std::vector<double>& z) {
  if (act == Activation::relu) {
    for (double& v : z) v = v > 0.0 ? v : 0.0;
  } else {
    for (double& v : z) v = sigmoid(v);
  }
}

ModelParams make_params(float input_scale, float input_offset) {
  ModelParams p;
  p.input_scale = input_scale;
  p.input_offset = input_offset;
  for (const LayerShape& s : kArchitecture) {
    ConvLayer L;
    L.in_channels = s.in;
    L.out_channels = s.out;
    L.kernel = s.kernel;
    L.activation = s.act;
    L.weights.assign(L.weight_count(), 0.0f);
    L.biases.assign(s.out, 0.0f);
    p.layers.push_back(std::move(L));
  }
  return p;
}

}  // namespace

void ModelParams::validate() const {
  if (!std::isfinite(input_scale) || input_scale == 0.0f) {
    throw Error(Errc::invalid_argument, "input scale must be finite and nonzero");
  }
  if (!std::isfinite(input_offset)) throw Error(Errc::invalid_argument, "input offset must be finite");
  if (layers.size() != std::size(kArchitecture)) {
    throw Error(Errc::shape_mismatch, "expected " + std::to_string(std::size(kArchitecture)) + " layers");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const ConvLayer& L = layers[l];
    const LayerShape& s = kArchitecture[l];
    if (L.in_channels != s.in || L.out_channels != s.out || L.kernel != s.kernel || L.activation != s.act ||
        L.weights.size() != L.weight_count() || L.biases.size() != L.out_channels) {
      throw Error(Errc::shape_mismatch, "layer " + std::to_string(l) + " does not match the architecture");
    }
    auto finite = [](float v) { return std::isfinite(v); };
    if (!std::all_of(L.weights.begin(), L.weights.end(), finite) ||
        !std::all_of(L.biases.begin(), L.biases.end(), finite)) {
      throw Error(Errc::non_finite, "layer " + std::to_string(l) + " has non-finite parameters");
    }
  }
}

std::size_t ModelParams::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& L : layers) n += L.weights.size() + L.biases.size();
  return n;
}

ModelParams zero_params(float input_scale, float input_offset) { return make_params(input_scale, input_offset); }

ModelParams init_params(std::uint64_t seed, float input_scale, float input_offset) {
  ModelParams p = make_params(input_scale, input_offset);
  std::mt19937_64 rng(detail::mix_seed(seed, 0x1A17));
  for (ConvLayer& L : p.layers) {
    const float fan_in = float(L.in_channels * L.kernel * L.kernel);
    const float bound = std::sqrt(1.0f / fan_in);
    std::uniform_real_distribution<float> dist(-bound, bound);
    for (float& w : L.weights) w = dist(rng);
  }
  return p;
}

ForwardResult forward(const ModelParams& params, const Plane<float>& slice) {
  require_finite_slice(slice);
  ForwardResult r;
  r.cache.width = slice.width;
  r.cache.height = slice.height;
  r.cache.activations.reserve(params.layers.size() + 1);
  r.cache.activations.push_back(scaled_input(params, slice));
  for (const ConvLayer& L : params.layers) {
    std::vector<double> z;
    conv_forward(L, r.cache.activations.back(), z, slice.width, slice.height);
    activate(L.activation, z);
    r.cache.activations.push_back(std::move(z));
  }
  r.pred.width = slice.width;
  r.pred.height = slice.height;
  r.pred.data = r.cache.activations.back();
  return r;
}

Plane<double> predict_slice(const ModelParams& params, const Plane<float>& slice) {
  require_finite_slice(slice);
  std::vector<double> a = scaled_input(params, slice), z;
  for (const ConvLayer& L : params.layers) {
    conv_forward(L, a, z, slice.width, slice.height);
    activate(L.activation, z);
    std::swap(a, z);
  }
  Plane<double> out;
  out.width = slice.width;
  out.height = slice.height;
  out.data = std::move(a);
  return out;
}

ParamGrads backward(const ModelParams& params, const ForwardCache& cache, const Plane<double>& grad_pred) {
  const std::size_t w = cache.width, h = cache.height, plane = w * h;
  if (cache.activations.size() != params.layers.size() + 1 || grad_pred.width != w || grad_pred.height != h ||
      grad_pred.data.size() != plane) {
    throw Error(Errc::cache_mismatch, "forward cache does not match parameters or gradient shape");
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    if (cache.activations[l + 1].size() != plane * params.layers[l].out_channels) {
      throw Error(Errc::cache_mismatch, "cached activation size disagrees with layer " + std::to_string(l));
    }
  }

  ParamGrads g;
  g.weights.resize(params.layers.size());
  g.biases.resize(params.layers.size());

  // Gradient w.r.t. the current layer's post-activation output.
  std::vector<double> dout = grad_pred.data;
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const ConvLayer& L = params.layers[l];
    const std::vector<double>& a = cache.activations[l + 1];
    if (L.activation == Activation::sigmoid) {
      for (std::size_t p = 0; p < dout.size(); ++p) dout[p] *= a[p] * (1.0 - a[p]);
    } else {
      for (std::size_t p = 0; p < dout.size(); ++p) dout[p] = a[p] > 0.0 ? dout[p] : 0.0;
    }
    std::vector<double> din;
    conv_backward(L, cache.activations[l], dout, g.weights[l], g.biases[l], l > 0 ? &din : nullptr, w, h);
    dout = std::move(din);
  }
  return g;
}

ModelParams sgd_step(const ModelParams& params, const ParamGrads& grads, double learning_rate) {
  if (grads.weights.size() != params.layers.size() || grads.biases.size() != params.layers.size()) {
    throw Error(Errc::shape_mismatch, "gradient layer count differs from parameters");
  }
  ModelParams next = params;
  for (std::size_t l = 0; l < next.layers.size(); ++l) {
    ConvLayer& L = next.layers[l];
    if (grads.weights[l].size() != L.weights.size() || grads.biases[l].size() != L.biases.size()) {
      throw Error(Errc::shape_mismatch, "gradient shape differs from layer " + std::to_string(l));
    }
    for (std::size_t i = 0; i < L.weights.size(); ++i) {
      L.weights[i] = float(double(L.weights[i]) - learning_rate * grads.weights[l][i]);
    }
    for (std::size_t i = 0; i < L.biases.size(); ++i) {
      L.biases[i] = float(double(L.biases[i]) - learning_rate * grads.biases[l][i]);
    }
  }
  return next;
}

TrainConfig TrainConfig::reference_schedule(std::uint64_t seed) {
  TrainConfig c;
  c.learning_rate = 1e-5;
  c.iterations = 60000;
  c.snapshot_at.clear();
  for (std::uint32_t it = 20000; it <= 60000; it += 5000) c.snapshot_at.push_back(it);
  c.seed = seed;
  return c;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error(Errc::invalid_argument, "learning rate must be finite and >= 0");
  }
  if (!(smooth >= 0.0)) throw Error(Errc::invalid_argument, "smooth must be >= 0");
  if (snapshot_at.empty()) throw Error(Errc::invalid_argument, "snapshot schedule is empty");
  for (std::size_t i = 0; i < snapshot_at.size(); ++i) {
    if (snapshot_at[i] == 0 || snapshot_at[i] > iterations) {
      throw Error(Errc::invalid_argument, "snapshot iteration outside [1, iterations]");
    }
    if (i > 0 && snapshot_at[i] <= snapshot_at[i - 1]) {
      throw Error(Errc::invalid_argument, "snapshot schedule must be strictly increasing");
    }
  }
}

std::vector<Snapshot> train(std::span<const TrainingPair> dataset, const TrainConfig& config) {
  return train_from(init_params(config.seed), dataset, config);
}

std::vector<Snapshot> train_from(ModelParams params, std::span<const TrainingPair> dataset,
                                 const TrainConfig& config) {
  config.validate();
  params.validate();
  if (dataset.empty()) throw Error(Errc::empty_dataset, "training set is empty");
  for (const TrainingPair& p : dataset) {
    if (p.slice.width != p.target.width || p.slice.height != p.target.height ||
        p.target.data.size() != p.slice.data.size()) {
      throw Error(Errc::dims_mismatch, "slice and target shapes differ");
    }
  }

  std::mt19937_64 rng(detail::mix_seed(config.seed, 0x5A3B));
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  std::vector<Snapshot> snapshots;
  snapshots.reserve(config.snapshot_at.size());
  auto next_snapshot = config.snapshot_at.begin();

  for (std::uint32_t it = 1; it <= config.iterations; ++it) {
    const TrainingPair& sample = dataset[pick(rng)];
    ForwardResult fr = forward(params, sample.slice);
    const std::vector<double> g = dsc_loss_grad(fr.pred.data, sample.target.data, config.smooth);
    Plane<double> dloss(fr.pred.width, fr.pred.height);
    for (std::size_t i = 0; i < g.size(); ++i) dloss.data[i] = -g[i];
    params = sgd_step(params, backward(params, fr.cache, dloss), config.learning_rate);

    if (next_snapshot != config.snapshot_at.end() && *next_snapshot == it) {
      snapshots.push_back(Snapshot{params, it});
      ++next_snapshot;
    }
  }
  return snapshots;
}

}  // namespace cystseg
