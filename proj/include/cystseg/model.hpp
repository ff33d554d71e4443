// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cystseg/volume.hpp"

namespace cystseg {

enum class Activation : std::uint32_t { relu = 0, sigmoid = 1 };

/// One zero-padded "same" convolution. Weights are laid out [out][in][ky][kx].
struct ConvLayer {
  std::uint32_t in_channels = 0;
  std::uint32_t out_channels = 0;
  std::uint32_t kernel = 0;
  Activation activation = Activation::relu;
  std::vector<float> weights;
  std::vector<float> biases;

  std::size_t weight_count() const noexcept {
    return std::size_t(out_channels) * in_channels * kernel * kernel;
  }
  bool operator==(const ConvLayer&) const = default;
};

/// Fixed intensity window applied to every input slice before the first conv:
/// (x - input_offset) * input_scale. Not trained.
inline constexpr float kDefaultInputScale = 0.03f;
inline constexpr float kDefaultInputOffset = 100.0f;

/// conv3x3(1->8)+ReLU, conv3x3(8->8)+ReLU, conv1x1(8->1)+sigmoid.
struct ModelParams {
  float input_scale = kDefaultInputScale;
  float input_offset = kDefaultInputOffset;
  std::vector<ConvLayer> layers;

  /// Throws unless the layer stack is the fixed per-slice architecture with finite weights.
  void validate() const;
  std::size_t parameter_count() const noexcept;
  bool operator==(const ModelParams&) const = default;
};

/// Fan-in scaled uniform weights in [-sqrt(1/fan_in), sqrt(1/fan_in)], zero biases.
ModelParams init_params(std::uint64_t seed, float input_scale = kDefaultInputScale,
                        float input_offset = kDefaultInputOffset);

/// Same architecture with every weight and bias zero.
ModelParams zero_params(float input_scale = kDefaultInputScale, float input_offset = kDefaultInputOffset);

struct ForwardCache {
  std::size_t width = 0;
  std::size_t height = 0;
  // activations[0] is the scaled input; activations[l + 1] the output of layer l.
  std::vector<std::vector<double>> activations;
};

struct ForwardResult {
  Plane<double> pred;
  ForwardCache cache;
};

ForwardResult forward(const ModelParams& params, const Plane<float>& slice);

/// Forward pass without keeping intermediates.
Plane<double> predict_slice(const ModelParams& params, const Plane<float>& slice);

struct ParamGrads {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
};

/// Gradients of a scalar loss w.r.t. every weight and bias, given d loss / d pred.
ParamGrads backward(const ModelParams& params, const ForwardCache& cache, const Plane<double>& grad_pred);

ModelParams sgd_step(const ModelParams& params, const ParamGrads& grads, double learning_rate);

struct TrainConfig {
  double learning_rate = 3e-2;
  std::uint32_t iterations = 3000;
  std::vector<std::uint32_t> snapshot_at = {1000, 1250, 1500, 1750, 2000, 2250, 2500, 2750, 3000};
  std::uint64_t seed = 0;
  double smooth = 1.0;

  /// 60K iterations at 1e-5 with snapshots every 5K from 20K; meant for pre-trained
  /// backbones, far too slow for a randomly initialized desk model.
  static TrainConfig reference_schedule(std::uint64_t seed);

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct Snapshot {
  ModelParams params;
  std::uint32_t iteration = 0;

  bool operator==(const Snapshot&) const = default;
};

struct TrainingPair {
  Plane<float> slice;
  Plane<std::uint8_t> target;
};

/// Plain SGD on 1 - dsc, one uniformly sampled slice per step.
std::vector<Snapshot> train(std::span<const TrainingPair> dataset, const TrainConfig& config);

/// Same, starting from given parameters instead of init_params(config.seed).
std::vector<Snapshot> train_from(ModelParams params, std::span<const TrainingPair> dataset,
                                 const TrainConfig& config);

}  // namespace cystseg
