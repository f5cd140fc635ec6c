#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "skelsplit/adjacency.hpp"
#include "skelsplit/kernels.hpp"
#include "skelsplit/skeleton.hpp"

namespace skelsplit {

struct LayerSpec {
  std::size_t out_channels = 64;
  std::size_t temporal_stride = 1;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Architecture {
  std::size_t in_channels = 3;
  std::size_t joints = 18;
  std::size_t partitions = 4;  // K
  std::size_t num_classes = 3;
  std::size_t temporal_kernel = 9;
  bool mask_enabled = false;
  std::vector<LayerSpec> layers = default_layers();

  /// Three blocks of three layers with 64, 128 and 256 output channels;
  /// temporal stride 2 on the first layer of the second and third block.
  static std::vector<LayerSpec> default_layers();

  std::size_t temporal_padding() const { return (temporal_kernel - 1) / 2; }
  void validate() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

template <class S>
struct LayerParams {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t temporal_stride = 1;
  std::vector<S> weights;        // K×C_out×C_in, one kernel subset per label
  std::vector<S> bias;           // C_out
  std::vector<S> mask;           // V×V edge importance, empty when disabled
  std::vector<S> temporal;       // K_t×C_out×C_out
  std::vector<S> temporal_bias;  // C_out

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

template <class S>
struct ModelParams {
  Architecture arch;
  std::vector<LayerParams<S>> layers;
  std::vector<S> classifier;       // classes×C_last
  std::vector<S> classifier_bias;  // classes
  // Fixed per-channel input affine x' = (x − shift)·scale; not trained, see fit_input_normalization.
  std::vector<S> input_shift;  // C_in
  std::vector<S> input_scale;  // C_in

  /// Visits every tensor in checkpoint order as f(name, span):
  /// per layer weights, bias, mask (when enabled), temporal, temporal_bias;
  /// then classifier, classifier_bias.
  template <class F>
  void for_each_tensor(F&& f) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& layer = layers[l];
      const std::string p = "layer" + std::to_string(l) + ".";
      f(p + "weights", std::span<S>(layer.weights));
      f(p + "bias", std::span<S>(layer.bias));
      if (!layer.mask.empty()) f(p + "mask", std::span<S>(layer.mask));
      f(p + "temporal", std::span<S>(layer.temporal));
      f(p + "temporal_bias", std::span<S>(layer.temporal_bias));
    }
    f(std::string("classifier"), std::span<S>(classifier));
    f(std::string("classifier_bias"), std::span<S>(classifier_bias));
  }
  template <class F>
  void for_each_tensor(F&& f) const {
    const_cast<ModelParams*>(this)->for_each_tensor(
        [&](const std::string& name, std::span<S> values) { f(name, std::span<const S>(values)); });
  }

  std::size_t parameter_count() const;
  /// Same shapes, all values zero (gradient accumulator).
  ModelParams zeros_like() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// He-normal weights, zero biases, all-ones mask, identity input normalization.
template <class S>
ModelParams<S> init_model(const Architecture& arch, std::uint64_t seed);

template <class To, class From>
ModelParams<To> cast_model(const ModelParams<From>& model);

/// T×V×C feature tensor.
template <class S>
struct Features {
  std::size_t frames = 0;
  std::size_t joints = 0;
  std::size_t channels = 0;
  std::vector<S> values;
};

/// Sets the input shift/scale to the per-channel mean and 1/stddev over every
/// frame and joint of `samples`; channels with no spread get scale 0.
template <class S>
void fit_input_normalization(ModelParams<S>& model, std::span<const Features<S>> samples);

enum class FeatureMode {
  raw,          // X, Y, (Z), confidence as recorded
  centered,     // coordinates minus the frame's center of gravity
  cg_distance,  // distance to the center of gravity in channel 0, other coordinates zero, confidence kept
};

template <class S>
Features<S> make_features(const SkeletonSequence& sequence, FeatureMode mode = FeatureMode::raw);

/// Truncates to `frames`, or pads by repeating the last frame.
SkeletonSequence fit_frames(const SkeletonSequence& sequence, std::size_t frames);

/// Normalized adjacency in kernel layout: [F]×K×V×V with F = T (time varying) or 1.
template <class S>
struct GraphInput {
  std::size_t frames = 1;
  std::size_t partitions = 0;
  std::size_t joints = 0;
  bool time_varying = false;
  std::vector<S> values;

  /// Stack used at temporal resolution `step` for `frames_out` frames:
  /// frame t takes the stack of source frame t·step.
  GraphInput subsample(std::size_t step, std::size_t frames_out) const;
};

template <class S>
GraphInput<S> to_graph_input(const StackSequence& stacks);

/// Spatial graph convolution of one layer: Σ_k ((Ã_k ⊙ M) f_t) W_kᵀ + bias.
/// M is the layer mask when `mask_enabled`, all ones otherwise.
template <class S>
Features<S> spatial_gconv(const Features<S>& input, const GraphInput<S>& graph, const LayerParams<S>& layer,
                          bool mask_enabled);

/// Temporal convolution of one layer (kernel `kernel_size`, zero padding, layer stride).
template <class S>
Features<S> temporal_conv(const Features<S>& input, const LayerParams<S>& layer, std::size_t kernel_size);

struct ForwardOptions {
  bool training = false;
  double dropout = 0.0;
  std::uint64_t dropout_seed = 0;
};

template <class S>
struct LayerCache {
  Features<S> input;
  GraphInput<S> graph;
  std::vector<S> aggregated;  // K×T×V×C_in
  std::vector<S> spatial;     // ReLU(graph conv), T×V×C_out
  std::vector<S> temporal;    // ReLU(temporal conv), T'×V×C_out
  std::vector<S> dropout;     // per-element scale (0 or 1/(1-p)), empty when inactive
};

template <class S>
struct ForwardCache {
  std::vector<LayerCache<S>> layers;
  std::vector<S> pooled;  // C_last
  std::vector<S> logits;
  std::vector<S> probabilities;
};

/// Class probabilities for one sequence. Fills `cache` for backward when given.
template <class S>
std::vector<S> forward(const ModelParams<S>& model, const Features<S>& features, const GraphInput<S>& graph,
                       const ForwardOptions& options = {}, ForwardCache<S>* cache = nullptr);

/// Accumulates dLoss/dParams into `grads` given dLoss/dLogits for the cached sample.
template <class S>
void backward(const ModelParams<S>& model, const ForwardCache<S>& cache, std::span<const S> grad_logits,
              ModelParams<S>& grads);

template <class S>
std::vector<S> softmax(std::span<const S> logits);

template <class S>
S cross_entropy(std::span<const S> probabilities, std::size_t label);

}  // namespace skelsplit
