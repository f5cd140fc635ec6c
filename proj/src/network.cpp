#include "skelsplit/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "skelsplit/errors.hpp"

namespace skelsplit {

std::vector<LayerSpec> Architecture::default_layers() {
  return {{64, 1}, {64, 1}, {64, 1}, {128, 2}, {128, 1}, {128, 1}, {256, 2}, {256, 1}, {256, 1}};
}

void Architecture::validate() const {
  if (in_channels == 0 || joints == 0 || partitions == 0 || num_classes == 0) {
    throw ConfigError("architecture: channels, joints, partitions and classes must be positive");
  }
  if (temporal_kernel == 0 || temporal_kernel % 2 == 0) throw ConfigError("architecture: temporal kernel must be odd");
  if (layers.empty()) throw ConfigError("architecture: no layers");
  for (const LayerSpec& l : layers) {
    if (l.out_channels == 0 || l.temporal_stride == 0) {
      throw ConfigError("architecture: layer channels and stride must be positive");
    }
  }
}

template <class S>
std::size_t ModelParams<S>::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&](const std::string&, std::span<const S> t) { n += t.size(); });
  return n;
}

template <class S>
ModelParams<S> ModelParams<S>::zeros_like() const {
  ModelParams<S> z = *this;
  z.for_each_tensor([](const std::string&, std::span<S> t) { std::fill(t.begin(), t.end(), S(0)); });
  return z;
}

template <class S>
ModelParams<S> init_model(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](std::vector<S>& v, std::size_t n, double stddev) {
    v.resize(n);
    for (S& x : v) x = static_cast<S>(stddev * normal(rng));
  };
  ModelParams<S> m;
  m.arch = arch;
  std::size_t in = arch.in_channels;
  for (const LayerSpec& spec : arch.layers) {
    LayerParams<S> layer;
    layer.in_channels = in;
    layer.out_channels = spec.out_channels;
    layer.temporal_stride = spec.temporal_stride;
    fill(layer.weights, arch.partitions * spec.out_channels * in,
         std::sqrt(2.0 / static_cast<double>(arch.partitions * in)));
    layer.bias.assign(spec.out_channels, S(0));
    if (arch.mask_enabled) layer.mask.assign(arch.joints * arch.joints, S(1));
    fill(layer.temporal, arch.temporal_kernel * spec.out_channels * spec.out_channels,
         std::sqrt(2.0 / static_cast<double>(arch.temporal_kernel * spec.out_channels)));
    layer.temporal_bias.assign(spec.out_channels, S(0));
    m.layers.push_back(std::move(layer));
    in = spec.out_channels;
  }
  fill(m.classifier, arch.num_classes * in, std::sqrt(1.0 / static_cast<double>(in)));
  m.classifier_bias.assign(arch.num_classes, S(0));
  m.input_shift.assign(arch.in_channels, S(0));
  m.input_scale.assign(arch.in_channels, S(1));
  return m;
}

template <class To, class From>
ModelParams<To> cast_model(const ModelParams<From>& model) {
  auto conv = [](const std::vector<From>& v) { return std::vector<To>(v.begin(), v.end()); };
  ModelParams<To> out;
  out.arch = model.arch;
  for (const auto& l : model.layers) {
    out.layers.push_back({l.in_channels, l.out_channels, l.temporal_stride, conv(l.weights), conv(l.bias),
                          conv(l.mask), conv(l.temporal), conv(l.temporal_bias)});
  }
  out.classifier = conv(model.classifier);
  out.classifier_bias = conv(model.classifier_bias);
  out.input_shift = conv(model.input_shift);
  out.input_scale = conv(model.input_scale);
  return out;
}

template <class S>
void fit_input_normalization(ModelParams<S>& model, std::span<const Features<S>> samples) {
  const std::size_t C = model.arch.in_channels;
  std::vector<double> sum(C, 0.0), sq(C, 0.0);
  double count = 0.0;
  for (const Features<S>& f : samples) {
    if (f.channels != C) throw ShapeError("features have the wrong channel count");
    for (std::size_t i = 0; i < f.values.size(); ++i) {
      const double x = static_cast<double>(f.values[i]);
      sum[i % C] += x;
      sq[i % C] += x * x;
    }
    count += static_cast<double>(f.frames * f.joints);
  }
  if (count == 0.0) throw EmptyDatasetError();
  model.input_shift.assign(C, S(0));
  model.input_scale.assign(C, S(1));
  for (std::size_t c = 0; c < C; ++c) {
    const double mean = sum[c] / count;
    const double var = std::max(0.0, sq[c] / count - mean * mean);
    model.input_shift[c] = static_cast<S>(mean);
    model.input_scale[c] = var > 1e-12 ? static_cast<S>(1.0 / std::sqrt(var)) : S(0);
  }
}

template <class S>
Features<S> make_features(const SkeletonSequence& sequence, FeatureMode mode) {
  Features<S> f{sequence.num_frames(), sequence.num_joints(), sequence.channels(), {}};
  f.values.resize(sequence.data().size());
  const std::size_t C = f.channels;
  for (std::size_t t = 0; t < f.frames; ++t) {
    const FrameView frame = sequence.frame(t);
    std::vector<double> cg;
    std::vector<double> dist;
    if (mode == FeatureMode::centered) cg = center_of_gravity(frame);
    if (mode == FeatureMode::cg_distance) dist = distances_to_center(frame);
    for (std::size_t v = 0; v < f.joints; ++v) {
      S* out = f.values.data() + (t * f.joints + v) * C;
      for (std::size_t c = 0; c + 1 < C; ++c) {
        switch (mode) {
          case FeatureMode::raw: out[c] = static_cast<S>(frame(v, c)); break;
          case FeatureMode::centered: out[c] = static_cast<S>(frame(v, c) - cg[c]); break;
          case FeatureMode::cg_distance: out[c] = c == 0 ? static_cast<S>(dist[v]) : S(0); break;
        }
      }
      out[C - 1] = static_cast<S>(frame(v, C - 1));
    }
  }
  return f;
}

SkeletonSequence fit_frames(const SkeletonSequence& sequence, std::size_t frames) {
  if (frames == 0) throw ConfigError("fixed frame count must be positive");
  const std::size_t per_frame = sequence.num_joints() * sequence.channels();
  std::vector<double> data;
  data.reserve(frames * per_frame);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t src = std::min(t, sequence.num_frames() - 1);
    const auto first = sequence.data().begin() + static_cast<std::ptrdiff_t>(src * per_frame);
    data.insert(data.end(), first, first + static_cast<std::ptrdiff_t>(per_frame));
  }
  return SkeletonSequence(sequence.layout_name(), frames, sequence.num_joints(), sequence.channels(),
                          std::move(data));
}

template <class S>
GraphInput<S> GraphInput<S>::subsample(std::size_t step, std::size_t frames_out) const {
  if (!time_varying) return *this;
  GraphInput<S> out{frames_out, partitions, joints, true, {}};
  const std::size_t per = partitions * joints * joints;
  out.values.resize(frames_out * per);
  for (std::size_t t = 0; t < frames_out; ++t) {
    const std::size_t src = std::min(t * step, frames - 1);
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(src * per), per,
                out.values.begin() + static_cast<std::ptrdiff_t>(t * per));
  }
  return out;
}

template <class S>
GraphInput<S> to_graph_input(const StackSequence& stacks) {
  if (stacks.stacks.empty()) throw ShapeError("empty stack sequence");
  GraphInput<S> g{stacks.time_varying ? stacks.stacks.size() : 1, stacks.num_partitions(), stacks.num_joints(),
                  stacks.time_varying, {}};
  g.values.reserve(g.frames * g.partitions * g.joints * g.joints);
  for (std::size_t f = 0; f < g.frames; ++f) {
    for (double x : stacks.stacks[f].values()) g.values.push_back(static_cast<S>(x));
  }
  return g;
}

namespace {

template <class S>
kernels::GraphConvShape graph_shape(const Features<S>& input, const GraphInput<S>& graph,
                                    const LayerParams<S>& layer) {
  if (input.channels != layer.in_channels) {
    throw ShapeError("layer expects " + std::to_string(layer.in_channels) + " input channels, got " +
                     std::to_string(input.channels));
  }
  if (graph.joints != input.joints) throw ShapeError("adjacency joint count does not match the features");
  if (graph.time_varying && graph.frames != input.frames) {
    throw ShapeError("time-varying adjacency has " + std::to_string(graph.frames) + " frames, features have " +
                     std::to_string(input.frames));
  }
  if (layer.weights.size() != graph.partitions * layer.out_channels * layer.in_channels) {
    throw ShapeError("layer partition count does not match the adjacency");
  }
  return {input.frames, input.joints, layer.in_channels, layer.out_channels, graph.partitions, graph.time_varying};
}

template <class S>
kernels::TemporalConvShape temporal_shape(std::size_t frames, std::size_t joints, const LayerParams<S>& layer,
                                          std::size_t kernel) {
  return {frames, joints, layer.out_channels, layer.out_channels, kernel, layer.temporal_stride, (kernel - 1) / 2};
}

template <class S>
std::span<const S> mask_of(const LayerParams<S>& layer, bool enabled) {
  if (!enabled) return {};
  if (layer.mask.empty()) throw ConfigError("mask enabled but the layer has no mask");
  return layer.mask;
}

template <class S>
void relu(std::vector<S>& v) {
  for (S& x : v) x = x > S(0) ? x : S(0);
}

}  // namespace

template <class S>
Features<S> spatial_gconv(const Features<S>& input, const GraphInput<S>& graph, const LayerParams<S>& layer,
                          bool mask_enabled) {
  const auto shape = graph_shape(input, graph, layer);
  std::vector<S> aggregated(shape.aggregated_size());
  Features<S> out{input.frames, input.joints, layer.out_channels, {}};
  out.values.resize(input.frames * input.joints * layer.out_channels);
  kernels::graph_conv_forward<S>(shape, input.values, graph.values, mask_of(layer, mask_enabled), layer.weights,
                                 layer.bias, aggregated, out.values);
  return out;
}

template <class S>
Features<S> temporal_conv(const Features<S>& input, const LayerParams<S>& layer, std::size_t kernel_size) {
  if (input.channels != layer.out_channels) throw ShapeError("temporal conv channel mismatch");
  const auto shape = temporal_shape(input.frames, input.joints, layer, kernel_size);
  Features<S> out{shape.out_frames(), input.joints, layer.out_channels, {}};
  out.values.resize(out.frames * out.joints * out.channels);
  kernels::temporal_conv_forward<S>(shape, input.values, layer.temporal, layer.temporal_bias, out.values);
  return out;
}

template <class S>
std::vector<S> softmax(std::span<const S> logits) {
  const S top = *std::max_element(logits.begin(), logits.end());
  std::vector<S> p(logits.size());
  S sum = 0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += p[i] = std::exp(logits[i] - top);
  for (S& x : p) x /= sum;
  return p;
}

template <class S>
S cross_entropy(std::span<const S> probabilities, std::size_t label) {
  if (label >= probabilities.size()) throw IndexError("label out of range");
  return -std::log(std::max(probabilities[label], std::numeric_limits<S>::min()));
}

template <class S>
std::vector<S> forward(const ModelParams<S>& model, const Features<S>& features, const GraphInput<S>& graph,
                       const ForwardOptions& options, ForwardCache<S>* cache) {
  const Architecture& arch = model.arch;
  if (features.joints != arch.joints) throw ShapeError("features have the wrong joint count");
  if (features.channels != arch.in_channels) throw ShapeError("features have the wrong channel count");
  if (graph.partitions != arch.partitions) throw ShapeError("adjacency K does not match the model");
  const bool use_mask = arch.mask_enabled;
  const bool dropout = options.training && options.dropout > 0.0;
  const S keep_scale = dropout ? static_cast<S>(1.0 / (1.0 - options.dropout)) : S(1);

  ForwardCache<S> local;
  ForwardCache<S>& c = cache ? *cache : local;
  c.layers.assign(model.layers.size(), {});

  Features<S> h = features;
  if (!model.input_shift.empty()) {
    const std::size_t C = h.channels;
    for (std::size_t i = 0; i < h.values.size(); ++i) {
      h.values[i] = (h.values[i] - model.input_shift[i % C]) * model.input_scale[i % C];
    }
  }
  std::size_t step = 1;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const LayerParams<S>& layer = model.layers[l];
    LayerCache<S>& lc = c.layers[l];
    lc.graph = graph.subsample(step, h.frames);
    const auto gs = graph_shape(h, lc.graph, layer);
    lc.aggregated.resize(gs.aggregated_size());
    lc.spatial.resize(h.frames * h.joints * layer.out_channels);
    kernels::graph_conv_forward<S>(gs, h.values, lc.graph.values, mask_of(layer, use_mask), layer.weights,
                                   layer.bias, lc.aggregated, lc.spatial);
    relu(lc.spatial);

    const auto ts = temporal_shape(h.frames, h.joints, layer, arch.temporal_kernel);
    lc.temporal.resize(ts.out_frames() * h.joints * layer.out_channels);
    kernels::temporal_conv_forward<S>(ts, lc.spatial, layer.temporal, layer.temporal_bias, lc.temporal);
    relu(lc.temporal);

    Features<S> next{ts.out_frames(), h.joints, layer.out_channels, lc.temporal};
    if (dropout) {
      std::mt19937_64 rng(options.dropout_seed ^ (0x9e3779b97f4a7c15ull * (l + 1)));
      lc.dropout.resize(next.values.size());
      for (std::size_t i = 0; i < next.values.size(); ++i) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        lc.dropout[i] = u < options.dropout ? S(0) : keep_scale;
        next.values[i] *= lc.dropout[i];
      }
    } else {
      lc.dropout.clear();
    }
    lc.input = std::move(h);
    h = std::move(next);
    step *= layer.temporal_stride;
  }

  const std::size_t width = h.channels;
  c.pooled.assign(width, S(0));
  const std::size_t rows = h.frames * h.joints;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t ch = 0; ch < width; ++ch) c.pooled[ch] += h.values[r * width + ch];
  }
  for (S& x : c.pooled) x /= static_cast<S>(rows);

  c.logits.assign(arch.num_classes, S(0));
  for (std::size_t k = 0; k < arch.num_classes; ++k) {
    S acc = model.classifier_bias[k];
    for (std::size_t ch = 0; ch < width; ++ch) acc += model.classifier[k * width + ch] * c.pooled[ch];
    c.logits[k] = acc;
  }
  c.probabilities = softmax<S>(c.logits);
  return c.probabilities;
}

template <class S>
void backward(const ModelParams<S>& model, const ForwardCache<S>& cache, std::span<const S> grad_logits,
              ModelParams<S>& grads) {
  const Architecture& arch = model.arch;
  const std::size_t width = cache.pooled.size();
  if (grad_logits.size() != arch.num_classes) throw ShapeError("logit gradient has the wrong size");
  std::vector<S> grad_pooled(width, S(0));
  for (std::size_t k = 0; k < arch.num_classes; ++k) {
    const S g = grad_logits[k];
    grads.classifier_bias[k] += g;
    for (std::size_t ch = 0; ch < width; ++ch) {
      grads.classifier[k * width + ch] += g * cache.pooled[ch];
      grad_pooled[ch] += g * model.classifier[k * width + ch];
    }
  }

  const LayerCache<S>& last = cache.layers.back();
  const std::size_t rows = last.temporal.size() / width;
  std::vector<S> grad(last.temporal.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t ch = 0; ch < width; ++ch) grad[r * width + ch] = grad_pooled[ch] / static_cast<S>(rows);
  }

  for (std::size_t li = model.layers.size(); li-- > 0;) {
    const LayerParams<S>& layer = model.layers[li];
    const LayerCache<S>& lc = cache.layers[li];
    LayerParams<S>& g = grads.layers[li];
    const Features<S>& in = lc.input;

    for (std::size_t i = 0; i < grad.size(); ++i) {
      if (!lc.dropout.empty()) grad[i] *= lc.dropout[i];
      if (!(lc.temporal[i] > S(0))) grad[i] = S(0);
    }
    const auto ts = temporal_shape(in.frames, in.joints, layer, arch.temporal_kernel);
    std::vector<S> grad_spatial(lc.spatial.size());
    kernels::temporal_conv_backward<S>(ts, lc.spatial, layer.temporal, grad, grad_spatial, g.temporal,
                                       g.temporal_bias);
    for (std::size_t i = 0; i < grad_spatial.size(); ++i) {
      if (!(lc.spatial[i] > S(0))) grad_spatial[i] = S(0);
    }

    const auto gs = graph_shape(in, lc.graph, layer);
    std::vector<S> grad_input(li > 0 ? in.values.size() : 0);
    const bool use_mask = arch.mask_enabled;
    kernels::graph_conv_backward<S>(gs, in.values, lc.graph.values, mask_of(layer, use_mask), layer.weights,
                                    lc.aggregated, grad_spatial, grad_input, g.weights, g.bias,
                                    use_mask ? std::span<S>(g.mask) : std::span<S>());
    grad = std::move(grad_input);
  }
}

#define SKELSPLIT_INSTANTIATE(S)                                                                                   \
  template struct ModelParams<S>;                                                                                 \
  template struct GraphInput<S>;                                                                                  \
  template ModelParams<S> init_model<S>(const Architecture&, std::uint64_t);                                     \
  template Features<S> make_features<S>(const SkeletonSequence&, FeatureMode);                                   \
  template GraphInput<S> to_graph_input<S>(const StackSequence&);                                                \
  template void fit_input_normalization<S>(ModelParams<S>&, std::span<const Features<S>>);                       \
  template Features<S> spatial_gconv<S>(const Features<S>&, const GraphInput<S>&, const LayerParams<S>&, bool); \
  template Features<S> temporal_conv<S>(const Features<S>&, const LayerParams<S>&, std::size_t);                \
  template std::vector<S> forward<S>(const ModelParams<S>&, const Features<S>&, const GraphInput<S>&,            \
                                     const ForwardOptions&, ForwardCache<S>*);                                   \
  template void backward<S>(const ModelParams<S>&, const ForwardCache<S>&, std::span<const S>, ModelParams<S>&); \
  template std::vector<S> softmax<S>(std::span<const S>);                                                        \
  template S cross_entropy<S>(std::span<const S>, std::size_t);

SKELSPLIT_INSTANTIATE(float)
SKELSPLIT_INSTANTIATE(double)
#undef SKELSPLIT_INSTANTIATE

template ModelParams<float> cast_model<float, double>(const ModelParams<double>&);
template ModelParams<double> cast_model<double, float>(const ModelParams<float>&);
template ModelParams<float> cast_model<float, float>(const ModelParams<float>&);
template ModelParams<double> cast_model<double, double>(const ModelParams<double>&);

}  // namespace skelsplit
