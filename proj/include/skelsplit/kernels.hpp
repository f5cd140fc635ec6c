#pragma once

#include <cstddef>
#include <span>

// Compute kernels of the spatial-temporal graph convolution.
//
// Tensors are dense and row-major: features are T×V×C (frame, joint, channel).
// Two implementations share these signatures:
//
//   skelsplit::kernels             OpenMP + Eigen, used by the network
//   skelsplit::kernels::reference  plain serial loops, kept as the test oracle
//
// Backward kernels overwrite grad_input (skipped when empty) and accumulate (+=)
// into parameter gradients.
namespace skelsplit::kernels {

struct GraphConvShape {
  std::size_t frames = 0;        // T
  std::size_t joints = 0;        // V
  std::size_t in_channels = 0;   // C_in
  std::size_t out_channels = 0;  // C_out
  std::size_t partitions = 0;    // K
  bool time_varying = false;     // adjacency holds one K×V×V stack per frame

  std::size_t adjacency_size() const { return (time_varying ? frames : 1) * partitions * joints * joints; }
  std::size_t aggregated_size() const { return partitions * frames * joints * in_channels; }
};

struct TemporalConvShape {
  std::size_t frames = 0;  // input frames
  std::size_t joints = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 9;
  std::size_t stride = 1;
  std::size_t padding = 4;

  std::size_t out_frames() const { return (frames + 2 * padding - kernel) / stride + 1; }
};

/// out_t = Σ_k ((A_k ⊙ M) X_t) W_kᵀ + bias.
///
/// adjacency: [T or 1]×K×V×V, mask: V×V or empty (no mask), weights: K×C_out×C_in.
/// aggregated receives Z_k[t] = (A_k ⊙ M) X_t as K×T×V×C_in for the backward pass.
template <class S>
void graph_conv_forward(const GraphConvShape& shape, std::span<const S> input, std::span<const S> adjacency,
                        std::span<const S> mask, std::span<const S> weights, std::span<const S> bias,
                        std::span<S> aggregated, std::span<S> output);

template <class S>
void graph_conv_backward(const GraphConvShape& shape, std::span<const S> input, std::span<const S> adjacency,
                         std::span<const S> mask, std::span<const S> weights, std::span<const S> aggregated,
                         std::span<const S> grad_output, std::span<S> grad_input, std::span<S> grad_weights,
                         std::span<S> grad_bias, std::span<S> grad_mask);

/// Convolution along frames, independently per joint, zero padded.
/// weights: kernel×C_out×C_in; output: out_frames×V×C_out.
template <class S>
void temporal_conv_forward(const TemporalConvShape& shape, std::span<const S> input, std::span<const S> weights,
                           std::span<const S> bias, std::span<S> output);

template <class S>
void temporal_conv_backward(const TemporalConvShape& shape, std::span<const S> input, std::span<const S> weights,
                            std::span<const S> grad_output, std::span<S> grad_input, std::span<S> grad_weights,
                            std::span<S> grad_bias);

namespace reference {

template <class S>
void graph_conv_forward(const GraphConvShape& shape, std::span<const S> input, std::span<const S> adjacency,
                        std::span<const S> mask, std::span<const S> weights, std::span<const S> bias,
                        std::span<S> aggregated, std::span<S> output);

template <class S>
void graph_conv_backward(const GraphConvShape& shape, std::span<const S> input, std::span<const S> adjacency,
                         std::span<const S> mask, std::span<const S> weights, std::span<const S> aggregated,
                         std::span<const S> grad_output, std::span<S> grad_input, std::span<S> grad_weights,
                         std::span<S> grad_bias, std::span<S> grad_mask);

template <class S>
void temporal_conv_forward(const TemporalConvShape& shape, std::span<const S> input, std::span<const S> weights,
                           std::span<const S> bias, std::span<S> output);

template <class S>
void temporal_conv_backward(const TemporalConvShape& shape, std::span<const S> input, std::span<const S> weights,
                            std::span<const S> grad_output, std::span<S> grad_input, std::span<S> grad_weights,
                            std::span<S> grad_bias);

}  // namespace reference

/// Throws ShapeError when a buffer size disagrees with the shape.
void check_graph_conv(const GraphConvShape& shape, std::size_t input, std::size_t adjacency, std::size_t mask,
                      std::size_t weights, std::size_t bias);
void check_temporal_conv(const TemporalConvShape& shape, std::size_t input, std::size_t weights, std::size_t bias);

}  // namespace skelsplit::kernels
