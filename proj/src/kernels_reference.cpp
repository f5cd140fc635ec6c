#include <algorithm>
#include <string>
#include <vector>

#include "skelsplit/errors.hpp"
#include "skelsplit/kernels.hpp"

namespace skelsplit::kernels {

void check_graph_conv(const GraphConvShape& s, std::size_t input, std::size_t adjacency, std::size_t mask,
                      std::size_t weights, std::size_t bias) {
  auto fail = [](const std::string& what, std::size_t got, std::size_t want) {
    throw ShapeError("graph conv: " + what + " has " + std::to_string(got) + " values, expected " +
                     std::to_string(want));
  };
  if (input != s.frames * s.joints * s.in_channels) fail("input", input, s.frames * s.joints * s.in_channels);
  if (adjacency != s.adjacency_size()) fail("adjacency", adjacency, s.adjacency_size());
  if (mask != 0 && mask != s.joints * s.joints) fail("mask", mask, s.joints * s.joints);
  if (weights != s.partitions * s.out_channels * s.in_channels) {
    fail("weights", weights, s.partitions * s.out_channels * s.in_channels);
  }
  if (bias != s.out_channels) fail("bias", bias, s.out_channels);
}

void check_temporal_conv(const TemporalConvShape& s, std::size_t input, std::size_t weights, std::size_t bias) {
  auto fail = [](const std::string& what, std::size_t got, std::size_t want) {
    throw ShapeError("temporal conv: " + what + " has " + std::to_string(got) + " values, expected " +
                     std::to_string(want));
  };
  if (s.frames == 0 || s.stride == 0 || s.frames + 2 * s.padding < s.kernel) {
    throw ShapeError("temporal conv: invalid frames/kernel/stride/padding");
  }
  if (input != s.frames * s.joints * s.in_channels) fail("input", input, s.frames * s.joints * s.in_channels);
  if (weights != s.kernel * s.out_channels * s.in_channels) {
    fail("weights", weights, s.kernel * s.out_channels * s.in_channels);
  }
  if (bias != s.out_channels) fail("bias", bias, s.out_channels);
}

namespace reference {

namespace {

template <class S>
S masked(const GraphConvShape& s, std::span<const S> adjacency, std::span<const S> mask, std::size_t t,
         std::size_t k, std::size_t j, std::size_t i) {
  const std::size_t f = s.time_varying ? t : 0;
  const S a = adjacency[((f * s.partitions + k) * s.joints + j) * s.joints + i];
  return mask.empty() ? a : a * mask[j * s.joints + i];
}

}  // namespace

template <class S>
void graph_conv_forward(const GraphConvShape& s, std::span<const S> input, std::span<const S> adjacency,
                        std::span<const S> mask, std::span<const S> weights, std::span<const S> bias,
                        std::span<S> aggregated, std::span<S> output) {
  check_graph_conv(s, input.size(), adjacency.size(), mask.size(), weights.size(), bias.size());
  const std::size_t V = s.joints, Ci = s.in_channels, Co = s.out_channels;
  for (std::size_t k = 0; k < s.partitions; ++k) {
    for (std::size_t t = 0; t < s.frames; ++t) {
      for (std::size_t j = 0; j < V; ++j) {
        for (std::size_t c = 0; c < Ci; ++c) {
          S acc = 0;
          for (std::size_t i = 0; i < V; ++i) acc += masked(s, adjacency, mask, t, k, j, i) * input[(t * V + i) * Ci + c];
          aggregated[((k * s.frames + t) * V + j) * Ci + c] = acc;
        }
      }
    }
  }
  for (std::size_t t = 0; t < s.frames; ++t) {
    for (std::size_t j = 0; j < V; ++j) {
      for (std::size_t o = 0; o < Co; ++o) {
        S acc = bias[o];
        for (std::size_t k = 0; k < s.partitions; ++k) {
          for (std::size_t c = 0; c < Ci; ++c) {
            acc += weights[(k * Co + o) * Ci + c] * aggregated[((k * s.frames + t) * V + j) * Ci + c];
          }
        }
        output[(t * V + j) * Co + o] = acc;
      }
    }
  }
}

template <class S>
void graph_conv_backward(const GraphConvShape& s, std::span<const S> input, std::span<const S> adjacency,
                         std::span<const S> mask, std::span<const S> weights, std::span<const S> aggregated,
                         std::span<const S> grad_output, std::span<S> grad_input, std::span<S> grad_weights,
                         std::span<S> grad_bias, std::span<S> grad_mask) {
  const std::size_t V = s.joints, Ci = s.in_channels, Co = s.out_channels, T = s.frames, K = s.partitions;
  // dZ_k[t][j][c] = Σ_o dOut[t][j][o] W_k[o][c]
  std::vector<S> grad_agg(s.aggregated_size(), S(0));
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t j = 0; j < V; ++j) {
        for (std::size_t c = 0; c < Ci; ++c) {
          S acc = 0;
          for (std::size_t o = 0; o < Co; ++o) acc += grad_output[(t * V + j) * Co + o] * weights[(k * Co + o) * Ci + c];
          grad_agg[((k * T + t) * V + j) * Ci + c] = acc;
        }
      }
    }
  }
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t o = 0; o < Co; ++o) {
      for (std::size_t c = 0; c < Ci; ++c) {
        S acc = 0;
        for (std::size_t t = 0; t < T; ++t) {
          for (std::size_t j = 0; j < V; ++j) {
            acc += grad_output[(t * V + j) * Co + o] * aggregated[((k * T + t) * V + j) * Ci + c];
          }
        }
        grad_weights[(k * Co + o) * Ci + c] += acc;
      }
    }
  }
  for (std::size_t o = 0; o < Co; ++o) {
    S acc = 0;
    for (std::size_t r = 0; r < T * V; ++r) acc += grad_output[r * Co + o];
    grad_bias[o] += acc;
  }
  if (!grad_input.empty()) {
    std::fill(grad_input.begin(), grad_input.end(), S(0));
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t i = 0; i < V; ++i) {
        for (std::size_t c = 0; c < Ci; ++c) {
          S acc = 0;
          for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t j = 0; j < V; ++j) {
              acc += masked(s, adjacency, mask, t, k, j, i) * grad_agg[((k * T + t) * V + j) * Ci + c];
            }
          }
          grad_input[(t * V + i) * Ci + c] = acc;
        }
      }
    }
  }
  if (!grad_mask.empty() && !mask.empty()) {
    for (std::size_t j = 0; j < V; ++j) {
      for (std::size_t i = 0; i < V; ++i) {
        S acc = 0;
        for (std::size_t k = 0; k < K; ++k) {
          for (std::size_t t = 0; t < T; ++t) {
            const std::size_t f = s.time_varying ? t : 0;
            const S a = adjacency[((f * K + k) * V + j) * V + i];
            if (a == S(0)) continue;
            S dot = 0;
            for (std::size_t c = 0; c < Ci; ++c) dot += grad_agg[((k * T + t) * V + j) * Ci + c] * input[(t * V + i) * Ci + c];
            acc += a * dot;
          }
        }
        grad_mask[j * V + i] += acc;
      }
    }
  }
}

template <class S>
void temporal_conv_forward(const TemporalConvShape& s, std::span<const S> input, std::span<const S> weights,
                           std::span<const S> bias, std::span<S> output) {
  check_temporal_conv(s, input.size(), weights.size(), bias.size());
  const std::size_t V = s.joints, Ci = s.in_channels, Co = s.out_channels, To = s.out_frames();
  for (std::size_t to = 0; to < To; ++to) {
    for (std::size_t v = 0; v < V; ++v) {
      for (std::size_t o = 0; o < Co; ++o) {
        S acc = bias[o];
        for (std::size_t k = 0; k < s.kernel; ++k) {
          const auto t = static_cast<std::ptrdiff_t>(to * s.stride + k) - static_cast<std::ptrdiff_t>(s.padding);
          if (t < 0 || t >= static_cast<std::ptrdiff_t>(s.frames)) continue;
          for (std::size_t c = 0; c < Ci; ++c) {
            acc += weights[(k * Co + o) * Ci + c] * input[(static_cast<std::size_t>(t) * V + v) * Ci + c];
          }
        }
        output[(to * V + v) * Co + o] = acc;
      }
    }
  }
}

template <class S>
void temporal_conv_backward(const TemporalConvShape& s, std::span<const S> input, std::span<const S> weights,
                            std::span<const S> grad_output, std::span<S> grad_input, std::span<S> grad_weights,
                            std::span<S> grad_bias) {
  const std::size_t V = s.joints, Ci = s.in_channels, Co = s.out_channels, To = s.out_frames();
  if (!grad_input.empty()) std::fill(grad_input.begin(), grad_input.end(), S(0));
  for (std::size_t to = 0; to < To; ++to) {
    for (std::size_t v = 0; v < V; ++v) {
      for (std::size_t o = 0; o < Co; ++o) {
        const S g = grad_output[(to * V + v) * Co + o];
        grad_bias[o] += g;
        for (std::size_t k = 0; k < s.kernel; ++k) {
          const auto t = static_cast<std::ptrdiff_t>(to * s.stride + k) - static_cast<std::ptrdiff_t>(s.padding);
          if (t < 0 || t >= static_cast<std::ptrdiff_t>(s.frames)) continue;
          const std::size_t row = (static_cast<std::size_t>(t) * V + v) * Ci;
          for (std::size_t c = 0; c < Ci; ++c) {
            grad_weights[(k * Co + o) * Ci + c] += g * input[row + c];
            if (!grad_input.empty()) grad_input[row + c] += g * weights[(k * Co + o) * Ci + c];
          }
        }
      }
    }
  }
}

#define SKELSPLIT_INSTANTIATE(S)                                                                                    \
  template void graph_conv_forward<S>(const GraphConvShape&, std::span<const S>, std::span<const S>,               \
                                      std::span<const S>, std::span<const S>, std::span<const S>, std::span<S>,    \
                                      std::span<S>);                                                               \
  template void graph_conv_backward<S>(const GraphConvShape&, std::span<const S>, std::span<const S>,              \
                                       std::span<const S>, std::span<const S>, std::span<const S>,                 \
                                       std::span<const S>, std::span<S>, std::span<S>, std::span<S>, std::span<S>); \
  template void temporal_conv_forward<S>(const TemporalConvShape&, std::span<const S>, std::span<const S>,         \
                                         std::span<const S>, std::span<S>);                                        \
  template void temporal_conv_backward<S>(const TemporalConvShape&, std::span<const S>, std::span<const S>,        \
                                          std::span<const S>, std::span<S>, std::span<S>, std::span<S>);

SKELSPLIT_INSTANTIATE(float)
SKELSPLIT_INSTANTIATE(double)
#undef SKELSPLIT_INSTANTIATE

}  // namespace reference
}  // namespace skelsplit::kernels
