#include <Eigen/Dense>
#include <algorithm>
#include <cstddef>
#include <vector>

#include "skelsplit/kernels.hpp"

namespace skelsplit::kernels {

namespace {

template <class S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using CMap = Eigen::Map<const RowMat<S>>;
template <class S>
using MMap = Eigen::Map<RowMat<S>>;
template <class S>
using CRow = Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>;

// Work is split into fixed frame chunks, so results do not depend on the thread count.
constexpr std::ptrdiff_t kFrameChunk = 8;

std::ptrdiff_t chunk_count(std::size_t frames) {
  return (static_cast<std::ptrdiff_t>(frames) + kFrameChunk - 1) / kFrameChunk;
}

// A_k ⊙ M for every stack; returns `adjacency` itself when there is no mask.
template <class S>
std::span<const S> apply_mask(const GraphConvShape& s, std::span<const S> adjacency, std::span<const S> mask,
                              std::vector<S>& storage) {
  if (mask.empty()) return adjacency;
  storage.resize(adjacency.size());
  const std::size_t vv = s.joints * s.joints;
  for (std::size_t i = 0; i < adjacency.size(); ++i) storage[i] = adjacency[i] * mask[i % vv];
  return storage;
}

// Output frames `to` in [lo, hi) whose tap k lands inside the input.
struct TapRange {
  std::ptrdiff_t lo;
  std::ptrdiff_t hi;
};

TapRange tap_range(const TemporalConvShape& s, std::size_t k, std::ptrdiff_t a0, std::ptrdiff_t a1) {
  const auto p = static_cast<std::ptrdiff_t>(s.padding);
  const auto kk = static_cast<std::ptrdiff_t>(k);
  const auto st = static_cast<std::ptrdiff_t>(s.stride);
  const auto T = static_cast<std::ptrdiff_t>(s.frames);
  // to*st + k - p >= 0  and  to*st + k - p <= T - 1
  const std::ptrdiff_t need = p - kk;
  const std::ptrdiff_t lo = need <= 0 ? 0 : (need + st - 1) / st;
  const std::ptrdiff_t top = T - 1 + p - kk;
  const std::ptrdiff_t hi = top < 0 ? 0 : top / st + 1;
  return {std::max(lo, a0), std::min(hi, a1)};
}

// grad_bias += column sums of a rows×cols row-major block, accumulated row by row.
template <class S>
void add_column_sums(std::span<S> grad_bias, const S* data, Eigen::Index rows, Eigen::Index cols) {
  Eigen::Map<Eigen::Matrix<S, 1, Eigen::Dynamic>> acc(grad_bias.data(), cols);
  for (Eigen::Index r = 0; r < rows; ++r) acc += CRow<S>(data + r * cols, cols);
}

}  // namespace

template <class S>
void graph_conv_forward(const GraphConvShape& s, std::span<const S> input, std::span<const S> adjacency,
                        std::span<const S> mask, std::span<const S> weights, std::span<const S> bias,
                        std::span<S> aggregated, std::span<S> output) {
  check_graph_conv(s, input.size(), adjacency.size(), mask.size(), weights.size(), bias.size());
  const auto V = static_cast<Eigen::Index>(s.joints);
  const auto Ci = static_cast<Eigen::Index>(s.in_channels);
  const auto Co = static_cast<Eigen::Index>(s.out_channels);
  const auto T = static_cast<std::ptrdiff_t>(s.frames);
  const auto K = static_cast<std::ptrdiff_t>(s.partitions);
  std::vector<S> storage;
  const std::span<const S> adj = apply_mask(s, adjacency, mask, storage);

#pragma omp parallel for collapse(2) schedule(static)
  for (std::ptrdiff_t k = 0; k < K; ++k) {
    for (std::ptrdiff_t t = 0; t < T; ++t) {
      const std::ptrdiff_t f = s.time_varying ? t : 0;
      CMap<S> a(adj.data() + (f * K + k) * V * V, V, V);
      CMap<S> x(input.data() + t * V * Ci, V, Ci);
      MMap<S> z(aggregated.data() + (k * T + t) * V * Ci, V, Ci);
      z.noalias() = a * x;
    }
  }

  const std::ptrdiff_t chunks = chunk_count(s.frames);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < chunks; ++c) {
    const std::ptrdiff_t t0 = c * kFrameChunk;
    const std::ptrdiff_t t1 = std::min(T, t0 + kFrameChunk);
    const Eigen::Index rows = (t1 - t0) * V;
    MMap<S> out(output.data() + t0 * V * Co, rows, Co);
    out.rowwise() = CRow<S>(bias.data(), Co);
    for (std::ptrdiff_t k = 0; k < K; ++k) {
      CMap<S> z(aggregated.data() + (k * T + t0) * V * Ci, rows, Ci);
      CMap<S> w(weights.data() + k * Co * Ci, Co, Ci);
      out.noalias() += z * w.transpose();
    }
  }
}

template <class S>
void graph_conv_backward(const GraphConvShape& s, std::span<const S> input, std::span<const S> adjacency,
                         std::span<const S> mask, std::span<const S> weights, std::span<const S> aggregated,
                         std::span<const S> grad_output, std::span<S> grad_input, std::span<S> grad_weights,
                         std::span<S> grad_bias, std::span<S> grad_mask) {
  const auto V = static_cast<Eigen::Index>(s.joints);
  const auto Ci = static_cast<Eigen::Index>(s.in_channels);
  const auto Co = static_cast<Eigen::Index>(s.out_channels);
  const auto T = static_cast<std::ptrdiff_t>(s.frames);
  const auto K = static_cast<std::ptrdiff_t>(s.partitions);
  std::vector<S> storage;
  const std::span<const S> adj = apply_mask(s, adjacency, mask, storage);
  std::vector<S> grad_agg(s.aggregated_size());

  const std::ptrdiff_t chunks = chunk_count(s.frames);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < chunks; ++c) {
    const std::ptrdiff_t t0 = c * kFrameChunk;
    const std::ptrdiff_t t1 = std::min(T, t0 + kFrameChunk);
    const Eigen::Index rows = (t1 - t0) * V;
    CMap<S> dout(grad_output.data() + t0 * V * Co, rows, Co);
    for (std::ptrdiff_t k = 0; k < K; ++k) {
      CMap<S> w(weights.data() + k * Co * Ci, Co, Ci);
      MMap<S> dz(grad_agg.data() + (k * T + t0) * V * Ci, rows, Ci);
      dz.noalias() = dout * w;
    }
  }

  CMap<S> dout_all(grad_output.data(), T * V, Co);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < K; ++k) {
    CMap<S> z(aggregated.data() + k * T * V * Ci, T * V, Ci);
    MMap<S> dw(grad_weights.data() + k * Co * Ci, Co, Ci);
    dw.noalias() += dout_all.transpose() * z;
  }
  add_column_sums(grad_bias, grad_output.data(), T * V, Co);

  if (!grad_input.empty()) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t t = 0; t < T; ++t) {
      const std::ptrdiff_t f = s.time_varying ? t : 0;
      MMap<S> dx(grad_input.data() + t * V * Ci, V, Ci);
      dx.setZero();
      for (std::ptrdiff_t k = 0; k < K; ++k) {
        CMap<S> a(adj.data() + (f * K + k) * V * V, V, V);
        CMap<S> dz(grad_agg.data() + (k * T + t) * V * Ci, V, Ci);
        dx.noalias() += a.transpose() * dz;
      }
    }
  }

  if (!grad_mask.empty() && !mask.empty()) {
    // dM = Σ_t Σ_k A_k(t) ⊙ (dZ_k[t] X_tᵀ)
    std::vector<S> partial(static_cast<std::size_t>(K * V * V), S(0));
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < K; ++k) {
      MMap<S> acc(partial.data() + k * V * V, V, V);
      RowMat<S> g(V, V);
      // Aligned copies keep the reduction order independent of the caller's buffers.
      RowMat<S> dz(V, Ci);
      RowMat<S> x(V, Ci);
      if (!s.time_varying) {
        g.setZero();
        for (std::ptrdiff_t t = 0; t < T; ++t) {
          dz = CMap<S>(grad_agg.data() + (k * T + t) * V * Ci, V, Ci);
          x = CMap<S>(input.data() + t * V * Ci, V, Ci);
          g.noalias() += dz * x.transpose();
        }
        acc = CMap<S>(adjacency.data() + k * V * V, V, V).cwiseProduct(g);
      } else {
        for (std::ptrdiff_t t = 0; t < T; ++t) {
          dz = CMap<S>(grad_agg.data() + (k * T + t) * V * Ci, V, Ci);
          x = CMap<S>(input.data() + t * V * Ci, V, Ci);
          g.noalias() = dz * x.transpose();
          acc += CMap<S>(adjacency.data() + (t * K + k) * V * V, V, V).cwiseProduct(g);
        }
      }
    }
    MMap<S> dm(grad_mask.data(), V, V);
    for (std::ptrdiff_t k = 0; k < K; ++k) dm += CMap<S>(partial.data() + k * V * V, V, V);
  }
}

template <class S>
void temporal_conv_forward(const TemporalConvShape& s, std::span<const S> input, std::span<const S> weights,
                           std::span<const S> bias, std::span<S> output) {
  check_temporal_conv(s, input.size(), weights.size(), bias.size());
  const auto V = static_cast<Eigen::Index>(s.joints);
  const auto Ci = static_cast<Eigen::Index>(s.in_channels);
  const auto Co = static_cast<Eigen::Index>(s.out_channels);
  const auto To = static_cast<std::ptrdiff_t>(s.out_frames());
  const auto st = static_cast<std::ptrdiff_t>(s.stride);
  const auto p = static_cast<std::ptrdiff_t>(s.padding);

  const std::ptrdiff_t chunks = chunk_count(s.out_frames());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < chunks; ++c) {
    const std::ptrdiff_t a0 = c * kFrameChunk;
    const std::ptrdiff_t a1 = std::min(To, a0 + kFrameChunk);
    MMap<S> out(output.data() + a0 * V * Co, (a1 - a0) * V, Co);
    out.rowwise() = CRow<S>(bias.data(), Co);
    for (std::size_t k = 0; k < s.kernel; ++k) {
      const auto [lo, hi] = tap_range(s, k, a0, a1);
      if (lo >= hi) continue;
      CMap<S> w(weights.data() + static_cast<Eigen::Index>(k) * Co * Ci, Co, Ci);
      const auto kk = static_cast<std::ptrdiff_t>(k);
      if (st == 1) {
        const Eigen::Index rows = (hi - lo) * V;
        CMap<S> in(input.data() + (lo + kk - p) * V * Ci, rows, Ci);
        out.middleRows((lo - a0) * V, rows).noalias() += in * w.transpose();
      } else {
        for (std::ptrdiff_t to = lo; to < hi; ++to) {
          CMap<S> in(input.data() + (to * st + kk - p) * V * Ci, V, Ci);
          out.middleRows((to - a0) * V, V).noalias() += in * w.transpose();
        }
      }
    }
  }
}

template <class S>
void temporal_conv_backward(const TemporalConvShape& s, std::span<const S> input, std::span<const S> weights,
                            std::span<const S> grad_output, std::span<S> grad_input, std::span<S> grad_weights,
                            std::span<S> grad_bias) {
  const auto V = static_cast<Eigen::Index>(s.joints);
  const auto Ci = static_cast<Eigen::Index>(s.in_channels);
  const auto Co = static_cast<Eigen::Index>(s.out_channels);
  const auto T = static_cast<std::ptrdiff_t>(s.frames);
  const auto To = static_cast<std::ptrdiff_t>(s.out_frames());
  const auto st = static_cast<std::ptrdiff_t>(s.stride);
  const auto p = static_cast<std::ptrdiff_t>(s.padding);
  const auto Kt = static_cast<std::ptrdiff_t>(s.kernel);

  if (!grad_input.empty()) {
    const std::ptrdiff_t chunks = chunk_count(s.frames);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < chunks; ++c) {
      const std::ptrdiff_t b0 = c * kFrameChunk;
      const std::ptrdiff_t b1 = std::min(T, b0 + kFrameChunk);
      MMap<S> din(grad_input.data() + b0 * V * Ci, (b1 - b0) * V, Ci);
      din.setZero();
      for (std::ptrdiff_t k = 0; k < Kt; ++k) {
        CMap<S> w(weights.data() + k * Co * Ci, Co, Ci);
        if (st == 1) {
          // to = t + p - k must lie in [0, To)
          const std::ptrdiff_t lo = std::max(b0, k - p);
          const std::ptrdiff_t hi = std::min(b1, To + k - p);
          if (lo >= hi) continue;
          const Eigen::Index rows = (hi - lo) * V;
          CMap<S> dout(grad_output.data() + (lo + p - k) * V * Co, rows, Co);
          din.middleRows((lo - b0) * V, rows).noalias() += dout * w;
        } else {
          for (std::ptrdiff_t t = b0; t < b1; ++t) {
            const std::ptrdiff_t num = t + p - k;
            if (num < 0 || num % st != 0 || num / st >= To) continue;
            CMap<S> dout(grad_output.data() + (num / st) * V * Co, V, Co);
            din.middleRows((t - b0) * V, V).noalias() += dout * w;
          }
        }
      }
    }
  }

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < Kt; ++k) {
    MMap<S> dw(grad_weights.data() + k * Co * Ci, Co, Ci);
    const auto [lo, hi] = tap_range(s, static_cast<std::size_t>(k), 0, To);
    if (lo >= hi) continue;
    if (st == 1) {
      const Eigen::Index rows = (hi - lo) * V;
      CMap<S> dout(grad_output.data() + lo * V * Co, rows, Co);
      CMap<S> in(input.data() + (lo + k - p) * V * Ci, rows, Ci);
      dw.noalias() += dout.transpose() * in;
    } else {
      for (std::ptrdiff_t to = lo; to < hi; ++to) {
        CMap<S> dout(grad_output.data() + to * V * Co, V, Co);
        CMap<S> in(input.data() + (to * st + k - p) * V * Ci, V, Ci);
        dw.noalias() += dout.transpose() * in;
      }
    }
  }
  add_column_sums(grad_bias, grad_output.data(), To * V, Co);
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

}  // namespace skelsplit::kernels
