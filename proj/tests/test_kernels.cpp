#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "doctest.h"
#include "skelsplit/errors.hpp"
#include "skelsplit/kernels.hpp"

using namespace skelsplit;
using kernels::GraphConvShape;
using kernels::TemporalConvShape;

namespace {

std::vector<double> random_values(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

GraphConvShape random_graph_shape(std::mt19937_64& rng) {
  return {1 + rng() % 19, 2 + rng() % 7, 1 + rng() % 5, 1 + rng() % 6, 1 + rng() % 4, rng() % 2 == 0};
}

TemporalConvShape random_temporal_shape(std::mt19937_64& rng) {
  const std::size_t kernel = 1 + 2 * (rng() % 5);
  const std::size_t padding = (kernel - 1) / 2;
  std::size_t frames = 1 + rng() % 20;
  return {frames, 1 + rng() % 5, 1 + rng() % 4, 1 + rng() % 5, kernel, 1 + rng() % 2, padding};
}

// out[t][j][o] = bias[o] + Σ_k Σ_i A_k[t](j,i)·M(j,i) Σ_c W_k(o,c)·x[t][i][c]
std::vector<double> graph_conv_oracle(const GraphConvShape& s, const std::vector<double>& x,
                                      const std::vector<double>& adj, const std::vector<double>& mask,
                                      const std::vector<double>& w, const std::vector<double>& b) {
  const std::size_t T = s.frames, V = s.joints, Ci = s.in_channels, Co = s.out_channels, K = s.partitions;
  std::vector<double> out(T * V * Co);
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t f = s.time_varying ? t : 0;
    for (std::size_t j = 0; j < V; ++j) {
      for (std::size_t o = 0; o < Co; ++o) {
        double acc = b[o];
        for (std::size_t k = 0; k < K; ++k) {
          for (std::size_t i = 0; i < V; ++i) {
            const double a = adj[((f * K + k) * V + j) * V + i] * (mask.empty() ? 1.0 : mask[j * V + i]);
            for (std::size_t c = 0; c < Ci; ++c) acc += a * w[(k * Co + o) * Ci + c] * x[(t * V + i) * Ci + c];
          }
        }
        out[(t * V + j) * Co + o] = acc;
      }
    }
  }
  return out;
}

// out[u][j][o] = bias[o] + Σ_k Σ_c W(k,o,c)·x[u·stride + k − padding][j][c], zero outside [0, T)
std::vector<double> temporal_conv_oracle(const TemporalConvShape& s, const std::vector<double>& x,
                                         const std::vector<double>& w, const std::vector<double>& b) {
  const std::size_t To = s.out_frames(), V = s.joints, Ci = s.in_channels, Co = s.out_channels;
  std::vector<double> out(To * V * Co);
  for (std::size_t u = 0; u < To; ++u) {
    for (std::size_t j = 0; j < V; ++j) {
      for (std::size_t o = 0; o < Co; ++o) {
        double acc = b[o];
        for (std::size_t k = 0; k < s.kernel; ++k) {
          const long t = static_cast<long>(u * s.stride + k) - static_cast<long>(s.padding);
          if (t < 0 || t >= static_cast<long>(s.frames)) continue;
          for (std::size_t c = 0; c < Ci; ++c) {
            acc += w[(k * Co + o) * Ci + c] * x[(static_cast<std::size_t>(t) * V + j) * Ci + c];
          }
        }
        out[(u * V + j) * Co + o] = acc;
      }
    }
  }
  return out;
}

struct GraphCase {
  GraphConvShape shape;
  std::vector<double> x, adj, mask, w, b, dout;
};

GraphCase random_graph_case(std::mt19937_64& rng, bool with_mask) {
  GraphCase c;
  c.shape = random_graph_shape(rng);
  const auto& s = c.shape;
  c.x = random_values(rng, s.frames * s.joints * s.in_channels);
  c.adj = random_values(rng, s.adjacency_size());
  if (with_mask) c.mask = random_values(rng, s.joints * s.joints);
  c.w = random_values(rng, s.partitions * s.out_channels * s.in_channels);
  c.b = random_values(rng, s.out_channels);
  c.dout = random_values(rng, s.frames * s.joints * s.out_channels);
  return c;
}

}  // namespace

TEST_CASE("temporal output length") {
  CHECK(TemporalConvShape{64, 18, 3, 3, 9, 1, 4}.out_frames() == 64);
  CHECK(TemporalConvShape{64, 18, 3, 3, 9, 2, 4}.out_frames() == 32);
  CHECK(TemporalConvShape{15, 18, 3, 3, 9, 2, 4}.out_frames() == 8);
  CHECK(TemporalConvShape{1, 18, 3, 3, 9, 1, 4}.out_frames() == 1);
}

TEST_CASE("graph convolution matches the neighbor-sum oracle") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 60; ++trial) {
    const GraphCase c = random_graph_case(rng, trial % 2 == 0);
    const auto want = graph_conv_oracle(c.shape, c.x, c.adj, c.mask, c.w, c.b);
    std::vector<double> agg(c.shape.aggregated_size()), out(want.size());
    kernels::graph_conv_forward<double>(c.shape, c.x, c.adj, c.mask, c.w, c.b, agg, out);
    CHECK(max_abs_diff(out, want) <= 1e-12);
    std::vector<double> ref_agg(agg.size()), ref_out(out.size());
    kernels::reference::graph_conv_forward<double>(c.shape, c.x, c.adj, c.mask, c.w, c.b, ref_agg, ref_out);
    CHECK(max_abs_diff(ref_out, want) <= 1e-12);
    CHECK(max_abs_diff(ref_agg, agg) <= 1e-12);
  }
}

TEST_CASE("temporal convolution matches the sliding-window oracle") {
  std::mt19937_64 rng(102);
  for (int trial = 0; trial < 80; ++trial) {
    const TemporalConvShape s = random_temporal_shape(rng);
    if (s.frames + 2 * s.padding < s.kernel) continue;
    const auto x = random_values(rng, s.frames * s.joints * s.in_channels);
    const auto w = random_values(rng, s.kernel * s.out_channels * s.in_channels);
    const auto b = random_values(rng, s.out_channels);
    const auto want = temporal_conv_oracle(s, x, w, b);
    std::vector<double> out(want.size()), ref(want.size());
    kernels::temporal_conv_forward<double>(s, x, w, b, out);
    kernels::reference::temporal_conv_forward<double>(s, x, w, b, ref);
    CHECK(max_abs_diff(out, want) <= 1e-12);
    CHECK(max_abs_diff(ref, want) <= 1e-12);
  }
}

TEST_CASE("temporal delta kernel is the identity and a box kernel averages") {
  const TemporalConvShape s{7, 2, 2, 2, 9, 1, 4};
  std::vector<double> x(7 * 2 * 2);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i) - 3.0;
  std::vector<double> w(9 * 2 * 2, 0.0), b(2, 0.0), out(x.size());
  w[(4 * 2 + 0) * 2 + 0] = 1.0;
  w[(4 * 2 + 1) * 2 + 1] = 1.0;
  kernels::temporal_conv_forward<double>(s, x, w, b, out);
  CHECK(out == x);

  const TemporalConvShape box{12, 1, 1, 1, 3, 1, 1};
  std::vector<double> c(12, 5.0), bw(3, 1.0 / 3.0), bb(1, 0.0), bo(12);
  kernels::temporal_conv_forward<double>(box, c, bw, bb, bo);
  for (std::size_t t = 1; t + 1 < 12; ++t) CHECK(bo[t] == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("graph convolution backward is the adjoint of forward") {
  std::mt19937_64 rng(103);
  for (int trial = 0; trial < 40; ++trial) {
    GraphCase c = random_graph_case(rng, true);
    const auto& s = c.shape;
    std::vector<double> agg(s.aggregated_size()), out(c.dout.size());
    std::vector<double> zero_b(s.out_channels, 0.0);
    kernels::graph_conv_forward<double>(s, c.x, c.adj, c.mask, c.w, zero_b, agg, out);
    std::vector<double> dx(c.x.size()), dw(c.w.size(), 0.0), db(s.out_channels, 0.0), dm(c.mask.size(), 0.0);
    kernels::graph_conv_backward<double>(s, c.x, c.adj, c.mask, c.w, agg, c.dout, dx, dw, db, dm);
    // The layer is linear in x and in W separately: <f(x), g> = <x, dx> = <W, dW>.
    const double lhs = dot(out, c.dout);
    CHECK(dot(c.x, dx) == doctest::Approx(lhs).epsilon(1e-10));
    CHECK(dot(c.w, dw) == doctest::Approx(lhs).epsilon(1e-10));
    if (!s.time_varying) CHECK(dot(c.mask, dm) == doctest::Approx(lhs).epsilon(1e-10));
    for (std::size_t o = 0; o < s.out_channels; ++o) {
      double col = 0.0;
      for (std::size_t r = 0; r < s.frames * s.joints; ++r) col += c.dout[r * s.out_channels + o];
      CHECK(db[o] == doctest::Approx(col).epsilon(1e-12));
    }
  }
}

TEST_CASE("temporal convolution backward is the adjoint of forward") {
  std::mt19937_64 rng(104);
  for (int trial = 0; trial < 60; ++trial) {
    const TemporalConvShape s = random_temporal_shape(rng);
    if (s.frames + 2 * s.padding < s.kernel) continue;
    const auto x = random_values(rng, s.frames * s.joints * s.in_channels);
    const auto w = random_values(rng, s.kernel * s.out_channels * s.in_channels);
    const std::vector<double> b(s.out_channels, 0.0);
    const auto dout = random_values(rng, s.out_frames() * s.joints * s.out_channels);
    std::vector<double> out(dout.size());
    kernels::temporal_conv_forward<double>(s, x, w, b, out);
    std::vector<double> dx(x.size()), dw(w.size(), 0.0), db(s.out_channels, 0.0);
    kernels::temporal_conv_backward<double>(s, x, w, dout, dx, dw, db);
    const double lhs = dot(out, dout);
    CHECK(dot(x, dx) == doctest::Approx(lhs).epsilon(1e-10));
    CHECK(dot(w, dw) == doctest::Approx(lhs).epsilon(1e-10));
  }
}

TEST_CASE("parallel backward kernels agree with the reference") {
  std::mt19937_64 rng(105);
  for (int trial = 0; trial < 40; ++trial) {
    const GraphCase c = random_graph_case(rng, trial % 2 == 1);
    const auto& s = c.shape;
    std::vector<double> agg(s.aggregated_size()), out(c.dout.size());
    kernels::graph_conv_forward<double>(s, c.x, c.adj, c.mask, c.w, c.b, agg, out);
    auto run = [&](auto backward) {
      std::vector<double> dx(c.x.size()), dw(c.w.size(), 0.5), db(s.out_channels, 0.25), dm(c.mask.size(), -1.0);
      backward(s, std::span<const double>(c.x), std::span<const double>(c.adj), std::span<const double>(c.mask),
               std::span<const double>(c.w), std::span<const double>(agg), std::span<const double>(c.dout),
               std::span<double>(dx), std::span<double>(dw), std::span<double>(db), std::span<double>(dm));
      std::vector<double> all = dx;
      for (const auto* v : {&dw, &db, &dm}) all.insert(all.end(), v->begin(), v->end());
      return all;
    };
    const auto fast = run(kernels::graph_conv_backward<double>);
    const auto ref = run(kernels::reference::graph_conv_backward<double>);
    CHECK(max_abs_diff(fast, ref) <= 1e-10);
  }
  for (int trial = 0; trial < 40; ++trial) {
    const TemporalConvShape s = random_temporal_shape(rng);
    if (s.frames + 2 * s.padding < s.kernel) continue;
    const auto x = random_values(rng, s.frames * s.joints * s.in_channels);
    const auto w = random_values(rng, s.kernel * s.out_channels * s.in_channels);
    const auto dout = random_values(rng, s.out_frames() * s.joints * s.out_channels);
    auto run = [&](auto backward) {
      std::vector<double> dx(x.size(), 9.0), dw(w.size(), 0.5), db(s.out_channels, 0.25);
      backward(s, std::span<const double>(x), std::span<const double>(w), std::span<const double>(dout),
               std::span<double>(dx), std::span<double>(dw), std::span<double>(db));
      std::vector<double> all = dx;
      for (const auto* v : {&dw, &db}) all.insert(all.end(), v->begin(), v->end());
      return all;
    };
    CHECK(max_abs_diff(run(kernels::temporal_conv_backward<double>),
                       run(kernels::reference::temporal_conv_backward<double>)) <= 1e-10);
  }
}

TEST_CASE("parallel kernels do not depend on buffer alignment") {
  std::mt19937_64 rng(106);
  std::normal_distribution<float> d;
  const GraphConvShape s{16, 18, 64, 64, 4, false};
  auto rnd = [&](std::size_t n) {
    std::vector<float> v(n);
    for (float& x : v) x = d(rng);
    return v;
  };
  const auto x = rnd(16 * 18 * 64), adj = rnd(s.adjacency_size()), mask = rnd(18 * 18), w = rnd(4 * 64 * 64),
             b = rnd(64), dout = rnd(16 * 18 * 64);
  auto run = [&](std::size_t off) {
    auto shifted = [&](const std::vector<float>& v) {
      std::vector<float> out(v.size() + 16, 0.0f);
      std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(off));
      return out;
    };
    auto bx = shifted(x), ba = shifted(adj), bm = shifted(mask), bw = shifted(w), bb = shifted(b),
         bd = shifted(dout);
    std::vector<float> agg(s.aggregated_size() + 16), out(dout.size() + 16), dx(x.size() + 16), dw(w.size() + 16),
        db(64 + 16), dm(18 * 18 + 16);
    auto c = [&](std::vector<float>& v, std::size_t n) { return std::span<const float>(v.data() + off, n); };
    auto m = [&](std::vector<float>& v, std::size_t n) { return std::span<float>(v.data() + off, n); };
    kernels::graph_conv_forward<float>(s, c(bx, x.size()), c(ba, adj.size()), c(bm, 324), c(bw, w.size()), c(bb, 64),
                                       m(agg, s.aggregated_size()), m(out, dout.size()));
    kernels::graph_conv_backward<float>(s, c(bx, x.size()), c(ba, adj.size()), c(bm, 324), c(bw, w.size()),
                                        c(agg, s.aggregated_size()), c(bd, dout.size()), m(dx, x.size()),
                                        m(dw, w.size()), m(db, 64), m(dm, 324));
    const kernels::TemporalConvShape ts{16, 18, 64, 64, 9, 1, 4};
    std::vector<float> tout(dout.size() + 16), tdx(x.size() + 16), tdw(9 * 64 * 64 + 16), tdb(64 + 16);
    std::vector<float> twk(9 * 64 * 64 + 16);
    for (std::size_t i = 0; i < 9 * 64 * 64; ++i) twk[off + i] = x[i % x.size()];
    kernels::temporal_conv_forward<float>(ts, c(bx, x.size()), c(twk, 9 * 64 * 64), c(bb, 64), m(tout, dout.size()));
    kernels::temporal_conv_backward<float>(ts, c(bx, x.size()), c(twk, 9 * 64 * 64), c(bd, dout.size()),
                                           m(tdx, x.size()), m(tdw, 9 * 64 * 64), m(tdb, 64));
    std::vector<float> all;
    for (auto* v : {&out, &dx, &dw, &db, &dm, &tout, &tdx, &tdw, &tdb}) {
      all.insert(all.end(), v->begin() + static_cast<std::ptrdiff_t>(off),
                 v->end() - 16 + static_cast<std::ptrdiff_t>(off));
    }
    return all;
  };
  const auto base = run(0);
  for (std::size_t off = 1; off < 16; ++off) {
    const auto other = run(off);
    CHECK(std::memcmp(base.data(), other.data(), base.size() * sizeof(float)) == 0);
  }
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
  std::mt19937_64 rng(107);
  GraphCase c = random_graph_case(rng, true);
  std::fill(c.dout.begin(), c.dout.end(), 0.0);
  std::vector<double> agg(c.shape.aggregated_size()), out(c.dout.size());
  kernels::graph_conv_forward<double>(c.shape, c.x, c.adj, c.mask, c.w, c.b, agg, out);
  std::vector<double> dx(c.x.size()), dw(c.w.size(), 0.0), db(c.b.size(), 0.0), dm(c.mask.size(), 0.0);
  kernels::graph_conv_backward<double>(c.shape, c.x, c.adj, c.mask, c.w, agg, c.dout, dx, dw, db, dm);
  for (const auto* v : {&dx, &dw, &db, &dm}) {
    for (double g : *v) CHECK(g == 0.0);
  }
}

TEST_CASE("shape mismatches are reported") {
  const GraphConvShape s{2, 3, 2, 2, 1, false};
  std::vector<double> x(12), adj(9), w(4), b(2), agg(12), out(12);
  CHECK_NOTHROW(kernels::graph_conv_forward<double>(s, x, adj, {}, w, b, agg, out));
  std::vector<double> short_x(11);
  CHECK_THROWS_AS(kernels::graph_conv_forward<double>(s, short_x, adj, {}, w, b, agg, out), ShapeError);
  std::vector<double> bad_mask(4);
  CHECK_THROWS_AS(kernels::graph_conv_forward<double>(s, x, adj, bad_mask, w, b, agg, out), ShapeError);
  const TemporalConvShape ts{4, 3, 2, 2, 3, 1, 1};
  std::vector<double> tw(12), tx(24), to(24);
  CHECK_NOTHROW(kernels::temporal_conv_forward<double>(ts, tx, tw, b, to));
  CHECK_THROWS_AS(kernels::temporal_conv_forward<double>(ts, tx, std::vector<double>(11), b, to), ShapeError);
  CHECK_THROWS_AS(kernels::temporal_conv_forward<double>({4, 3, 2, 2, 3, 0, 1}, tx, tw, b, to), ShapeError);
}
