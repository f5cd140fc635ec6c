// Times the parallel kernels against the serial reference on one layer-sized problem.
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <vector>

#include "skelsplit/kernels.hpp"

using namespace skelsplit;

namespace {

std::vector<float> random_values(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<float> dist;
  std::vector<float> v(n);
  for (float& x : v) x = dist(rng);
  return v;
}

double median_ms(const std::function<void()>& f, int reps) {
  std::vector<double> times;
  f();
  for (int r = 0; r < reps; ++r) {
    const auto start = std::chrono::steady_clock::now();
    f();
    times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

void report(const char* name, double reference, double parallel) {
  std::printf("%-22s reference %9.3f ms  parallel %9.3f ms  speedup %6.2fx\n", name, reference, parallel,
              reference / parallel);
}

}  // namespace

int main(int argc, char** argv) {
  const int reps = argc > 1 ? std::atoi(argv[1]) : 5;
  std::mt19937_64 rng(1);
  const std::size_t T = 64, V = 18, Ci = 64, Co = 64, K = 4;
  std::printf("T=%zu V=%zu C_in=%zu C_out=%zu K=%zu threads=%d\n", T, V, Ci, Co, K, omp_get_max_threads());

  const kernels::GraphConvShape gs{T, V, Ci, Co, K, false};
  const auto x = random_values(T * V * Ci, rng);
  const auto adj = random_values(gs.adjacency_size(), rng);
  const auto mask = random_values(V * V, rng);
  const auto w = random_values(K * Co * Ci, rng);
  const auto b = random_values(Co, rng);
  const auto dout = random_values(T * V * Co, rng);
  std::vector<float> agg(gs.aggregated_size()), out(T * V * Co), dx(x.size()), dw(w.size()), db(Co), dm(V * V);

  report("graph_conv forward",
         median_ms([&] { kernels::reference::graph_conv_forward<float>(gs, x, adj, mask, w, b, agg, out); }, reps),
         median_ms([&] { kernels::graph_conv_forward<float>(gs, x, adj, mask, w, b, agg, out); }, reps));
  report("graph_conv backward",
         median_ms([&] { kernels::reference::graph_conv_backward<float>(gs, x, adj, mask, w, agg, dout, dx, dw, db, dm); },
                   reps),
         median_ms([&] { kernels::graph_conv_backward<float>(gs, x, adj, mask, w, agg, dout, dx, dw, db, dm); }, reps));

  const kernels::TemporalConvShape ts{T, V, Co, Co, 9, 1, 4};
  const auto tw = random_values(9 * Co * Co, rng);
  std::vector<float> tout(T * V * Co), tdx(T * V * Co), tdw(tw.size());
  report("temporal_conv forward",
         median_ms([&] { kernels::reference::temporal_conv_forward<float>(ts, out, tw, b, tout); }, reps),
         median_ms([&] { kernels::temporal_conv_forward<float>(ts, out, tw, b, tout); }, reps));
  report("temporal_conv backward",
         median_ms([&] { kernels::reference::temporal_conv_backward<float>(ts, out, tw, dout, tdx, tdw, db); }, reps),
         median_ms([&] { kernels::temporal_conv_backward<float>(ts, out, tw, dout, tdx, tdw, db); }, reps));
  return 0;
}
