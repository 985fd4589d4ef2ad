// Serial reference vs OpenMP convolution kernels on training-sized layers.
//
//   bench_kernels [threads] [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <vector>

#include "elda/kernels.hpp"

using elda::kernels::ConvGeometry;

namespace {

struct Case {
  const char* name;
  ConvGeometry g;
};

template <typename F>
double time_ms(int repeats, F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < repeats; ++r) f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / repeats;
}

}  // namespace

int main(int argc, char** argv) {
  const int threads = argc > 1 ? std::atoi(argv[1]) : 4;
  const int repeats = argc > 2 ? std::atoi(argv[2]) : 5;

  const Case cases[] = {
      {"encoder 3->16 s2 64x64", {1, 3, 64, 64, 16, 3, 3, 2, 1}},
      {"branch 64->64 8x8", {1, 64, 8, 8, 64, 3, 3, 1, 1}},
      {"decoder 32->16 32x32", {1, 32, 32, 32, 16, 3, 3, 1, 1}},
      {"decoder 16->8 64x64", {1, 16, 64, 64, 8, 3, 3, 1, 1}},
  };

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::printf("%-26s %10s %10s %10s %8s  %s\n", "layer", "pass", "serial ms", "omp ms", "speedup", "match");
  for (const auto& c : cases) {
    const auto& g = c.g;
    std::vector<double> in(g.input_size()), ker(g.kernel_size()), go(g.output_size());
    for (auto& v : in) v = dist(rng);
    for (auto& v : ker) v = dist(rng);
    for (auto& v : go) v = dist(rng);

    std::vector<double> out_ref(g.output_size()), out_par(g.output_size());
    std::vector<double> gi_ref(g.input_size()), gi_par(g.input_size());
    std::vector<double> gk_ref(g.kernel_size()), gk_par(g.kernel_size());

    elda::kernels::set_num_threads(threads);
    struct Pass {
      const char* name;
      double serial;
      double parallel;
      bool match;
    };
    Pass passes[3];
    passes[0] = {"forward", time_ms(repeats, [&] { elda::kernels::conv2d_forward_reference(g, in, ker, out_ref); }),
                 time_ms(repeats, [&] { elda::kernels::conv2d_forward(g, in, ker, out_par); }), out_ref == out_par};
    passes[1] = {"grad-in",
                 time_ms(1, [&] { elda::kernels::conv2d_backward_input_reference(g, go, ker, gi_ref); }),
                 time_ms(1, [&] { elda::kernels::conv2d_backward_input(g, go, ker, gi_par); }), gi_ref == gi_par};
    passes[2] = {"grad-kernel",
                 time_ms(1, [&] { elda::kernels::conv2d_backward_kernel_reference(g, go, in, gk_ref); }),
                 time_ms(1, [&] { elda::kernels::conv2d_backward_kernel(g, go, in, gk_par); }), gk_ref == gk_par};
    for (const auto& p : passes) {
      std::printf("%-26s %10s %10.3f %10.3f %8.2f  %s\n", c.name, p.name, p.serial, p.parallel, p.serial / p.parallel,
                  p.match ? "bitwise" : "MISMATCH");
    }
  }
  elda::kernels::set_num_threads(1);
  return 0;
}
