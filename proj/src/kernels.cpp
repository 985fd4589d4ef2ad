#include "elda/kernels.hpp"

#include <algorithm>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace elda::kernels {

namespace {

int g_threads = 1;

// Output positions o in [0, out) whose tap o*stride + offset - padding lands in [0, in).
struct Range {
  std::size_t lo;
  std::size_t hi;
};

Range valid_outputs(std::size_t offset, std::size_t padding, std::size_t stride, std::size_t in,
                    std::size_t out) {
  const auto shift = static_cast<std::int64_t>(offset) - static_cast<std::int64_t>(padding);
  const auto s = static_cast<std::int64_t>(stride);
  std::int64_t lo = 0;
  if (shift < 0) lo = (-shift + s - 1) / s;
  const std::int64_t last_in = static_cast<std::int64_t>(in) - 1 - shift;
  std::int64_t hi = last_in < 0 ? 0 : last_in / s + 1;
  hi = std::min<std::int64_t>(hi, static_cast<std::int64_t>(out));
  if (hi < lo) hi = lo;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

inline std::ptrdiff_t tap(std::size_t o, std::size_t offset, const ConvGeometry& g) {
  return static_cast<std::ptrdiff_t>(o * g.stride + offset) - static_cast<std::ptrdiff_t>(g.padding);
}

}  // namespace

void set_num_threads(int threads) { g_threads = std::max(1, threads); }
int num_threads() { return g_threads; }

void conv2d_forward_reference(const ConvGeometry& g, std::span<const double> input,
                              std::span<const double> kernel, std::span<double> output) {
  const auto oh = g.out_height(), ow = g.out_width();
  const auto H = static_cast<std::ptrdiff_t>(g.height), W = static_cast<std::ptrdiff_t>(g.width);
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t k = 0; k < g.out_channels; ++k)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double sum = 0.0;
          for (std::size_t c = 0; c < g.in_channels; ++c)
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
              for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const auto iy = tap(oy, ky, g), ix = tap(ox, kx, g);
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                sum += input[((n * g.in_channels + c) * g.height + iy) * g.width + ix] *
                       kernel[((k * g.in_channels + c) * g.kernel_h + ky) * g.kernel_w + kx];
              }
          output[((n * g.out_channels + k) * oh + oy) * ow + ox] = sum;
        }
}

void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> kernel,
                    std::span<double> output) {
  const auto oh = g.out_height(), ow = g.out_width();
  const auto planes = static_cast<std::int64_t>(g.batch * g.out_channels);
  const double* in = input.data();
  const double* ker = kernel.data();
  double* out = output.data();
  const std::size_t stride = g.stride;

#pragma omp parallel for schedule(static) num_threads(g_threads) if (g_threads > 1)
  for (std::int64_t plane = 0; plane < planes; ++plane) {
    const std::size_t n = static_cast<std::size_t>(plane) / g.out_channels;
    const std::size_t k = static_cast<std::size_t>(plane) % g.out_channels;
    double* o = out + static_cast<std::size_t>(plane) * oh * ow;
    std::fill(o, o + oh * ow, 0.0);
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      const double* src = in + (n * g.in_channels + c) * g.height * g.width;
      const double* w = ker + (k * g.in_channels + c) * g.kernel_h * g.kernel_w;
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
        const auto ry = valid_outputs(ky, g.padding, stride, g.height, oh);
        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
          const auto rx = valid_outputs(kx, g.padding, stride, g.width, ow);
          const double wv = w[ky * g.kernel_w + kx];
          for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
            const double* row = src + static_cast<std::size_t>(tap(oy, ky, g)) * g.width;
            double* orow = o + oy * ow;
            const std::ptrdiff_t base = tap(0, kx, g);
            if (stride == 1) {
              for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) orow[ox] += row[base + static_cast<std::ptrdiff_t>(ox)] * wv;
            } else {
              for (std::size_t ox = rx.lo; ox < rx.hi; ++ox)
                orow[ox] += row[base + static_cast<std::ptrdiff_t>(ox * stride)] * wv;
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_input_reference(const ConvGeometry& g, std::span<const double> grad_output,
                                     std::span<const double> kernel, std::span<double> grad_input) {
  const auto oh = g.out_height(), ow = g.out_width();
  const auto H = static_cast<std::ptrdiff_t>(g.height), W = static_cast<std::ptrdiff_t>(g.width);
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t k = 0; k < g.out_channels; ++k)
      for (std::size_t c = 0; c < g.in_channels; ++c)
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
          for (std::size_t kx = 0; kx < g.kernel_w; ++kx)
            for (std::size_t oy = 0; oy < oh; ++oy)
              for (std::size_t ox = 0; ox < ow; ++ox) {
                const auto iy = tap(oy, ky, g), ix = tap(ox, kx, g);
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                grad_input[((n * g.in_channels + c) * g.height + iy) * g.width + ix] +=
                    grad_output[((n * g.out_channels + k) * oh + oy) * ow + ox] *
                    kernel[((k * g.in_channels + c) * g.kernel_h + ky) * g.kernel_w + kx];
              }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_output,
                           std::span<const double> kernel, std::span<double> grad_input) {
  const auto oh = g.out_height(), ow = g.out_width();
  const auto planes = static_cast<std::int64_t>(g.batch * g.in_channels);
  const double* go = grad_output.data();
  const double* ker = kernel.data();
  double* gi = grad_input.data();
  const std::size_t stride = g.stride;

#pragma omp parallel for schedule(static) num_threads(g_threads) if (g_threads > 1)
  for (std::int64_t plane = 0; plane < planes; ++plane) {
    const std::size_t n = static_cast<std::size_t>(plane) / g.in_channels;
    const std::size_t c = static_cast<std::size_t>(plane) % g.in_channels;
    double* dst = gi + static_cast<std::size_t>(plane) * g.height * g.width;
    for (std::size_t k = 0; k < g.out_channels; ++k) {
      const double* gplane = go + (n * g.out_channels + k) * oh * ow;
      const double* w = ker + (k * g.in_channels + c) * g.kernel_h * g.kernel_w;
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
        const auto ry = valid_outputs(ky, g.padding, stride, g.height, oh);
        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
          const auto rx = valid_outputs(kx, g.padding, stride, g.width, ow);
          const double wv = w[ky * g.kernel_w + kx];
          const std::ptrdiff_t base = tap(0, kx, g);
          for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
            double* row = dst + static_cast<std::size_t>(tap(oy, ky, g)) * g.width;
            const double* grow = gplane + oy * ow;
            if (stride == 1) {
              for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) row[base + static_cast<std::ptrdiff_t>(ox)] += grow[ox] * wv;
            } else {
              for (std::size_t ox = rx.lo; ox < rx.hi; ++ox)
                row[base + static_cast<std::ptrdiff_t>(ox * stride)] += grow[ox] * wv;
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_kernel_reference(const ConvGeometry& g, std::span<const double> grad_output,
                                      std::span<const double> input, std::span<double> grad_kernel) {
  const auto oh = g.out_height(), ow = g.out_width();
  const auto H = static_cast<std::ptrdiff_t>(g.height), W = static_cast<std::ptrdiff_t>(g.width);
  for (std::size_t k = 0; k < g.out_channels; ++k)
    for (std::size_t c = 0; c < g.in_channels; ++c)
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
          double sum = 0.0;
          for (std::size_t n = 0; n < g.batch; ++n)
            for (std::size_t oy = 0; oy < oh; ++oy)
              for (std::size_t ox = 0; ox < ow; ++ox) {
                const auto iy = tap(oy, ky, g), ix = tap(ox, kx, g);
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                sum += grad_output[((n * g.out_channels + k) * oh + oy) * ow + ox] *
                       input[((n * g.in_channels + c) * g.height + iy) * g.width + ix];
              }
          grad_kernel[((k * g.in_channels + c) * g.kernel_h + ky) * g.kernel_w + kx] += sum;
        }
}

void conv2d_backward_kernel(const ConvGeometry& g, std::span<const double> grad_output,
                            std::span<const double> input, std::span<double> grad_kernel) {
  const auto oh = g.out_height(), ow = g.out_width();
  const auto outs = static_cast<std::int64_t>(g.out_channels);
  const double* go = grad_output.data();
  const double* in = input.data();
  double* gk = grad_kernel.data();
  const std::size_t stride = g.stride;

#pragma omp parallel for schedule(static) num_threads(g_threads) if (g_threads > 1)
  for (std::int64_t kk = 0; kk < outs; ++kk) {
    const auto k = static_cast<std::size_t>(kk);
    for (std::size_t c = 0; c < g.in_channels; ++c)
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
        const auto ry = valid_outputs(ky, g.padding, stride, g.height, oh);
        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
          const auto rx = valid_outputs(kx, g.padding, stride, g.width, ow);
          const std::ptrdiff_t base = tap(0, kx, g);
          double sum = 0.0;
          for (std::size_t n = 0; n < g.batch; ++n) {
            const double* gplane = go + (n * g.out_channels + k) * oh * ow;
            const double* src = in + (n * g.in_channels + c) * g.height * g.width;
            for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
              const double* row = src + static_cast<std::size_t>(tap(oy, ky, g)) * g.width;
              const double* grow = gplane + oy * ow;
              for (std::size_t ox = rx.lo; ox < rx.hi; ++ox)
                sum += grow[ox] * row[base + static_cast<std::ptrdiff_t>(ox * stride)];
            }
          }
          gk[((k * g.in_channels + c) * g.kernel_h + ky) * g.kernel_w + kx] += sum;
        }
      }
  }
}

}  // namespace elda::kernels
