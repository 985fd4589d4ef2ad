#pragma once

// Raw convolution kernels behind the conv2d graph op.
//
// Every kernel exists twice: a serial nested-loop reference and an OpenMP
// variant parallelized over an independent output axis. Both accumulate each
// output element in the same (channel, ky, kx) order, so they agree bitwise
// for any thread count. The reference is kept for tests and the benchmark.

#include <cstddef>
#include <span>

namespace elda::kernels {

struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_height() const { return (height + 2 * padding - kernel_h) / stride + 1; }
  std::size_t out_width() const { return (width + 2 * padding - kernel_w) / stride + 1; }
  std::size_t input_size() const { return batch * in_channels * height * width; }
  std::size_t kernel_size() const { return out_channels * in_channels * kernel_h * kernel_w; }
  std::size_t output_size() const { return batch * out_channels * out_height() * out_width(); }
};

/// output[n,k,oy,ox] = sum_{c,ky,kx} input[n,c,oy*s+ky-p,ox*s+kx-p] * kernel[k,c,ky,kx]
void conv2d_forward_reference(const ConvGeometry& g, std::span<const double> input,
                              std::span<const double> kernel, std::span<double> output);
void conv2d_forward(const ConvGeometry& g, std::span<const double> input,
                    std::span<const double> kernel, std::span<double> output);

/// Accumulates (+=) dL/dinput given dL/doutput.
void conv2d_backward_input_reference(const ConvGeometry& g, std::span<const double> grad_output,
                                     std::span<const double> kernel, std::span<double> grad_input);
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_output,
                           std::span<const double> kernel, std::span<double> grad_input);

/// Accumulates (+=) dL/dkernel given dL/doutput.
void conv2d_backward_kernel_reference(const ConvGeometry& g, std::span<const double> grad_output,
                                      std::span<const double> input, std::span<double> grad_kernel);
void conv2d_backward_kernel(const ConvGeometry& g, std::span<const double> grad_output,
                            std::span<const double> input, std::span<double> grad_kernel);

/// Thread count used by the parallel kernels. Defaults to 1 so training runs
/// are reproducible; set higher explicitly for throughput.
void set_num_threads(int threads);
int num_threads();

}  // namespace elda::kernels
