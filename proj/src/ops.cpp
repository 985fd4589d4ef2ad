#include "elda/ops.hpp"

#include <algorithm>
#include <cmath>

#include "elda/kernels.hpp"

namespace elda {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

void require_rank4(const Tensor& x, const char* op) {
  if (x.rank() != 4) throw ShapeError(std::string(op) + ": expected [N,C,H,W], got " + to_string(x.shape()));
}

}  // namespace

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding) {
  if (input.rank() != 4 || kernel.rank() != 4 || input.dim(1) != kernel.dim(1)) {
    throw ShapeError("conv2d: incompatible input " + to_string(input.shape()) + " and kernel " +
                     to_string(kernel.shape()));
  }
  if (stride == 0) throw std::invalid_argument("conv2d: stride must be positive");
  kernels::ConvGeometry g;
  g.batch = input.dim(0);
  g.in_channels = input.dim(1);
  g.height = input.dim(2);
  g.width = input.dim(3);
  g.out_channels = kernel.dim(0);
  g.kernel_h = kernel.dim(2);
  g.kernel_w = kernel.dim(3);
  g.stride = stride;
  g.padding = padding;
  if (g.kernel_h > g.height + 2 * padding || g.kernel_w > g.width + 2 * padding) {
    throw ShapeError("conv2d: kernel " + to_string(kernel.shape()) + " larger than padded input " +
                     to_string(input.shape()));
  }
  std::vector<double> out(g.output_size());
  kernels::conv2d_forward(g, input.values(), kernel.values(), out);
  return Tensor::make_result({g.batch, g.out_channels, g.out_height(), g.out_width()}, std::move(out),
                             {input, kernel}, [g](detail::Node& self) {
                               auto& in = *self.parents[0];
                               auto& ker = *self.parents[1];
                               if (in.requires_grad) kernels::conv2d_backward_input(g, self.grad, ker.values, in.grad);
                               if (ker.requires_grad) kernels::conv2d_backward_kernel(g, self.grad, in.values, ker.grad);
                             });
}

Tensor bias_add(const Tensor& x, const Tensor& bias) {
  require_rank4(x, "bias_add");
  if (bias.rank() != 1 || bias.dim(0) != x.dim(1)) {
    throw ShapeError("bias_add: bias " + to_string(bias.shape()) + " does not match channels of " +
                     to_string(x.shape()));
  }
  const std::size_t N = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
  std::vector<double> out(x.values().begin(), x.values().end());
  const auto b = bias.values();
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      double* p = out.data() + (n * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] += b[c];
    }
  return Tensor::make_result(x.shape(), std::move(out), {x, bias}, [N, C, plane](detail::Node& self) {
    auto& xin = *self.parents[0];
    auto& bn = *self.parents[1];
    if (xin.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) xin.grad[i] += self.grad[i];
    }
    if (bn.requires_grad) {
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c) {
          const double* g = self.grad.data() + (n * C + c) * plane;
          double s = 0.0;
          for (std::size_t i = 0; i < plane; ++i) s += g[i];
          bn.grad[c] += s;
        }
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.size());
  const auto v = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(v[i]);
  return Tensor::make_result(x.shape(), std::move(out), {x}, [](detail::Node& self) {
    auto& in = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double s = self.values[i];
      in.grad[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.size());
  const auto v = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
  return Tensor::make_result(x.shape(), std::move(out), {x}, [](detail::Node& self) {
    auto& in = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (in.values[i] > 0.0) in.grad[i] += self.grad[i];
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.values[i];
    }
    if (pb.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.values[i];
    }
  });
}

Tensor upsample2x(const Tensor& x) {
  require_rank4(x, "upsample2x");
  const std::size_t planes = x.dim(0) * x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t OH = 2 * H, OW = 2 * W;
  std::vector<double> out(planes * OH * OW);
  const auto v = x.values();
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < OH; ++y)
      for (std::size_t xx = 0; xx < OW; ++xx) out[(p * OH + y) * OW + xx] = v[(p * H + y / 2) * W + xx / 2];
  return Tensor::make_result({x.dim(0), x.dim(1), OH, OW}, std::move(out), {x},
                             [planes, H, W](detail::Node& self) {
                               auto& in = *self.parents[0];
                               const std::size_t OH = 2 * H, OW = 2 * W;
                               for (std::size_t p = 0; p < planes; ++p)
                                 for (std::size_t y = 0; y < H; ++y)
                                   for (std::size_t xx = 0; xx < W; ++xx) {
                                     const double* g = self.grad.data() + (p * OH + 2 * y) * OW + 2 * xx;
                                     in.grad[(p * H + y) * W + xx] += g[0] + g[1] + g[OW] + g[OW + 1];
                                   }
                             });
}

Tensor softmax_channels(const Tensor& x) {
  require_rank4(x, "softmax_channels");
  const std::size_t N = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (C == 0) throw ShapeError("softmax_channels: zero channels");
  std::vector<double> out(x.size());
  const auto v = x.values();
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t i = 0; i < plane; ++i) {
      const std::size_t base = n * C * plane + i;
      double m = v[base];
      for (std::size_t c = 1; c < C; ++c) m = std::max(m, v[base + c * plane]);
      double z = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        const double e = std::exp(v[base + c * plane] - m);
        out[base + c * plane] = e;
        z += e;
      }
      for (std::size_t c = 0; c < C; ++c) out[base + c * plane] /= z;
    }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [N, C, plane](detail::Node& self) {
    auto& in = *self.parents[0];
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t i = 0; i < plane; ++i) {
        const std::size_t base = n * C * plane + i;
        double dot = 0.0;
        for (std::size_t c = 0; c < C; ++c) dot += self.grad[base + c * plane] * self.values[base + c * plane];
        for (std::size_t c = 0; c < C; ++c) {
          const std::size_t j = base + c * plane;
          in.grad[j] += self.values[j] * (self.grad[j] - dot);
        }
      }
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return Tensor::make_result({}, {s}, {x}, [](detail::Node& self) {
    auto& in = *self.parents[0];
    const double g = self.grad[0];
    for (auto& gi : in.grad) gi += g;
  });
}

Tensor affine(const Tensor& x, double a, double b) {
  std::vector<double> out(x.size());
  const auto v = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * v[i] + b;
  return Tensor::make_result(x.shape(), std::move(out), {x}, [a](detail::Node& self) {
    auto& in = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += a * self.grad[i];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [](detail::Node& self) {
    auto& in = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i];
  });
}

}  // namespace elda
