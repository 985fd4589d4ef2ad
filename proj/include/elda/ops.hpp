#pragma once

// Differentiable operations over Tensor. Binary ops require identical shapes;
// the only broadcasting is tensor-with-scalar-constant (scale, add_scalar).

#include "elda/tensor.hpp"

namespace elda {

/// input [N,C,H,W], kernel [K,C,kh,kw] -> [N,K,H',W'] with
/// H' = (H + 2*padding - kh) / stride + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride = 1, std::size_t padding = 0);

/// x [N,C,H,W] plus a per-channel bias [C].
Tensor bias_add(const Tensor& x, const Tensor& bias);

Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

/// Nearest-neighbour 2x spatial expansion of [N,C,H,W].
Tensor upsample2x(const Tensor& x);

/// Softmax across the channel axis of [N,C,H,W], max-subtracted.
Tensor softmax_channels(const Tensor& x);

Tensor sum(const Tensor& x);
/// a * x + b with constant a, b.
Tensor affine(const Tensor& x, double a, double b);
inline Tensor scale(const Tensor& x, double a) { return affine(x, a, 0.0); }
Tensor reshape(const Tensor& x, Shape shape);

/// Pure sigmoid used by the op and by oracles; saturates without overflow.
double stable_sigmoid(double x);

}  // namespace elda
