// SPDX-License-Identifier: Apache-2.0
#pragma once

// Forward and backward numeric kernels on plain tensors. The autograd layer
// (autograd.hpp) wires these into a recorded graph; tests compare them against
// naive loop oracles.

#include <cstddef>
#include <vector>

#include "kanli/tensor.hpp"

namespace kanli::kernels {

enum class Padding { kSame, kValid };

/// [m x p] * [p x q]. With transpose flags the stored operand is read transposed.
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a = false,
              bool transpose_b = false);

/// Row-wise softmax with max subtraction. Columns at index >= valid_cols are
/// treated as -inf (probability exactly 0). valid_cols == 0 means "all".
Tensor softmax_rows(const Tensor& x, std::size_t valid_cols = 0);
/// dx given the softmax output y and upstream dy.
Tensor softmax_rows_backward(const Tensor& y, const Tensor& dy);

struct LayerNormCache {
  Tensor normalized;           // (x - mean) * rstd, same shape as x
  std::vector<double> rstd;    // one per row
};

inline constexpr double kDefaultLayerNormEps = 1e-5;

/// Normalizes over the last axis, then applies gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = kDefaultLayerNormEps, LayerNormCache* cache = nullptr);
struct LayerNormGrads {
  Tensor dx, dgain, dbias;
};
LayerNormGrads layer_norm_backward(const LayerNormCache& cache,
                                   const Tensor& gain, const Tensor& dy);

/// Output spatial extent for one axis; throws DimensionError if the kernel
/// does not fit.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel,
                               std::size_t stride, Padding padding);
std::size_t conv_pad_before(std::size_t in, std::size_t kernel,
                            std::size_t stride, Padding padding);

/// Cross-correlation of [H x W x Cin] with [kh x kw x Cin x Cout].
/// Zero input entries are skipped, which makes sparse knowledge maps cheap.
Tensor conv2d(const Tensor& input, const Tensor& filters, std::size_t stride,
              Padding padding);
Tensor conv2d_backward_input(const Shape& input_shape, const Tensor& filters,
                             const Tensor& dout, std::size_t stride,
                             Padding padding);
Tensor conv2d_backward_filters(const Tensor& input, const Shape& filter_shape,
                               const Tensor& dout, std::size_t stride,
                               Padding padding);

/// Max pooling over [H x W x C] with valid windows. argmax receives, per
/// output element, the flat input index of the first (row-major) maximum.
Tensor max_pool2d(const Tensor& input, std::size_t size, std::size_t stride,
                  std::vector<std::size_t>* argmax = nullptr);

/// [.. x k] -> [..]: mean over the last axis.
Tensor avg_pool_last_axis(const Tensor& x);

/// Exact (erf) GELU and its derivative.
double gelu(double x);
double gelu_derivative(double x);

}  // namespace kanli::kernels
