// SPDX-License-Identifier: Apache-2.0
#include "kanli/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "kanli/errors.hpp"

namespace kanli::kernels {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(what) + " expects rank " +
                         std::to_string(rank) + ", got " +
                         shape_to_string(t.shape()));
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a,
              bool transpose_b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = transpose_a ? a.dim(1) : a.dim(0);
  const std::size_t p = transpose_a ? a.dim(0) : a.dim(1);
  const std::size_t p2 = transpose_b ? b.dim(1) : b.dim(0);
  const std::size_t q = transpose_b ? b.dim(0) : b.dim(1);
  if (p != p2) {
    throw DimensionError("matmul inner dimensions differ: " +
                         shape_to_string(a.shape()) + (transpose_a ? "^T" : "") +
                         " x " + shape_to_string(b.shape()) +
                         (transpose_b ? "^T" : ""));
  }
  Tensor out(Shape{m, q});
  const auto A = a.data();
  const auto B = b.data();
  auto C = out.data();
  const std::size_t a_cols = a.dim(1);
  const std::size_t b_cols = b.dim(1);
  for (std::size_t i = 0; i < m; ++i) {
    double* c_row = &C[i * q];
    for (std::size_t k = 0; k < p; ++k) {
      const double aik = transpose_a ? A[k * a_cols + i] : A[i * a_cols + k];
      if (aik == 0.0) continue;
      if (!transpose_b) {
        const double* b_row = &B[k * b_cols];
        for (std::size_t j = 0; j < q; ++j) c_row[j] += aik * b_row[j];
      } else {
        for (std::size_t j = 0; j < q; ++j) c_row[j] += aik * B[j * b_cols + k];
      }
    }
  }
  return out;
}

Tensor softmax_rows(const Tensor& x, std::size_t valid_cols) {
  require_rank(x, 2, "softmax_rows");
  const std::size_t rows = x.dim(0);
  const std::size_t cols = x.dim(1);
  const std::size_t live = valid_cols == 0 ? cols : std::min(valid_cols, cols);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < rows; ++i) {
    const double* in = &x.data()[i * cols];
    double* out = &y.data()[i * cols];
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < live; ++j) peak = std::max(peak, in[j]);
    double total = 0.0;
    for (std::size_t j = 0; j < live; ++j) {
      out[j] = std::exp(in[j] - peak);
      total += out[j];
    }
    for (std::size_t j = 0; j < live; ++j) out[j] /= total;
  }
  return y;
}

Tensor softmax_rows_backward(const Tensor& y, const Tensor& dy) {
  const std::size_t rows = y.dim(0);
  const std::size_t cols = y.dim(1);
  Tensor dx(y.shape());
  for (std::size_t i = 0; i < rows; ++i) {
    const double* yr = &y.data()[i * cols];
    const double* gr = &dy.data()[i * cols];
    double dot = 0.0;
    for (std::size_t j = 0; j < cols; ++j) dot += yr[j] * gr[j];
    double* out = &dx.data()[i * cols];
    for (std::size_t j = 0; j < cols; ++j) out[j] = yr[j] * (gr[j] - dot);
  }
  return dx;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps, LayerNormCache* cache) {
  if (x.rank() == 0) throw DimensionError("layer_norm on a scalar");
  if (eps <= 0.0) throw ContractError("layer_norm eps must be positive");
  const std::size_t d = x.shape().back();
  if (gain.size() != d || bias.size() != d) {
    throw DimensionError("layer_norm gain/bias " + shape_to_string(gain.shape()) +
                         "/" + shape_to_string(bias.shape()) +
                         " do not match last axis of " +
                         shape_to_string(x.shape()));
  }
  const std::size_t rows = x.size() / d;
  Tensor y(x.shape());
  Tensor normalized(x.shape());
  std::vector<double> rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = &x.data()[r * d];
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += in[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<double>(d);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const double xhat = (in[j] - mean) * rstd[r];
      normalized.data()[r * d + j] = xhat;
      y.data()[r * d + j] = xhat * gain[j] + bias[j];
    }
  }
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->rstd = std::move(rstd);
  }
  return y;
}

LayerNormGrads layer_norm_backward(const LayerNormCache& cache,
                                   const Tensor& gain, const Tensor& dy) {
  const Tensor& xhat = cache.normalized;
  const std::size_t d = xhat.shape().back();
  const std::size_t rows = xhat.size() / d;
  LayerNormGrads g{Tensor(xhat.shape()), Tensor(gain.shape()),
                   Tensor(gain.shape())};
  std::vector<double> dxhat(d);
  for (std::size_t r = 0; r < rows; ++r) {
    double mean_dxhat = 0.0;
    double mean_dxhat_xhat = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double gy = dy[r * d + j];
      const double xh = xhat[r * d + j];
      g.dgain[j] += gy * xh;
      g.dbias[j] += gy;
      dxhat[j] = gy * gain[j];
      mean_dxhat += dxhat[j];
      mean_dxhat_xhat += dxhat[j] * xh;
    }
    mean_dxhat /= static_cast<double>(d);
    mean_dxhat_xhat /= static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) {
      g.dx[r * d + j] = cache.rstd[r] * (dxhat[j] - mean_dxhat -
                                         xhat[r * d + j] * mean_dxhat_xhat);
    }
  }
  return g;
}

std::size_t conv_output_extent(std::size_t in, std::size_t kernel,
                               std::size_t stride, Padding padding) {
  if (stride == 0) throw ContractError("stride must be >= 1");
  if (kernel == 0) throw DimensionError("kernel extent must be >= 1");
  if (padding == Padding::kSame) return (in + stride - 1) / stride;
  if (kernel > in) {
    throw DimensionError("kernel extent " + std::to_string(kernel) +
                         " exceeds input extent " + std::to_string(in));
  }
  return (in - kernel) / stride + 1;
}

std::size_t conv_pad_before(std::size_t in, std::size_t kernel,
                            std::size_t stride, Padding padding) {
  if (padding == Padding::kValid) return 0;
  const std::size_t out = conv_output_extent(in, kernel, stride, padding);
  const std::size_t needed = (out - 1) * stride + kernel;
  return needed > in ? (needed - in) / 2 : 0;
}

namespace {

struct ConvGeometry {
  std::size_t H, W, Cin, kh, kw, Cout, OH, OW, pad_y, pad_x, stride;
};

ConvGeometry conv_geometry(const Shape& input, const Shape& filters,
                           std::size_t stride, Padding padding) {
  if (input.size() != 3 || filters.size() != 4) {
    throw DimensionError("conv2d expects input [H x W x Cin] and filters "
                         "[kh x kw x Cin x Cout], got " +
                         shape_to_string(input) + " and " +
                         shape_to_string(filters));
  }
  if (input[2] != filters[2]) {
    throw DimensionError("conv2d channel mismatch: input " +
                         shape_to_string(input) + ", filters " +
                         shape_to_string(filters));
  }
  ConvGeometry g{};
  g.H = input[0];
  g.W = input[1];
  g.Cin = input[2];
  g.kh = filters[0];
  g.kw = filters[1];
  g.Cout = filters[3];
  g.stride = stride;
  g.OH = conv_output_extent(g.H, g.kh, stride, padding);
  g.OW = conv_output_extent(g.W, g.kw, stride, padding);
  g.pad_y = conv_pad_before(g.H, g.kh, stride, padding);
  g.pad_x = conv_pad_before(g.W, g.kw, stride, padding);
  return g;
}

// Visits every (output cell, kernel tap, input channel) triple whose input
// value lies inside the image.
template <typename Visit>
void for_each_tap(const ConvGeometry& g, Visit&& visit) {
  for (std::size_t oy = 0; oy < g.OH; ++oy) {
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                static_cast<std::ptrdiff_t>(g.pad_y);
      if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.H)) continue;
      for (std::size_t ox = 0; ox < g.OW; ++ox) {
        for (std::size_t kx = 0; kx < g.kw; ++kx) {
          const std::ptrdiff_t ix =
              static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
              static_cast<std::ptrdiff_t>(g.pad_x);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.W)) continue;
          const std::size_t in_base =
              (static_cast<std::size_t>(iy) * g.W + static_cast<std::size_t>(ix)) *
              g.Cin;
          const std::size_t out_base = (oy * g.OW + ox) * g.Cout;
          const std::size_t tap_base = (ky * g.kw + kx) * g.Cin;
          visit(in_base, out_base, tap_base);
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& filters, std::size_t stride,
              Padding padding) {
  const ConvGeometry g = conv_geometry(input.shape(), filters.shape(), stride, padding);
  Tensor out(Shape{g.OH, g.OW, g.Cout});
  const auto in = input.data();
  const auto w = filters.data();
  auto o = out.data();
  for_each_tap(g, [&](std::size_t in_base, std::size_t out_base,
                      std::size_t tap_base) {
    for (std::size_t ci = 0; ci < g.Cin; ++ci) {
      const double v = in[in_base + ci];
      if (v == 0.0) continue;
      const double* wr = &w[(tap_base + ci) * g.Cout];
      double* orow = &o[out_base];
      for (std::size_t co = 0; co < g.Cout; ++co) orow[co] += v * wr[co];
    }
  });
  return out;
}

Tensor conv2d_backward_input(const Shape& input_shape, const Tensor& filters,
                             const Tensor& dout, std::size_t stride,
                             Padding padding) {
  const ConvGeometry g = conv_geometry(input_shape, filters.shape(), stride, padding);
  Tensor din(input_shape);
  const auto w = filters.data();
  const auto go = dout.data();
  auto gi = din.data();
  for_each_tap(g, [&](std::size_t in_base, std::size_t out_base,
                      std::size_t tap_base) {
    const double* grow = &go[out_base];
    for (std::size_t ci = 0; ci < g.Cin; ++ci) {
      const double* wr = &w[(tap_base + ci) * g.Cout];
      double acc = 0.0;
      for (std::size_t co = 0; co < g.Cout; ++co) acc += wr[co] * grow[co];
      gi[in_base + ci] += acc;
    }
  });
  return din;
}

Tensor conv2d_backward_filters(const Tensor& input, const Shape& filter_shape,
                               const Tensor& dout, std::size_t stride,
                               Padding padding) {
  const ConvGeometry g = conv_geometry(input.shape(), filter_shape, stride, padding);
  Tensor dw(filter_shape);
  const auto in = input.data();
  const auto go = dout.data();
  auto gw = dw.data();
  for_each_tap(g, [&](std::size_t in_base, std::size_t out_base,
                      std::size_t tap_base) {
    const double* grow = &go[out_base];
    for (std::size_t ci = 0; ci < g.Cin; ++ci) {
      const double v = in[in_base + ci];
      if (v == 0.0) continue;
      double* wr = &gw[(tap_base + ci) * g.Cout];
      for (std::size_t co = 0; co < g.Cout; ++co) wr[co] += v * grow[co];
    }
  });
  return dw;
}

Tensor max_pool2d(const Tensor& input, std::size_t size, std::size_t stride,
                  std::vector<std::size_t>* argmax) {
  require_rank(input, 3, "max_pool2d");
  if (size == 0 || stride == 0) throw ContractError("pool size and stride must be >= 1");
  const std::size_t H = input.dim(0), W = input.dim(1), C = input.dim(2);
  if (size > H || size > W) {
    throw DimensionError("pool window " + std::to_string(size) +
                         " exceeds input " + shape_to_string(input.shape()));
  }
  const std::size_t OH = (H - size) / stride + 1;
  const std::size_t OW = (W - size) / stride + 1;
  Tensor out(Shape{OH, OW, C});
  if (argmax) argmax->assign(out.size(), 0);
  const auto in = input.data();
  for (std::size_t oy = 0; oy < OH; ++oy) {
    for (std::size_t ox = 0; ox < OW; ++ox) {
      for (std::size_t c = 0; c < C; ++c) {
        std::size_t best_idx = ((oy * stride) * W + ox * stride) * C + c;
        double best = in[best_idx];
        for (std::size_t wy = 0; wy < size; ++wy) {
          for (std::size_t wx = 0; wx < size; ++wx) {
            const std::size_t idx =
                ((oy * stride + wy) * W + (ox * stride + wx)) * C + c;
            if (in[idx] > best) {
              best = in[idx];
              best_idx = idx;
            }
          }
        }
        const std::size_t o = (oy * OW + ox) * C + c;
        out[o] = best;
        if (argmax) (*argmax)[o] = best_idx;
      }
    }
  }
  return out;
}

Tensor avg_pool_last_axis(const Tensor& x) {
  if (x.rank() == 0) throw DimensionError("avg_pool_last_axis on a scalar");
  const std::size_t k = x.shape().back();
  if (k == 0) throw DimensionError("avg_pool_last_axis needs k >= 1");
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  Tensor out(out_shape);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += x[i * k + j];
    out[i] = total / static_cast<double>(k);
  }
  return out;
}

double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

}  // namespace kanli::kernels
