#pragma once

// Dense numeric kernels shared by the forward and backward passes.

#include <Eigen/Core>
#include <span>

#include "pedpred/core.hpp"

namespace pedpred::nn {

/// 2-D convolution geometry on H x W x C inputs; kernels are stored [out_c][k][k][in_c].
struct ConvGeometry {
  int in_h = 0;
  int in_w = 0;
  int in_c = 1;
  int out_c = 1;
  int kernel = 1;
  int stride = 1;
  int pad = 0;

  int out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
  int out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
  int patch() const { return kernel * kernel * in_c; }
  std::size_t in_size() const { return static_cast<std::size_t>(in_h) * in_w * in_c; }
  std::size_t out_size() const { return static_cast<std::size_t>(out_h()) * out_w() * out_c; }
  std::size_t kernel_size() const { return static_cast<std::size_t>(out_c) * patch(); }

  void validate() const {
    if (in_h < 1 || in_w < 1 || in_c < 1 || out_c < 1 || kernel < 1 || stride < 1 || pad < 0)
      throw ShapeError("invalid convolution geometry");
    if (out_h() < 1 || out_w() < 1) throw ShapeError("convolution kernel larger than padded input");
  }
};

namespace kernels {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

inline ConstMatMap cmat(const double* p, std::size_t rows, std::size_t cols) {
  return ConstMatMap(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
inline MatMap mat(double* p, std::size_t rows, std::size_t cols) {
  return MatMap(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
inline ConstVecMap cvec(const double* p, std::size_t n) { return ConstVecMap(p, static_cast<Eigen::Index>(n)); }
inline VecMap vec(double* p, std::size_t n) { return VecMap(p, static_cast<Eigen::Index>(n)); }

// Matrix-vector kernels keep a fixed summation order independent of buffer alignment.

/// Four-way split dot product.
inline double dot(const double* __restrict a, const double* __restrict b, std::size_t n) {
  double s[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    for (std::size_t j = 0; j < 4; ++j) s[j] += a[i + j] * b[i + j];
  for (; i < n; ++i) s[0] += a[i] * b[i];
  return (s[0] + s[1]) + (s[2] + s[3]);
}

/// y = W x + b with W [out, in].
inline void affine(const double* w, const double* b, const double* x, double* y, std::size_t out, std::size_t in) {
  for (std::size_t r = 0; r < out; ++r) y[r] = dot(w + r * in, x, in) + (b != nullptr ? b[r] : 0.0);
}

/// dx += W^T dy
inline void affine_backward_input(const double* __restrict w, const double* __restrict dy, double* __restrict dx,
                                  std::size_t out, std::size_t in) {
  for (std::size_t r = 0; r < out; ++r) {
    const double d = dy[r];
    const double* row = w + r * in;
    for (std::size_t c = 0; c < in; ++c) dx[c] += row[c] * d;
  }
}

/// dW += dy x^T
inline void outer_accumulate(const double* __restrict dy, const double* __restrict x, double* __restrict dw,
                             std::size_t out, std::size_t in) {
  for (std::size_t r = 0; r < out; ++r) {
    const double d = dy[r];
    double* row = dw + r * in;
    for (std::size_t c = 0; c < in; ++c) row[c] += d * x[c];
  }
}

/// db[c] += sum over rows of m[row][c]
inline void column_sum_accumulate(const double* __restrict m, double* __restrict db, std::size_t rows,
                                  std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) db[c] += m[r * cols + c];
}

/// Patch matrix [out_h*out_w, patch] with zero padding.
inline void im2col(const double* x, const ConvGeometry& g, double* cols) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  const int patch = g.patch();
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      double* row = cols + static_cast<std::size_t>(oy * ow + ox) * patch;
      for (int ky = 0; ky < g.kernel; ++ky) {
        const int iy = oy * g.stride + ky - g.pad;
        for (int kx = 0; kx < g.kernel; ++kx) {
          const int ix = ox * g.stride + kx - g.pad;
          double* dst = row + (ky * g.kernel + kx) * g.in_c;
          if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) {
            std::fill(dst, dst + g.in_c, 0.0);
          } else {
            const double* src = x + static_cast<std::size_t>(iy * g.in_w + ix) * g.in_c;
            std::copy(src, src + g.in_c, dst);
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatters patch rows back onto the input grid, accumulating.
inline void col2im_accumulate(const double* cols, const ConvGeometry& g, double* x) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  const int patch = g.patch();
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const double* row = cols + static_cast<std::size_t>(oy * ow + ox) * patch;
      for (int ky = 0; ky < g.kernel; ++ky) {
        const int iy = oy * g.stride + ky - g.pad;
        if (iy < 0 || iy >= g.in_h) continue;
        for (int kx = 0; kx < g.kernel; ++kx) {
          const int ix = ox * g.stride + kx - g.pad;
          if (ix < 0 || ix >= g.in_w) continue;
          const double* src = row + (ky * g.kernel + kx) * g.in_c;
          double* dst = x + static_cast<std::size_t>(iy * g.in_w + ix) * g.in_c;
          for (int c = 0; c < g.in_c; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

/// Cross-correlation; y is out_h x out_w x out_c.
inline void conv2d(const double* x, const double* k, const double* b, const ConvGeometry& g, double* y) {
  const std::size_t positions = static_cast<std::size_t>(g.out_h()) * g.out_w();
  RowMat cols(static_cast<Eigen::Index>(positions), g.patch());
  im2col(x, g, cols.data());
  auto ym = mat(y, positions, static_cast<std::size_t>(g.out_c));
  ym.noalias() = cols * cmat(k, static_cast<std::size_t>(g.out_c), static_cast<std::size_t>(g.patch())).transpose();
  if (b != nullptr)
    for (std::size_t p = 0; p < positions; ++p)
      for (int c = 0; c < g.out_c; ++c) y[p * g.out_c + c] += b[c];
}

/// Transposed convolution sharing the kernel of a conv with geometry g: maps an
/// out_h x out_w x out_c tensor onto in_h x in_w x in_c.
inline void conv2d_transpose(const double* y, const double* k, const double* b, const ConvGeometry& g, double* z) {
  const std::size_t positions = static_cast<std::size_t>(g.out_h()) * g.out_w();
  RowMat cols = cmat(y, positions, static_cast<std::size_t>(g.out_c)) *
                cmat(k, static_cast<std::size_t>(g.out_c), static_cast<std::size_t>(g.patch()));
  std::fill(z, z + g.in_size(), 0.0);
  col2im_accumulate(cols.data(), g, z);
  if (b != nullptr) {
    const std::size_t pixels = static_cast<std::size_t>(g.in_h) * g.in_w;
    for (std::size_t p = 0; p < pixels; ++p)
      for (int c = 0; c < g.in_c; ++c) z[p * g.in_c + c] += b[c];
  }
}

}  // namespace kernels
}  // namespace pedpred::nn
