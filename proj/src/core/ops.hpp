#pragma once

// Differentiable tensor operations: the complete op set needed by the
// encoder, fuser, decoder and losses. Convolution runs as im2col + GEMM;
// its correctness is pinned to the naive-loop oracle in the test suite.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace spmkd {

namespace detail {

// C(M,N) += A(M,K) * B(K,N). Per-element accumulation runs in ascending k
// order, matching the naive oracle's summation order.
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::int64_t m_dim, std::int64_t k_dim, std::int64_t n_dim) {
  for (std::int64_t m = 0; m < m_dim; ++m) {
    T* crow = c + m * n_dim;
    const T* arow = a + m * k_dim;
    for (std::int64_t k = 0; k < k_dim; ++k) {
      const T av = arow[k];
      const T* brow = b + k * n_dim;
      for (std::int64_t n = 0; n < n_dim; ++n) crow[n] += av * brow[n];
    }
  }
}

// Dot product with split accumulators so the compiler can vectorize.
template <typename T>
T dot(const T* a, const T* b, std::int64_t n) {
  T acc[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
  std::int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  }
  T tail = T(0);
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

// C(M,K) += A(M,P) * B(K,P)^T, i.e. pairwise dots of contiguous rows.
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::int64_t m_dim, std::int64_t p_dim, std::int64_t k_dim) {
  for (std::int64_t m = 0; m < m_dim; ++m) {
    for (std::int64_t k = 0; k < k_dim; ++k) {
      c[m * k_dim + k] += dot(a + m * p_dim, b + k * p_dim, p_dim);
    }
  }
}

// C(K,N) += A(M,K)^T * B(M,N).
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::int64_t m_dim, std::int64_t k_dim, std::int64_t n_dim) {
  for (std::int64_t m = 0; m < m_dim; ++m) {
    const T* arow = a + m * k_dim;
    const T* brow = b + m * n_dim;
    for (std::int64_t k = 0; k < k_dim; ++k) {
      const T av = arow[k];
      T* crow = c + k * n_dim;
      for (std::int64_t n = 0; n < n_dim; ++n) crow[n] += av * brow[n];
    }
  }
}

struct ConvGeometry {
  std::int64_t batch, in_c, in_h, in_w;
  std::int64_t out_c, kh, kw;
  std::int64_t stride, padding, dilation;
  std::int64_t out_h, out_w;
  std::int64_t col_rows() const { return in_c * kh * kw; }
  std::int64_t out_hw() const { return out_h * out_w; }
};

inline std::int64_t conv_out_dim(std::int64_t in, std::int64_t pad, std::int64_t k, std::int64_t dilation,
                                 std::int64_t stride) {
  return (in + 2 * pad - dilation * (k - 1) - 1) / stride + 1;
}

// Unpacks one image (C,H,W) into the (C*KH*KW, OH*OW) patch matrix. Row
// index runs (ci, kh, kw), matching the oracle's loop nest.
template <typename T>
void im2col(const T* img, const ConvGeometry& g, T* col) {
  const std::int64_t ohw = g.out_hw();
  std::int64_t row = 0;
  for (std::int64_t ci = 0; ci < g.in_c; ++ci) {
    const T* plane = img + ci * g.in_h * g.in_w;
    for (std::int64_t ky = 0; ky < g.kh; ++ky) {
      for (std::int64_t kx = 0; kx < g.kw; ++kx, ++row) {
        T* dst = col + row * ohw;
        for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
          const std::int64_t iy = oy * g.stride - g.padding + ky * g.dilation;
          const bool y_ok = iy >= 0 && iy < g.in_h;
          for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
            const std::int64_t ix = ox * g.stride - g.padding + kx * g.dilation;
            *dst++ = (y_ok && ix >= 0 && ix < g.in_w) ? plane[iy * g.in_w + ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* img_grad) {
  std::int64_t row = 0;
  const std::int64_t ohw = g.out_hw();
  for (std::int64_t ci = 0; ci < g.in_c; ++ci) {
    T* plane = img_grad + ci * g.in_h * g.in_w;
    for (std::int64_t ky = 0; ky < g.kh; ++ky) {
      for (std::int64_t kx = 0; kx < g.kw; ++kx, ++row) {
        const T* src = col + row * ohw;
        for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
          const std::int64_t iy = oy * g.stride - g.padding + ky * g.dilation;
          if (iy < 0 || iy >= g.in_h) {
            src += g.out_w;
            continue;
          }
          for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
            const std::int64_t ix = ox * g.stride - g.padding + kx * g.dilation;
            if (ix >= 0 && ix < g.in_w) plane[iy * g.in_w + ix] += src[ox];
          }
          src += g.out_w;
        }
      }
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "add");
  std::vector<T> out(a.values());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.values()[i];
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op_result<T>(a.shape(), std::move(out), "add", {an, bn}, [an, bn](TensorNode<T>& n) {
    if (an->requires_grad) detail::accumulate(*an, n.grad);
    if (bn->requires_grad) detail::accumulate(*bn, n.grad);
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "sub");
  std::vector<T> out(a.values());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.values()[i];
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op_result<T>(a.shape(), std::move(out), "sub", {an, bn}, [an, bn](TensorNode<T>& n) {
    if (an->requires_grad) detail::accumulate(*an, n.grad);
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) bn->grad[i] -= n.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "mul");
  std::vector<T> out(a.values());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.values()[i];
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op_result<T>(a.shape(), std::move(out), "mul", {an, bn}, [an, bn](TensorNode<T>& n) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i] * bn->values[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) bn->grad[i] += n.grad[i] * an->values[i];
    }
  });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "div");
  std::vector<T> out(a.values());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= b.values()[i];
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op_result<T>(a.shape(), std::move(out), "div", {an, bn}, [an, bn](TensorNode<T>& n) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i] / bn->values[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        const T bv = bn->values[i];
        bn->grad[i] -= n.grad[i] * an->values[i] / (bv * bv);
      }
    }
  });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  std::vector<T> out(a.values());
  for (auto& v : out) v += s;
  auto an = a.node();
  return detail::make_op_result<T>(a.shape(), std::move(out), "add_scalar", {an}, [an](TensorNode<T>& n) {
    detail::accumulate(*an, n.grad);
  });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T s) {
  std::vector<T> out(a.values());
  for (auto& v : out) v *= s;
  auto an = a.node();
  return detail::make_op_result<T>(a.shape(), std::move(out), "mul_scalar", {an}, [an, s](TensorNode<T>& n) {
    an->ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i] * s;
  });
}

// s - t, elementwise.
template <typename T>
Tensor<T> scalar_sub(T s, const Tensor<T>& a) {
  std::vector<T> out(a.values());
  for (auto& v : out) v = s - v;
  auto an = a.node();
  return detail::make_op_result<T>(a.shape(), std::move(out), "scalar_sub", {an}, [an](TensorNode<T>& n) {
    an->ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) an->grad[i] -= n.grad[i];
  });
}

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  std::vector<T> out(a.values());
  for (auto& v : out) v = v > T(0) ? v : T(0);
  auto an = a.node();
  return detail::make_op_result<T>(a.shape(), std::move(out), "relu", {an}, [an](TensorNode<T>& n) {
    an->ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      if (an->values[i] > T(0)) an->grad[i] += n.grad[i];
    }
  });
}

template <typename T>
T sigmoid_scalar(T x) {
  if (x >= T(0)) {
    return T(1) / (T(1) + std::exp(-x));
  }
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  std::vector<T> out(a.values());
  for (auto& v : out) v = sigmoid_scalar(v);
  auto an = a.node();
  auto result = detail::make_op_result<T>(a.shape(), std::move(out), "sigmoid", {an}, nullptr);
  auto rn = result.node();
  if (rn->requires_grad) {
    rn->backward_fn = [an, rn_raw = rn.get()](TensorNode<T>& n) {
      an->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        const T y = rn_raw->values[i];
        an->grad[i] += n.grad[i] * y * (T(1) - y);
      }
    };
  }
  return result;
}

template <typename T>
Tensor<T> log(const Tensor<T>& a) {
  std::vector<T> out(a.values());
  for (auto& v : out) v = std::log(v);
  auto an = a.node();
  return detail::make_op_result<T>(a.shape(), std::move(out), "log", {an}, [an](TensorNode<T>& n) {
    an->ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i] / an->values[i];
  });
}

// Softmax over one axis; each slice along that axis sums to 1.
template <typename T>
Tensor<T> softmax(const Tensor<T>& a, std::int64_t axis) {
  const auto& s = a.shape();
  if (axis < 0 || axis >= static_cast<std::int64_t>(s.size())) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  std::int64_t outer = 1, inner = 1;
  for (std::int64_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::int64_t i = axis + 1; i < static_cast<std::int64_t>(s.size()); ++i) inner *= s[i];
  const std::int64_t n = s[axis];

  std::vector<T> out(a.values().size());
  const auto& x = a.values();
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t in = 0; in < inner; ++in) {
      const std::int64_t base = o * n * inner + in;
      T mx = x[base];
      for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, x[base + j * inner]);
      T sum = T(0);
      for (std::int64_t j = 0; j < n; ++j) {
        const T e = std::exp(x[base + j * inner] - mx);
        out[base + j * inner] = e;
        sum += e;
      }
      for (std::int64_t j = 0; j < n; ++j) out[base + j * inner] /= sum;
    }
  }
  auto an = a.node();
  auto result = detail::make_op_result<T>(a.shape(), std::move(out), "softmax", {an}, nullptr);
  auto rn = result.node();
  if (rn->requires_grad) {
    rn->backward_fn = [an, rn_raw = rn.get(), outer, n, inner](TensorNode<T>& nd) {
      an->ensure_grad();
      for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t in = 0; in < inner; ++in) {
          const std::int64_t base = o * n * inner + in;
          T gy = T(0);
          for (std::int64_t j = 0; j < n; ++j) gy += nd.grad[base + j * inner] * rn_raw->values[base + j * inner];
          for (std::int64_t j = 0; j < n; ++j) {
            const std::int64_t idx = base + j * inner;
            an->grad[idx] += rn_raw->values[idx] * (nd.grad[idx] - gy);
          }
        }
      }
    };
  }
  return result;
}

// Softmax across the channel axis of a (C,H,W) or (N,C,H,W) tensor.
template <typename T>
Tensor<T> softmax_channel(const Tensor<T>& a) {
  const std::size_t nd = a.shape().size();
  if (nd != 3 && nd != 4) {
    throw DimensionError("softmax_channel expects (C,H,W) or (N,C,H,W), got " + shape_str(a.shape()));
  }
  return softmax(a, nd == 3 ? 0 : 1);
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2) {
    throw DimensionError("matmul expects 2D tensors, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::int64_t m = a.shape()[0], k = a.shape()[1];
  const std::int64_t k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  std::vector<T> out(static_cast<std::size_t>(m * n), T(0));
  detail::gemm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op_result<T>({m, n}, std::move(out), "matmul", {an, bn}, [an, bn, m, k, n](TensorNode<T>& nd) {
    if (an->requires_grad) {
      an->ensure_grad();
      detail::gemm_nt(nd.grad.data(), bn->values.data(), an->grad.data(), m, n, k);
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      detail::gemm_tn(an->values.data(), nd.grad.data(), bn->grad.data(), m, k, n);
    }
  });
}

// input (N,In) x weight (In,Out) + bias (Out). Pass an undefined tensor to
// skip the bias.
template <typename T>
Tensor<T> fully_connected(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (input.shape().size() != 2 || weight.shape().size() != 2) {
    throw DimensionError("fully_connected expects 2D input and weight");
  }
  const std::int64_t rows = input.shape()[0], in_f = input.shape()[1];
  const std::int64_t w_in = weight.shape()[0], out_f = weight.shape()[1];
  if (in_f != w_in) {
    throw DimensionError("fully_connected: input features " + std::to_string(in_f) +
                         " vs weight rows " + std::to_string(w_in));
  }
  const bool has_bias = bias.defined();
  if (has_bias && (bias.shape().size() != 1 || bias.shape()[0] != out_f)) {
    throw DimensionError("fully_connected: bias shape " + shape_str(bias.shape()) + " does not match " +
                         std::to_string(out_f) + " outputs");
  }
  std::vector<T> out(static_cast<std::size_t>(rows * out_f), T(0));
  detail::gemm_nn(input.values().data(), weight.values().data(), out.data(), rows, in_f, out_f);
  if (has_bias) {
    for (std::int64_t r = 0; r < rows; ++r) {
      for (std::int64_t c = 0; c < out_f; ++c) out[r * out_f + c] += bias.values()[c];
    }
  }
  auto in_n = input.node();
  auto w_n = weight.node();
  std::vector<std::shared_ptr<TensorNode<T>>> parents = {in_n, w_n};
  std::shared_ptr<TensorNode<T>> b_n;
  if (has_bias) {
    b_n = bias.node();
    parents.push_back(b_n);
  }
  return detail::make_op_result<T>(
      {rows, out_f}, std::move(out), "fully_connected", std::move(parents),
      [in_n, w_n, b_n, rows, in_f, out_f](TensorNode<T>& nd) {
        if (in_n->requires_grad) {
          in_n->ensure_grad();
          detail::gemm_nt(nd.grad.data(), w_n->values.data(), in_n->grad.data(), rows, out_f, in_f);
        }
        if (w_n->requires_grad) {
          w_n->ensure_grad();
          detail::gemm_tn(in_n->values.data(), nd.grad.data(), w_n->grad.data(), rows, in_f, out_f);
        }
        if (b_n && b_n->requires_grad) {
          b_n->ensure_grad();
          for (std::int64_t r = 0; r < rows; ++r) {
            for (std::int64_t c = 0; c < out_f; ++c) b_n->grad[c] += nd.grad[r * out_f + c];
          }
        }
      });
}

// ---------------------------------------------------------------------------
// convolution
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, std::int64_t stride,
                 std::int64_t padding, std::int64_t dilation) {
  if (stride < 1 || dilation < 1 || padding < 0) {
    throw ConfigError("conv2d: stride/dilation must be >= 1 and padding >= 0");
  }
  if (input.shape().size() != 4 || weight.shape().size() != 4) {
    throw DimensionError("conv2d expects NCHW input and (Cout,Cin,KH,KW) weight, got " +
                         shape_str(input.shape()) + " and " + shape_str(weight.shape()));
  }
  detail::ConvGeometry g;
  g.batch = input.shape()[0];
  g.in_c = input.shape()[1];
  g.in_h = input.shape()[2];
  g.in_w = input.shape()[3];
  g.out_c = weight.shape()[0];
  g.kh = weight.shape()[2];
  g.kw = weight.shape()[3];
  g.stride = stride;
  g.padding = padding;
  g.dilation = dilation;
  if (weight.shape()[1] != g.in_c) {
    throw DimensionError("conv2d: weight expects " + std::to_string(weight.shape()[1]) +
                         " input channels but input has " + std::to_string(g.in_c));
  }
  g.out_h = detail::conv_out_dim(g.in_h, padding, g.kh, dilation, stride);
  g.out_w = detail::conv_out_dim(g.in_w, padding, g.kw, dilation, stride);
  if (g.out_h < 1 || g.out_w < 1) {
    throw DimensionError("conv2d: input " + std::to_string(g.in_h) + "x" + std::to_string(g.in_w) +
                         " too small for kernel/dilation/stride, no output pixels");
  }
  const bool has_bias = bias.defined();
  if (has_bias && (bias.shape().size() != 1 || bias.shape()[0] != g.out_c)) {
    throw DimensionError("conv2d: bias shape " + shape_str(bias.shape()) + " does not match " +
                         std::to_string(g.out_c) + " output channels");
  }

  const std::int64_t ckk = g.col_rows();
  const std::int64_t ohw = g.out_hw();
  std::vector<T> col(static_cast<std::size_t>(ckk * ohw));
  std::vector<T> out(static_cast<std::size_t>(g.batch * g.out_c * ohw), T(0));
  for (std::int64_t n = 0; n < g.batch; ++n) {
    detail::im2col(input.values().data() + n * g.in_c * g.in_h * g.in_w, g, col.data());
    detail::gemm_nn(weight.values().data(), col.data(), out.data() + n * g.out_c * ohw, g.out_c, ckk, ohw);
  }
  if (has_bias) {
    for (std::int64_t n = 0; n < g.batch; ++n) {
      for (std::int64_t co = 0; co < g.out_c; ++co) {
        T* dst = out.data() + (n * g.out_c + co) * ohw;
        const T bv = bias.values()[co];
        for (std::int64_t i = 0; i < ohw; ++i) dst[i] += bv;
      }
    }
  }

  auto in_n = input.node();
  auto w_n = weight.node();
  std::vector<std::shared_ptr<TensorNode<T>>> parents = {in_n, w_n};
  std::shared_ptr<TensorNode<T>> b_n;
  if (has_bias) {
    b_n = bias.node();
    parents.push_back(b_n);
  }
  return detail::make_op_result<T>(
      {g.batch, g.out_c, g.out_h, g.out_w}, std::move(out), "conv2d", std::move(parents),
      [in_n, w_n, b_n, g](TensorNode<T>& nd) {
        const std::int64_t ckk = g.col_rows();
        const std::int64_t ohw = g.out_hw();
        std::vector<T> col(static_cast<std::size_t>(ckk * ohw));
        std::vector<T> dcol(static_cast<std::size_t>(ckk * ohw));
        const std::int64_t in_plane = g.in_c * g.in_h * g.in_w;
        if (in_n->requires_grad) in_n->ensure_grad();
        if (w_n->requires_grad) w_n->ensure_grad();
        for (std::int64_t n = 0; n < g.batch; ++n) {
          const T* dout = nd.grad.data() + n * g.out_c * ohw;
          if (w_n->requires_grad) {
            detail::im2col(in_n->values.data() + n * in_plane, g, col.data());
            detail::gemm_nt(dout, col.data(), w_n->grad.data(), g.out_c, ohw, ckk);
          }
          if (in_n->requires_grad) {
            std::fill(dcol.begin(), dcol.end(), T(0));
            // dcol = W^T * dout
            for (std::int64_t co = 0; co < g.out_c; ++co) {
              const T* wrow = w_n->values.data() + co * ckk;
              const T* grow = dout + co * ohw;
              for (std::int64_t r = 0; r < ckk; ++r) {
                const T wv = wrow[r];
                T* drow = dcol.data() + r * ohw;
                for (std::int64_t i = 0; i < ohw; ++i) drow[i] += wv * grow[i];
              }
            }
            detail::col2im_add(dcol.data(), g, in_n->grad.data() + n * in_plane);
          }
        }
        if (b_n && b_n->requires_grad) {
          b_n->ensure_grad();
          for (std::int64_t n = 0; n < g.batch; ++n) {
            for (std::int64_t co = 0; co < g.out_c; ++co) {
              const T* grow = nd.grad.data() + (n * g.out_c + co) * ohw;
              T acc = T(0);
              for (std::int64_t i = 0; i < ohw; ++i) acc += grow[i];
              b_n->grad[co] += acc;
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// resampling
// ---------------------------------------------------------------------------

// Bilinear upsampling by an integer factor, half-pixel convention. Constant
// inputs map to constant outputs; scale 1 is the identity.
template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& input, std::int64_t scale) {
  if (scale < 1) throw ConfigError("upsample_bilinear: scale must be >= 1, got " + std::to_string(scale));
  if (input.shape().size() != 4) {
    throw DimensionError("upsample_bilinear expects NCHW input, got " + shape_str(input.shape()));
  }
  const std::int64_t batch = input.shape()[0], ch = input.shape()[1];
  const std::int64_t ih = input.shape()[2], iw = input.shape()[3];
  const std::int64_t oh = ih * scale, ow = iw * scale;

  struct Tap {
    std::int64_t lo, hi;
    T frac;
  };
  auto make_taps = [scale](std::int64_t out_dim, std::int64_t in_dim) {
    std::vector<Tap> taps(static_cast<std::size_t>(out_dim));
    for (std::int64_t o = 0; o < out_dim; ++o) {
      double src = (static_cast<double>(o) + 0.5) / static_cast<double>(scale) - 0.5;
      src = std::min(std::max(src, 0.0), static_cast<double>(in_dim - 1));
      const std::int64_t lo = static_cast<std::int64_t>(src);
      taps[o] = {lo, std::min(lo + 1, in_dim - 1), static_cast<T>(src - static_cast<double>(lo))};
    }
    return taps;
  };
  const auto ytaps = make_taps(oh, ih);
  const auto xtaps = make_taps(ow, iw);

  std::vector<T> out(static_cast<std::size_t>(batch * ch * oh * ow));
  const auto& x = input.values();
  for (std::int64_t p = 0; p < batch * ch; ++p) {
    const T* plane = x.data() + p * ih * iw;
    T* dst = out.data() + p * oh * ow;
    for (std::int64_t oy = 0; oy < oh; ++oy) {
      const Tap& ty = ytaps[oy];
      for (std::int64_t ox = 0; ox < ow; ++ox) {
        const Tap& tx = xtaps[ox];
        const T a = plane[ty.lo * iw + tx.lo], b = plane[ty.lo * iw + tx.hi];
        const T c = plane[ty.hi * iw + tx.lo], d = plane[ty.hi * iw + tx.hi];
        const T top = a + tx.frac * (b - a);
        const T bot = c + tx.frac * (d - c);
        *dst++ = top + ty.frac * (bot - top);
      }
    }
  }

  auto in_n = input.node();
  return detail::make_op_result<T>(
      {batch, ch, oh, ow}, std::move(out), "upsample_bilinear", {in_n},
      [in_n, ytaps, xtaps, batch, ch, ih, iw, oh, ow](TensorNode<T>& nd) {
        in_n->ensure_grad();
        for (std::int64_t p = 0; p < batch * ch; ++p) {
          T* gplane = in_n->grad.data() + p * ih * iw;
          const T* gsrc = nd.grad.data() + p * oh * ow;
          for (std::int64_t oy = 0; oy < oh; ++oy) {
            const auto& ty = ytaps[oy];
            for (std::int64_t ox = 0; ox < ow; ++ox) {
              const auto& tx = xtaps[ox];
              const T gv = gsrc[oy * ow + ox];
              const T wy1 = ty.frac, wy0 = T(1) - wy1;
              const T wx1 = tx.frac, wx0 = T(1) - wx1;
              gplane[ty.lo * iw + tx.lo] += gv * wy0 * wx0;
              gplane[ty.lo * iw + tx.hi] += gv * wy0 * wx1;
              gplane[ty.hi * iw + tx.lo] += gv * wy1 * wx0;
              gplane[ty.hi * iw + tx.hi] += gv * wy1 * wx1;
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape new_shape) {
  if (numel(new_shape) != a.size()) {
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(new_shape));
  }
  auto an = a.node();
  std::vector<T> out(a.values());
  return detail::make_op_result<T>(std::move(new_shape), std::move(out), "reshape", {an},
                                   [an](TensorNode<T>& nd) { detail::accumulate(*an, nd.grad); });
}

// Contiguous slice [start, start+len) along one axis.
template <typename T>
Tensor<T> narrow(const Tensor<T>& a, std::int64_t axis, std::int64_t start, std::int64_t len) {
  const auto& s = a.shape();
  if (axis < 0 || axis >= static_cast<std::int64_t>(s.size())) {
    throw DimensionError("narrow: axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  if (start < 0 || len < 1 || start + len > s[axis]) {
    throw DimensionError("narrow: range [" + std::to_string(start) + "," + std::to_string(start + len) +
                         ") outside axis of size " + std::to_string(s[axis]));
  }
  std::int64_t outer = 1, inner = 1;
  for (std::int64_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::int64_t i = axis + 1; i < static_cast<std::int64_t>(s.size()); ++i) inner *= s[i];
  Shape out_shape = s;
  out_shape[axis] = len;

  std::vector<T> out(static_cast<std::size_t>(outer * len * inner));
  const std::int64_t in_stride = s[axis] * inner;
  for (std::int64_t o = 0; o < outer; ++o) {
    std::copy_n(a.values().data() + o * in_stride + start * inner, len * inner, out.data() + o * len * inner);
  }
  auto an = a.node();
  return detail::make_op_result<T>(std::move(out_shape), std::move(out), "narrow", {an},
                                   [an, outer, inner, len, start, in_stride](TensorNode<T>& nd) {
                                     an->ensure_grad();
                                     for (std::int64_t o = 0; o < outer; ++o) {
                                       const T* src = nd.grad.data() + o * len * inner;
                                       T* dst = an->grad.data() + o * in_stride + start * inner;
                                       for (std::int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
                                     }
                                   });
}

template <typename T>
Tensor<T> transpose2d(const Tensor<T>& a) {
  if (a.shape().size() != 2) {
    throw DimensionError("transpose2d expects a 2D tensor, got " + shape_str(a.shape()));
  }
  const std::int64_t rows = a.shape()[0], cols = a.shape()[1];
  std::vector<T> out(a.values().size());
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < cols; ++c) out[c * rows + r] = a.values()[r * cols + c];
  }
  auto an = a.node();
  return detail::make_op_result<T>({cols, rows}, std::move(out), "transpose2d", {an},
                                   [an, rows, cols](TensorNode<T>& nd) {
                                     an->ensure_grad();
                                     for (std::int64_t r = 0; r < rows; ++r) {
                                       for (std::int64_t c = 0; c < cols; ++c) {
                                         an->grad[r * cols + c] += nd.grad[c * rows + r];
                                       }
                                     }
                                   });
}

template <typename T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b, std::int64_t axis) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.size() != sb.size()) {
    throw DimensionError("concat: rank mismatch " + shape_str(sa) + " vs " + shape_str(sb));
  }
  if (axis < 0 || axis >= static_cast<std::int64_t>(sa.size())) {
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for " + shape_str(sa));
  }
  for (std::size_t i = 0; i < sa.size(); ++i) {
    if (static_cast<std::int64_t>(i) != axis && sa[i] != sb[i]) {
      throw DimensionError("concat: non-axis dimension " + std::to_string(i) + " differs, " + shape_str(sa) +
                           " vs " + shape_str(sb));
    }
  }
  Shape out_shape = sa;
  out_shape[axis] += sb[axis];

  std::int64_t outer = 1, inner = 1;
  for (std::int64_t i = 0; i < axis; ++i) outer *= sa[i];
  for (std::int64_t i = axis + 1; i < static_cast<std::int64_t>(sa.size()); ++i) inner *= sa[i];
  const std::int64_t na = sa[axis] * inner, nb = sb[axis] * inner;

  std::vector<T> out(static_cast<std::size_t>(numel(out_shape)));
  for (std::int64_t o = 0; o < outer; ++o) {
    std::copy_n(a.values().data() + o * na, na, out.data() + o * (na + nb));
    std::copy_n(b.values().data() + o * nb, nb, out.data() + o * (na + nb) + na);
  }
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op_result<T>(std::move(out_shape), std::move(out), "concat", {an, bn},
                                   [an, bn, outer, na, nb](TensorNode<T>& nd) {
                                     if (an->requires_grad) {
                                       an->ensure_grad();
                                       for (std::int64_t o = 0; o < outer; ++o) {
                                         const T* src = nd.grad.data() + o * (na + nb);
                                         T* dst = an->grad.data() + o * na;
                                         for (std::int64_t i = 0; i < na; ++i) dst[i] += src[i];
                                       }
                                     }
                                     if (bn->requires_grad) {
                                       bn->ensure_grad();
                                       for (std::int64_t o = 0; o < outer; ++o) {
                                         const T* src = nd.grad.data() + o * (na + nb) + na;
                                         T* dst = bn->grad.data() + o * nb;
                                         for (std::int64_t i = 0; i < nb; ++i) dst[i] += src[i];
                                       }
                                     }
                                   });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
  T acc = T(0);
  for (T v : a.values()) acc += v;
  auto an = a.node();
  return detail::make_op_result<T>({1}, {acc}, "sum_all", {an}, [an](TensorNode<T>& nd) {
    an->ensure_grad();
    const T g = nd.grad[0];
    for (auto& gv : an->grad) gv += g;
  });
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
  const T inv = T(1) / static_cast<T>(a.size());
  T acc = T(0);
  for (T v : a.values()) acc += v;
  acc *= inv;
  auto an = a.node();
  return detail::make_op_result<T>({1}, {acc}, "mean_all", {an}, [an, inv](TensorNode<T>& nd) {
    an->ensure_grad();
    const T g = nd.grad[0] * inv;
    for (auto& gv : an->grad) gv += g;
  });
}

// Divides each row of a 2D tensor by its sum. Rows must have nonzero sums;
// a denormal floor keeps an all-zero row from producing NaN.
template <typename T>
Tensor<T> normalize_rows(const Tensor<T>& a) {
  if (a.shape().size() != 2) {
    throw DimensionError("normalize_rows expects a 2D tensor, got " + shape_str(a.shape()));
  }
  const std::int64_t rows = a.shape()[0], cols = a.shape()[1];
  std::vector<T> out(a.values().size());
  std::vector<T> sums(static_cast<std::size_t>(rows));
  for (std::int64_t r = 0; r < rows; ++r) {
    T s = T(0);
    for (std::int64_t c = 0; c < cols; ++c) s += a.values()[r * cols + c];
    s = std::max(s, std::numeric_limits<T>::min());
    sums[r] = s;
    for (std::int64_t c = 0; c < cols; ++c) out[r * cols + c] = a.values()[r * cols + c] / s;
  }
  auto an = a.node();
  auto result = detail::make_op_result<T>(a.shape(), std::move(out), "normalize_rows", {an}, nullptr);
  auto rn = result.node();
  if (rn->requires_grad) {
    rn->backward_fn = [an, rn_raw = rn.get(), sums, rows, cols](TensorNode<T>& nd) {
      an->ensure_grad();
      for (std::int64_t r = 0; r < rows; ++r) {
        T gy = T(0);
        for (std::int64_t c = 0; c < cols; ++c) gy += nd.grad[r * cols + c] * rn_raw->values[r * cols + c];
        for (std::int64_t c = 0; c < cols; ++c) {
          an->grad[r * cols + c] += (nd.grad[r * cols + c] - gy) / sums[r];
        }
      }
    };
  }
  return result;
}

}  // namespace spmkd
