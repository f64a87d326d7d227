#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "drx/tensor/tensor.hpp"

namespace drx {

enum class Padding { same, valid };

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

inline void expect_rank(const Shape& s, std::size_t r, const char* op, const char* what) {
  if (s.size() != r) {
    throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(r) + ", got " +
                     shape_str(s));
  }
}

inline void expect_same(const Shape& a, const Shape& b, const char* op) {
  if (a != b) throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

template <typename T>
void accumulate(TensorNode<T>& parent, const std::vector<T>& g) {
  if (!parent.requires_grad) return;
  auto& pg = parent.ensure_grad();
  for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
}

template <typename Fwd, typename Deriv, typename T>
Tensor<T> unary(const char* op, const Tensor<T>& x, Fwd fwd, Deriv deriv) {
  std::vector<T> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  auto xdata = x.node()->data;
  return Tensor<T>::from_op(op, x.shape(), std::move(out), {x}, [xdata, deriv](TensorNode<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& pg = p.ensure_grad();
    const auto& xd = *xdata;
    const auto& yd = *self.data;
    for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += self.grad[i] * deriv(xd[i], yd[i]);
  });
}

}  // namespace detail

struct ConvGeometry {
  std::size_t out_h, out_w;
  std::size_t pad_top, pad_left;
  std::size_t pad_h, pad_w;  // totals
};

// TF-style padding: "same" yields ceil(H / stride) outputs with the odd pad
// pixel placed at the bottom/right.
inline ConvGeometry conv_geometry(std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
                                  std::size_t stride, Padding padding) {
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  ConvGeometry g{};
  if (padding == Padding::same) {
    g.out_h = (h + stride - 1) / stride;
    g.out_w = (w + stride - 1) / stride;
    const auto need_h = (g.out_h - 1) * stride + kh;
    const auto need_w = (g.out_w - 1) * stride + kw;
    g.pad_h = need_h > h ? need_h - h : 0;
    g.pad_w = need_w > w ? need_w - w : 0;
    g.pad_top = g.pad_h / 2;
    g.pad_left = g.pad_w / 2;
  }
  if (kh > h + g.pad_h || kw > w + g.pad_w) {
    throw ShapeError("conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                     " exceeds padded input " + std::to_string(h + g.pad_h) + "x" +
                     std::to_string(w + g.pad_w));
  }
  g.out_h = (h + g.pad_h - kh) / stride + 1;
  g.out_w = (w + g.pad_w - kw) / stride + 1;
  return g;
}

// input N×C×H×W, kernel K×C×kh×kw -> N×K×H'×W'
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, std::size_t stride = 1,
                 Padding padding = Padding::valid) {
  detail::expect_rank(input.shape(), 4, "conv2d", "input");
  detail::expect_rank(kernel.shape(), 4, "conv2d", "kernel");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t k = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != c) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(kernel.dim(1)) + " input channels, input " +
                     shape_str(input.shape()) + " has " + std::to_string(c));
  }
  const auto g = conv_geometry(h, w, kh, kw, stride, padding);
  const std::size_t rows = c * kh * kw, cols = g.out_h * g.out_w;

  // im2col for a single image
  auto im2col = [=](const T* img, T* col) {
    for (std::size_t ci = 0; ci < c; ++ci)
      for (std::size_t i = 0; i < kh; ++i)
        for (std::size_t j = 0; j < kw; ++j) {
          T* row = col + ((ci * kh + i) * kw + j) * cols;
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const long y = static_cast<long>(oy * stride + i) - static_cast<long>(g.pad_top);
            T* dst = row + oy * g.out_w;
            if (y < 0 || y >= static_cast<long>(h)) {
              std::fill(dst, dst + g.out_w, T(0));
              continue;
            }
            const T* src = img + (ci * h + static_cast<std::size_t>(y)) * w;
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
              const long x = static_cast<long>(ox * stride + j) - static_cast<long>(g.pad_left);
              dst[ox] = (x < 0 || x >= static_cast<long>(w)) ? T(0) : src[x];
            }
          }
        }
  };
  auto col2im = [=](const T* col, T* img) {
    for (std::size_t ci = 0; ci < c; ++ci)
      for (std::size_t i = 0; i < kh; ++i)
        for (std::size_t j = 0; j < kw; ++j) {
          const T* row = col + ((ci * kh + i) * kw + j) * cols;
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const long y = static_cast<long>(oy * stride + i) - static_cast<long>(g.pad_top);
            if (y < 0 || y >= static_cast<long>(h)) continue;
            T* dst = img + (ci * h + static_cast<std::size_t>(y)) * w;
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
              const long x = static_cast<long>(ox * stride + j) - static_cast<long>(g.pad_left);
              if (x >= 0 && x < static_cast<long>(w)) dst[x] += row[oy * g.out_w + ox];
            }
          }
        }
  };

  std::vector<T> out(n * k * cols);
  std::vector<T> col(rows * cols);
  const detail::ConstMatMap<T> wmat(kernel.data().data(), k, rows);
  for (std::size_t ni = 0; ni < n; ++ni) {
    im2col(input.data().data() + ni * c * h * w, col.data());
    detail::MatMap<T> o(out.data() + ni * k * cols, k, cols);
    o.noalias() = wmat * detail::ConstMatMap<T>(col.data(), rows, cols);
  }

  auto in_data = input.node()->data;
  auto k_data = kernel.node()->data;
  return Tensor<T>::from_op(
      "conv2d", {n, k, g.out_h, g.out_w}, std::move(out), {input, kernel},
      [=](TensorNode<T>& self) {
        auto& pin = *self.parents[0];
        auto& pk = *self.parents[1];
        const detail::ConstMatMap<T> wm(k_data->data(), k, rows);
        std::vector<T> colbuf(rows * cols);
        std::vector<T> dcol(rows * cols);
        for (std::size_t ni = 0; ni < n; ++ni) {
          const detail::ConstMatMap<T> dout(self.grad.data() + ni * k * cols, k, cols);
          if (pk.requires_grad) {
            im2col(in_data->data() + ni * c * h * w, colbuf.data());
            detail::MatMap<T> dk(pk.ensure_grad().data(), k, rows);
            dk.noalias() += dout * detail::ConstMatMap<T>(colbuf.data(), rows, cols).transpose();
          }
          if (pin.requires_grad) {
            detail::MatMap<T> dc(dcol.data(), rows, cols);
            dc.noalias() = wm.transpose() * dout;
            col2im(dcol.data(), pin.ensure_grad().data() + ni * c * h * w);
          }
        }
      });
}

// x N×C×H×W plus per-channel bias b[C]
template <typename T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  detail::expect_rank(x.shape(), 4, "add_channel_bias", "input");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (bias.numel() != c) throw ShapeError("add_channel_bias: bias length does not match channel count");
  std::vector<T> out(x.data().begin(), x.data().end());
  for (std::size_t ni = 0; ni < n; ++ni)
    for (std::size_t ci = 0; ci < c; ++ci) {
      T* p = out.data() + (ni * c + ci) * hw;
      for (std::size_t i = 0; i < hw; ++i) p[i] += bias[ci];
    }
  return Tensor<T>::from_op("add_channel_bias", x.shape(), std::move(out), {x, bias},
                            [=](TensorNode<T>& self) {
                              detail::accumulate(*self.parents[0], self.grad);
                              auto& pb = *self.parents[1];
                              if (!pb.requires_grad) return;
                              auto& gb = pb.ensure_grad();
                              for (std::size_t ni = 0; ni < n; ++ni)
                                for (std::size_t ci = 0; ci < c; ++ci) {
                                  const T* g = self.grad.data() + (ni * c + ci) * hw;
                                  T s = 0;
                                  for (std::size_t i = 0; i < hw; ++i) s += g[i];
                                  gb[ci] += s;
                                }
                            });
}

// x N×D times weight D×M, no bias
template <typename T>
Tensor<T> matmul(const Tensor<T>& x, const Tensor<T>& weight) {
  detail::expect_rank(x.shape(), 2, "dense", "x");
  detail::expect_rank(weight.shape(), 2, "dense", "weight");
  const std::size_t n = x.dim(0), d = x.dim(1), m = weight.dim(1);
  if (weight.dim(0) != d) {
    throw ShapeError("dense: inner dimensions disagree, x " + shape_str(x.shape()) + " weight " +
                     shape_str(weight.shape()));
  }
  std::vector<T> out(n * m);
  detail::MatMap<T>(out.data(), n, m).noalias() =
      detail::ConstMatMap<T>(x.data().data(), n, d) * detail::ConstMatMap<T>(weight.data().data(), d, m);
  auto xd = x.node()->data;
  auto wd = weight.node()->data;
  return Tensor<T>::from_op("dense", {n, m}, std::move(out), {x, weight}, [=](TensorNode<T>& self) {
    const detail::ConstMatMap<T> dy(self.grad.data(), n, m);
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    if (px.requires_grad) {
      detail::MatMap<T>(px.ensure_grad().data(), n, d).noalias() +=
          dy * detail::ConstMatMap<T>(wd->data(), d, m).transpose();
    }
    if (pw.requires_grad) {
      detail::MatMap<T>(pw.ensure_grad().data(), d, m).noalias() +=
          detail::ConstMatMap<T>(xd->data(), n, d).transpose() * dy;
    }
  });
}

// out = x·W + b
template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  Tensor<T> xw = matmul(x, weight);
  const std::size_t n = xw.dim(0), m = xw.dim(1);
  if (bias.numel() != m) throw ShapeError("dense: bias length " + std::to_string(bias.numel()) + " != " + std::to_string(m));
  std::vector<T> out(xw.data().begin(), xw.data().end());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] += bias[j];
  return Tensor<T>::from_op("dense_bias", {n, m}, std::move(out), {xw, bias}, [=](TensorNode<T>& self) {
    detail::accumulate(*self.parents[0], self.grad);
    auto& pb = *self.parents[1];
    if (!pb.requires_grad) return;
    auto& gb = pb.ensure_grad();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) gb[j] += self.grad[i * m + j];
  });
}

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weight) {
  return matmul(x, weight);
}

// N×C×H×W -> N×C spatial mean
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& f) {
  detail::expect_rank(f.shape(), 4, "global_avg_pool", "input");
  const std::size_t nc = f.dim(0) * f.dim(1), hw = f.dim(2) * f.dim(3);
  if (hw == 0) throw ShapeError("global_avg_pool: empty spatial extent");
  std::vector<T> out(nc);
  for (std::size_t i = 0; i < nc; ++i) {
    T s = 0;
    for (std::size_t j = 0; j < hw; ++j) s += f[i * hw + j];
    out[i] = s / static_cast<T>(hw);
  }
  return Tensor<T>::from_op("global_avg_pool", {f.dim(0), f.dim(1)}, std::move(out), {f},
                            [=](TensorNode<T>& self) {
                              auto& p = *self.parents[0];
                              if (!p.requires_grad) return;
                              auto& g = p.ensure_grad();
                              for (std::size_t i = 0; i < nc; ++i) {
                                const T v = self.grad[i] / static_cast<T>(hw);
                                for (std::size_t j = 0; j < hw; ++j) g[i * hw + j] += v;
                              }
                            });
}

// N×C×H×W -> N×C spatial max; gradient goes to the first argmax in row-major order
template <typename T>
Tensor<T> global_max_pool(const Tensor<T>& f) {
  detail::expect_rank(f.shape(), 4, "global_max_pool", "input");
  const std::size_t nc = f.dim(0) * f.dim(1), hw = f.dim(2) * f.dim(3);
  if (hw == 0) throw ShapeError("global_max_pool: empty spatial extent");
  std::vector<T> out(nc);
  std::vector<std::size_t> arg(nc);
  for (std::size_t i = 0; i < nc; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < hw; ++j)
      if (f[i * hw + j] > f[i * hw + best]) best = j;
    arg[i] = best;
    out[i] = f[i * hw + best];
  }
  return Tensor<T>::from_op("global_max_pool", {f.dim(0), f.dim(1)}, std::move(out), {f},
                            [=](TensorNode<T>& self) {
                              auto& p = *self.parents[0];
                              if (!p.requires_grad) return;
                              auto& g = p.ensure_grad();
                              for (std::size_t i = 0; i < nc; ++i) g[i * hw + arg[i]] += self.grad[i];
                            });
}

// N×C×H×W -> N×2×H×W: plane 0 channel mean, plane 1 channel max
template <typename T>
Tensor<T> channel_pool(const Tensor<T>& f) {
  detail::expect_rank(f.shape(), 4, "channel_pool", "input");
  const std::size_t n = f.dim(0), c = f.dim(1), hw = f.dim(2) * f.dim(3);
  if (c == 0) throw ShapeError("channel_pool: no channels");
  std::vector<T> out(n * 2 * hw);
  std::vector<std::size_t> arg(n * hw);
  for (std::size_t ni = 0; ni < n; ++ni)
    for (std::size_t p = 0; p < hw; ++p) {
      const T* base = f.data().data() + ni * c * hw + p;
      T s = 0;
      std::size_t best = 0;
      for (std::size_t ci = 0; ci < c; ++ci) {
        s += base[ci * hw];
        if (base[ci * hw] > base[best * hw]) best = ci;
      }
      out[(ni * 2) * hw + p] = s / static_cast<T>(c);
      out[(ni * 2 + 1) * hw + p] = base[best * hw];
      arg[ni * hw + p] = best;
    }
  return Tensor<T>::from_op("channel_pool", {n, 2, f.dim(2), f.dim(3)}, std::move(out), {f},
                            [=](TensorNode<T>& self) {
                              auto& par = *self.parents[0];
                              if (!par.requires_grad) return;
                              auto& g = par.ensure_grad();
                              for (std::size_t ni = 0; ni < n; ++ni)
                                for (std::size_t p = 0; p < hw; ++p) {
                                  const T ga = self.grad[(ni * 2) * hw + p] / static_cast<T>(c);
                                  const T gm = self.grad[(ni * 2 + 1) * hw + p];
                                  T* base = g.data() + ni * c * hw + p;
                                  for (std::size_t ci = 0; ci < c; ++ci) base[ci * hw] += ga;
                                  base[arg[ni * hw + p] * hw] += gm;
                                }
                            });
}

// F N×C×H×W scaled by s N×C (per-channel gate)
template <typename T>
Tensor<T> scale_channels(const Tensor<T>& f, const Tensor<T>& s) {
  detail::expect_rank(f.shape(), 4, "scale_channels", "input");
  const std::size_t nc = f.dim(0) * f.dim(1), hw = f.dim(2) * f.dim(3);
  if (s.shape() != Shape{f.dim(0), f.dim(1)}) {
    throw ShapeError("scale_channels: gate " + shape_str(s.shape()) + " does not match " + shape_str(f.shape()));
  }
  std::vector<T> out(f.numel());
  for (std::size_t i = 0; i < nc; ++i)
    for (std::size_t j = 0; j < hw; ++j) out[i * hw + j] = f[i * hw + j] * s[i];
  auto fd = f.node()->data;
  auto sd = s.node()->data;
  return Tensor<T>::from_op("scale_channels", f.shape(), std::move(out), {f, s}, [=](TensorNode<T>& self) {
    auto& pf = *self.parents[0];
    auto& ps = *self.parents[1];
    if (pf.requires_grad) {
      auto& g = pf.ensure_grad();
      for (std::size_t i = 0; i < nc; ++i)
        for (std::size_t j = 0; j < hw; ++j) g[i * hw + j] += self.grad[i * hw + j] * (*sd)[i];
    }
    if (ps.requires_grad) {
      auto& g = ps.ensure_grad();
      for (std::size_t i = 0; i < nc; ++i) {
        T acc = 0;
        for (std::size_t j = 0; j < hw; ++j) acc += self.grad[i * hw + j] * (*fd)[i * hw + j];
        g[i] += acc;
      }
    }
  });
}

// F N×C×H×W scaled by m N×1×H×W (spatial gate broadcast over channels)
template <typename T>
Tensor<T> scale_spatial(const Tensor<T>& f, const Tensor<T>& m) {
  detail::expect_rank(f.shape(), 4, "scale_spatial", "input");
  const std::size_t n = f.dim(0), c = f.dim(1), hw = f.dim(2) * f.dim(3);
  if (m.shape() != Shape{n, 1, f.dim(2), f.dim(3)}) {
    throw ShapeError("scale_spatial: gate " + shape_str(m.shape()) + " does not match " + shape_str(f.shape()));
  }
  std::vector<T> out(f.numel());
  for (std::size_t ni = 0; ni < n; ++ni)
    for (std::size_t ci = 0; ci < c; ++ci)
      for (std::size_t p = 0; p < hw; ++p) out[(ni * c + ci) * hw + p] = f[(ni * c + ci) * hw + p] * m[ni * hw + p];
  auto fd = f.node()->data;
  auto md = m.node()->data;
  return Tensor<T>::from_op("scale_spatial", f.shape(), std::move(out), {f, m}, [=](TensorNode<T>& self) {
    auto& pf = *self.parents[0];
    auto& pm = *self.parents[1];
    if (pf.requires_grad) {
      auto& g = pf.ensure_grad();
      for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t ci = 0; ci < c; ++ci)
          for (std::size_t p = 0; p < hw; ++p)
            g[(ni * c + ci) * hw + p] += self.grad[(ni * c + ci) * hw + p] * (*md)[ni * hw + p];
    }
    if (pm.requires_grad) {
      auto& g = pm.ensure_grad();
      for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t ci = 0; ci < c; ++ci)
          for (std::size_t p = 0; p < hw; ++p)
            g[ni * hw + p] += self.grad[(ni * c + ci) * hw + p] * (*fd)[(ni * c + ci) * hw + p];
    }
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return detail::unary(
      "relu", x, [](T v) { return (v > T(0) || std::isnan(v)) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return detail::unary(
      "sigmoid", x,
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return detail::unary(
      "exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

// log(1 + e^x), overflow-safe
template <typename T>
Tensor<T> softplus(const Tensor<T>& x) {
  return detail::unary(
      "softplus", x, [](T v) { return std::log1p(std::exp(-std::abs(v))) + std::max(v, T(0)); },
      [](T v, T) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T c) {
  return detail::unary(
      "add_scalar", x, [c](T v) { return v + c; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c) {
  return detail::unary(
      "scale", x, [c](T v) { return v * c; }, [c](T, T) { return c; });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::expect_same(a.shape(), b.shape(), "add");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return Tensor<T>::from_op("add", a.shape(), std::move(out), {a, b}, [](TensorNode<T>& self) {
    detail::accumulate(*self.parents[0], self.grad);
    detail::accumulate(*self.parents[1], self.grad);
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::expect_same(a.shape(), b.shape(), "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  auto ad = a.node()->data;
  auto bd = b.node()->data;
  return Tensor<T>::from_op("mul", a.shape(), std::move(out), {a, b}, [=](TensorNode<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (*bd)[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (*ad)[i];
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T s = 0;
  for (const T v : x.data()) s += v;
  return Tensor<T>::from_op("sum", {1}, {s}, {x}, [](TensorNode<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

// Single element at a flat index, as a scalar.
template <typename T>
Tensor<T> select(const Tensor<T>& x, std::size_t flat_index) {
  if (flat_index >= x.numel()) throw ShapeError("select: index out of range");
  return Tensor<T>::from_op("select", {1}, {x[flat_index]}, {x}, [flat_index](TensorNode<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad()[flat_index] += self.grad[0];
  });
}

// Softmax over the last axis with max subtraction.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
  if (x.rank() == 0) throw ShapeError("softmax: scalar input");
  const std::size_t k = x.shape().back();
  const std::size_t rows = k ? x.numel() / k : 0;
  std::vector<T> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.data().data() + r * k;
    T* o = out.data() + r * k;
    const T mx = *std::max_element(in, in + k);
    T z = 0;
    for (std::size_t j = 0; j < k; ++j) z += (o[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < k; ++j) o[j] /= z;
  }
  return Tensor<T>::from_op("softmax", x.shape(), std::move(out), {x}, [=](TensorNode<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    const auto& y = *self.data;
    for (std::size_t r = 0; r < rows; ++r) {
      T dot = 0;
      for (std::size_t j = 0; j < k; ++j) dot += self.grad[r * k + j] * y[r * k + j];
      for (std::size_t j = 0; j < k; ++j) g[r * k + j] += y[r * k + j] * (self.grad[r * k + j] - dot);
    }
  });
}

// out[n,k] = -||x_n - c_k||^2 / (2 sigma_k^2), the log of a Gaussian membership.
template <typename T>
Tensor<T> gaussian_log_membership(const Tensor<T>& x, const Tensor<T>& centroids, const Tensor<T>& sigma) {
  detail::expect_rank(x.shape(), 2, "fuzzy_head", "x");
  detail::expect_rank(centroids.shape(), 2, "fuzzy_head", "centroids");
  const std::size_t n = x.dim(0), d = x.dim(1), k = centroids.dim(0);
  if (centroids.dim(1) != d) {
    throw ShapeError("fuzzy_head: feature width " + std::to_string(d) + " != centroid width " +
                     std::to_string(centroids.dim(1)));
  }
  if (sigma.numel() != k) throw ShapeError("fuzzy_head: one width per class required");
  std::vector<T> out(n * k);
  for (std::size_t ni = 0; ni < n; ++ni)
    for (std::size_t ki = 0; ki < k; ++ki) {
      T d2 = 0;
      for (std::size_t j = 0; j < d; ++j) {
        const T diff = x[ni * d + j] - centroids[ki * d + j];
        d2 += diff * diff;
      }
      out[ni * k + ki] = -d2 / (T(2) * sigma[ki] * sigma[ki]);
    }
  auto xd = x.node()->data;
  auto cd = centroids.node()->data;
  auto sd = sigma.node()->data;
  return Tensor<T>::from_op(
      "gaussian_log_membership", {n, k}, std::move(out), {x, centroids, sigma}, [=](TensorNode<T>& self) {
        auto& px = *self.parents[0];
        auto& pc = *self.parents[1];
        auto& ps = *self.parents[2];
        for (std::size_t ni = 0; ni < n; ++ni)
          for (std::size_t ki = 0; ki < k; ++ki) {
            const T g = self.grad[ni * k + ki];
            const T s = (*sd)[ki];
            const T inv = T(1) / (s * s);
            T d2 = 0;
            for (std::size_t j = 0; j < d; ++j) {
              const T diff = (*xd)[ni * d + j] - (*cd)[ki * d + j];
              d2 += diff * diff;
              if (px.requires_grad) px.ensure_grad()[ni * d + j] -= g * diff * inv;
              if (pc.requires_grad) pc.ensure_grad()[ki * d + j] += g * diff * inv;
            }
            if (ps.requires_grad) ps.ensure_grad()[ki] += g * d2 * inv / s;
          }
      });
}

}  // namespace drx
