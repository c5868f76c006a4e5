#include "ecmnet/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "ecmnet/profiler.hpp"

namespace ecmnet::ops {

namespace {

template <typename T>
using Impl = TensorImpl<T>;

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
bool tracks(const Tensor<T>& t) {
  return grad_enabled() && t.defined() && t.requires_grad();
}

// Wires `out` into the graph when any input needs a gradient.
template <typename T, typename Fn>
void attach(Tensor<T>& out, std::vector<const Tensor<T>*> inputs, Fn&& fn) {
  if (!grad_enabled()) return;
  bool any = false;
  for (auto* in : inputs) any = any || (in && in->defined() && in->requires_grad());
  if (!any) return;
  auto* impl = out.impl();
  impl->requires_grad = true;
  for (auto* in : inputs) {
    if (in && in->defined()) impl->parents.push_back(in->shared());
  }
  impl->backward = std::forward<Fn>(fn);
}

template <typename T>
std::vector<T>* grad_if(const std::shared_ptr<Impl<T>>& p) {
  return p->requires_grad ? &p->grad_buffer() : nullptr;
}

std::vector<std::int64_t> contiguous_strides(const Shape& shape) {
  std::vector<std::int64_t> strides(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) strides[i] = strides[i + 1] * shape[i + 1];
  return strides;
}

// Strides of `shape` right-aligned into `rank` dims; broadcast axes get 0.
std::vector<std::int64_t> broadcast_strides(const Shape& shape, std::size_t rank) {
  std::vector<std::int64_t> strides(rank, 0);
  auto own = contiguous_strides(shape);
  std::size_t offset = rank - shape.size();
  for (std::size_t i = 0; i < shape.size(); ++i) strides[offset + i] = shape[i] == 1 ? 0 : own[i];
  return strides;
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    std::int64_t da = i + a.size() >= rank ? a[i + a.size() - rank] : 1;
    std::int64_t db = i + b.size() >= rank ? b[i + b.size() - rank] : 1;
    if (da != db && da != 1 && db != 1) {
      throw ConfigError("cannot broadcast " + to_string(a) + " with " + to_string(b));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

// Calls f(out_flat, a_off, b_off) over every element of `shape`.
template <typename F>
void for_each_strided(const Shape& shape, const std::vector<std::int64_t>& sa,
                      const std::vector<std::int64_t>& sb, F&& f) {
  const std::size_t rank = shape.size();
  if (rank == 0) {
    f(0, 0, 0);
    return;
  }
  const std::int64_t inner = shape[rank - 1];
  const std::int64_t ia = sa[rank - 1], ib = sb[rank - 1];
  std::vector<std::int64_t> idx(rank, 0);
  std::int64_t outer = numel(shape) / std::max<std::int64_t>(inner, 1);
  std::int64_t flat = 0;
  for (std::int64_t o = 0; o < outer; ++o) {
    std::int64_t oa = 0, ob = 0;
    for (std::size_t d = 0; d + 1 < rank; ++d) {
      oa += idx[d] * sa[d];
      ob += idx[d] * sb[d];
    }
    for (std::int64_t i = 0; i < inner; ++i) f(flat++, oa + i * ia, ob + i * ib);
    for (int d = static_cast<int>(rank) - 2; d >= 0; --d) {
      if (++idx[d] < shape[d]) break;
      idx[d] = 0;
    }
  }
}

template <typename T, typename Fwd, typename Bwd>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, std::int64_t macs_per, Fwd fwd, Bwd bwd) {
  Shape shape = broadcast_shape(a.shape(), b.shape());
  auto out = Tensor<T>::zeros(shape);
  const std::int64_t n = numel(shape);
  profile::record(macs_per * n, macs_per ? 0 : n);
  if (meta_mode()) return out;
  const auto sa = broadcast_strides(a.shape(), shape.size());
  const auto sb = broadcast_strides(b.shape(), shape.size());
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* po = out.data().data();
  if (a.shape() == b.shape()) {
    for (std::int64_t i = 0; i < n; ++i) po[i] = fwd(pa[i], pb[i]);
  } else {
    for_each_strided(shape, sa, sb, [&](std::int64_t o, std::int64_t ia, std::int64_t ib) { po[o] = fwd(pa[ia], pb[ib]); });
  }
  auto ai = a.shared(), bi = b.shared();
  attach(out, {&a, &b}, [ai, bi, shape, sa, sb, bwd](Impl<T>& self) {
    auto* ga = grad_if(ai);
    auto* gb = grad_if(bi);
    const T* g = self.grad.data();
    const T* pa = ai->data.data();
    const T* pb = bi->data.data();
    for_each_strided(shape, sa, sb, [&](std::int64_t o, std::int64_t ia, std::int64_t ib) {
      T da, db;
      bwd(pa[ia], pb[ib], g[o], da, db);
      if (ga) (*ga)[ia] += da;
      if (gb) (*gb)[ib] += db;
    });
  });
  return out;
}

template <typename T, typename Fwd, typename Bwd>
Tensor<T> unary(const Tensor<T>& x, Fwd fwd, Bwd bwd) {
  auto out = Tensor<T>::zeros(x.shape());
  const std::int64_t n = x.numel();
  profile::record(0, n);
  if (meta_mode()) return out;
  const T* px = x.data().data();
  T* po = out.data().data();
  for (std::int64_t i = 0; i < n; ++i) po[i] = fwd(px[i]);
  auto xi = x.shared();
  auto oi = out.impl();
  attach(out, {&x}, [xi, bwd, n](Impl<T>& self) {
    auto& gx = xi->grad_buffer();
    const T* g = self.grad.data();
    const T* px = xi->data.data();
    const T* py = self.data.data();
    for (std::int64_t i = 0; i < n; ++i) gx[i] += g[i] * bwd(px[i], py[i]);
  });
  (void)oi;
  return out;
}

int normalize_axis(int axis, std::size_t rank) {
  int r = static_cast<int>(rank);
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) throw ConfigError("axis out of range");
  return axis;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, 0, [](T x, T y) { return x + y; },
                [](T, T, T g, T& da, T& db) {
                  da = g;
                  db = g;
                });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, 0, [](T x, T y) { return x - y; },
                [](T, T, T g, T& da, T& db) {
                  da = g;
                  db = -g;
                });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, 0, [](T x, T y) { return x * y; },
                [](T x, T y, T g, T& da, T& db) {
                  da = g * y;
                  db = g * x;
                });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  return unary(x, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary(x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(
      x, [](T v) { return T(1) / (T(1) + std::exp(-v)); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> silu(const Tensor<T>& x) {
  return unary(
      x, [](T v) { return v / (T(1) + std::exp(-v)); },
      [](T v, T) {
        T s = T(1) / (T(1) + std::exp(-v));
        return s * (T(1) + v * (T(1) - s));
      });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  const T inv_sqrt2 = T(1) / std::sqrt(T(2));
  const T inv_sqrt2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
  return unary(
      x, [=](T v) { return T(0.5) * v * (T(1) + std::erf(v * inv_sqrt2)); },
      [=](T v, T) { return T(0.5) * (T(1) + std::erf(v * inv_sqrt2)) + v * inv_sqrt2pi * std::exp(T(-0.5) * v * v); });
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& x) {
  return unary(
      x, [](T v) { return v > T(20) ? v : std::log1p(std::exp(v)); },
      [](T v, T) { return T(1) / (T(1) + std::exp(-v)); });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary(x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& x) {
  return unary(x, [](T v) { return -v; }, [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  auto out = Tensor<T>::zeros({});
  profile::record(0, x.numel());
  if (meta_mode()) return out;
  T acc = 0;
  for (T v : x.data()) acc += v;
  out.data()[0] = acc;
  auto xi = x.shared();
  attach(out, {&x}, [xi](Impl<T>& self) {
    auto& gx = xi->grad_buffer();
    const T g = self.grad[0];
    for (auto& v : gx) v += g;
  });
  return out;
}

namespace {

Shape reduced_shape(const Shape& shape, const std::vector<int>& axes, std::vector<std::int64_t>& out_strides,
                    std::int64_t& group) {
  Shape out = shape;
  group = 1;
  for (int a : axes) {
    int ax = normalize_axis(a, shape.size());
    group *= out[ax] == 1 ? 1 : shape[ax];
    out[ax] = 1;
  }
  out_strides = broadcast_strides(out, shape.size());
  return out;
}

}  // namespace

template <typename T>
Tensor<T> mean(const Tensor<T>& x, const std::vector<int>& axes) {
  std::vector<std::int64_t> so;
  std::int64_t group = 1;
  Shape shape = reduced_shape(x.shape(), axes, so, group);
  auto out = Tensor<T>::zeros(shape);
  profile::record(0, x.numel());
  if (meta_mode()) return out;
  const auto sx = contiguous_strides(x.shape());
  const T* px = x.data().data();
  T* po = out.data().data();
  for_each_strided(x.shape(), sx, so, [&](std::int64_t, std::int64_t ix, std::int64_t io) { po[io] += px[ix]; });
  const T inv = T(1) / static_cast<T>(group);
  for (auto& v : out.data()) v *= inv;
  auto xi = x.shared();
  Shape in_shape = x.shape();
  attach(out, {&x}, [xi, in_shape, sx, so, inv](Impl<T>& self) {
    auto& gx = xi->grad_buffer();
    const T* g = self.grad.data();
    for_each_strided(in_shape, sx, so, [&](std::int64_t, std::int64_t ix, std::int64_t io) { gx[ix] += g[io] * inv; });
  });
  return out;
}

template <typename T>
Tensor<T> amax(const Tensor<T>& x, const std::vector<int>& axes) {
  std::vector<std::int64_t> so;
  std::int64_t group = 1;
  Shape shape = reduced_shape(x.shape(), axes, so, group);
  auto out = Tensor<T>::full(shape, -std::numeric_limits<T>::infinity());
  profile::record(0, x.numel());
  if (meta_mode()) return out;
  const auto sx = contiguous_strides(x.shape());
  const T* px = x.data().data();
  T* po = out.data().data();
  std::vector<std::int64_t> arg(static_cast<std::size_t>(out.numel()), -1);
  for_each_strided(x.shape(), sx, so, [&](std::int64_t, std::int64_t ix, std::int64_t io) {
    if (px[ix] > po[io] || arg[io] < 0) {
      po[io] = px[ix];
      arg[io] = ix;
    }
  });
  auto xi = x.shared();
  attach(out, {&x}, [xi, arg](Impl<T>& self) {
    auto& gx = xi->grad_buffer();
    for (std::size_t i = 0; i < arg.size(); ++i) gx[arg[i]] += self.grad[i];
  });
  return out;
}

// ---------------------------------------------------------------- conv2d

namespace {

struct ConvGeometry {
  std::int64_t batch, cin, h, w, cout, kh, kw, oh, ow, groups, cin_g, cout_g;
  Conv2dOptions o;
};

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
  // col rows: (c, i, j); cols: output positions.
  const std::int64_t p = g.oh * g.ow;
  for (std::int64_t c = 0; c < g.cin_g; ++c) {
    const T* xc = x + c * g.h * g.w;
    for (std::int64_t i = 0; i < g.kh; ++i) {
      for (std::int64_t j = 0; j < g.kw; ++j) {
        T* row = col + ((c * g.kh + i) * g.kw + j) * p;
        for (std::int64_t y = 0; y < g.oh; ++y) {
          const std::int64_t iy = y * g.o.stride_h - g.o.pad_h + i * g.o.dilation_h;
          T* dst = row + y * g.ow;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.ow, T(0));
            continue;
          }
          const T* src = xc + iy * g.w;
          for (std::int64_t xo = 0; xo < g.ow; ++xo) {
            const std::int64_t ix = xo * g.o.stride_w - g.o.pad_w + j * g.o.dilation_w;
            dst[xo] = (ix >= 0 && ix < g.w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, const ConvGeometry& g, T* gx) {
  const std::int64_t p = g.oh * g.ow;
  for (std::int64_t c = 0; c < g.cin_g; ++c) {
    T* gc = gx + c * g.h * g.w;
    for (std::int64_t i = 0; i < g.kh; ++i) {
      for (std::int64_t j = 0; j < g.kw; ++j) {
        const T* row = col + ((c * g.kh + i) * g.kw + j) * p;
        for (std::int64_t y = 0; y < g.oh; ++y) {
          const std::int64_t iy = y * g.o.stride_h - g.o.pad_h + i * g.o.dilation_h;
          if (iy < 0 || iy >= g.h) continue;
          const T* src = row + y * g.ow;
          T* dst = gc + iy * g.w;
          for (std::int64_t xo = 0; xo < g.ow; ++xo) {
            const std::int64_t ix = xo * g.o.stride_w - g.o.pad_w + j * g.o.dilation_w;
            if (ix >= 0 && ix < g.w) dst[ix] += src[xo];
          }
        }
      }
    }
  }
}

bool is_pointwise(const ConvGeometry& g) {
  return g.kh == 1 && g.kw == 1 && g.o.stride_h == 1 && g.o.stride_w == 1 && g.o.pad_h == 0 && g.o.pad_w == 0;
}

bool is_depthwise(const ConvGeometry& g) { return g.groups == g.cin && g.cout == g.cin && g.groups > 1; }

// Valid output range [lo, hi) along one axis for a tap at offset `off`.
void tap_range(std::int64_t out_len, std::int64_t in_len, std::int64_t stride, std::int64_t off, std::int64_t& lo,
               std::int64_t& hi) {
  // need 0 <= o*stride + off < in_len
  lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
  std::int64_t last = in_len - 1 - off;
  hi = last < 0 ? 0 : std::min(out_len, last / stride + 1);
  if (hi < lo) hi = lo;
}

template <typename T>
void depthwise_forward(const T* x, const T* w, T* out, const ConvGeometry& g) {
  for (std::int64_t c = 0; c < g.cin; ++c) {
    const T* xc = x + c * g.h * g.w;
    T* oc = out + c * g.oh * g.ow;
    for (std::int64_t i = 0; i < g.kh; ++i) {
      const std::int64_t offy = i * g.o.dilation_h - g.o.pad_h;
      std::int64_t y0, y1;
      tap_range(g.oh, g.h, g.o.stride_h, offy, y0, y1);
      for (std::int64_t j = 0; j < g.kw; ++j) {
        const T wv = w[(c * g.kh + i) * g.kw + j];
        const std::int64_t offx = j * g.o.dilation_w - g.o.pad_w;
        std::int64_t x0, x1;
        tap_range(g.ow, g.w, g.o.stride_w, offx, x0, x1);
        for (std::int64_t y = y0; y < y1; ++y) {
          const T* src = xc + (y * g.o.stride_h + offy) * g.w + offx;
          T* dst = oc + y * g.ow;
          if (g.o.stride_w == 1) {
            for (std::int64_t xo = x0; xo < x1; ++xo) dst[xo] += wv * src[xo];
          } else {
            for (std::int64_t xo = x0; xo < x1; ++xo) dst[xo] += wv * src[xo * g.o.stride_w];
          }
        }
      }
    }
  }
}

template <typename T>
void depthwise_backward(const T* x, const T* w, const T* gout, T* gx, T* gw, const ConvGeometry& g) {
  for (std::int64_t c = 0; c < g.cin; ++c) {
    const T* xc = x + c * g.h * g.w;
    const T* goc = gout + c * g.oh * g.ow;
    T* gxc = gx ? gx + c * g.h * g.w : nullptr;
    for (std::int64_t i = 0; i < g.kh; ++i) {
      const std::int64_t offy = i * g.o.dilation_h - g.o.pad_h;
      std::int64_t y0, y1;
      tap_range(g.oh, g.h, g.o.stride_h, offy, y0, y1);
      for (std::int64_t j = 0; j < g.kw; ++j) {
        const std::int64_t widx = (c * g.kh + i) * g.kw + j;
        const T wv = w[widx];
        const std::int64_t offx = j * g.o.dilation_w - g.o.pad_w;
        std::int64_t x0, x1;
        tap_range(g.ow, g.w, g.o.stride_w, offx, x0, x1);
        T acc = 0;
        for (std::int64_t y = y0; y < y1; ++y) {
          const std::int64_t row = (y * g.o.stride_h + offy) * g.w + offx;
          const T* src = xc + row;
          const T* gsrc = goc + y * g.ow;
          const std::int64_t sw = g.o.stride_w;
          for (std::int64_t xo = x0; xo < x1; ++xo) acc += gsrc[xo] * src[xo * sw];
          if (gxc) {
            T* dst = gxc + row;
            for (std::int64_t xo = x0; xo < x1; ++xo) dst[xo * sw] += wv * gsrc[xo];
          }
        }
        if (gw) gw[widx] += acc;
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias, const Conv2dOptions& o) {
  if (x.rank() != 4 || weight.rank() != 4) {
    throw ConfigError("conv2d expects rank-4 input and weight, got " + to_string(x.shape()) + " and " +
                      to_string(weight.shape()));
  }
  ConvGeometry g{};
  g.o = o;
  g.batch = x.dim(0);
  g.cin = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.cout = weight.dim(0);
  g.kh = weight.dim(2);
  g.kw = weight.dim(3);
  g.groups = o.groups;
  if (g.groups < 1 || g.cin % g.groups || g.cout % g.groups) {
    throw ConfigError("conv2d groups " + std::to_string(g.groups) + " must divide channels " + std::to_string(g.cin) +
                      "->" + std::to_string(g.cout));
  }
  g.cin_g = g.cin / g.groups;
  g.cout_g = g.cout / g.groups;
  if (weight.dim(1) != g.cin_g) {
    throw ConfigError("conv2d weight " + to_string(weight.shape()) + " does not match input " + to_string(x.shape()));
  }
  if (bias && bias->numel() != g.cout) throw ConfigError("conv2d bias size mismatch");
  g.oh = (g.h + 2 * o.pad_h - o.dilation_h * (g.kh - 1) - 1) / o.stride_h + 1;
  g.ow = (g.w + 2 * o.pad_w - o.dilation_w * (g.kw - 1) - 1) / o.stride_w + 1;
  if (g.oh < 1 || g.ow < 1) throw ConfigError("conv2d output would be empty for input " + to_string(x.shape()));

  auto out = Tensor<T>::zeros({g.batch, g.cout, g.oh, g.ow});
  const std::int64_t positions = g.batch * g.oh * g.ow;
  profile::record(positions * g.cout * g.cin_g * g.kh * g.kw, bias ? positions * g.cout : 0);
  if (meta_mode()) return out;

  const std::int64_t p = g.oh * g.ow;
  const std::int64_t kdim = g.cin_g * g.kh * g.kw;
  const bool pointwise = is_pointwise(g);
  const bool depthwise = is_depthwise(g);
  std::vector<T> col;
  if (!pointwise && !depthwise) col.resize(static_cast<std::size_t>(kdim * p));
  const T* px = x.data().data();
  const T* pw = weight.data().data();
  T* po = out.data().data();
  for (std::int64_t b = 0; b < g.batch; ++b) {
    const T* xb = px + b * g.cin * g.h * g.w;
    T* ob = po + b * g.cout * p;
    if (depthwise) {
      depthwise_forward(xb, pw, ob, g);
      continue;
    }
    for (std::int64_t gr = 0; gr < g.groups; ++gr) {
      const T* xg = xb + gr * g.cin_g * g.h * g.w;
      const T* src = xg;
      if (!pointwise) {
        im2col(xg, g, col.data());
        src = col.data();
      }
      ConstMatMap<T> wm(pw + gr * g.cout_g * kdim, g.cout_g, kdim);
      ConstMatMap<T> cm(src, kdim, p);
      MatMap<T> om(ob + gr * g.cout_g * p, g.cout_g, p);
      om.noalias() = wm * cm;
    }
  }
  if (bias) {
    const T* pb = bias->data().data();
    for (std::int64_t b = 0; b < g.batch; ++b)
      for (std::int64_t c = 0; c < g.cout; ++c) {
        T* row = po + (b * g.cout + c) * p;
        for (std::int64_t i = 0; i < p; ++i) row[i] += pb[c];
      }
  }

  auto xi = x.shared();
  auto wi = weight.shared();
  std::shared_ptr<Impl<T>> bi = bias ? bias->shared() : nullptr;
  std::vector<const Tensor<T>*> inputs{&x, &weight};
  if (bias) inputs.push_back(bias);
  attach(out, inputs, [xi, wi, bi, g, p, kdim, pointwise, depthwise](Impl<T>& self) {
    const T* gout = self.grad.data();
    auto* gx = grad_if(xi);
    auto* gw = grad_if(wi);
    if (bi && bi->requires_grad) {
      auto& gb = bi->grad_buffer();
      for (std::int64_t b = 0; b < g.batch; ++b)
        for (std::int64_t c = 0; c < g.cout; ++c) {
          const T* row = gout + (b * g.cout + c) * p;
          T acc = 0;
          for (std::int64_t i = 0; i < p; ++i) acc += row[i];
          gb[c] += acc;
        }
    }
    const T* px = xi->data.data();
    const T* pw = wi->data.data();
    std::vector<T> col, gcol;
    if (!pointwise && !depthwise) {
      col.resize(static_cast<std::size_t>(kdim * p));
      if (gx) gcol.resize(col.size());
    }
    for (std::int64_t b = 0; b < g.batch; ++b) {
      const T* xb = px + b * g.cin * g.h * g.w;
      const T* gob = gout + b * g.cout * p;
      T* gxb = gx ? gx->data() + b * g.cin * g.h * g.w : nullptr;
      if (depthwise) {
        depthwise_backward(xb, pw, gob, gxb, gw ? gw->data() : nullptr, g);
        continue;
      }
      for (std::int64_t gr = 0; gr < g.groups; ++gr) {
        const T* xg = xb + gr * g.cin_g * g.h * g.w;
        ConstMatMap<T> gom(gob + gr * g.cout_g * p, g.cout_g, p);
        ConstMatMap<T> wm(pw + gr * g.cout_g * kdim, g.cout_g, kdim);
        const T* src = xg;
        if (!pointwise) {
          im2col(xg, g, col.data());
          src = col.data();
        }
        if (gw) {
          ConstMatMap<T> cm(src, kdim, p);
          MatMap<T> gwm(gw->data() + gr * g.cout_g * kdim, g.cout_g, kdim);
          gwm.noalias() += gom * cm.transpose();
        }
        if (gxb) {
          if (pointwise) {
            MatMap<T> gxm(gxb + gr * g.cin_g * g.h * g.w, kdim, p);
            gxm.noalias() += wm.transpose() * gom;
          } else {
            MatMap<T> gcm(gcol.data(), kdim, p);
            gcm.noalias() = wm.transpose() * gom;
            col2im(gcol.data(), g, gxb + gr * g.cin_g * g.h * g.w);
          }
        }
      }
    }
  });
  return out;
}

// ------------------------------------------------------------ batch norm

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, Tensor<T>& running_mean,
                     Tensor<T>& running_var, bool training, T momentum, T eps) {
  if (x.rank() != 4 || gamma.numel() != x.dim(1) || beta.numel() != x.dim(1)) {
    throw ConfigError("batch_norm parameter/channel mismatch for " + to_string(x.shape()));
  }
  auto out = Tensor<T>::zeros(x.shape());
  if (meta_mode()) return out;
  const std::int64_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  const std::int64_t M = B * HW;
  std::vector<T> mean(C), invstd(C);
  const T* px = x.data().data();
  T* po = out.data().data();
  if (training) {
    for (std::int64_t c = 0; c < C; ++c) {
      T s = 0;
      for (std::int64_t b = 0; b < B; ++b) {
        const T* row = px + (b * C + c) * HW;
        for (std::int64_t i = 0; i < HW; ++i) s += row[i];
      }
      const T mu = s / static_cast<T>(M);
      T v = 0;
      for (std::int64_t b = 0; b < B; ++b) {
        const T* row = px + (b * C + c) * HW;
        for (std::int64_t i = 0; i < HW; ++i) v += (row[i] - mu) * (row[i] - mu);
      }
      const T var = v / static_cast<T>(M);
      mean[c] = mu;
      invstd[c] = T(1) / std::sqrt(var + eps);
      const T unbiased = M > 1 ? v / static_cast<T>(M - 1) : var;
      running_mean.data()[c] = (T(1) - momentum) * running_mean.data()[c] + momentum * mu;
      running_var.data()[c] = (T(1) - momentum) * running_var.data()[c] + momentum * unbiased;
    }
  } else {
    for (std::int64_t c = 0; c < C; ++c) {
      mean[c] = running_mean.data()[c];
      invstd[c] = T(1) / std::sqrt(running_var.data()[c] + eps);
    }
  }
  const T* pg = gamma.data().data();
  const T* pbeta = beta.data().data();
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t c = 0; c < C; ++c) {
      const T* row = px + (b * C + c) * HW;
      T* orow = po + (b * C + c) * HW;
      const T a = pg[c] * invstd[c];
      const T shift = pbeta[c] - mean[c] * a;
      for (std::int64_t i = 0; i < HW; ++i) orow[i] = row[i] * a + shift;
    }
  auto xi = x.shared(), gi = gamma.shared(), bi = beta.shared();
  attach(out, {&x, &gamma, &beta}, [xi, gi, bi, mean, invstd, training, B, C, HW, M](Impl<T>& self) {
    const T* g = self.grad.data();
    const T* px = xi->data.data();
    const T* pg = gi->data.data();
    auto* gx = grad_if(xi);
    auto* gg = grad_if(gi);
    auto* gb = grad_if(bi);
    for (std::int64_t c = 0; c < C; ++c) {
      T sg = 0, sgx = 0;
      for (std::int64_t b = 0; b < B; ++b) {
        const T* row = px + (b * C + c) * HW;
        const T* grow = g + (b * C + c) * HW;
        for (std::int64_t i = 0; i < HW; ++i) {
          sg += grow[i];
          sgx += grow[i] * (row[i] - mean[c]) * invstd[c];
        }
      }
      if (gg) (*gg)[c] += sgx;
      if (gb) (*gb)[c] += sg;
      if (!gx) continue;
      const T a = pg[c] * invstd[c];
      for (std::int64_t b = 0; b < B; ++b) {
        const T* row = px + (b * C + c) * HW;
        const T* grow = g + (b * C + c) * HW;
        T* gxrow = gx->data() + (b * C + c) * HW;
        if (training) {
          const T invm = T(1) / static_cast<T>(M);
          for (std::int64_t i = 0; i < HW; ++i) {
            const T xhat = (row[i] - mean[c]) * invstd[c];
            gxrow[i] += a * (grow[i] - sg * invm - xhat * sgx * invm);
          }
        } else {
          for (std::int64_t i = 0; i < HW; ++i) gxrow[i] += a * grow[i];
        }
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> channel_layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  if (x.rank() != 4 || gamma.numel() != x.dim(1) || beta.numel() != x.dim(1)) {
    throw ConfigError("channel_layer_norm parameter/channel mismatch for " + to_string(x.shape()));
  }
  auto out = Tensor<T>::zeros(x.shape());
  profile::record(x.numel(), 4 * x.numel());
  if (meta_mode()) return out;
  const std::int64_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  std::vector<T> mean(B * HW), invstd(B * HW);
  const T* px = x.data().data();
  T* po = out.data().data();
  const T* pg = gamma.data().data();
  const T* pbeta = beta.data().data();
  for (std::int64_t b = 0; b < B; ++b) {
    const T* xb = px + b * C * HW;
    for (std::int64_t i = 0; i < HW; ++i) {
      T s = 0;
      for (std::int64_t c = 0; c < C; ++c) s += xb[c * HW + i];
      const T mu = s / static_cast<T>(C);
      T v = 0;
      for (std::int64_t c = 0; c < C; ++c) v += (xb[c * HW + i] - mu) * (xb[c * HW + i] - mu);
      const T is = T(1) / std::sqrt(v / static_cast<T>(C) + eps);
      mean[b * HW + i] = mu;
      invstd[b * HW + i] = is;
      for (std::int64_t c = 0; c < C; ++c) po[b * C * HW + c * HW + i] = (xb[c * HW + i] - mu) * is * pg[c] + pbeta[c];
    }
  }
  auto xi = x.shared(), gi = gamma.shared(), bi = beta.shared();
  attach(out, {&x, &gamma, &beta}, [xi, gi, bi, mean, invstd, B, C, HW](Impl<T>& self) {
    const T* g = self.grad.data();
    const T* px = xi->data.data();
    const T* pg = gi->data.data();
    auto* gx = grad_if(xi);
    auto* gg = grad_if(gi);
    auto* gb = grad_if(bi);
    std::vector<T> xhat(C), dxhat(C);
    for (std::int64_t b = 0; b < B; ++b)
      for (std::int64_t i = 0; i < HW; ++i) {
        const T mu = mean[b * HW + i], is = invstd[b * HW + i];
        T s1 = 0, s2 = 0;
        for (std::int64_t c = 0; c < C; ++c) {
          const std::int64_t k = b * C * HW + c * HW + i;
          xhat[c] = (px[k] - mu) * is;
          dxhat[c] = g[k] * pg[c];
          s1 += dxhat[c];
          s2 += dxhat[c] * xhat[c];
          if (gg) (*gg)[c] += g[k] * xhat[c];
          if (gb) (*gb)[c] += g[k];
        }
        if (!gx) continue;
        const T invc = T(1) / static_cast<T>(C);
        for (std::int64_t c = 0; c < C; ++c) {
          (*gx)[b * C * HW + c * HW + i] += is * (dxhat[c] - s1 * invc - xhat[c] * s2 * invc);
        }
      }
  });
  return out;
}

// --------------------------------------------------------------- pooling

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x, int window) {
  if (x.rank() != 4 || window < 1 || x.dim(2) % window || x.dim(3) % window) {
    throw ConfigError("avg_pool2d window " + std::to_string(window) + " must divide spatial size of " +
                      to_string(x.shape()));
  }
  const std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::int64_t OH = H / window, OW = W / window;
  auto out = Tensor<T>::zeros({B, C, OH, OW});
  profile::record(0, x.numel());
  if (meta_mode()) return out;
  const T inv = T(1) / static_cast<T>(window * window);
  const T* px = x.data().data();
  T* po = out.data().data();
  for (std::int64_t bc = 0; bc < B * C; ++bc)
    for (std::int64_t y = 0; y < H; ++y)
      for (std::int64_t xx = 0; xx < W; ++xx) po[(bc * OH + y / window) * OW + xx / window] += px[(bc * H + y) * W + xx] * inv;
  auto xi = x.shared();
  attach(out, {&x}, [xi, B, C, H, W, OH, OW, window, inv](Impl<T>& self) {
    auto& gx = xi->grad_buffer();
    for (std::int64_t bc = 0; bc < B * C; ++bc)
      for (std::int64_t y = 0; y < H; ++y)
        for (std::int64_t xx = 0; xx < W; ++xx)
          gx[(bc * H + y) * W + xx] += self.grad[(bc * OH + y / window) * OW + xx / window] * inv;
  });
  return out;
}

namespace {

struct LinearTap {
  std::int64_t i0, i1;
  double w1;
};

std::vector<LinearTap> bilinear_taps(std::int64_t in, std::int64_t out) {
  std::vector<LinearTap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::int64_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    std::int64_t i0 = std::min<std::int64_t>(static_cast<std::int64_t>(std::floor(src)), in - 1);
    std::int64_t i1 = std::min<std::int64_t>(i0 + 1, in - 1);
    taps[o] = {i0, i1, src - static_cast<double>(i0)};
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, std::int64_t out_h, std::int64_t out_w) {
  if (x.rank() != 4 || out_h < 1 || out_w < 1) throw ConfigError("upsample_bilinear expects rank-4 input");
  const std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  auto out = Tensor<T>::zeros({B, C, out_h, out_w});
  profile::record(4 * B * C * out_h * out_w, 0);
  if (meta_mode()) return out;
  auto ty = bilinear_taps(H, out_h);
  auto tx = bilinear_taps(W, out_w);
  const T* px = x.data().data();
  T* po = out.data().data();
  for (std::int64_t bc = 0; bc < B * C; ++bc) {
    const T* src = px + bc * H * W;
    T* dst = po + bc * out_h * out_w;
    for (std::int64_t y = 0; y < out_h; ++y) {
      const auto& a = ty[y];
      const T wy1 = static_cast<T>(a.w1), wy0 = T(1) - wy1;
      for (std::int64_t xx = 0; xx < out_w; ++xx) {
        const auto& b = tx[xx];
        const T wx1 = static_cast<T>(b.w1), wx0 = T(1) - wx1;
        dst[y * out_w + xx] = wy0 * (wx0 * src[a.i0 * W + b.i0] + wx1 * src[a.i0 * W + b.i1]) +
                              wy1 * (wx0 * src[a.i1 * W + b.i0] + wx1 * src[a.i1 * W + b.i1]);
      }
    }
  }
  auto xi = x.shared();
  attach(out, {&x}, [xi, ty, tx, B, C, H, W, out_h, out_w](Impl<T>& self) {
    auto& gx = xi->grad_buffer();
    for (std::int64_t bc = 0; bc < B * C; ++bc) {
      T* dst = gx.data() + bc * H * W;
      const T* g = self.grad.data() + bc * out_h * out_w;
      for (std::int64_t y = 0; y < out_h; ++y) {
        const auto& a = ty[y];
        const T wy1 = static_cast<T>(a.w1), wy0 = T(1) - wy1;
        for (std::int64_t xx = 0; xx < out_w; ++xx) {
          const auto& b = tx[xx];
          const T wx1 = static_cast<T>(b.w1), wx0 = T(1) - wx1;
          const T v = g[y * out_w + xx];
          dst[a.i0 * W + b.i0] += v * wy0 * wx0;
          dst[a.i0 * W + b.i1] += v * wy0 * wx1;
          dst[a.i1 * W + b.i0] += v * wy1 * wx0;
          dst[a.i1 * W + b.i1] += v * wy1 * wx1;
        }
      }
    }
  });
  return out;
}

// ------------------------------------------------------ layout operations

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw ConfigError("concat of zero tensors");
  const std::size_t rank = parts[0].rank();
  axis = normalize_axis(axis, rank);
  Shape shape = parts[0].shape();
  shape[axis] = 0;
  for (const auto& p : parts) {
    if (p.rank() != rank) throw ConfigError("concat rank mismatch");
    for (std::size_t d = 0; d < rank; ++d) {
      if (static_cast<int>(d) != axis && p.dim(d) != parts[0].dim(d)) {
        throw ConfigError("concat extent mismatch: " + to_string(p.shape()) + " vs " + to_string(parts[0].shape()));
      }
    }
    shape[axis] += p.dim(axis);
  }
  auto out = Tensor<T>::zeros(shape);
  if (meta_mode()) return out;
  std::int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= shape[d];
  for (std::size_t d = axis + 1; d < rank; ++d) inner *= shape[d];
  std::vector<std::int64_t> offsets;
  std::int64_t off = 0;
  T* po = out.data().data();
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::int64_t chunk = p.dim(axis) * inner;
    const T* src = p.data().data();
    for (std::int64_t o = 0; o < outer; ++o) std::copy(src + o * chunk, src + (o + 1) * chunk, po + o * shape[axis] * inner + off * inner);
    off += p.dim(axis);
  }
  std::vector<std::shared_ptr<Impl<T>>> impls;
  std::vector<const Tensor<T>*> inputs;
  for (const auto& p : parts) {
    impls.push_back(p.shared());
    inputs.push_back(&p);
  }
  const std::int64_t total = shape[axis];
  attach(out, inputs, [impls, offsets, outer, inner, total, axis](Impl<T>& self) {
    for (std::size_t k = 0; k < impls.size(); ++k) {
      if (!impls[k]->requires_grad) continue;
      auto& gp = impls[k]->grad_buffer();
      const std::int64_t chunk = impls[k]->shape[axis] * inner;
      for (std::int64_t o = 0; o < outer; ++o) {
        const T* src = self.grad.data() + o * total * inner + offsets[k] * inner;
        T* dst = gp.data() + o * chunk;
        for (std::int64_t i = 0; i < chunk; ++i) dst[i] += src[i];
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> narrow(const Tensor<T>& x, int axis, std::int64_t start, std::int64_t length) {
  axis = normalize_axis(axis, x.rank());
  if (start < 0 || length < 0 || start + length > x.dim(axis)) {
    throw ConfigError("narrow [" + std::to_string(start) + "," + std::to_string(start + length) + ") out of range for " +
                      to_string(x.shape()));
  }
  Shape shape = x.shape();
  shape[axis] = length;
  auto out = Tensor<T>::zeros(shape);
  if (meta_mode()) return out;
  std::int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= shape[d];
  for (std::size_t d = axis + 1; d < x.rank(); ++d) inner *= shape[d];
  const std::int64_t full = x.dim(axis);
  const T* px = x.data().data();
  T* po = out.data().data();
  for (std::int64_t o = 0; o < outer; ++o)
    std::copy(px + (o * full + start) * inner, px + (o * full + start + length) * inner, po + o * length * inner);
  auto xi = x.shared();
  attach(out, {&x}, [xi, outer, inner, full, start, length](Impl<T>& self) {
    auto& gx = xi->grad_buffer();
    for (std::int64_t o = 0; o < outer; ++o) {
      const T* src = self.grad.data() + o * length * inner;
      T* dst = gx.data() + (o * full + start) * inner;
      for (std::int64_t i = 0; i < length * inner; ++i) dst[i] += src[i];
    }
  });
  return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.numel()) {
    throw ConfigError("cannot reshape " + to_string(x.shape()) + " to " + to_string(shape));
  }
  auto out = Tensor<T>::zeros(shape);
  if (meta_mode()) return out;
  std::copy(x.data().begin(), x.data().end(), out.data().begin());
  auto xi = x.shared();
  attach(out, {&x}, [xi](Impl<T>& self) {
    auto& gx = xi->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
  });
  return out;
}

template <typename T>
Tensor<T> channel_shuffle(const Tensor<T>& x, int groups) {
  if (x.rank() != 4) throw ConfigError("channel_shuffle expects rank-4 input");
  const std::int64_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  if (groups < 1 || C % groups) {
    throw ConfigError("channel_shuffle groups " + std::to_string(groups) + " must divide " + std::to_string(C) +
                      " channels");
  }
  auto out = Tensor<T>::zeros(x.shape());
  if (meta_mode()) return out;
  const std::int64_t per = C / groups;
  std::vector<std::int64_t> src(C);
  for (std::int64_t i = 0; i < C; ++i) src[i] = (i % groups) * per + i / groups;
  const T* px = x.data().data();
  T* po = out.data().data();
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t i = 0; i < C; ++i)
      std::copy(px + (b * C + src[i]) * HW, px + (b * C + src[i] + 1) * HW, po + (b * C + i) * HW);
  auto xi = x.shared();
  attach(out, {&x}, [xi, src, B, C, HW](Impl<T>& self) {
    auto& gx = xi->grad_buffer();
    for (std::int64_t b = 0; b < B; ++b)
      for (std::int64_t i = 0; i < C; ++i) {
        const T* g = self.grad.data() + (b * C + i) * HW;
        T* dst = gx.data() + (b * C + src[i]) * HW;
        for (std::int64_t k = 0; k < HW; ++k) dst[k] += g[k];
      }
  });
  return out;
}

// ------------------------------------------------------------------ loss

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<std::int32_t>& labels, std::int32_t ignore_index,
                        const std::vector<T>* class_weights, bool* all_ignored) {
  if (logits.rank() != 4) throw ConfigError("cross_entropy expects logits (B,K,H,W)");
  const std::int64_t B = logits.dim(0), K = logits.dim(1), HW = logits.dim(2) * logits.dim(3);
  if (static_cast<std::int64_t>(labels.size()) != B * HW) {
    throw ConfigError("cross_entropy label count " + std::to_string(labels.size()) + " does not match logits " +
                      to_string(logits.shape()));
  }
  if (class_weights && static_cast<std::int64_t>(class_weights->size()) != K) {
    throw ConfigError("class weight count does not match class count");
  }
  auto out = Tensor<T>::zeros({});
  if (meta_mode()) return out;
  const T* pz = logits.data().data();
  std::vector<T> prob(static_cast<std::size_t>(B * K * HW));
  T total = 0, weight_sum = 0;
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t i = 0; i < HW; ++i) {
      const std::int32_t y = labels[b * HW + i];
      if (y == ignore_index) continue;
      if (y < 0 || y >= K) throw ConfigError("label " + std::to_string(y) + " outside [0," + std::to_string(K) + ")");
      T mx = -std::numeric_limits<T>::infinity();
      for (std::int64_t k = 0; k < K; ++k) mx = std::max(mx, pz[(b * K + k) * HW + i]);
      T s = 0;
      for (std::int64_t k = 0; k < K; ++k) s += std::exp(pz[(b * K + k) * HW + i] - mx);
      const T lse = mx + std::log(s);
      for (std::int64_t k = 0; k < K; ++k) prob[(b * K + k) * HW + i] = std::exp(pz[(b * K + k) * HW + i] - lse);
      const T w = class_weights ? (*class_weights)[y] : T(1);
      total += w * (lse - pz[(b * K + y) * HW + i]);
      weight_sum += w;
    }
  if (all_ignored) *all_ignored = weight_sum == T(0);
  if (weight_sum == T(0)) return out;
  out.data()[0] = total / weight_sum;
  auto zi = logits.shared();
  std::vector<T> weights = class_weights ? *class_weights : std::vector<T>{};
  attach(out, {&logits}, [zi, labels, ignore_index, weights, prob = std::move(prob), weight_sum, B, K, HW](Impl<T>& self) {
    auto& gz = zi->grad_buffer();
    const T g = self.grad[0] / weight_sum;
    for (std::int64_t b = 0; b < B; ++b)
      for (std::int64_t i = 0; i < HW; ++i) {
        const std::int32_t y = labels[b * HW + i];
        if (y == ignore_index) continue;
        const T w = weights.empty() ? T(1) : weights[y];
        for (std::int64_t k = 0; k < K; ++k) {
          const std::int64_t idx = (b * K + k) * HW + i;
          gz[idx] += g * w * (prob[idx] - (k == y ? T(1) : T(0)));
        }
      }
  });
  return out;
}

#define ECMNET_INSTANTIATE_OPS(T)                                                                                    \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                                        \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                                        \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                                        \
  template Tensor<T> scale(const Tensor<T>&, T);                                                                     \
  template Tensor<T> relu(const Tensor<T>&);                                                                         \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                                      \
  template Tensor<T> silu(const Tensor<T>&);                                                                         \
  template Tensor<T> gelu(const Tensor<T>&);                                                                         \
  template Tensor<T> softplus(const Tensor<T>&);                                                                     \
  template Tensor<T> exp(const Tensor<T>&);                                                                          \
  template Tensor<T> neg(const Tensor<T>&);                                                                          \
  template Tensor<T> sum(const Tensor<T>&);                                                                          \
  template Tensor<T> mean(const Tensor<T>&, const std::vector<int>&);                                                \
  template Tensor<T> amax(const Tensor<T>&, const std::vector<int>&);                                                \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*, const Conv2dOptions&);             \
  template Tensor<T> batch_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>&, Tensor<T>&, bool, \
                                T, T);                                                                               \
  template Tensor<T> channel_layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);                    \
  template Tensor<T> avg_pool2d(const Tensor<T>&, int);                                                              \
  template Tensor<T> upsample_bilinear(const Tensor<T>&, std::int64_t, std::int64_t);                                \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                                                     \
  template Tensor<T> narrow(const Tensor<T>&, int, std::int64_t, std::int64_t);                                      \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                               \
  template Tensor<T> channel_shuffle(const Tensor<T>&, int);                                                         \
  template Tensor<T> cross_entropy(const Tensor<T>&, const std::vector<std::int32_t>&, std::int32_t,                 \
                                   const std::vector<T>*, bool*);

ECMNET_INSTANTIATE_OPS(float)
ECMNET_INSTANTIATE_OPS(double)

#undef ECMNET_INSTANTIATE_OPS

}  // namespace ecmnet::ops
