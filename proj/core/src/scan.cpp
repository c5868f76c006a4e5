#include "ecmnet/scan.hpp"

#include <atomic>
#include <cmath>

#include "ecmnet/profiler.hpp"

namespace ecmnet::scan {

namespace {

std::atomic<bool> g_fault{false};

std::vector<std::int64_t> positions(int dir, std::int64_t h, std::int64_t w) {
  std::vector<std::int64_t> pos(static_cast<std::size_t>(h * w));
  for (std::int64_t t = 0; t < h * w; ++t) pos[t] = scan_position(dir, t, h, w);
  return pos;
}

template <typename T>
bool all_finite(std::span<const T> v) {
  for (T x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

void set_cross_scan_fault(bool on) { g_fault = on; }
bool cross_scan_fault() { return g_fault; }

std::int64_t scan_position(int dir, std::int64_t t, std::int64_t h, std::int64_t w) {
  const std::int64_t l = h * w;
  switch (dir) {
    case 0:
      return t;
    case 1:
      return (t % h) * w + t / h;
    case 2:
      return l - 1 - t;
    case 3: {
      const std::int64_t s = l - 1 - t;
      return (s % h) * w + s / h;
    }
    default:
      throw ConfigError("scan direction " + std::to_string(dir) + " outside [0,4)");
  }
}

template <typename T>
Tensor<T> cross_scan(const Tensor<T>& x) {
  if (x.rank() != 4) throw ConfigError("cross_scan expects (B,C,H,W), got " + to_string(x.shape()));
  const std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3), L = H * W;
  auto out = Tensor<T>::zeros({B, kDirections, C, L});
  if (meta_mode()) return out;
  std::vector<std::vector<std::int64_t>> pos;
  for (int k = 0; k < kDirections; ++k) pos.push_back(positions(k == 1 && g_fault ? 0 : k, H, W));
  const T* px = x.data().data();
  T* po = out.data().data();
  for (std::int64_t b = 0; b < B; ++b)
    for (int k = 0; k < kDirections; ++k)
      for (std::int64_t c = 0; c < C; ++c) {
        const T* src = px + (b * C + c) * L;
        T* dst = po + ((b * kDirections + k) * C + c) * L;
        for (std::int64_t t = 0; t < L; ++t) dst[t] = src[pos[k][t]];
      }
  if (grad_enabled() && x.requires_grad()) {
    auto xi = x.shared();
    out.impl()->requires_grad = true;
    out.impl()->parents.push_back(xi);
    out.impl()->backward = [xi, pos, B, C, L](TensorImpl<T>& self) {
      auto& gx = xi->grad_buffer();
      for (std::int64_t b = 0; b < B; ++b)
        for (int k = 0; k < kDirections; ++k)
          for (std::int64_t c = 0; c < C; ++c) {
            const T* g = self.grad.data() + ((b * kDirections + k) * C + c) * L;
            T* dst = gx.data() + (b * C + c) * L;
            for (std::int64_t t = 0; t < L; ++t) dst[pos[k][t]] += g[t];
          }
    };
  }
  return out;
}

template <typename T>
Tensor<T> cross_merge(const Tensor<T>& y, std::int64_t H, std::int64_t W) {
  if (y.rank() != 4 || y.dim(1) != kDirections || y.dim(3) != H * W) {
    throw ConfigError("cross_merge expects (B,4,C," + std::to_string(H * W) + "), got " + to_string(y.shape()));
  }
  const std::int64_t B = y.dim(0), C = y.dim(2), L = H * W;
  auto out = Tensor<T>::zeros({B, C, H, W});
  profile::record(0, 3 * B * C * L);
  if (meta_mode()) return out;
  std::vector<std::vector<std::int64_t>> pos;
  for (int k = 0; k < kDirections; ++k) pos.push_back(positions(k, H, W));
  const T* py = y.data().data();
  T* po = out.data().data();
  for (std::int64_t b = 0; b < B; ++b)
    for (int k = 0; k < kDirections; ++k)
      for (std::int64_t c = 0; c < C; ++c) {
        const T* src = py + ((b * kDirections + k) * C + c) * L;
        T* dst = po + (b * C + c) * L;
        for (std::int64_t t = 0; t < L; ++t) dst[pos[k][t]] += src[t];
      }
  if (grad_enabled() && y.requires_grad()) {
    auto yi = y.shared();
    out.impl()->requires_grad = true;
    out.impl()->parents.push_back(yi);
    out.impl()->backward = [yi, pos, B, C, L](TensorImpl<T>& self) {
      auto& gy = yi->grad_buffer();
      for (std::int64_t b = 0; b < B; ++b)
        for (int k = 0; k < kDirections; ++k)
          for (std::int64_t c = 0; c < C; ++c) {
            const T* g = self.grad.data() + (b * C + c) * L;
            T* dst = gy.data() + ((b * kDirections + k) * C + c) * L;
            for (std::int64_t t = 0; t < L; ++t) dst[t] += g[pos[k][t]];
          }
    };
  }
  return out;
}

template <typename T>
Tensor<T> selective_scan(const Tensor<T>& u, const Tensor<T>& delta, const Tensor<T>& a, const Tensor<T>& b,
                         const Tensor<T>& c, const Tensor<T>& d) {
  if (u.rank() != 3 || delta.shape() != u.shape() || a.rank() != 2 || b.rank() != 4 || c.shape() != b.shape() ||
      d.rank() != 1) {
    throw ConfigError("selective_scan shape mismatch: u " + to_string(u.shape()) + " delta " +
                      to_string(delta.shape()) + " a " + to_string(a.shape()) + " b " + to_string(b.shape()) +
                      " c " + to_string(c.shape()) + " d " + to_string(d.shape()));
  }
  const std::int64_t B = u.dim(0), KD = u.dim(1), L = u.dim(2);
  const std::int64_t G = b.dim(1), N = b.dim(2);
  if (G < 1 || KD % G || a.dim(0) != KD || a.dim(1) != N || b.dim(0) != B || b.dim(3) != L || d.dim(0) != KD) {
    throw ConfigError("selective_scan extents disagree: u " + to_string(u.shape()) + " a " + to_string(a.shape()) +
                      " b " + to_string(b.shape()));
  }
  const std::int64_t per_group = KD / G;
  auto out = Tensor<T>::zeros({B, KD, L});
  // Per step and state: one exp, two MACs for the update, one for the readout.
  profile::record(3 * B * KD * L * N + B * KD * L, B * KD * L * N);
  if (meta_mode()) return out;
  if (!all_finite(u.data()) || !all_finite(delta.data()) || !all_finite(a.data()) || !all_finite(b.data()) ||
      !all_finite(c.data()) || !all_finite(d.data())) {
    throw NumericalError("selective_scan received non-finite input");
  }
  const bool need_grad = grad_enabled() && (u.requires_grad() || delta.requires_grad() || a.requires_grad() ||
                                            b.requires_grad() || c.requires_grad() || d.requires_grad());
  // States h_t for every step, kept only when a backward pass will follow.
  std::vector<T> states;
  if (need_grad) states.resize(static_cast<std::size_t>(B * KD * L * N));
  const T* pu = u.data().data();
  const T* pdt = delta.data().data();
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  const T* pc = c.data().data();
  const T* pd = d.data().data();
  T* py = out.data().data();
  std::vector<T> h(static_cast<std::size_t>(N));
  for (std::int64_t bi = 0; bi < B; ++bi)
    for (std::int64_t ch = 0; ch < KD; ++ch) {
      const std::int64_t g = ch / per_group;
      const T* uu = pu + (bi * KD + ch) * L;
      const T* dt = pdt + (bi * KD + ch) * L;
      const T* aa = pa + ch * N;
      const T* bb = pb + (bi * G + g) * N * L;
      const T* cc = pc + (bi * G + g) * N * L;
      T* yy = py + (bi * KD + ch) * L;
      std::fill(h.begin(), h.end(), T(0));
      for (std::int64_t t = 0; t < L; ++t) {
        T acc = pd[ch] * uu[t];
        const T du = dt[t] * uu[t];
        for (std::int64_t n = 0; n < N; ++n) {
          h[n] = std::exp(dt[t] * aa[n]) * h[n] + du * bb[n * L + t];
          acc += cc[n * L + t] * h[n];
        }
        yy[t] = acc;
        if (need_grad) std::copy(h.begin(), h.end(), states.begin() + ((bi * KD + ch) * L + t) * N);
      }
    }
  if (!all_finite(std::span<const T>(out.data()))) throw NumericalError("selective_scan produced non-finite output");
  if (!need_grad) return out;

  auto ui = u.shared(), dti = delta.shared(), ai = a.shared(), bimpl = b.shared(), ci = c.shared(),
       di = d.shared();
  out.impl()->requires_grad = true;
  out.impl()->parents = {ui, dti, ai, bimpl, ci, di};
  out.impl()->backward = [=, states = std::move(states)](TensorImpl<T>& self) {
    auto grad_of = [](const std::shared_ptr<TensorImpl<T>>& p) -> T* {
      return p->requires_grad ? p->grad_buffer().data() : nullptr;
    };
    T* gu = grad_of(ui);
    T* gdt = grad_of(dti);
    T* ga = grad_of(ai);
    T* gb = grad_of(bimpl);
    T* gc = grad_of(ci);
    T* gd = grad_of(di);
    const T* pu = ui->data.data();
    const T* pdt = dti->data.data();
    const T* pa = ai->data.data();
    const T* pb = bimpl->data.data();
    const T* pc = ci->data.data();
    const T* pd = di->data.data();
    std::vector<T> gh(static_cast<std::size_t>(N));
    for (std::int64_t bi = 0; bi < B; ++bi)
      for (std::int64_t ch = 0; ch < KD; ++ch) {
        const std::int64_t g = ch / per_group;
        const std::int64_t row = (bi * KD + ch) * L;
        const std::int64_t grp = (bi * G + g) * N * L;
        const T* hs = states.data() + row * N;
        std::fill(gh.begin(), gh.end(), T(0));
        for (std::int64_t t = L - 1; t >= 0; --t) {
          const T gy = self.grad[row + t];
          const T ut = pu[row + t];
          const T dt = pdt[row + t];
          const T* ht = hs + t * N;
          const T* hp = t > 0 ? hs + (t - 1) * N : nullptr;
          if (gd) gd[ch] += gy * ut;
          T gut = gy * pd[ch];
          T gdt_acc = 0;
          for (std::int64_t n = 0; n < N; ++n) {
            const std::int64_t bn = grp + n * L + t;
            if (gc) gc[bn] += gy * ht[n];
            gh[n] += gy * pc[bn];
            const T an = pa[ch * N + n];
            const T da = std::exp(dt * an);
            const T hprev = hp ? hp[n] : T(0);
            gdt_acc += gh[n] * (an * da * hprev + pb[bn] * ut);
            if (ga) ga[ch * N + n] += gh[n] * dt * da * hprev;
            if (gb) gb[bn] += gh[n] * dt * ut;
            gut += gh[n] * dt * pb[bn];
            gh[n] *= da;
          }
          if (gu) gu[row + t] += gut;
          if (gdt) gdt[row + t] += gdt_acc;
        }
      }
  };
  return out;
}

template Tensor<float> cross_scan(const Tensor<float>&);
template Tensor<double> cross_scan(const Tensor<double>&);
template Tensor<float> cross_merge(const Tensor<float>&, std::int64_t, std::int64_t);
template Tensor<double> cross_merge(const Tensor<double>&, std::int64_t, std::int64_t);
template Tensor<float> selective_scan(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                      const Tensor<float>&, const Tensor<float>&, const Tensor<float>&);
template Tensor<double> selective_scan(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&,
                                       const Tensor<double>&, const Tensor<double>&, const Tensor<double>&);

}  // namespace ecmnet::scan
