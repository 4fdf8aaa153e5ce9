#include <algorithm>
#include <vector>

#include "skelfall/tensor.hpp"

namespace skelfall {

namespace {

struct ConvDims {
  int64_t n, c, t, v;       // input
  int64_t co, kt, kv;       // kernel
  int64_t st, pt, pv;       // stride / padding
  int64_t to, vo;           // output plane
  int64_t patch;            // c * kt * kv
  int64_t cols;             // to * vo
  bool pointwise;           // 1x1 stride-1 unpadded: col matrix == input
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, const Conv2dOpts& o) {
  if (x.ndim() != 4 || w.ndim() != 4)
    fail(ErrorCode::dimension, "conv2d expects x: N x C x T x V and w: C' x C x kt x kv, got " +
                                   shape_str(x.shape()) + " and " + shape_str(w.shape()));
  if (x.dim(1) != w.dim(1))
    fail(ErrorCode::dimension, "conv2d channel mismatch: " + shape_str(x.shape()) + " vs " +
                                   shape_str(w.shape()));
  if (o.stride_t < 1 || o.pad_t < 0 || o.pad_v < 0)
    fail(ErrorCode::invalid_argument, "conv2d: bad stride/padding");
  ConvDims d;
  d.n = x.dim(0); d.c = x.dim(1); d.t = x.dim(2); d.v = x.dim(3);
  d.co = w.dim(0); d.kt = w.dim(2); d.kv = w.dim(3);
  d.st = o.stride_t; d.pt = o.pad_t; d.pv = o.pad_v;
  if (d.kt > d.t + 2 * d.pt || d.kv > d.v + 2 * d.pv)
    fail(ErrorCode::dimension, "conv2d kernel " + shape_str(w.shape()) +
                                   " larger than padded input " + shape_str(x.shape()));
  d.to = (d.t + 2 * d.pt - d.kt) / d.st + 1;
  d.vo = d.v + 2 * d.pv - d.kv + 1;
  d.patch = d.c * d.kt * d.kv;
  d.cols = d.to * d.vo;
  d.pointwise = d.kt == 1 && d.kv == 1 && d.st == 1 && d.pt == 0 && d.pv == 0;
  return d;
}

// col[(c*kt+dt)*kv+dv][to*vo+vv] = x[c][to*st+dt-pt][vv+dv-pv], zero outside.
void im2col(const ConvDims& d, const real* x, real* col) {
  for (int64_t c = 0; c < d.c; ++c)
    for (int64_t dt = 0; dt < d.kt; ++dt)
      for (int64_t dv = 0; dv < d.kv; ++dv) {
        real* crow = col + ((c * d.kt + dt) * d.kv + dv) * d.cols;
        for (int64_t to = 0; to < d.to; ++to) {
          const int64_t ti = to * d.st + dt - d.pt;
          real* out = crow + to * d.vo;
          if (ti < 0 || ti >= d.t) {
            std::fill(out, out + d.vo, real(0));
            continue;
          }
          const real* in = x + (c * d.t + ti) * d.v;
          for (int64_t vv = 0; vv < d.vo; ++vv) {
            const int64_t vi = vv + dv - d.pv;
            out[vv] = (vi >= 0 && vi < d.v) ? in[vi] : real(0);
          }
        }
      }
}

void col2im_acc(const ConvDims& d, const real* col, real* dx) {
  for (int64_t c = 0; c < d.c; ++c)
    for (int64_t dt = 0; dt < d.kt; ++dt)
      for (int64_t dv = 0; dv < d.kv; ++dv) {
        const real* crow = col + ((c * d.kt + dt) * d.kv + dv) * d.cols;
        for (int64_t to = 0; to < d.to; ++to) {
          const int64_t ti = to * d.st + dt - d.pt;
          if (ti < 0 || ti >= d.t) continue;
          real* out = dx + (c * d.t + ti) * d.v;
          const real* in = crow + to * d.vo;
          for (int64_t vv = 0; vv < d.vo; ++vv) {
            const int64_t vi = vv + dv - d.pv;
            if (vi >= 0 && vi < d.v) out[vi] += in[vv];
          }
        }
      }
}

// c[m x n] += a[m x k] * b[n x k]^T
void mm_abt_acc(int64_t m, int64_t n, int64_t k, const real* a, const real* b, real* c) {
  detail::parallel_for(m, 8, [&](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; ++i)
      for (int64_t j = 0; j < n; ++j) {
        real s = 0;
        const real* ar = a + i * k;
        const real* br = b + j * k;
        for (int64_t l = 0; l < k; ++l) s += ar[l] * br[l];
        c[i * n + j] += s;
      }
  });
}

// c[m x n] = a[k x m]^T * b[k x n]
void mm_atb(int64_t m, int64_t n, int64_t k, const real* a, const real* b, real* c) {
  detail::parallel_for(m, 8, [&](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; ++i) {
      real* cr = c + i * n;
      std::fill(cr, cr + n, real(0));
      for (int64_t l = 0; l < k; ++l) {
        const real av = a[l * m + i];
        if (av == real(0)) continue;
        const real* br = b + l * n;
        for (int64_t j = 0; j < n; ++j) cr[j] += av * br[j];
      }
    }
  });
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Conv2dOpts& opts) {
  const ConvDims d = conv_dims(x, w, opts);
  std::vector<real> out(static_cast<size_t>(d.n * d.co * d.cols));
  std::vector<real> colbuf;
  if (!d.pointwise) colbuf.resize(static_cast<size_t>(d.patch * d.cols));
  for (int64_t i = 0; i < d.n; ++i) {
    const real* xi = x.data().data() + i * d.c * d.t * d.v;
    const real* col = xi;
    if (!d.pointwise) {
      im2col(d, xi, colbuf.data());
      col = colbuf.data();
    }
    detail::mm(d.co, d.cols, d.patch, w.data().data(), col,
               out.data() + i * d.co * d.cols, false);
  }

  Tensor tx = x, tw = w;
  Shape out_shape{d.n, d.co, d.to, d.vo};
  auto backward = [tx, tw, d](TensorImpl& self) {
    const bool need_dx = tx.impl()->requires_grad;
    const bool need_dw = tw.impl()->requires_grad;
    if (need_dx) tx.impl()->ensure_grad();
    if (need_dw) tw.impl()->ensure_grad();
    std::vector<real> colbuf, dcol;
    if (!d.pointwise) {
      colbuf.resize(static_cast<size_t>(d.patch * d.cols));
      if (need_dx) dcol.resize(static_cast<size_t>(d.patch * d.cols));
    }
    for (int64_t i = 0; i < d.n; ++i) {
      const real* g = self.grad.data() + i * d.co * d.cols;
      const real* xi = tx.impl()->data.data() + i * d.c * d.t * d.v;
      if (need_dw) {
        const real* col = xi;
        if (!d.pointwise) {
          im2col(d, xi, colbuf.data());
          col = colbuf.data();
        }
        mm_abt_acc(d.co, d.patch, d.cols, g, col, tw.impl()->grad.data());
      }
      if (need_dx) {
        real* dxi = tx.impl()->grad.data() + i * d.c * d.t * d.v;
        if (d.pointwise) {
          // dcol lands directly on the input layout; accumulate in place.
          std::vector<real> tmp(static_cast<size_t>(d.patch * d.cols));
          mm_atb(d.patch, d.cols, d.co, tw.impl()->data.data(), g, tmp.data());
          for (int64_t j = 0; j < d.patch * d.cols; ++j) dxi[j] += tmp[j];
        } else {
          mm_atb(d.patch, d.cols, d.co, tw.impl()->data.data(), g, dcol.data());
          col2im_acc(d, dcol.data(), dxi);
        }
      }
    }
  };

  auto impl = std::make_shared<TensorImpl>();
  impl->shape = out_shape;
  impl->data = std::move(out);
  if (grad_mode_enabled() && (x.requires_grad() || w.requires_grad())) {
    impl->requires_grad = true;
    impl->parents = {x.impl(), w.impl()};
    impl->backward_fn = std::move(backward);
  }
  return Tensor(std::move(impl));
}

}  // namespace skelfall
