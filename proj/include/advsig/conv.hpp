// Copyright 2026 The advsig Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef ADVSIG_CONV_HPP
#define ADVSIG_CONV_HPP

#include <vector>

#include "advsig/tensor.hpp"

namespace advsig {

namespace detail {

inline int conv_out_size(int in, int k, int stride, int pad, int dilation = 1) {
  int eff = (k - 1) * dilation + 1;
  int out = (in + 2 * pad - eff) / stride + 1;
  if (out <= 0) throw UsageError("conv: non-positive output size");
  return out;
}

// x:[Cin,H,W] -> cols:[Cin*kh*kw, Ho*Wo]
inline void im2col2d(const Scalar* x, int cin, int h, int w, int kh, int kw, int sh, int sw, int ph, int pw,
                     int ho, int wo, Scalar* cols) {
  for (int ci = 0; ci < cin; ++ci)
    for (int ki = 0; ki < kh; ++ki)
      for (int kj = 0; kj < kw; ++kj) {
        Scalar* row = cols + (static_cast<std::size_t>(ci) * kh * kw + static_cast<std::size_t>(ki) * kw + kj) *
                                 (static_cast<std::size_t>(ho) * wo);
        for (int i = 0; i < ho; ++i) {
          int hi = i * sh + ki - ph;
          for (int j = 0; j < wo; ++j) {
            int wj = j * sw + kj - pw;
            row[static_cast<std::size_t>(i) * wo + j] =
                (hi >= 0 && hi < h && wj >= 0 && wj < w)
                    ? x[(static_cast<std::size_t>(ci) * h + hi) * w + wj]
                    : 0.0;
          }
        }
      }
}

// Scatter-add of cols gradients back into the input layout.
inline void col2im2d(const Scalar* cols, int cin, int h, int w, int kh, int kw, int sh, int sw, int ph, int pw,
                     int ho, int wo, Scalar* gx) {
  for (int ci = 0; ci < cin; ++ci)
    for (int ki = 0; ki < kh; ++ki)
      for (int kj = 0; kj < kw; ++kj) {
        const Scalar* row = cols + (static_cast<std::size_t>(ci) * kh * kw + static_cast<std::size_t>(ki) * kw + kj) *
                                       (static_cast<std::size_t>(ho) * wo);
        for (int i = 0; i < ho; ++i) {
          int hi = i * sh + ki - ph;
          if (hi < 0 || hi >= h) continue;
          for (int j = 0; j < wo; ++j) {
            int wj = j * sw + kj - pw;
            if (wj < 0 || wj >= w) continue;
            gx[(static_cast<std::size_t>(ci) * h + hi) * w + wj] += row[static_cast<std::size_t>(i) * wo + j];
          }
        }
      }
}

// x:[Cin,T] -> cols:[Cin*k, To] with dilation.
inline void im2col1d(const Scalar* x, int cin, int t, int k, int stride, int pad, int dilation, int to,
                     Scalar* cols) {
  for (int ci = 0; ci < cin; ++ci)
    for (int ki = 0; ki < k; ++ki) {
      Scalar* row = cols + (static_cast<std::size_t>(ci) * k + ki) * static_cast<std::size_t>(to);
      for (int i = 0; i < to; ++i) {
        int ti = i * stride + ki * dilation - pad;
        row[static_cast<std::size_t>(i)] = (ti >= 0 && ti < t) ? x[static_cast<std::size_t>(ci) * t + ti] : 0.0;
      }
    }
}

inline void col2im1d(const Scalar* cols, int cin, int t, int k, int stride, int pad, int dilation, int to,
                     Scalar* gx) {
  for (int ci = 0; ci < cin; ++ci)
    for (int ki = 0; ki < k; ++ki) {
      const Scalar* row = cols + (static_cast<std::size_t>(ci) * k + ki) * static_cast<std::size_t>(to);
      for (int i = 0; i < to; ++i) {
        int ti = i * stride + ki * dilation - pad;
        if (ti >= 0 && ti < t) gx[static_cast<std::size_t>(ci) * t + ti] += row[static_cast<std::size_t>(i)];
      }
    }
}

}  // namespace detail

// 2-D convolution: x [Cin,H,W], w [Cout,Cin,kh,kw], b [Cout].
inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride_h, int stride_w, int pad_h,
                     int pad_w) {
  if (x.shape().size() != 3 || w.shape().size() != 4) throw UsageError("conv2d: bad ranks");
  const int cin = x.dim(0), h = x.dim(1), ww = x.dim(2);
  const int cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != cin || b.dim(0) != cout) throw UsageError("conv2d: shape mismatch");
  const int ho = detail::conv_out_size(h, kh, stride_h, pad_h);
  const int wo = detail::conv_out_size(ww, kw, stride_w, pad_w);
  const int kdim = cin * kh * kw;
  const int odim = ho * wo;

  std::vector<Scalar> cols(static_cast<std::size_t>(kdim) * odim);
  detail::im2col2d(x.data().data(), cin, h, ww, kh, kw, stride_h, stride_w, pad_h, pad_w, ho, wo, cols.data());

  std::vector<Scalar> out(static_cast<std::size_t>(cout) * odim);
  EigenCMap wm(w.data().data(), cout, kdim), cm(cols.data(), kdim, odim);
  EigenMap om(out.data(), cout, odim);
  om.noalias() = wm * cm;
  for (int co = 0; co < cout; ++co) om.row(co).array() += b.data()[static_cast<std::size_t>(co)];

  auto bwd = [=](TensorImpl& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    auto& pb = *self.parents[2];
    EigenCMap g(self.grad.data(), cout, odim);
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (int co = 0; co < cout; ++co) pb.grad[static_cast<std::size_t>(co)] += g.row(co).sum();
    }
    if (pw.requires_grad) {
      pw.ensure_grad();
      std::vector<Scalar> cols2(static_cast<std::size_t>(kdim) * odim);
      detail::im2col2d(px.value.data(), cin, h, ww, kh, kw, stride_h, stride_w, pad_h, pad_w, ho, wo, cols2.data());
      EigenCMap cm2(cols2.data(), kdim, odim);
      EigenMap(pw.grad.data(), cout, kdim).noalias() += g * cm2.transpose();
    }
    if (px.requires_grad) {
      px.ensure_grad();
      std::vector<Scalar> gcols(static_cast<std::size_t>(kdim) * odim);
      EigenCMap wm2(pw.value.data(), cout, kdim);
      EigenMap(gcols.data(), kdim, odim).noalias() = wm2.transpose() * g;
      detail::col2im2d(gcols.data(), cin, h, ww, kh, kw, stride_h, stride_w, pad_h, pad_w, ho, wo, px.grad.data());
    }
  };
  return detail::make_result({cout, ho, wo}, std::move(out), {x, w, b}, bwd);
}

// 1-D convolution: x [Cin,T], w [Cout,Cin,k], b [Cout].
inline Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad, int dilation = 1) {
  if (x.shape().size() != 2 || w.shape().size() != 3) throw UsageError("conv1d: bad ranks");
  const int cin = x.dim(0), t = x.dim(1);
  const int cout = w.dim(0), k = w.dim(2);
  if (w.dim(1) != cin || b.dim(0) != cout) throw UsageError("conv1d: shape mismatch");
  const int to = detail::conv_out_size(t, k, stride, pad, dilation);
  const int kdim = cin * k;

  std::vector<Scalar> cols(static_cast<std::size_t>(kdim) * to);
  detail::im2col1d(x.data().data(), cin, t, k, stride, pad, dilation, to, cols.data());

  std::vector<Scalar> out(static_cast<std::size_t>(cout) * to);
  EigenCMap wm(w.data().data(), cout, kdim), cm(cols.data(), kdim, to);
  EigenMap om(out.data(), cout, to);
  om.noalias() = wm * cm;
  for (int co = 0; co < cout; ++co) om.row(co).array() += b.data()[static_cast<std::size_t>(co)];

  auto bwd = [=](TensorImpl& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    auto& pb = *self.parents[2];
    EigenCMap g(self.grad.data(), cout, to);
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (int co = 0; co < cout; ++co) pb.grad[static_cast<std::size_t>(co)] += g.row(co).sum();
    }
    if (pw.requires_grad) {
      pw.ensure_grad();
      std::vector<Scalar> cols2(static_cast<std::size_t>(kdim) * to);
      detail::im2col1d(px.value.data(), cin, t, k, stride, pad, dilation, to, cols2.data());
      EigenCMap cm2(cols2.data(), kdim, to);
      EigenMap(pw.grad.data(), cout, kdim).noalias() += g * cm2.transpose();
    }
    if (px.requires_grad) {
      px.ensure_grad();
      std::vector<Scalar> gcols(static_cast<std::size_t>(kdim) * to);
      EigenCMap wm2(pw.value.data(), cout, kdim);
      EigenMap(gcols.data(), kdim, to).noalias() = wm2.transpose() * g;
      detail::col2im1d(gcols.data(), cin, t, k, stride, pad, dilation, to, px.grad.data());
    }
  };
  return detail::make_result({cout, to}, std::move(out), {x, w, b}, bwd);
}

// 1-D transposed convolution: x [Cin,T], w [Cin,Cout,k], b [Cout].
// Output length (T-1)*stride - 2*pad + k.
inline Tensor conv_transpose1d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  if (x.shape().size() != 2 || w.shape().size() != 3) throw UsageError("conv_transpose1d: bad ranks");
  const int cin = x.dim(0), t = x.dim(1);
  const int cout = w.dim(1), k = w.dim(2);
  if (w.dim(0) != cin || b.dim(0) != cout) throw UsageError("conv_transpose1d: shape mismatch");
  const int to = (t - 1) * stride - 2 * pad + k;
  if (to <= 0) throw UsageError("conv_transpose1d: non-positive output size");

  // cols[(co*k + ki), t] = sum_ci w[ci,co,ki] * x[ci,t], then scatter to out[co, t*stride - pad + ki].
  const int kdim = cout * k;
  std::vector<Scalar> cols(static_cast<std::size_t>(kdim) * t);
  EigenCMap wm(w.data().data(), cin, kdim), xm(x.data().data(), cin, t);
  EigenMap(cols.data(), kdim, t).noalias() = wm.transpose() * xm;

  std::vector<Scalar> out(static_cast<std::size_t>(cout) * to, 0.0);
  for (int co = 0; co < cout; ++co)
    for (int ki = 0; ki < k; ++ki) {
      const Scalar* row = cols.data() + (static_cast<std::size_t>(co) * k + ki) * static_cast<std::size_t>(t);
      for (int ti = 0; ti < t; ++ti) {
        int oi = ti * stride - pad + ki;
        if (oi >= 0 && oi < to) out[static_cast<std::size_t>(co) * to + oi] += row[static_cast<std::size_t>(ti)];
      }
    }
  for (int co = 0; co < cout; ++co)
    for (int oi = 0; oi < to; ++oi) out[static_cast<std::size_t>(co) * to + oi] += b.data()[static_cast<std::size_t>(co)];

  auto bwd = [=](TensorImpl& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    auto& pb = *self.parents[2];
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (int co = 0; co < cout; ++co) {
        Scalar s = 0;
        for (int oi = 0; oi < to; ++oi) s += self.grad[static_cast<std::size_t>(co) * to + oi];
        pb.grad[static_cast<std::size_t>(co)] += s;
      }
    }
    // Gather grad_out into the cols layout: gcols[(co*k+ki), t] = g[co, t*stride - pad + ki].
    std::vector<Scalar> gcols(static_cast<std::size_t>(kdim) * t, 0.0);
    for (int co = 0; co < cout; ++co)
      for (int ki = 0; ki < k; ++ki) {
        Scalar* row = gcols.data() + (static_cast<std::size_t>(co) * k + ki) * static_cast<std::size_t>(t);
        for (int ti = 0; ti < t; ++ti) {
          int oi = ti * stride - pad + ki;
          if (oi >= 0 && oi < to) row[static_cast<std::size_t>(ti)] = self.grad[static_cast<std::size_t>(co) * to + oi];
        }
      }
    EigenCMap gc(gcols.data(), kdim, t);
    if (px.requires_grad) {
      px.ensure_grad();
      EigenCMap wm2(pw.value.data(), cin, kdim);
      EigenMap(px.grad.data(), cin, t).noalias() += wm2 * gc;
    }
    if (pw.requires_grad) {
      pw.ensure_grad();
      EigenCMap xm2(px.value.data(), cin, t);
      EigenMap(pw.grad.data(), cin, kdim).noalias() += xm2 * gc.transpose();
    }
  };
  return detail::make_result({cout, to}, std::move(out), {x, w, b}, bwd);
}

}  // namespace advsig

#endif  // ADVSIG_CONV_HPP
