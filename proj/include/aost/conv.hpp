#pragma once

// 2-D convolutions (standard + depthwise) and upsampling over [h,w,c] tensors.

#include "aost/tensor.hpp"

namespace aost {

// x:[h,w,ci], w:[kh,kw,ci,co], b:[co]; zero padding.
inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  if (x.ndim() != 3 || w.ndim() != 4 || b.ndim() != 1)
    throw std::invalid_argument("conv2d: need x[h,w,ci], w[kh,kw,ci,co], b[co]");
  const int h = x.dim(0), wd = x.dim(1), ci = x.dim(2);
  const int kh = w.dim(0), kw = w.dim(1), co = w.dim(3);
  if (w.dim(2) != ci || b.dim(0) != co)
    throw std::invalid_argument("conv2d: channel mismatch " + detail::shape_str(x.shape()) +
                                " vs " + detail::shape_str(w.shape()));
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (wd + 2 * pad - kw) / stride + 1;
  if (ho < 1 || wo < 1) throw std::invalid_argument("conv2d: kernel larger than padded input");
  Tensor out({ho, wo, co});
  auto xat = [&](int y, int xx, int c) { return x[(static_cast<size_t>(y) * wd + xx) * ci + c]; };
  for (int oy = 0; oy < ho; ++oy)
    for (int ox = 0; ox < wo; ++ox) {
      double* op = out.data().data() + (static_cast<size_t>(oy) * wo + ox) * co;
      for (int c = 0; c < co; ++c) op[c] = b[c];
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * stride - pad + ky;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * stride - pad + kx;
          if (ix < 0 || ix >= wd) continue;
          for (int c = 0; c < ci; ++c) {
            const double xv = xat(iy, ix, c);
            const double* wp = w.data().data() + ((static_cast<size_t>(ky) * kw + kx) * ci + c) * co;
            for (int o = 0; o < co; ++o) op[o] += xv * wp[o];
          }
        }
      }
    }
  count_macs(static_cast<unsigned long long>(ho) * wo * co * kh * kw * ci);
  if (detail::should_record({&x, &w, &b})) {
    detail::record(out, [x, w, b, out, h, wd, ci, kh, kw, co, ho, wo, stride, pad]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      const bool gx_on = x.tracked(), gw_on = w.tracked(), gb_on = b.tracked();
      if (gb_on) {
        auto& gb = b.grad();
        for (int oy = 0; oy < ho; ++oy)
          for (int ox = 0; ox < wo; ++ox)
            for (int o = 0; o < co; ++o) gb[o] += g[(static_cast<size_t>(oy) * wo + ox) * co + o];
      }
      if (!gx_on && !gw_on) return;
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          const double* gp = g.data() + (static_cast<size_t>(oy) * wo + ox) * co;
          for (int ky = 0; ky < kh; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kw; ++kx) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= wd) continue;
              for (int c = 0; c < ci; ++c) {
                const size_t xi = (static_cast<size_t>(iy) * wd + ix) * ci + c;
                const size_t wi = ((static_cast<size_t>(ky) * kw + kx) * ci + c) * co;
                if (gx_on) {
                  double acc = 0.0;
                  for (int o = 0; o < co; ++o) acc += gp[o] * w[wi + o];
                  x.grad()[xi] += acc;
                }
                if (gw_on) {
                  const double xv = x[xi];
                  auto& gw = w.grad();
                  for (int o = 0; o < co; ++o) gw[wi + o] += xv * gp[o];
                }
              }
            }
          }
        }
    });
  }
  return out;
}

// x:[h,w,c], w:[k,k,c], b:[c]; stride 1, same padding.
inline Tensor depthwise_conv2d(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.ndim() != 3 || w.ndim() != 3 || b.ndim() != 1)
    throw std::invalid_argument("depthwise_conv2d: need x[h,w,c], w[k,k,c], b[c]");
  const int h = x.dim(0), wd = x.dim(1), c = x.dim(2);
  const int k = w.dim(0);
  if (w.dim(1) != k || w.dim(2) != c || b.dim(0) != c)
    throw std::invalid_argument("depthwise_conv2d: shape mismatch " +
                                detail::shape_str(w.shape()));
  const int pad = k / 2;
  Tensor out({h, wd, c});
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < wd; ++xx) {
      double* op = out.data().data() + (static_cast<size_t>(y) * wd + xx) * c;
      for (int ch = 0; ch < c; ++ch) op[ch] = b[ch];
      for (int ky = 0; ky < k; ++ky) {
        const int iy = y - pad + ky;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = xx - pad + kx;
          if (ix < 0 || ix >= wd) continue;
          const double* xp = x.data().data() + (static_cast<size_t>(iy) * wd + ix) * c;
          const double* wp = w.data().data() + (static_cast<size_t>(ky) * k + kx) * c;
          for (int ch = 0; ch < c; ++ch) op[ch] += xp[ch] * wp[ch];
        }
      }
    }
  count_macs(static_cast<unsigned long long>(h) * wd * c * k * k);
  if (detail::should_record({&x, &w, &b})) {
    detail::record(out, [x, w, b, out, h, wd, c, k, pad]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      const bool gx_on = x.tracked(), gw_on = w.tracked(), gb_on = b.tracked();
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < wd; ++xx) {
          const double* gp = g.data() + (static_cast<size_t>(y) * wd + xx) * c;
          if (gb_on) {
            auto& gb = b.grad();
            for (int ch = 0; ch < c; ++ch) gb[ch] += gp[ch];
          }
          if (!gx_on && !gw_on) continue;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = y - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = xx - pad + kx;
              if (ix < 0 || ix >= wd) continue;
              const size_t xi = (static_cast<size_t>(iy) * wd + ix) * c;
              const size_t wi = (static_cast<size_t>(ky) * k + kx) * c;
              for (int ch = 0; ch < c; ++ch) {
                if (gx_on) x.grad()[xi + ch] += gp[ch] * w[wi + ch];
                if (gw_on) w.grad()[wi + ch] += gp[ch] * x[xi + ch];
              }
            }
          }
        }
    });
  }
  return out;
}

inline Tensor upsample2x_nearest(const Tensor& x) {
  if (x.ndim() != 3) throw std::invalid_argument("upsample2x_nearest: need [h,w,c]");
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  Tensor out({2 * h, 2 * w, c});
  for (int y = 0; y < 2 * h; ++y)
    for (int xx = 0; xx < 2 * w; ++xx) {
      const double* xp = x.data().data() + (static_cast<size_t>(y / 2) * w + xx / 2) * c;
      double* op = out.data().data() + (static_cast<size_t>(y) * 2 * w + xx) * c;
      std::copy(xp, xp + c, op);
    }
  if (detail::should_record({&x})) {
    detail::record(out, [x, out, h, w, c]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      auto& gx = x.grad();
      for (int y = 0; y < 2 * h; ++y)
        for (int xx = 0; xx < 2 * w; ++xx) {
          const double* gp = g.data() + (static_cast<size_t>(y) * 2 * w + xx) * c;
          double* gxp = gx.data() + (static_cast<size_t>(y / 2) * w + xx / 2) * c;
          for (int ch = 0; ch < c; ++ch) gxp[ch] += gp[ch];
        }
    });
  }
  return out;
}

// 2x bilinear upsampling, half-pixel centers.
inline Tensor upsample2x_bilinear(const Tensor& x) {
  if (x.ndim() != 3) throw std::invalid_argument("upsample2x_bilinear: need [h,w,c]");
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const int ho = 2 * h, wo = 2 * w;
  struct Taps {
    int i0, i1;
    double w0, w1;
  };
  auto taps_for = [](int o, int n) {
    double src = (o + 0.5) / 2.0 - 0.5;
    int i0 = static_cast<int>(std::floor(src));
    double f = src - i0;
    Taps t;
    t.i0 = std::clamp(i0, 0, n - 1);
    t.i1 = std::clamp(i0 + 1, 0, n - 1);
    t.w0 = 1.0 - f;
    t.w1 = f;
    return t;
  };
  std::vector<Taps> ty(ho), tx(wo);
  for (int y = 0; y < ho; ++y) ty[y] = taps_for(y, h);
  for (int xx = 0; xx < wo; ++xx) tx[xx] = taps_for(xx, w);
  Tensor out({ho, wo, c});
  for (int y = 0; y < ho; ++y)
    for (int xx = 0; xx < wo; ++xx) {
      double* op = out.data().data() + (static_cast<size_t>(y) * wo + xx) * c;
      for (int ch = 0; ch < c; ++ch) {
        op[ch] = ty[y].w0 * (tx[xx].w0 * x[(static_cast<size_t>(ty[y].i0) * w + tx[xx].i0) * c + ch] +
                             tx[xx].w1 * x[(static_cast<size_t>(ty[y].i0) * w + tx[xx].i1) * c + ch]) +
                 ty[y].w1 * (tx[xx].w0 * x[(static_cast<size_t>(ty[y].i1) * w + tx[xx].i0) * c + ch] +
                             tx[xx].w1 * x[(static_cast<size_t>(ty[y].i1) * w + tx[xx].i1) * c + ch]);
      }
    }
  count_macs(4ull * out.size());
  if (detail::should_record({&x})) {
    detail::record(out, [x, out, ho, wo, w, c, ty, tx]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      auto& gx = x.grad();
      for (int y = 0; y < ho; ++y)
        for (int xx = 0; xx < wo; ++xx) {
          const double* gp = g.data() + (static_cast<size_t>(y) * wo + xx) * c;
          for (int ch = 0; ch < c; ++ch) {
            gx[(static_cast<size_t>(ty[y].i0) * w + tx[xx].i0) * c + ch] += ty[y].w0 * tx[xx].w0 * gp[ch];
            gx[(static_cast<size_t>(ty[y].i0) * w + tx[xx].i1) * c + ch] += ty[y].w0 * tx[xx].w1 * gp[ch];
            gx[(static_cast<size_t>(ty[y].i1) * w + tx[xx].i0) * c + ch] += ty[y].w1 * tx[xx].w0 * gp[ch];
            gx[(static_cast<size_t>(ty[y].i1) * w + tx[xx].i1) * c + ch] += ty[y].w1 * tx[xx].w1 * gp[ch];
          }
        }
    });
  }
  return out;
}

}  // namespace aost
