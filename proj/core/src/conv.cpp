#include <Eigen/Core>
#include <algorithm>
#include <string>
#include <vector>

#include "cagnet/ops.hpp"

namespace cagnet {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

struct ConvDims {
  int cin, cout, kh, kw;
  int oh, ow;
  int k;  // im2col rows = cin*kh*kw
};

int out_extent(int in, int pad, int k, int dilation, int stride,
               const char* axis) {
  const int eff = (k - 1) * dilation + 1;
  const int span = in + 2 * pad - eff;
  check(span >= 0, std::string("conv kernel does not fit along ") + axis +
                       ": input " + std::to_string(in) + ", pad " +
                       std::to_string(pad) + ", effective kernel " +
                       std::to_string(eff));
  check(span % stride == 0,
        std::string("conv output extent along ") + axis +
            " is fractional: (" + std::to_string(in) + " + 2*" +
            std::to_string(pad) + " - " + std::to_string(eff) + ") / " +
            std::to_string(stride));
  return span / stride + 1;
}

ConvDims conv_dims(const Shape& xs, const Shape& ws, const Shape& bs,
                   const ConvSpec& sp) {
  check(sp.stride >= 1 && sp.dilation >= 1 && sp.pad_h >= 0 && sp.pad_w >= 0,
        "conv spec fields must be positive (stride/dilation) or >= 0 (pad)");
  check(ws.c == xs.c, "conv weight expects " + std::to_string(ws.c) +
                          " input channels, image has " +
                          std::to_string(xs.c));
  check(bs == Shape(1, ws.n, 1, 1),
        "conv bias must be (1," + std::to_string(ws.n) + ",1,1), got " +
            bs.str());
  ConvDims d;
  d.cin = xs.c;
  d.cout = ws.n;
  d.kh = ws.h;
  d.kw = ws.w;
  d.oh = out_extent(xs.h, sp.pad_h, ws.h, sp.dilation, sp.stride, "h");
  d.ow = out_extent(xs.w, sp.pad_w, ws.w, sp.dilation, sp.stride, "w");
  d.k = d.cin * d.kh * d.kw;
  return d;
}

// Unfolds output rows [oy0, oy1) of one image into a (k, strip*ow) patch
// matrix; out-of-range taps read as zero.
void im2col_strip(const double* img, const Shape& xs, const ConvDims& d,
                  const ConvSpec& sp, int oy0, int oy1, double* col) {
  const int cols = (oy1 - oy0) * d.ow;
  const std::size_t plane = static_cast<std::size_t>(xs.h) * xs.w;
  for (int ic = 0; ic < d.cin; ++ic) {
    const double* src = img + ic * plane;
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx) {
        double* row =
            col + (static_cast<std::size_t>(ic) * d.kh * d.kw +
                   static_cast<std::size_t>(ky) * d.kw + kx) *
                      cols;
        for (int oy = oy0; oy < oy1; ++oy) {
          const int iy = oy * sp.stride - sp.pad_h + ky * sp.dilation;
          double* dst = row + static_cast<std::size_t>(oy - oy0) * d.ow;
          if (iy < 0 || iy >= xs.h) {
            std::fill_n(dst, d.ow, 0.0);
            continue;
          }
          for (int ox = 0; ox < d.ow; ++ox) {
            const int ix = ox * sp.stride - sp.pad_w + kx * sp.dilation;
            dst[ox] = (ix >= 0 && ix < xs.w)
                          ? src[static_cast<std::size_t>(iy) * xs.w + ix]
                          : 0.0;
          }
        }
      }
    }
  }
}

// Scatters a (k, strip*ow) gradient patch matrix back onto the image grid.
void col2im_strip(const double* col, const Shape& xs, const ConvDims& d,
                  const ConvSpec& sp, int oy0, int oy1, double* dimg) {
  const int cols = (oy1 - oy0) * d.ow;
  const std::size_t plane = static_cast<std::size_t>(xs.h) * xs.w;
  for (int ic = 0; ic < d.cin; ++ic) {
    double* dst_plane = dimg + ic * plane;
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx) {
        const double* row =
            col + (static_cast<std::size_t>(ic) * d.kh * d.kw +
                   static_cast<std::size_t>(ky) * d.kw + kx) *
                      cols;
        for (int oy = oy0; oy < oy1; ++oy) {
          const int iy = oy * sp.stride - sp.pad_h + ky * sp.dilation;
          if (iy < 0 || iy >= xs.h) continue;
          const double* src = row + static_cast<std::size_t>(oy - oy0) * d.ow;
          for (int ox = 0; ox < d.ow; ++ox) {
            const int ix = ox * sp.stride - sp.pad_w + kx * sp.dilation;
            if (ix >= 0 && ix < xs.w)
              dst_plane[static_cast<std::size_t>(iy) * xs.w + ix] += src[ox];
          }
        }
      }
    }
  }
}

// Strip height keeping the patch matrix around 16 MB so big inputs never
// materialise a full-image im2col buffer.
int strip_rows(const ConvDims& d) {
  const std::size_t budget = std::size_t{1} << 21;  // doubles
  const std::size_t per_row = static_cast<std::size_t>(d.k) * d.ow;
  if (per_row == 0) return d.oh;
  const std::size_t rows = std::max<std::size_t>(1, budget / per_row);
  return static_cast<int>(std::min<std::size_t>(rows, d.oh));
}

}  // namespace

VarId conv2d(Tape& t, VarId x, VarId w, VarId b, const ConvSpec& spec) {
  const Tensor& xv = t.value(x);
  const Tensor& wv = t.value(w);
  const Tensor& bv = t.value(b);
  const Shape& xs = xv.shape();
  const ConvDims d = conv_dims(xs, wv.shape(), bv.shape(), spec);

  Tensor out(Shape(xs.n, d.cout, d.oh, d.ow));
  const std::size_t in_sz = static_cast<std::size_t>(xs.c) * xs.h * xs.w;
  const std::size_t out_sz = static_cast<std::size_t>(d.cout) * d.oh * d.ow;
  const int strip = strip_rows(d);
  std::vector<double> col(static_cast<std::size_t>(d.k) * strip * d.ow);
  CMapMat W(wv.data(), d.cout, d.k);

  for (int in = 0; in < xs.n; ++in) {
    const double* img = xv.data() + in * in_sz;
    double* dst = out.data() + in * out_sz;
    for (int oy0 = 0; oy0 < d.oh; oy0 += strip) {
      const int oy1 = std::min(d.oh, oy0 + strip);
      const int cols = (oy1 - oy0) * d.ow;
      im2col_strip(img, xs, d, spec, oy0, oy1, col.data());
      CMapMat C(col.data(), d.k, cols);
      MapMat O(dst, d.cout, static_cast<std::size_t>(d.oh) * d.ow);
      O.middleCols(static_cast<std::size_t>(oy0) * d.ow, cols).noalias() =
          W * C;
    }
    for (int oc = 0; oc < d.cout; ++oc) {
      const double bias = bv[oc];
      double* ch = dst + static_cast<std::size_t>(oc) * d.oh * d.ow;
      for (int p = 0; p < d.oh * d.ow; ++p) ch[p] += bias;
    }
  }

  return t.record(
      std::move(out), {x, w, b},
      [x, w, b, spec, d](const Tape& tp, const Tensor& g, GradStore& gs) {
        const Tensor& xv = tp.value(x);
        const Tensor& wv = tp.value(w);
        const Shape& xs = xv.shape();
        Tensor& dx = gs.acc(x, xs);
        Tensor& dw = gs.acc(w, wv.shape());
        Tensor& db = gs.acc(b, tp.shape(b));

        const std::size_t in_sz = static_cast<std::size_t>(xs.c) * xs.h * xs.w;
        const std::size_t out_sz =
            static_cast<std::size_t>(d.cout) * d.oh * d.ow;
        const int strip = strip_rows(d);
        std::vector<double> col(static_cast<std::size_t>(d.k) * strip * d.ow);
        std::vector<double> dcol(col.size());
        CMapMat W(wv.data(), d.cout, d.k);
        MapMat DW(dw.data(), d.cout, d.k);

        for (int in = 0; in < xs.n; ++in) {
          const double* img = xv.data() + in * in_sz;
          const double* gout = g.data() + in * out_sz;
          CMapMat G(gout, d.cout, static_cast<std::size_t>(d.oh) * d.ow);
          for (int oy0 = 0; oy0 < d.oh; oy0 += strip) {
            const int oy1 = std::min(d.oh, oy0 + strip);
            const int cols = (oy1 - oy0) * d.ow;
            im2col_strip(img, xs, d, spec, oy0, oy1, col.data());
            CMapMat C(col.data(), d.k, cols);
            auto Gs = G.middleCols(static_cast<std::size_t>(oy0) * d.ow, cols);
            DW.noalias() += Gs * C.transpose();
            MapMat DC(dcol.data(), d.k, cols);
            DC.noalias() = W.transpose() * Gs;
            col2im_strip(dcol.data(), xs, d, spec, oy0, oy1,
                         dx.data() + in * in_sz);
          }
          for (int oc = 0; oc < d.cout; ++oc) {
            double acc = 0.0;
            const double* ch = gout + static_cast<std::size_t>(oc) * d.oh * d.ow;
            for (int p = 0; p < d.oh * d.ow; ++p) acc += ch[p];
            db[oc] += acc;
          }
        }
      });
}

VarId dilated_conv2d(Tape& t, VarId x, VarId w, VarId b, int dilation,
                     int pad) {
  ConvSpec sp;
  sp.dilation = dilation;
  sp.pad_h = pad;
  sp.pad_w = pad;
  return conv2d(t, x, w, b, sp);
}

}  // namespace cagnet
