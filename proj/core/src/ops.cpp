#include "cagnet/ops.hpp"

#include <algorithm>
#include <cmath>

namespace cagnet {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// The id the next recorded node will get; lets backward closures read their
// own output value back off the tape instead of keeping a copy alive.
VarId next_id(const Tape& t) { return static_cast<VarId>(t.size()); }

}  // namespace

VarId add(Tape& t, VarId a, VarId b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  check(av.same_shape(bv), "add: shape mismatch " + av.shape().str() + " vs " +
                               bv.shape().str());
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return t.record(std::move(out), {a, b},
                  [a, b](const Tape& tp, const Tensor& g, GradStore& gs) {
                    Tensor& da = gs.acc(a, tp.shape(a));
                    Tensor& db = gs.acc(b, tp.shape(b));
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      da[i] += g[i];
                      db[i] += g[i];
                    }
                  });
}

VarId scale(Tape& t, VarId x, double k) {
  const Tensor& xv = t.value(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = k * xv[i];
  return t.record(std::move(out), {x},
                  [x, k](const Tape& tp, const Tensor& g, GradStore& gs) {
                    Tensor& dx = gs.acc(x, tp.shape(x));
                    for (std::size_t i = 0; i < g.size(); ++i)
                      dx[i] += k * g[i];
                  });
}

VarId add_const(Tape& t, VarId x, double k) {
  const Tensor& xv = t.value(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] + k;
  return t.record(std::move(out), {x},
                  [x](const Tape& tp, const Tensor& g, GradStore& gs) {
                    Tensor& dx = gs.acc(x, tp.shape(x));
                    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
                  });
}

VarId relu(Tape& t, VarId x) {
  const Tensor& xv = t.value(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return t.record(std::move(out), {x},
                  [x](const Tape& tp, const Tensor& g, GradStore& gs) {
                    const Tensor& xv = tp.value(x);
                    Tensor& dx = gs.acc(x, xv.shape());
                    for (std::size_t i = 0; i < g.size(); ++i)
                      if (xv[i] > 0.0) dx[i] += g[i];
                  });
}

VarId sigmoid(Tape& t, VarId x) {
  const Tensor& xv = t.value(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(xv[i]);
  const VarId y = next_id(t);
  return t.record(std::move(out), {x},
                  [x, y](const Tape& tp, const Tensor& g, GradStore& gs) {
                    const Tensor& yv = tp.value(y);
                    Tensor& dx = gs.acc(x, tp.shape(x));
                    for (std::size_t i = 0; i < g.size(); ++i)
                      dx[i] += g[i] * yv[i] * (1.0 - yv[i]);
                  });
}

VarId mul_broadcast(Tape& t, VarId x, VarId w) {
  const Tensor& xv = t.value(x);
  const Tensor& wv = t.value(w);
  const Shape& xs = xv.shape();
  const Shape& ws = wv.shape();
  const bool ok = (ws.n == xs.n || ws.n == 1) && (ws.c == xs.c || ws.c == 1) &&
                  (ws.h == xs.h || ws.h == 1) && (ws.w == xs.w || ws.w == 1);
  check(ok, "mul_broadcast: weight " + ws.str() +
                " does not broadcast over " + xs.str());

  auto windex = [ws](int in, int ic, int iy, int ix) {
    return ((static_cast<std::size_t>(ws.n == 1 ? 0 : in) * ws.c +
             (ws.c == 1 ? 0 : ic)) *
                ws.h +
            (ws.h == 1 ? 0 : iy)) *
               ws.w +
           (ws.w == 1 ? 0 : ix);
  };

  Tensor out(xs);
  std::size_t i = 0;
  for (int in = 0; in < xs.n; ++in)
    for (int ic = 0; ic < xs.c; ++ic)
      for (int iy = 0; iy < xs.h; ++iy)
        for (int ix = 0; ix < xs.w; ++ix, ++i)
          out[i] = xv[i] * wv[windex(in, ic, iy, ix)];

  return t.record(
      std::move(out), {x, w},
      [x, w, windex](const Tape& tp, const Tensor& g, GradStore& gs) {
        const Tensor& xv = tp.value(x);
        const Tensor& wv = tp.value(w);
        const Shape& xs = xv.shape();
        Tensor& dx = gs.acc(x, xs);
        Tensor& dw = gs.acc(w, wv.shape());
        std::size_t i = 0;
        for (int in = 0; in < xs.n; ++in)
          for (int ic = 0; ic < xs.c; ++ic)
            for (int iy = 0; iy < xs.h; ++iy)
              for (int ix = 0; ix < xs.w; ++ix, ++i) {
                const std::size_t wi = windex(in, ic, iy, ix);
                dx[i] += g[i] * wv[wi];
                dw[wi] += g[i] * xv[i];
              }
      });
}

VarId softmax_channels(Tape& t, VarId x) {
  const Tensor& xv = t.value(x);
  const Shape& s = xv.shape();
  Tensor out(s);
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  for (int in = 0; in < s.n; ++in) {
    for (std::size_t p = 0; p < plane; ++p) {
      const std::size_t base = static_cast<std::size_t>(in) * s.c * plane + p;
      double m = xv[base];
      for (int c = 1; c < s.c; ++c)
        m = std::max(m, xv[base + static_cast<std::size_t>(c) * plane]);
      double z = 0.0;
      for (int c = 0; c < s.c; ++c) {
        const std::size_t i = base + static_cast<std::size_t>(c) * plane;
        out[i] = std::exp(xv[i] - m);
        z += out[i];
      }
      for (int c = 0; c < s.c; ++c)
        out[base + static_cast<std::size_t>(c) * plane] /= z;
    }
  }
  const VarId y = next_id(t);
  return t.record(
      std::move(out), {x},
      [x, y](const Tape& tp, const Tensor& g, GradStore& gs) {
        const Tensor& yv = tp.value(y);
        const Shape& s = yv.shape();
        Tensor& dx = gs.acc(x, s);
        const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
        for (int in = 0; in < s.n; ++in) {
          for (std::size_t p = 0; p < plane; ++p) {
            const std::size_t base =
                static_cast<std::size_t>(in) * s.c * plane + p;
            double dot = 0.0;
            for (int c = 0; c < s.c; ++c) {
              const std::size_t i = base + static_cast<std::size_t>(c) * plane;
              dot += g[i] * yv[i];
            }
            for (int c = 0; c < s.c; ++c) {
              const std::size_t i = base + static_cast<std::size_t>(c) * plane;
              dx[i] += yv[i] * (g[i] - dot);
            }
          }
        }
      });
}

VarId maxpool2(Tape& t, VarId x) {
  const Tensor& xv = t.value(x);
  const Shape& s = xv.shape();
  check(s.h % 2 == 0 && s.w % 2 == 0,
        "maxpool2 needs even spatial extents, got " + s.str());
  const Shape os(s.n, s.c, s.h / 2, s.w / 2);
  Tensor out(os);
  for (int in = 0; in < s.n; ++in)
    for (int ic = 0; ic < s.c; ++ic)
      for (int oy = 0; oy < os.h; ++oy)
        for (int ox = 0; ox < os.w; ++ox) {
          double m = xv.at(in, ic, 2 * oy, 2 * ox);
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx)
              m = std::max(m, xv.at(in, ic, 2 * oy + dy, 2 * ox + dx));
          out.at(in, ic, oy, ox) = m;
        }
  return t.record(
      std::move(out), {x},
      [x](const Tape& tp, const Tensor& g, GradStore& gs) {
        const Tensor& xv = tp.value(x);
        const Shape& s = xv.shape();
        const Shape& os = g.shape();
        Tensor& dx = gs.acc(x, s);
        for (int in = 0; in < s.n; ++in)
          for (int ic = 0; ic < s.c; ++ic)
            for (int oy = 0; oy < os.h; ++oy)
              for (int ox = 0; ox < os.w; ++ox) {
                // First maximum in scan order wins, matching the forward.
                int by = 2 * oy, bx = 2 * ox;
                double m = xv.at(in, ic, by, bx);
                for (int dy = 0; dy < 2; ++dy)
                  for (int dxi = 0; dxi < 2; ++dxi) {
                    const double v = xv.at(in, ic, 2 * oy + dy, 2 * ox + dxi);
                    if (v > m) {
                      m = v;
                      by = 2 * oy + dy;
                      bx = 2 * ox + dxi;
                    }
                  }
                dx.at(in, ic, by, bx) += g.at(in, ic, oy, ox);
              }
      });
}

VarId global_avg_pool(Tape& t, VarId x) {
  const Tensor& xv = t.value(x);
  const Shape& s = xv.shape();
  Tensor out(Shape(s.n, s.c, 1, 1));
  const double inv = 1.0 / (static_cast<double>(s.h) * s.w);
  for (int in = 0; in < s.n; ++in)
    for (int ic = 0; ic < s.c; ++ic) {
      double acc = 0.0;
      for (int iy = 0; iy < s.h; ++iy)
        for (int ix = 0; ix < s.w; ++ix) acc += xv.at(in, ic, iy, ix);
      out.at(in, ic, 0, 0) = acc * inv;
    }
  return t.record(std::move(out), {x},
                  [x](const Tape& tp, const Tensor& g, GradStore& gs) {
                    const Shape& s = tp.shape(x);
                    Tensor& dx = gs.acc(x, s);
                    const double inv =
                        1.0 / (static_cast<double>(s.h) * s.w);
                    for (int in = 0; in < s.n; ++in)
                      for (int ic = 0; ic < s.c; ++ic) {
                        const double gv = g.at(in, ic, 0, 0) * inv;
                        for (int iy = 0; iy < s.h; ++iy)
                          for (int ix = 0; ix < s.w; ++ix)
                            dx.at(in, ic, iy, ix) += gv;
                      }
                  });
}

double src_coord(int u, int in_size, int out_size) {
  if (in_size <= 1 || out_size <= 1) return 0.0;
  return static_cast<double>(u) * (in_size - 1) / (out_size - 1);
}

namespace {

struct Lerp {
  int lo, hi;
  double w_lo, w_hi;
};

Lerp lerp_at(int u, int in_size, int out_size) {
  const double s = src_coord(u, in_size, out_size);
  const int lo = static_cast<int>(std::floor(s));
  const int hi = std::min(lo + 1, in_size - 1);
  const double f = s - lo;
  return {lo, hi, 1.0 - f, f};
}

}  // namespace

VarId upsample_bilinear(Tape& t, VarId x, int factor) {
  check(factor >= 1, "upsample factor must be >= 1");
  const Tensor& xv = t.value(x);
  const Shape& s = xv.shape();
  const Shape os(s.n, s.c, s.h * factor, s.w * factor);
  Tensor out(os);
  for (int oy = 0; oy < os.h; ++oy) {
    const Lerp ly = lerp_at(oy, s.h, os.h);
    for (int ox = 0; ox < os.w; ++ox) {
      const Lerp lx = lerp_at(ox, s.w, os.w);
      for (int in = 0; in < s.n; ++in)
        for (int ic = 0; ic < s.c; ++ic) {
          out.at(in, ic, oy, ox) =
              ly.w_lo * (lx.w_lo * xv.at(in, ic, ly.lo, lx.lo) +
                         lx.w_hi * xv.at(in, ic, ly.lo, lx.hi)) +
              ly.w_hi * (lx.w_lo * xv.at(in, ic, ly.hi, lx.lo) +
                         lx.w_hi * xv.at(in, ic, ly.hi, lx.hi));
        }
    }
  }
  return t.record(
      std::move(out), {x},
      [x](const Tape& tp, const Tensor& g, GradStore& gs) {
        const Shape& s = tp.shape(x);
        const Shape& os = g.shape();
        Tensor& dx = gs.acc(x, s);
        for (int oy = 0; oy < os.h; ++oy) {
          const Lerp ly = lerp_at(oy, s.h, os.h);
          for (int ox = 0; ox < os.w; ++ox) {
            const Lerp lx = lerp_at(ox, s.w, os.w);
            for (int in = 0; in < s.n; ++in)
              for (int ic = 0; ic < s.c; ++ic) {
                const double gv = g.at(in, ic, oy, ox);
                dx.at(in, ic, ly.lo, lx.lo) += gv * ly.w_lo * lx.w_lo;
                dx.at(in, ic, ly.lo, lx.hi) += gv * ly.w_lo * lx.w_hi;
                dx.at(in, ic, ly.hi, lx.lo) += gv * ly.w_hi * lx.w_lo;
                dx.at(in, ic, ly.hi, lx.hi) += gv * ly.w_hi * lx.w_hi;
              }
          }
        }
      });
}

Tensor resize_bilinear(const Tensor& x, int oh, int ow) {
  check(oh >= 1 && ow >= 1, "resize target must be positive");
  const Shape& s = x.shape();
  Tensor out(Shape(s.n, s.c, oh, ow));
  for (int oy = 0; oy < oh; ++oy) {
    const Lerp ly = lerp_at(oy, s.h, oh);
    for (int ox = 0; ox < ow; ++ox) {
      const Lerp lx = lerp_at(ox, s.w, ow);
      for (int in = 0; in < s.n; ++in)
        for (int ic = 0; ic < s.c; ++ic) {
          out.at(in, ic, oy, ox) =
              ly.w_lo * (lx.w_lo * x.at(in, ic, ly.lo, lx.lo) +
                         lx.w_hi * x.at(in, ic, ly.lo, lx.hi)) +
              ly.w_hi * (lx.w_lo * x.at(in, ic, ly.hi, lx.lo) +
                         lx.w_hi * x.at(in, ic, ly.hi, lx.hi));
        }
    }
  }
  return out;
}

VarId concat_channels(Tape& t, std::span<const VarId> xs) {
  check(!xs.empty(), "concat_channels needs at least one input");
  const Shape& s0 = t.shape(xs[0]);
  int total_c = 0;
  for (VarId id : xs) {
    const Shape& s = t.shape(id);
    check(s.n == s0.n && s.h == s0.h && s.w == s0.w,
          "concat_channels: incompatible shape " + s.str() + " vs " +
              s0.str());
    total_c += s.c;
  }
  Tensor out(Shape(s0.n, total_c, s0.h, s0.w));
  const std::size_t plane = static_cast<std::size_t>(s0.h) * s0.w;
  for (int in = 0; in < s0.n; ++in) {
    int oc = 0;
    for (VarId id : xs) {
      const Tensor& v = t.value(id);
      const int c = v.shape().c;
      std::copy_n(v.data() + static_cast<std::size_t>(in) * c * plane,
                  static_cast<std::size_t>(c) * plane,
                  out.data() + (static_cast<std::size_t>(in) * total_c + oc) *
                                   plane);
      oc += c;
    }
  }
  std::vector<VarId> inputs(xs.begin(), xs.end());
  return t.record(
      std::move(out), inputs,
      [inputs](const Tape& tp, const Tensor& g, GradStore& gs) {
        const Shape& os = g.shape();
        const std::size_t plane = static_cast<std::size_t>(os.h) * os.w;
        for (int in = 0; in < os.n; ++in) {
          int oc = 0;
          for (VarId id : inputs) {
            const Shape& s = tp.shape(id);
            Tensor& dx = gs.acc(id, s);
            const std::size_t n_src =
                (static_cast<std::size_t>(in) * os.c + oc) * plane;
            const std::size_t n_dst =
                static_cast<std::size_t>(in) * s.c * plane;
            for (std::size_t i = 0; i < static_cast<std::size_t>(s.c) * plane;
                 ++i)
              dx[n_dst + i] += g[n_src + i];
            oc += s.c;
          }
        }
      });
}

VarId slice_channels(Tape& t, VarId x, int first, int count) {
  const Tensor& xv = t.value(x);
  const Shape& s = xv.shape();
  check(first >= 0 && count >= 1 && first + count <= s.c,
        "slice_channels [" + std::to_string(first) + ", +" +
            std::to_string(count) + ") out of range for " + s.str());
  Tensor out(Shape(s.n, count, s.h, s.w));
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  for (int in = 0; in < s.n; ++in)
    std::copy_n(
        xv.data() + (static_cast<std::size_t>(in) * s.c + first) * plane,
        static_cast<std::size_t>(count) * plane,
        out.data() + static_cast<std::size_t>(in) * count * plane);
  return t.record(
      std::move(out), {x},
      [x, first, count](const Tape& tp, const Tensor& g, GradStore& gs) {
        const Shape& s = tp.shape(x);
        Tensor& dx = gs.acc(x, s);
        const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
        for (int in = 0; in < s.n; ++in) {
          const std::size_t dst =
              (static_cast<std::size_t>(in) * s.c + first) * plane;
          const std::size_t src =
              static_cast<std::size_t>(in) * count * plane;
          for (std::size_t i = 0; i < static_cast<std::size_t>(count) * plane;
               ++i)
            dx[dst + i] += g[src + i];
        }
      });
}

VarId sum_all(Tape& t, VarId x) {
  const Tensor& xv = t.value(x);
  double acc = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) acc += xv[i];
  return t.record(Tensor::scalar(acc), {x},
                  [x](const Tape& tp, const Tensor& g, GradStore& gs) {
                    Tensor& dx = gs.acc(x, tp.shape(x));
                    for (std::size_t i = 0; i < dx.size(); ++i)
                      dx[i] += g[0];
                  });
}

VarId mean_all(Tape& t, VarId x) {
  const Tensor& xv = t.value(x);
  double acc = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) acc += xv[i];
  const double inv = 1.0 / static_cast<double>(xv.size());
  return t.record(Tensor::scalar(acc * inv), {x},
                  [x, inv](const Tape& tp, const Tensor& g, GradStore& gs) {
                    Tensor& dx = gs.acc(x, tp.shape(x));
                    for (std::size_t i = 0; i < dx.size(); ++i)
                      dx[i] += g[0] * inv;
                  });
}

}  // namespace cagnet
