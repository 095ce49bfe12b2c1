#include <cmath>
#include <vector>

#include "cagnet/ops.hpp"

namespace cagnet {

namespace {

void check_affine_shapes(const Shape& xs, const Shape& gs, const Shape& bs) {
  const Shape want(1, xs.c, 1, 1);
  check(gs == want && bs == want,
        "norm affine parameters must be " + want.str() + ", got gamma " +
            gs.str() + " beta " + bs.str());
}

}  // namespace

VarId channel_affine(Tape& t, VarId x, VarId gamma, VarId beta) {
  const Tensor& xv = t.value(x);
  const Tensor& gv = t.value(gamma);
  const Tensor& bv = t.value(beta);
  const Shape& s = xv.shape();
  check_affine_shapes(s, gv.shape(), bv.shape());

  Tensor out(s);
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  for (int in = 0; in < s.n; ++in)
    for (int ic = 0; ic < s.c; ++ic) {
      const double ga = gv[ic], be = bv[ic];
      const double* src = xv.data() + (static_cast<std::size_t>(in) * s.c + ic) * plane;
      double* dst = out.data() + (static_cast<std::size_t>(in) * s.c + ic) * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] = ga * src[p] + be;
    }

  return t.record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta](const Tape& tp, const Tensor& g, GradStore& gs) {
        const Tensor& xv = tp.value(x);
        const Tensor& gv = tp.value(gamma);
        const Shape& s = xv.shape();
        Tensor& dx = gs.acc(x, s);
        Tensor& dga = gs.acc(gamma, gv.shape());
        Tensor& dbe = gs.acc(beta, gv.shape());
        const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
        for (int in = 0; in < s.n; ++in)
          for (int ic = 0; ic < s.c; ++ic) {
            const std::size_t off =
                (static_cast<std::size_t>(in) * s.c + ic) * plane;
            const double ga = gv[ic];
            double acc_g = 0.0, acc_b = 0.0;
            for (std::size_t p = 0; p < plane; ++p) {
              dx[off + p] += ga * g[off + p];
              acc_g += g[off + p] * xv[off + p];
              acc_b += g[off + p];
            }
            dga[ic] += acc_g;
            dbe[ic] += acc_b;
          }
      });
}

VarId batch_norm_train(Tape& t, VarId x, VarId gamma, VarId beta, double eps) {
  const Tensor& xv = t.value(x);
  const Tensor& gv = t.value(gamma);
  const Tensor& bv = t.value(beta);
  const Shape& s = xv.shape();
  check_affine_shapes(s, gv.shape(), bv.shape());

  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  const double m = static_cast<double>(s.n) * plane;
  std::vector<double> mean(s.c, 0.0), istd(s.c, 0.0);
  for (int ic = 0; ic < s.c; ++ic) {
    double acc = 0.0;
    for (int in = 0; in < s.n; ++in) {
      const double* src =
          xv.data() + (static_cast<std::size_t>(in) * s.c + ic) * plane;
      for (std::size_t p = 0; p < plane; ++p) acc += src[p];
    }
    mean[ic] = acc / m;
    double var = 0.0;
    for (int in = 0; in < s.n; ++in) {
      const double* src =
          xv.data() + (static_cast<std::size_t>(in) * s.c + ic) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        const double d = src[p] - mean[ic];
        var += d * d;
      }
    }
    istd[ic] = 1.0 / std::sqrt(var / m + eps);
  }

  Tensor out(s);
  for (int in = 0; in < s.n; ++in)
    for (int ic = 0; ic < s.c; ++ic) {
      const std::size_t off = (static_cast<std::size_t>(in) * s.c + ic) * plane;
      const double mu = mean[ic], is = istd[ic], ga = gv[ic], be = bv[ic];
      for (std::size_t p = 0; p < plane; ++p)
        out[off + p] = ga * (xv[off + p] - mu) * is + be;
    }

  return t.record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, mean, istd](const Tape& tp, const Tensor& g,
                                   GradStore& gs) {
        const Tensor& xv = tp.value(x);
        const Tensor& gv = tp.value(gamma);
        const Shape& s = xv.shape();
        Tensor& dx = gs.acc(x, s);
        Tensor& dga = gs.acc(gamma, gv.shape());
        Tensor& dbe = gs.acc(beta, gv.shape());
        const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
        const double m = static_cast<double>(s.n) * plane;
        for (int ic = 0; ic < s.c; ++ic) {
          const double mu = mean[ic], is = istd[ic], ga = gv[ic];
          // Two passes: channel sums of g and g*xhat, then the gradient
          // through the batch statistics.
          double sum_g = 0.0, sum_gx = 0.0;
          for (int in = 0; in < s.n; ++in) {
            const std::size_t off =
                (static_cast<std::size_t>(in) * s.c + ic) * plane;
            for (std::size_t p = 0; p < plane; ++p) {
              const double xhat = (xv[off + p] - mu) * is;
              sum_g += g[off + p];
              sum_gx += g[off + p] * xhat;
            }
          }
          dga[ic] += sum_gx;
          dbe[ic] += sum_g;
          const double mg = sum_g / m, mgx = sum_gx / m;
          for (int in = 0; in < s.n; ++in) {
            const std::size_t off =
                (static_cast<std::size_t>(in) * s.c + ic) * plane;
            for (std::size_t p = 0; p < plane; ++p) {
              const double xhat = (xv[off + p] - mu) * is;
              dx[off + p] += ga * is * (g[off + p] - mg - xhat * mgx);
            }
          }
        }
      });
}

VarId batch_norm_infer(Tape& t, VarId x, VarId gamma, VarId beta,
                       const Tensor& mean, const Tensor& var, double eps) {
  const Tensor& xv = t.value(x);
  const Tensor& gv = t.value(gamma);
  const Tensor& bv = t.value(beta);
  const Shape& s = xv.shape();
  check_affine_shapes(s, gv.shape(), bv.shape());
  check(mean.shape() == Shape(1, s.c, 1, 1) &&
            var.shape() == Shape(1, s.c, 1, 1),
        "running statistics must be (1,c,1,1)");

  std::vector<double> mu(s.c), istd(s.c);
  for (int ic = 0; ic < s.c; ++ic) {
    mu[ic] = mean[ic];
    istd[ic] = 1.0 / std::sqrt(var[ic] + eps);
  }

  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  Tensor out(s);
  for (int in = 0; in < s.n; ++in)
    for (int ic = 0; ic < s.c; ++ic) {
      const std::size_t off = (static_cast<std::size_t>(in) * s.c + ic) * plane;
      const double ga = gv[ic], be = bv[ic];
      for (std::size_t p = 0; p < plane; ++p)
        out[off + p] = ga * (xv[off + p] - mu[ic]) * istd[ic] + be;
    }

  return t.record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, mu, istd](const Tape& tp, const Tensor& g,
                                 GradStore& gs) {
        const Tensor& xv = tp.value(x);
        const Tensor& gv = tp.value(gamma);
        const Shape& s = xv.shape();
        Tensor& dx = gs.acc(x, s);
        Tensor& dga = gs.acc(gamma, gv.shape());
        Tensor& dbe = gs.acc(beta, gv.shape());
        const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
        for (int in = 0; in < s.n; ++in)
          for (int ic = 0; ic < s.c; ++ic) {
            const std::size_t off =
                (static_cast<std::size_t>(in) * s.c + ic) * plane;
            const double ga = gv[ic];
            for (std::size_t p = 0; p < plane; ++p) {
              const double xhat = (xv[off + p] - mu[ic]) * istd[ic];
              dx[off + p] += g[off + p] * ga * istd[ic];
              dga[ic] += g[off + p] * xhat;
              dbe[ic] += g[off + p];
            }
          }
      });
}

}  // namespace cagnet
