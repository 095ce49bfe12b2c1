#include "cagnet/loss.hpp"

#include <cmath>
#include <vector>

#include "cagnet/tensor.hpp"

namespace cagnet {

namespace {

void check_pair(const Tensor& s, const Tensor& g) {
  check(s.same_shape(g), "loss: prediction " + s.shape().str() +
                             " vs ground truth " + g.shape().str());
  for (std::size_t i = 0; i < s.size(); ++i)
    check(s[i] >= 0.0 && s[i] <= 1.0,
          "loss: prediction values must lie in [0,1]");
  for (std::size_t i = 0; i < g.size(); ++i)
    check(g[i] == 0.0 || g[i] == 1.0,
          "loss: ground truth must be exactly binary");
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

VarId designed_loss(Tape& t, VarId s, VarId g, const LossConfig& cfg) {
  const Tensor& sv = t.value(s);
  const Tensor& gv = t.value(g);
  check_pair(sv, gv);

  const Shape& sh = sv.shape();
  const int batch = sh.n;
  const std::size_t per = sv.size() / batch;
  const double eps = cfg.epsilon;

  double sum_p = 0.0, sum_r = 0.0, sum_mae = 0.0;
  for (int m = 0; m < batch; ++m) {
    const double* sp = sv.data() + m * per;
    const double* gp = gv.data() + m * per;
    double dot = 0.0, ss = 0.0, gg = 0.0, abs_err = 0.0;
    for (std::size_t i = 0; i < per; ++i) {
      dot += sp[i] * gp[i];
      ss += sp[i];
      gg += gp[i];
      abs_err += std::abs(sp[i] - gp[i]);
    }
    sum_p += dot / (ss + eps);
    sum_r += dot / (gg + eps);
    sum_mae += abs_err / static_cast<double>(per);
  }
  const double inv_m = 1.0 / batch;
  const double value = cfg.alpha1 * (1.0 - sum_p * inv_m) +
                       cfg.alpha2 * (1.0 - sum_r * inv_m) +
                       cfg.alpha3 * sum_mae * inv_m;

  return t.record(
      Tensor::scalar(value), {s, g},
      [s, g, cfg](const Tape& tp, const Tensor& gout, GradStore& gs) {
        const Tensor& sv = tp.value(s);
        const Tensor& gv = tp.value(g);
        Tensor& ds = gs.acc(s, sv.shape());
        Tensor& dg = gs.acc(g, gv.shape());
        const int batch = sv.shape().n;
        const std::size_t per = sv.size() / batch;
        const double eps = cfg.epsilon;
        const double go = gout[0];
        const double inv_m = 1.0 / batch;
        const double inv_k = 1.0 / static_cast<double>(per);
        for (int m = 0; m < batch; ++m) {
          const double* sp = sv.data() + m * per;
          const double* gp = gv.data() + m * per;
          double dot = 0.0, ss = 0.0, gg = 0.0;
          for (std::size_t i = 0; i < per; ++i) {
            dot += sp[i] * gp[i];
            ss += sp[i];
            gg += gp[i];
          }
          const double ds_den = ss + eps, dg_den = gg + eps;
          double* dsp = ds.data() + m * per;
          double* dgp = dg.data() + m * per;
          for (std::size_t i = 0; i < per; ++i) {
            const double sg = sign(sp[i] - gp[i]);
            // dP/ds = g/(ss+e) - dot/(ss+e)^2 ; dR/ds = g/(gg+e)
            const double dp_ds = gp[i] / ds_den - dot / (ds_den * ds_den);
            const double dr_ds = gp[i] / dg_den;
            dsp[i] += go * inv_m *
                      (-cfg.alpha1 * dp_ds - cfg.alpha2 * dr_ds +
                       cfg.alpha3 * sg * inv_k);
            // dP/dg = s/(ss+e) ; dR/dg = s/(gg+e) - dot/(gg+e)^2
            const double dp_dg = sp[i] / ds_den;
            const double dr_dg = sp[i] / dg_den - dot / (dg_den * dg_den);
            dgp[i] += go * inv_m *
                      (-cfg.alpha1 * dp_dg - cfg.alpha2 * dr_dg -
                       cfg.alpha3 * sg * inv_k);
          }
        }
      });
}

VarId cross_entropy_loss(Tape& t, VarId s, VarId g, double delta) {
  const Tensor& sv = t.value(s);
  const Tensor& gv = t.value(g);
  check_pair(sv, gv);
  check(delta > 0.0 && delta < 0.5, "clamp delta must lie in (0, 0.5)");

  const double inv_n = 1.0 / static_cast<double>(sv.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < sv.size(); ++i) {
    const double p = std::min(std::max(sv[i], delta), 1.0 - delta);
    acc -= gv[i] * std::log(p) + (1.0 - gv[i]) * std::log(1.0 - p);
  }

  return t.record(
      Tensor::scalar(acc * inv_n), {s, g},
      [s, g, delta, inv_n](const Tape& tp, const Tensor& gout,
                           GradStore& gs) {
        const Tensor& sv = tp.value(s);
        const Tensor& gv = tp.value(g);
        Tensor& ds = gs.acc(s, sv.shape());
        Tensor& dg = gs.acc(g, gv.shape());
        const double go = gout[0];
        for (std::size_t i = 0; i < sv.size(); ++i) {
          const double p = std::min(std::max(sv[i], delta), 1.0 - delta);
          // The clamp zeroes the gradient outside its active range.
          if (sv[i] > delta && sv[i] < 1.0 - delta)
            ds[i] += go * inv_n * (-gv[i] / p + (1.0 - gv[i]) / (1.0 - p));
          dg[i] += go * inv_n * (std::log(1.0 - p) - std::log(p));
        }
      });
}

}  // namespace cagnet
