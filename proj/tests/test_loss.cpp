#include <cmath>
#include <stdexcept>

#include <doctest.h>

#include "cagnet/loss.hpp"
#include "cagnet/rng.hpp"

using namespace cagnet;

namespace {

// Plain-loop reimplementation used as the oracle.
double designed_oracle(const Tensor& s, const Tensor& g,
                       const LossConfig& cfg) {
  const Shape& sh = s.shape();
  const std::size_t per = static_cast<std::size_t>(sh.c) * sh.h * sh.w;
  double psum = 0.0, rsum = 0.0, msum = 0.0;
  for (int n = 0; n < sh.n; ++n) {
    double dot = 0.0, ssum = 0.0, gsum = 0.0, err = 0.0;
    for (std::size_t i = 0; i < per; ++i) {
      const double sv = s[n * per + i];
      const double gv = g[n * per + i];
      dot += sv * gv;
      ssum += sv;
      gsum += gv;
      err += std::abs(sv - gv);
    }
    psum += dot / (ssum + cfg.epsilon);
    rsum += dot / (gsum + cfg.epsilon);
    msum += err / static_cast<double>(per);
  }
  const double m = sh.n;
  return cfg.alpha1 * (1.0 - psum / m) + cfg.alpha2 * (1.0 - rsum / m) +
         cfg.alpha3 * (msum / m);
}

double ce_oracle(const Tensor& s, const Tensor& g, double delta) {
  double sum = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double p = std::min(1.0 - delta, std::max(delta, s[i]));
    sum += -(g[i] * std::log(p) + (1.0 - g[i]) * std::log(1.0 - p));
  }
  return sum / static_cast<double>(s.size());
}

Tensor random_pred(const Shape& sh, Rng& rng) {
  Tensor t(sh);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(0.02, 0.98);
  return t;
}

Tensor random_mask(const Shape& sh, Rng& rng) {
  Tensor t(sh);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.coin() ? 1.0 : 0.0;
  return t;
}

}  // namespace

TEST_CASE("loss: designed loss matches the loop oracle") {
  Rng rng(61);
  const Shape sh(3, 1, 4, 5);
  const Tensor s = random_pred(sh, rng);
  const Tensor g = random_mask(sh, rng);
  const LossConfig cfg;

  Tape t;
  const VarId loss = designed_loss(t, t.leaf(s), t.leaf(g), cfg);
  CHECK(t.value(loss)[0] ==
        doctest::Approx(designed_oracle(s, g, cfg)).epsilon(1e-12));
}

TEST_CASE("loss: designed loss respects the term weights") {
  Rng rng(62);
  const Shape sh(2, 1, 3, 3);
  const Tensor s = random_pred(sh, rng);
  const Tensor g = random_mask(sh, rng);

  LossConfig cfg;
  cfg.alpha1 = 0.3;
  cfg.alpha2 = 2.0;
  cfg.alpha3 = 0.0;
  Tape t;
  const VarId loss = designed_loss(t, t.leaf(s), t.leaf(g), cfg);
  CHECK(t.value(loss)[0] ==
        doctest::Approx(designed_oracle(s, g, cfg)).epsilon(1e-12));
}

TEST_CASE("loss: perfect prediction scores near zero") {
  Rng rng(63);
  const Shape sh(2, 1, 4, 4);
  Tensor g = random_mask(sh, rng);
  g[0] = 1.0;  // keep at least one foreground pixel per image
  g[sh.numel() / 2] = 1.0;

  Tape t;
  const VarId loss = designed_loss(t, t.leaf(g), t.leaf(g), LossConfig{});
  CHECK(t.value(loss)[0] < 1e-6);
  CHECK(t.value(loss)[0] >= 0.0);
}

TEST_CASE("loss: all-background mask saturates the recall term") {
  const Shape sh(1, 1, 2, 2);
  const Tensor g = Tensor::zeros(sh);
  const Tensor s = Tensor::full(sh, 0.25);
  const LossConfig cfg;

  Tape t;
  const VarId loss = designed_loss(t, t.leaf(s), t.leaf(g), cfg);
  // P = 0, R = 0, MAE = 0.25
  CHECK(t.value(loss)[0] ==
        doctest::Approx(cfg.alpha1 + cfg.alpha2 + cfg.alpha3 * 0.25)
            .epsilon(1e-9));
}

TEST_CASE("loss: designed loss is batch-order invariant") {
  Rng rng(64);
  const Shape one(1, 1, 3, 3);
  const Tensor sa = random_pred(one, rng), sb = random_pred(one, rng);
  const Tensor ga = random_mask(one, rng), gb = random_mask(one, rng);

  auto pack = [](const Tensor& first, const Tensor& second) {
    Tensor out(Shape(2, 1, 3, 3));
    for (int i = 0; i < 9; ++i) {
      out[i] = first[i];
      out[9 + i] = second[i];
    }
    return out;
  };

  Tape t;
  const VarId l1 =
      designed_loss(t, t.leaf(pack(sa, sb)), t.leaf(pack(ga, gb)), {});
  const VarId l2 =
      designed_loss(t, t.leaf(pack(sb, sa)), t.leaf(pack(gb, ga)), {});
  CHECK(t.value(l1)[0] == doctest::Approx(t.value(l2)[0]).epsilon(1e-15));
}

TEST_CASE("loss: designed gradient agrees with central differences") {
  Rng rng(65);
  const Shape sh(2, 1, 3, 3);
  Tensor s = random_pred(sh, rng);
  const Tensor g = random_mask(sh, rng);
  const LossConfig cfg;

  Tape t;
  const VarId sv = t.leaf(s);
  const VarId loss = designed_loss(t, sv, t.leaf(g), cfg);
  const GradStore grads = t.backward(loss);

  const double h = 1e-7;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double saved = s[i];
    s[i] = saved + h;
    const double up = designed_oracle(s, g, cfg);
    s[i] = saved - h;
    const double down = designed_oracle(s, g, cfg);
    s[i] = saved;
    const double num = (up - down) / (2 * h);
    CHECK(grads.at(sv)[i] == doctest::Approx(num).epsilon(1e-5));
  }
}

TEST_CASE("loss: designed loss validates its inputs") {
  Tape t;
  const VarId good_g =
      t.leaf(Tensor::from_values(Shape(1, 1, 1, 2), {0, 1}));
  const VarId bad_s =
      t.leaf(Tensor::from_values(Shape(1, 1, 1, 2), {0.5, 1.5}));
  CHECK_THROWS_AS(designed_loss(t, bad_s, good_g, {}), std::invalid_argument);

  const VarId neg_s =
      t.leaf(Tensor::from_values(Shape(1, 1, 1, 2), {-0.1, 0.5}));
  CHECK_THROWS_AS(designed_loss(t, neg_s, good_g, {}), std::invalid_argument);

  const VarId ok_s =
      t.leaf(Tensor::from_values(Shape(1, 1, 1, 2), {0.5, 0.5}));
  const VarId soft_g =
      t.leaf(Tensor::from_values(Shape(1, 1, 1, 2), {0.25, 1.0}));
  CHECK_THROWS_AS(designed_loss(t, ok_s, soft_g, {}), std::invalid_argument);

  const VarId wrong_shape = t.leaf(Tensor(Shape(1, 1, 2, 1)));
  CHECK_THROWS_AS(designed_loss(t, ok_s, wrong_shape, {}),
                  std::invalid_argument);
}

TEST_CASE("loss: cross entropy matches the loop oracle") {
  Rng rng(66);
  const Shape sh(2, 1, 4, 4);
  const Tensor s = random_pred(sh, rng);
  const Tensor g = random_mask(sh, rng);

  Tape t;
  const VarId loss = cross_entropy_loss(t, t.leaf(s), t.leaf(g));
  CHECK(t.value(loss)[0] ==
        doctest::Approx(ce_oracle(s, g, 1e-7)).epsilon(1e-12));
}

TEST_CASE("loss: cross entropy gradient and clamp behaviour") {
  Rng rng(67);
  const Shape sh(1, 1, 2, 3);
  Tensor s = random_pred(sh, rng);
  s[0] = 1e-9;  // inside the clamp: no gradient flows
  const Tensor g = random_mask(sh, rng);

  Tape t;
  const VarId sv = t.leaf(s);
  const GradStore grads = t.backward(cross_entropy_loss(t, sv, t.leaf(g)));
  CHECK(grads.at(sv)[0] == 0.0);

  const double h = 1e-8;
  for (std::size_t i = 1; i < s.size(); ++i) {
    const double saved = s[i];
    s[i] = saved + h;
    const double up = ce_oracle(s, g, 1e-7);
    s[i] = saved - h;
    const double down = ce_oracle(s, g, 1e-7);
    s[i] = saved;
    CHECK(grads.at(sv)[i] ==
          doctest::Approx((up - down) / (2 * h)).epsilon(1e-4));
  }
}
