#include <cmath>
#include <stdexcept>

#include <doctest.h>

#include "cagnet/blocks.hpp"
#include "cagnet/rng.hpp"

using namespace cagnet;

namespace {

Tensor random_tensor(const Shape& s, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void zero_param(ParamStore& ps, const std::string& name) {
  ps.at(name).fill(0.0);
}

}  // namespace

TEST_CASE("blocks: norm layer batch mode updates running statistics") {
  const NormLayer nl = NormLayer::make("n", 2, NormMode::batch);
  ParamStore params, buffers;
  nl.init(params, buffers);
  CHECK(params.at("n.gamma")[0] == 1.0);
  CHECK(params.at("n.beta")[1] == 0.0);
  CHECK(buffers.at("n.running_mean")[0] == 0.0);
  CHECK(buffers.at("n.running_var")[0] == 1.0);

  Rng rng(4);
  const Tensor x = random_tensor(Shape(2, 2, 3, 3), rng, -2.0, 2.0);
  double mean0 = 0.0;
  for (int n = 0; n < 2; ++n)
    for (int y = 0; y < 3; ++y)
      for (int w = 0; w < 3; ++w) mean0 += x.at(n, 0, y, w);
  mean0 /= 18.0;
  double var0 = 0.0;
  for (int n = 0; n < 2; ++n)
    for (int y = 0; y < 3; ++y)
      for (int w = 0; w < 3; ++w) {
        const double d = x.at(n, 0, y, w) - mean0;
        var0 += d * d;
      }
  var0 /= 18.0;

  Tape tape;
  Forward f{tape, params, &buffers, /*training=*/true};
  nl.forward(f, tape.leaf(x));
  CHECK(buffers.at("n.running_mean")[0] ==
        doctest::Approx(0.9 * 0.0 + 0.1 * mean0).epsilon(1e-12));
  CHECK(buffers.at("n.running_var")[0] ==
        doctest::Approx(0.9 * 1.0 + 0.1 * var0).epsilon(1e-12));
}

TEST_CASE("blocks: norm layer none mode is a per-channel affine") {
  const NormLayer nl = NormLayer::make("n", 1, NormMode::none);
  ParamStore params, buffers;
  nl.init(params, buffers);
  params.at("n.gamma")[0] = 3.0;
  params.at("n.beta")[0] = -1.0;

  Tape tape;
  Forward f{tape, params, &buffers, true};
  const VarId y =
      nl.forward(f, tape.leaf(Tensor::from_values(Shape(1, 1, 1, 2), {1, 2})));
  CHECK(tape.value(y)[0] == 2.0);
  CHECK(tape.value(y)[1] == 5.0);
}

TEST_CASE("blocks: gcn path equals the dense rank-1 kernel") {
  const int k = 5;
  const GcnBlock g = GcnBlock::make("g", k, 1, 1);
  ParamStore params;
  Rng rng(12);
  g.init(params, rng);

  // keep only the (k x 1 -> 1 x k) branch, drop all biases
  zero_param(params, "g.b1.weight");
  zero_param(params, "g.b2.weight");
  for (const char* n : {"g.a1.bias", "g.a2.bias", "g.b1.bias", "g.b2.bias"})
    zero_param(params, n);

  const Tensor& u = params.at("g.a1.weight");  // (1,1,k,1)
  const Tensor& v = params.at("g.a2.weight");  // (1,1,1,k)
  REQUIRE(u.shape() == Shape(1, 1, k, 1));
  REQUIRE(v.shape() == Shape(1, 1, 1, k));

  const Tensor x = random_tensor(Shape(1, 1, 9, 9), rng);
  Tape tape;
  Forward f{tape, params, nullptr, false};
  const Tensor& got = tape.value(g.forward(f, tape.leaf(x)));

  // oracle: one dense k x k convolution with the outer-product kernel
  Tensor expect(Shape(1, 1, 9, 9));
  const int pad = k / 2;
  for (int oy = 0; oy < 9; ++oy)
    for (int ox = 0; ox < 9; ++ox) {
      double acc = 0.0;
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const int iy = oy - pad + ky;
          const int ix = ox - pad + kx;
          if (iy < 0 || iy >= 9 || ix < 0 || ix >= 9) continue;
          acc += x.at(0, 0, iy, ix) * u[ky] * v[kx];
        }
      expect.at(0, 0, oy, ox) = acc;
    }
  CHECK(max_abs_diff(got, expect) < 1e-12);
}

TEST_CASE("blocks: gcn weight_count matches the created parameters") {
  const GcnBlock g = GcnBlock::make("g", 7, 3, 5);
  ParamStore params;
  Rng rng(9);
  g.init(params, rng);

  std::size_t stored = 0;
  for (const auto& name : params.names())
    if (name.ends_with(".weight")) stored += params.at(name).size();
  CHECK(stored == g.weight_count());
  CHECK(g.weight_count() == 2u * (7 * 3 * 5 + 7 * 5 * 5));
}

TEST_CASE("blocks: mfem variants map cin to 4*nf channels") {
  Rng data_rng(31);
  const Tensor x = random_tensor(Shape(1, 3, 8, 8), data_rng);
  for (const MfemVariant v : {MfemVariant::gcn, MfemVariant::dilated,
                              MfemVariant::trivial, MfemVariant::conv1x1}) {
    const Mfem m = Mfem::make("m", v, 3, 2, NormMode::batch);
    ParamStore params, buffers;
    Rng rng(77);
    m.init(params, buffers, rng);

    Tape tape;
    Forward f{tape, params, &buffers, true};
    const VarId y = m.forward(f, tape.leaf(x));
    CHECK(tape.shape(y) == Shape(1, 8, 8, 8));
    CHECK(tape.value(y).all_finite());
    CHECK(m.out_channels() == 8);
  }
}

TEST_CASE("blocks: mfem gcn variant splits the kernel sizes as planned") {
  const Mfem m = Mfem::make("m", MfemVariant::gcn, 16, 4, NormMode::none);
  REQUIRE(m.convs.size() == 1);
  REQUIRE(m.gcns.size() == 3);
  CHECK(m.convs[0].kh == 3);
  CHECK(m.gcns[0].k == 7);
  CHECK(m.gcns[1].k == 11);
  CHECK(m.gcns[2].k == 15);
}

TEST_CASE("blocks: guide module unit mode passes both paths through") {
  const GuideModule gm = GuideModule::make("gm", 4, 4, GuideParts{});
  ParamStore params;
  Rng rng(3);
  gm.init(params, rng);

  Rng data_rng(5);
  const Tensor low = random_tensor(Shape(1, 4, 8, 8), data_rng);
  const Tensor high = random_tensor(Shape(1, 4, 4, 4), data_rng);

  Tape tape;
  Forward f{tape, params, nullptr, false, /*unit_guides=*/true};
  const auto [gl, gh] = gm.forward(f, tape.leaf(low), tape.leaf(high));
  CHECK(max_abs_diff(tape.value(gl), low) == 0.0);

  const VarId up = upsample_bilinear(tape, tape.leaf(high), 2);
  CHECK(max_abs_diff(tape.value(gh), tape.value(up)) == 0.0);
}

TEST_CASE("blocks: guide gates halve the paths at zero weights") {
  // zeroed gate convs make both sigmoids exactly 0.5
  const GuideModule gm = GuideModule::make("gm", 4, 4, GuideParts{});
  ParamStore params;
  Rng rng(3);
  gm.init(params, rng);
  for (const auto& name : params.names()) params.at(name).fill(0.0);

  Rng data_rng(6);
  const Tensor low = random_tensor(Shape(1, 4, 6, 6), data_rng);
  const Tensor high = random_tensor(Shape(1, 4, 3, 3), data_rng);

  Tape tape;
  Forward f{tape, params, nullptr, false};
  const auto [gl, gh] = gm.forward(f, tape.leaf(low), tape.leaf(high));

  Tensor half_low = low;
  for (std::size_t i = 0; i < half_low.size(); ++i) half_low[i] *= 0.5;
  CHECK(max_abs_diff(tape.value(gl), half_low) < 1e-15);

  const Tensor& up = tape.value(upsample_bilinear(tape, tape.leaf(high), 2));
  Tensor half_up = up;
  for (std::size_t i = 0; i < half_up.size(); ++i) half_up[i] *= 0.5;
  CHECK(max_abs_diff(tape.value(gh), half_up) < 1e-15);
}

TEST_CASE("blocks: guide module validates the two-to-one geometry") {
  const GuideModule gm = GuideModule::make("gm", 4, 4, GuideParts{});
  ParamStore params;
  Rng rng(3);
  gm.init(params, rng);

  Tape tape;
  Forward f{tape, params, nullptr, false};
  const VarId low = tape.leaf(Tensor(Shape(1, 4, 8, 8)));
  const VarId bad_high = tape.leaf(Tensor(Shape(1, 4, 3, 3)));
  CHECK_THROWS_AS(gm.forward(f, low, bad_high), std::invalid_argument);

  const VarId bad_channels = tape.leaf(Tensor(Shape(1, 2, 4, 4)));
  CHECK_THROWS_AS(gm.forward(f, low, bad_channels), std::invalid_argument);
}

TEST_CASE("blocks: rrm with a zeroed residual conv is the identity") {
  const Rrm r = Rrm::make("r", 4, NormMode::batch);
  ParamStore params, buffers;
  Rng rng(8);
  r.init(params, buffers, rng);
  params.at("r.c2.weight").fill(0.0);
  params.at("r.c2.bias").fill(0.0);

  Rng data_rng(9);
  const Tensor x = random_tensor(Shape(2, 4, 6, 6), data_rng);
  Tape tape;
  Forward f{tape, params, &buffers, true};
  const VarId y = r.forward(f, tape.leaf(x));
  CHECK(max_abs_diff(tape.value(y), x) == 0.0);
}

TEST_CASE("blocks: rrm attention scales the residual branch") {
  Rng data_rng(10);
  const Tensor x = random_tensor(Shape(1, 4, 6, 6), data_rng);

  auto run_with_attn_bias = [&](double bias) {
    const Rrm r = Rrm::make("r", 4, NormMode::none);
    ParamStore params, buffers;
    Rng rng(11);
    r.init(params, buffers, rng);
    params.at("r.attn.weight").fill(0.0);
    params.at("r.attn.bias").fill(bias);
    Tape tape;
    Forward f{tape, params, &buffers, true};
    return tape.value(r.forward(f, tape.leaf(x)));
  };

  const Tensor y_open = run_with_attn_bias(40.0);    // gate ~= 1: x + r
  const Tensor y_closed = run_with_attn_bias(-40.0); // gate ~= 0: x
  const Tensor y_half = run_with_attn_bias(0.0);     // gate = 0.5

  CHECK(max_abs_diff(y_closed, x) < 1e-12);

  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r_full = y_open[i] - x[i];
    const double r_half = y_half[i] - x[i];
    worst = std::max(worst, std::abs(r_half - 0.5 * r_full));
  }
  CHECK(worst < 1e-12);
}
