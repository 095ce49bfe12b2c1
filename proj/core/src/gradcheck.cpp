#include "cagnet/gradcheck.hpp"

#include <array>
#include <cmath>

#include "cagnet/blocks.hpp"
#include "cagnet/loss.hpp"
#include "cagnet/model.hpp"
#include "cagnet/rng.hpp"

namespace cagnet {

namespace {

double eval_loss(const GradCheckCase& c) {
  Tape tape;
  Forward f{tape, *c.params, c.buffers.get(), c.training};
  const VarId loss = c.build(f);
  const Tensor& v = tape.value(loss);
  check(v.size() == 1, c.name + ": case must produce a scalar");
  return v[0];
}

}  // namespace

GradCheckResult run_grad_check(const GradCheckCase& c, double step) {
  GradCheckResult res;
  res.name = c.name;
  res.tolerance = c.tolerance;

  // Analytic pass.
  Tape tape;
  Forward f{tape, *c.params, c.buffers.get(), c.training};
  const VarId loss = c.build(f);
  check(tape.value(loss).size() == 1, c.name + ": case must produce a scalar");
  const GradStore grads = tape.backward(loss);

  for (const auto& pname : c.params->names()) {
    const auto bound = f.bound.find(pname);
    check(bound != f.bound.end(),
          c.name + ": parameter " + pname + " is unused");
    const Tensor& analytic = grads.at(bound->second);
    Tensor& theta = c.params->at(pname);

    const std::size_t count = theta.size();
    std::size_t stride = 1;
    if (c.max_probes > 0 &&
        count > static_cast<std::size_t>(c.max_probes))
      stride = (count + c.max_probes - 1) / c.max_probes;

    for (std::size_t i = 0; i < count; i += stride) {
      const double saved = theta[i];
      theta[i] = saved + step;
      const double up = eval_loss(c);
      theta[i] = saved - step;
      const double down = eval_loss(c);
      theta[i] = saved;

      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[i];
      check(std::isfinite(numeric) && std::isfinite(a),
            c.name + ": non-finite gradient for parameter " + pname);
      // The denominator floor absorbs pure finite-difference noise:
      // gradients this small (a bias feeding a batch norm is exactly
      // zero, a saturated gate is ~1e-20) measure as rounding error, not
      // signal, so they only have to agree that they are negligible.
      const double rel =
          std::abs(a - numeric) /
          std::max(1e-3, std::abs(a) + std::abs(numeric));
      res.max_rel_err = std::max(res.max_rel_err, rel);
      res.probes++;
    }
  }
  res.pass = res.max_rel_err < c.tolerance;
  return res;
}

namespace {

// Values bounded away from zero so relu/maxpool kinks stay clear of the
// finite-difference step.
Tensor random_signed(const Shape& s, Rng& rng, double lo = 0.05,
                     double hi = 1.0) {
  Tensor t(s);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double mag = rng.uniform(lo, hi);
    t[i] = rng.coin() ? mag : -mag;
  }
  return t;
}

Tensor random_uniform(const Shape& s, Rng& rng, double lo, double hi) {
  Tensor t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

Tensor random_binary(const Shape& s, Rng& rng) {
  Tensor t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.coin() ? 1.0 : 0.0;
  return t;
}

// Weighted-mean readout: pins a fixed random weight on every output element
// so permuted or dropped elements cannot cancel out in the loss. The mean
// (not sum) keeps the loss O(1) and the finite-difference noise small.
VarId readout(Forward& f, VarId x, Rng& rng) {
  Tensor w = random_uniform(f.tape.shape(x), rng, 0.1, 1.0);
  const double inv = 1.0 / static_cast<double>(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] *= inv;
  const VarId wid = f.tape.leaf(std::move(w));
  return sum_all(f.tape, mul_broadcast(f.tape, x, wid));
}

using Maker = std::function<VarId(Forward&, Rng&)>;

GradCheckCase make_case(const std::string& name, std::uint64_t seed,
                        const std::function<void(GradCheckCase&, Rng&)>& fill,
                        const Maker& body) {
  GradCheckCase c;
  c.name = name;
  Rng rng(seed);
  fill(c, rng);
  // The readout weights must be identical across re-evaluations, so the
  // builder keeps its own copy of the stream state.
  c.build = [body, rng](Forward& f) mutable {
    Rng local = rng;
    return body(f, local);
  };
  return c;
}

}  // namespace

std::vector<GradCheckCase> standard_grad_checks(std::uint64_t seed) {
  std::vector<GradCheckCase> cases;

  auto add_case = [&](const std::string& name,
                 const std::function<void(GradCheckCase&, Rng&)>& fill,
                 const Maker& body) {
    cases.push_back(make_case(name, seed ^ std::hash<std::string>{}(name),
                              fill, body));
  };

  // --- primitive ops ---

  add_case("conv3x3",
      [](GradCheckCase& c, Rng& rng) {
        c.params->create("x", random_signed(Shape(2, 3, 6, 6), rng));
        c.params->create("w", random_signed(Shape(4, 3, 3, 3), rng));
        c.params->create("b", random_signed(Shape(1, 4, 1, 1), rng));
      },
      [](Forward& f, Rng& rng) {
        ConvSpec sp;
        sp.pad_h = sp.pad_w = 1;
        return readout(
            f, conv2d(f.tape, f.use("x"), f.use("w"), f.use("b"), sp), rng);
      });

  add_case("conv_stride2",
      [](GradCheckCase& c, Rng& rng) {
        c.params->create("x", random_signed(Shape(1, 2, 7, 7), rng));
        c.params->create("w", random_signed(Shape(3, 2, 3, 3), rng));
        c.params->create("b", random_signed(Shape(1, 3, 1, 1), rng));
      },
      [](Forward& f, Rng& rng) {
        ConvSpec sp;
        sp.stride = 2;
        sp.pad_h = sp.pad_w = 1;
        return readout(
            f, conv2d(f.tape, f.use("x"), f.use("w"), f.use("b"), sp), rng);
      });

  add_case("conv_1x5",
      [](GradCheckCase& c, Rng& rng) {
        c.params->create("x", random_signed(Shape(1, 3, 5, 6), rng));
        c.params->create("w", random_signed(Shape(2, 3, 1, 5), rng));
        c.params->create("b", random_signed(Shape(1, 2, 1, 1), rng));
      },
      [](Forward& f, Rng& rng) {
        ConvSpec sp;
        sp.pad_w = 2;
        return readout(
            f, conv2d(f.tape, f.use("x"), f.use("w"), f.use("b"), sp), rng);
      });

  add_case("dilated_conv",
      [](GradCheckCase& c, Rng& rng) {
        c.params->create("x", random_signed(Shape(1, 2, 9, 9), rng));
        c.params->create("w", random_signed(Shape(2, 2, 3, 3), rng));
        c.params->create("b", random_signed(Shape(1, 2, 1, 1), rng));
      },
      [](Forward& f, Rng& rng) {
        return readout(f,
                       dilated_conv2d(f.tape, f.use("x"), f.use("w"),
                                      f.use("b"), 2, 2),
                       rng);
      });

  add_case("relu",
      [](GradCheckCase& c, Rng& rng) {
        c.params->create("x", random_signed(Shape(1, 3, 4, 4), rng));
      },
      [](Forward& f, Rng& rng) {
        return readout(f, relu(f.tape, f.use("x")), rng);
      });

  add_case("sigmoid",
      [](GradCheckCase& c, Rng& rng) {
        c.params->create("x", random_signed(Shape(1, 3, 4, 4), rng));
      },
      [](Forward& f, Rng& rng) {
        return readout(f, sigmoid(f.tape, f.use("x")), rng);
      });

  add_case("mul_channel",
      [](GradCheckCase& c, Rng& rng) {
        c.params->create("x", random_signed(Shape(2, 3, 4, 4), rng));
        c.params->create("w", random_signed(Shape(2, 3, 1, 1), rng));
      },
      [](Forward& f, Rng& rng) {
        return readout(f, mul_broadcast(f.tape, f.use("x"), f.use("w")), rng);
      });

  add_case("mul_spatial",
      [](GradCheckCase& c, Rng& rng) {
        c.params->create("x", random_signed(Shape(2, 3, 4, 4), rng));
        c.params->create("w", random_signed(Shape(2, 1, 4, 4), rng));
      },
      [](Forward& f, Rng& rng) {
        return readout(f, mul_broadcast(f.tape, f.use("x"), f.use("w")), rng);
      });

  add_case("softmax_channels",
      [](GradCheckCase& c, Rng& rng) {
        c.params->create("x", random_signed(Shape(1, 4, 3, 3), rng));
      },
      [](Forward& f, Rng& rng) {
        return readout(f, softmax_channels(f.tape, f.use("x")), rng);
      });

  add_case("maxpool2",
      [](GradCheckCase& c, Rng& rng) {
        c.params->create("x", random_signed(Shape(1, 2, 6, 6), rng));
      },
      [](Forward& f, Rng& rng) {
        return readout(f, maxpool2(f.tape, f.use("x")), rng);
      });

  add_case("global_avg_pool",
      [](GradCheckCase& c, Rng& rng) {
        c.params->create("x", random_signed(Shape(2, 3, 4, 4), rng));
      },
      [](Forward& f, Rng& rng) {
        return readout(f, global_avg_pool(f.tape, f.use("x")), rng);
      });

  add_case("upsample2",
      [](GradCheckCase& c, Rng& rng) {
        c.params->create("x", random_signed(Shape(1, 2, 3, 3), rng));
      },
      [](Forward& f, Rng& rng) {
        return readout(f, upsample_bilinear(f.tape, f.use("x"), 2), rng);
      });

  add_case("upsample4",
      [](GradCheckCase& c, Rng& rng) {
        c.params->create("x", random_signed(Shape(1, 1, 2, 2), rng));
      },
      [](Forward& f, Rng& rng) {
        return readout(f, upsample_bilinear(f.tape, f.use("x"), 4), rng);
      });

  add_case("concat_slice",
      [](GradCheckCase& c, Rng& rng) {
        c.params->create("a", random_signed(Shape(1, 1, 3, 3), rng));
        c.params->create("b", random_signed(Shape(1, 2, 3, 3), rng));
        c.params->create("c", random_signed(Shape(1, 3, 3, 3), rng));
      },
      [](Forward& f, Rng& rng) {
        const std::array<VarId, 3> xs{f.use("a"), f.use("b"), f.use("c")};
        const VarId cat = concat_channels(f.tape, xs);
        return readout(f, slice_channels(f.tape, cat, 1, 4), rng);
      });

  add_case("channel_affine",
      [](GradCheckCase& c, Rng& rng) {
        c.params->create("x", random_signed(Shape(2, 3, 4, 4), rng));
        c.params->create("gamma", random_signed(Shape(1, 3, 1, 1), rng));
        c.params->create("beta", random_signed(Shape(1, 3, 1, 1), rng));
      },
      [](Forward& f, Rng& rng) {
        return readout(f,
                       channel_affine(f.tape, f.use("x"), f.use("gamma"),
                                      f.use("beta")),
                       rng);
      });

  add_case("batch_norm_train",
      [](GradCheckCase& c, Rng& rng) {
        c.params->create("x", random_signed(Shape(3, 2, 4, 4), rng));
        c.params->create("gamma", random_signed(Shape(1, 2, 1, 1), rng));
        c.params->create("beta", random_signed(Shape(1, 2, 1, 1), rng));
      },
      [](Forward& f, Rng& rng) {
        return readout(f,
                       batch_norm_train(f.tape, f.use("x"), f.use("gamma"),
                                        f.use("beta"), 1e-5),
                       rng);
      });

  add_case("batch_norm_infer",
      [](GradCheckCase& c, Rng& rng) {
        c.params->create("x", random_signed(Shape(2, 2, 4, 4), rng));
        c.params->create("gamma", random_signed(Shape(1, 2, 1, 1), rng));
        c.params->create("beta", random_signed(Shape(1, 2, 1, 1), rng));
        c.buffers->create("mean", random_uniform(Shape(1, 2, 1, 1), rng,
                                                 -0.5, 0.5));
        c.buffers->create("var",
                          random_uniform(Shape(1, 2, 1, 1), rng, 0.5, 1.5));
        c.training = false;
      },
      [](Forward& f, Rng& rng) {
        return readout(f,
                       batch_norm_infer(f.tape, f.use("x"), f.use("gamma"),
                                        f.use("beta"), f.buffers->at("mean"),
                                        f.buffers->at("var"), 1e-5),
                       rng);
      });

  // --- blocks ---

  add_case("gcn_block",
      [](GradCheckCase& c, Rng& rng) {
        c.params->create("x", random_signed(Shape(1, 2, 8, 8), rng));
        Rng init = rng.split(7);
        GcnBlock::make("g", 7, 2, 2).init(*c.params, init);
      },
      [](Forward& f, Rng& rng) {
        const GcnBlock g = GcnBlock::make("g", 7, 2, 2);
        return readout(f, g.forward(f, f.use("x")), rng);
      });

  const auto add_mfem = [&](const std::string& name, MfemVariant variant) {
    add_case(name,
        [variant](GradCheckCase& c, Rng& rng) {
          c.params->create("x", random_signed(Shape(1, 3, 8, 8), rng));
          Rng init = rng.split(7);
          Mfem::make("m", variant, 3, 2, NormMode::batch)
              .init(*c.params, *c.buffers, init);
        },
        [variant](Forward& f, Rng& rng) {
          const Mfem m = Mfem::make("m", variant, 3, 2, NormMode::batch);
          return readout(f, m.forward(f, f.use("x")), rng);
        });
  };
  add_mfem("mfem_gcn", MfemVariant::gcn);
  add_mfem("mfem_dilated", MfemVariant::dilated);
  add_mfem("mfem_trivial", MfemVariant::trivial);
  add_mfem("mfem_conv1x1", MfemVariant::conv1x1);

  add_case("guide_module",
      [](GradCheckCase& c, Rng& rng) {
        c.params->create("low", random_signed(Shape(1, 4, 8, 8), rng));
        c.params->create("high", random_signed(Shape(1, 4, 4, 4), rng));
        Rng init = rng.split(7);
        GuideModule::make("gm", 4, 4, GuideParts{}).init(*c.params, init);
      },
      [](Forward& f, Rng& rng) {
        const GuideModule gm = GuideModule::make("gm", 4, 4, GuideParts{});
        const auto [lo, hi] = gm.forward(f, f.use("low"), f.use("high"));
        return add(f.tape, readout(f, lo, rng), readout(f, hi, rng));
      });

  add_case("rrm",
      [](GradCheckCase& c, Rng& rng) {
        c.params->create("x", random_signed(Shape(1, 4, 6, 6), rng));
        Rng init = rng.split(7);
        Rrm::make("r", 4, NormMode::batch).init(*c.params, *c.buffers, init);
      },
      [](Forward& f, Rng& rng) {
        const Rrm r = Rrm::make("r", 4, NormMode::batch);
        return readout(f, r.forward(f, f.use("x")), rng);
      });

  // --- losses ---

  add_case("designed_loss",
      [](GradCheckCase& c, Rng& rng) {
        c.params->create("s", random_uniform(Shape(2, 1, 5, 5), rng, 0.05,
                                             0.95));
        c.buffers->create("g", random_binary(Shape(2, 1, 5, 5), rng));
      },
      [](Forward& f, Rng&) {
        const VarId g = f.tape.leaf(f.buffers->at("g"));
        return designed_loss(f.tape, f.use("s"), g, LossConfig{});
      });

  add_case("cross_entropy",
      [](GradCheckCase& c, Rng& rng) {
        c.params->create("s", random_uniform(Shape(2, 1, 5, 5), rng, 0.05,
                                             0.95));
        c.buffers->create("g", random_binary(Shape(2, 1, 5, 5), rng));
      },
      [](Forward& f, Rng&) {
        const VarId g = f.tape.leaf(f.buffers->at("g"));
        return cross_entropy_loss(f.tape, f.use("s"), g);
      });

  // --- the whole network on a small input ---

  {
    GradCheckCase c;
    c.name = "toy_model";
    c.tolerance = 1e-3;
    c.max_probes = 12;  // per parameter tensor; the model has dozens
    CagnetConfig cfg;
    cfg.backbone = BackboneKind::toy;
    cfg.toy_width = 4;
    cfg.nf = 2;
    cfg.norm = NormMode::none;
    cfg.input_size = 32;
    auto model = std::make_shared<Model>(Model::build(cfg, seed ^ 0xF00D));
    Rng rng(seed ^ 0xBEEF);
    // Jitter every parameter off its initial value. Fresh models sit on
    // kink manifolds - zero biases and identity affines leave relu inputs
    // and pooling ties exactly at zero, where one-sided slopes disagree
    // and central differences measure their average instead of the
    // subgradient the backward pass reports.
    for (const auto& name : model->params().names()) {
      Tensor t = model->params().at(name);
      for (std::size_t i = 0; i < t.size(); ++i) {
        const double mag = rng.uniform(0.01, 0.05);
        t[i] += rng.coin() ? mag : -mag;
      }
      c.params->create(name, std::move(t));
    }
    c.params->create("x", random_uniform(Shape(1, 3, 32, 32), rng, 0.0, 1.0));
    Tensor g = random_binary(Shape(1, 1, 32, 32), rng);
    c.buffers->create("g", std::move(g));
    c.build = [model](Forward& f) {
      const VarId out = model->forward(f, f.use("x"));
      const VarId g = f.tape.leaf(f.buffers->at("g"));
      return designed_loss(f.tape, out, g, LossConfig{});
    };
    cases.push_back(std::move(c));
  }

  return cases;
}

}  // namespace cagnet
