#include "cagnet/blocks.hpp"

#include <array>
#include <cmath>

namespace cagnet {

namespace {

Tensor he_uniform(const Shape& s, int fan_in, Rng& rng) {
  Tensor w(s);
  const double limit = std::sqrt(6.0 / fan_in);
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = rng.uniform(-limit, limit);
  return w;
}

}  // namespace

NormLayer NormLayer::make(std::string name, int channels, NormMode mode) {
  NormLayer n;
  n.name = std::move(name);
  n.channels = channels;
  n.mode = mode;
  return n;
}

void NormLayer::init(ParamStore& params, ParamStore& buffers) const {
  const Shape s(1, channels, 1, 1);
  params.create(name + ".gamma", Tensor::full(s, 1.0));
  params.create(name + ".beta", Tensor::zeros(s));
  if (mode == NormMode::batch) {
    buffers.create(name + ".running_mean", Tensor::zeros(s));
    buffers.create(name + ".running_var", Tensor::full(s, 1.0));
  }
}

VarId NormLayer::forward(Forward& f, VarId x) const {
  const VarId gamma = f.use(name + ".gamma");
  const VarId beta = f.use(name + ".beta");
  if (mode == NormMode::none) return channel_affine(f.tape, x, gamma, beta);

  check(f.buffers != nullptr, "batch norm needs a buffer store");
  Tensor& rmean = f.buffers->at(name + ".running_mean");
  Tensor& rvar = f.buffers->at(name + ".running_var");

  if (!f.training)
    return batch_norm_infer(f.tape, x, gamma, beta, rmean, rvar, eps);

  // Fold the current batch statistics into the running averages; the
  // normalisation itself uses the batch statistics.
  const Tensor& xv = f.tape.value(x);
  const Shape& s = xv.shape();
  check(s.c == channels, name + " expects " + std::to_string(channels) +
                             " channels, got " + s.str());
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  const double m = static_cast<double>(s.n) * plane;
  for (int ic = 0; ic < s.c; ++ic) {
    double mean = 0.0;
    for (int in = 0; in < s.n; ++in) {
      const double* src =
          xv.data() + (static_cast<std::size_t>(in) * s.c + ic) * plane;
      for (std::size_t p = 0; p < plane; ++p) mean += src[p];
    }
    mean /= m;
    double var = 0.0;
    for (int in = 0; in < s.n; ++in) {
      const double* src =
          xv.data() + (static_cast<std::size_t>(in) * s.c + ic) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        const double d = src[p] - mean;
        var += d * d;
      }
    }
    var /= m;
    rmean[ic] = momentum * rmean[ic] + (1.0 - momentum) * mean;
    rvar[ic] = momentum * rvar[ic] + (1.0 - momentum) * var;
  }
  return batch_norm_train(f.tape, x, gamma, beta, eps);
}

ConvLayer ConvLayer::make(std::string name, int cin, int cout, int kh, int kw,
                          ConvSpec spec) {
  ConvLayer c;
  c.name = std::move(name);
  c.cin = cin;
  c.cout = cout;
  c.kh = kh;
  c.kw = kw;
  c.spec = spec;
  return c;
}

void ConvLayer::init(ParamStore& params, Rng& rng) const {
  const int fan_in = cin * kh * kw;
  params.create(name + ".weight",
                he_uniform(Shape(cout, cin, kh, kw), fan_in, rng));
  params.create(name + ".bias", Tensor::zeros(Shape(1, cout, 1, 1)));
}

VarId ConvLayer::forward(Forward& f, VarId x) const {
  return conv2d(f.tape, x, f.use(name + ".weight"), f.use(name + ".bias"),
                spec);
}

GcnBlock GcnBlock::make(std::string name, int k, int cin, int cout) {
  check(k >= 1 && k % 2 == 1, "factorised conv kernel must be odd");
  GcnBlock g;
  g.k = k;
  g.cin = cin;
  g.cout = cout;
  const int p = (k - 1) / 2;
  ConvSpec tall;   // k x 1
  tall.pad_h = p;
  ConvSpec wide;   // 1 x k
  wide.pad_w = p;
  g.a1 = ConvLayer::make(name + ".a1", cin, cout, k, 1, tall);
  g.a2 = ConvLayer::make(name + ".a2", cout, cout, 1, k, wide);
  g.b1 = ConvLayer::make(name + ".b1", cin, cout, 1, k, wide);
  g.b2 = ConvLayer::make(name + ".b2", cout, cout, k, 1, tall);
  g.name = std::move(name);
  return g;
}

void GcnBlock::init(ParamStore& params, Rng& rng) const {
  a1.init(params, rng);
  a2.init(params, rng);
  b1.init(params, rng);
  b2.init(params, rng);
}

VarId GcnBlock::forward(Forward& f, VarId x) const {
  const VarId a = a2.forward(f, a1.forward(f, x));
  const VarId b = b2.forward(f, b1.forward(f, x));
  return add(f.tape, a, b);
}

std::size_t GcnBlock::weight_count() const {
  return 2 * (static_cast<std::size_t>(k) * cin * cout +
              static_cast<std::size_t>(k) * cout * cout);
}

Mfem Mfem::make(std::string name, MfemVariant variant, int cin, int nf,
                NormMode norm_mode) {
  Mfem m;
  m.variant = variant;
  m.cin = cin;
  m.nf = nf;
  auto branch_norm = [&](int idx, int ch) {
    m.norms.push_back(NormLayer::make(
        name + ".b" + std::to_string(idx) + ".norm", ch, norm_mode));
  };
  switch (variant) {
    case MfemVariant::gcn: {
      ConvSpec p1;
      p1.pad_h = p1.pad_w = 1;
      m.convs.push_back(ConvLayer::make(name + ".b0.conv", cin, nf, 3, 3, p1));
      branch_norm(0, nf);
      const std::array<int, 3> ks{7, 11, 15};
      for (int i = 0; i < 3; ++i) {
        m.gcns.push_back(GcnBlock::make(
            name + ".b" + std::to_string(i + 1) + ".gcn", ks[i], cin, nf));
        branch_norm(i + 1, nf);
      }
      break;
    }
    case MfemVariant::dilated: {
      const std::array<int, 4> rates{1, 3, 5, 7};
      for (int i = 0; i < 4; ++i) {
        ConvSpec sp;
        sp.dilation = rates[i];
        sp.pad_h = sp.pad_w = rates[i];
        m.convs.push_back(ConvLayer::make(
            name + ".b" + std::to_string(i) + ".conv", cin, nf, 3, 3, sp));
        branch_norm(i, nf);
      }
      break;
    }
    case MfemVariant::trivial: {
      const std::array<int, 4> ks{3, 7, 11, 15};
      for (int i = 0; i < 4; ++i) {
        ConvSpec sp;
        sp.pad_h = sp.pad_w = (ks[i] - 1) / 2;
        m.convs.push_back(
            ConvLayer::make(name + ".b" + std::to_string(i) + ".conv", cin,
                            nf, ks[i], ks[i], sp));
        branch_norm(i, nf);
      }
      break;
    }
    case MfemVariant::conv1x1: {
      m.convs.push_back(
          ConvLayer::make(name + ".b0.conv", cin, 4 * nf, 1, 1));
      branch_norm(0, 4 * nf);
      break;
    }
  }
  m.name = std::move(name);
  return m;
}

void Mfem::init(ParamStore& params, ParamStore& buffers, Rng& rng) const {
  // gcn interleaves a plain conv branch with factorised branches; keep the
  // draw order equal to the branch order.
  if (variant == MfemVariant::gcn) {
    convs[0].init(params, rng);
    for (const auto& g : gcns) g.init(params, rng);
  } else {
    for (const auto& c : convs) c.init(params, rng);
  }
  for (const auto& n : norms) n.init(params, buffers);
}

VarId Mfem::forward(Forward& f, VarId x) const {
  std::vector<VarId> branches;
  if (variant == MfemVariant::gcn) {
    branches.push_back(convs[0].forward(f, x));
    for (const auto& g : gcns) branches.push_back(g.forward(f, x));
  } else {
    for (const auto& c : convs) branches.push_back(c.forward(f, x));
  }
  for (std::size_t i = 0; i < branches.size(); ++i)
    branches[i] = relu(f.tape, norms[i].forward(f, branches[i]));
  if (branches.size() == 1) return branches[0];
  return concat_channels(f.tape, branches);
}

GuideModule GuideModule::make(std::string name, int channels, int reduction,
                              GuideParts parts) {
  GuideModule g;
  g.channels = channels;
  g.reduction = reduction;
  g.parts = parts;
  const int cat = 2 * channels;
  if (parts.hg)
    g.spatial = ConvLayer::make(name + ".spatial", cat, 1, 1, 1);
  if (parts.lg) {
    check(cat % reduction == 0,
          "squeeze-excite width " + std::to_string(cat) +
              " must be divisible by the reduction " +
              std::to_string(reduction));
    g.se1 = ConvLayer::make(name + ".se1", cat, cat / reduction, 1, 1);
    g.se2 = ConvLayer::make(name + ".se2", cat / reduction, channels, 1, 1);
  }
  g.name = std::move(name);
  return g;
}

void GuideModule::init(ParamStore& params, Rng& rng) const {
  if (parts.hg) spatial.init(params, rng);
  if (parts.lg) {
    se1.init(params, rng);
    se2.init(params, rng);
  }
}

std::pair<VarId, VarId> GuideModule::forward(Forward& f, VarId low,
                                             VarId high) const {
  return forward_ctx(f, low, high, high);
}

std::pair<VarId, VarId> GuideModule::forward_ctx(Forward& f, VarId low,
                                                 VarId high_gate,
                                                 VarId high_ctx) const {
  const Shape& ls = f.tape.shape(low);
  const Shape& hs = f.tape.shape(high_gate);
  check(ls.h == 2 * hs.h && ls.w == 2 * hs.w,
        name + ": low level " + ls.str() + " must be twice the high level " +
            hs.str());
  check(ls.c == channels && hs.c == channels,
        name + ": both levels must carry " + std::to_string(channels) +
            " channels");

  const VarId up = upsample_bilinear(f.tape, high_gate, 2);
  if (f.force_unit_guides || (!parts.hg && !parts.lg)) return {low, up};

  const VarId up_ctx = high_ctx == high_gate
                           ? up
                           : upsample_bilinear(f.tape, high_ctx, 2);
  const std::array<VarId, 2> pair{low, up_ctx};
  const VarId cat = concat_channels(f.tape, pair);

  VarId guided_high = up;
  if (parts.hg) {
    const VarId s = sigmoid(f.tape, spatial.forward(f, cat));
    guided_high = mul_broadcast(f.tape, up, s);
  }
  VarId guided_low = low;
  if (parts.lg) {
    VarId cw = global_avg_pool(f.tape, cat);
    cw = relu(f.tape, se1.forward(f, cw));
    cw = sigmoid(f.tape, se2.forward(f, cw));
    guided_low = mul_broadcast(f.tape, low, cw);
  }
  return {guided_low, guided_high};
}

Rrm Rrm::make(std::string name, int channels, NormMode norm_mode) {
  Rrm r;
  r.channels = channels;
  r.n1 = NormLayer::make(name + ".n1", channels, norm_mode);
  r.n2 = NormLayer::make(name + ".n2", channels, norm_mode);
  ConvSpec p1;
  p1.pad_h = p1.pad_w = 1;
  r.c1 = ConvLayer::make(name + ".c1", channels, channels, 3, 3, p1);
  r.c2 = ConvLayer::make(name + ".c2", channels, channels, 3, 3, p1);
  r.attn = ConvLayer::make(name + ".attn", channels, 1, 1, 1);
  r.name = std::move(name);
  return r;
}

void Rrm::init(ParamStore& params, ParamStore& buffers, Rng& rng) const {
  n1.init(params, buffers);
  c1.init(params, rng);
  n2.init(params, buffers);
  c2.init(params, rng);
  attn.init(params, rng);
}

VarId Rrm::forward(Forward& f, VarId x) const {
  // Attention is read from the block input, not from the residual branch.
  const VarId a = sigmoid(f.tape, attn.forward(f, x));
  VarId r = relu(f.tape, n1.forward(f, x));
  r = c1.forward(f, r);
  r = relu(f.tape, n2.forward(f, r));
  r = c2.forward(f, r);
  return add(f.tape, x, mul_broadcast(f.tape, r, a));
}

}  // namespace cagnet
