#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cagnet/ops.hpp"
#include "cagnet/params.hpp"
#include "cagnet/rng.hpp"

namespace cagnet {

enum class NormMode { batch, none };

// Batch normalisation with running statistics, or a plain per-channel
// affine when mode == none (the batch-size-1 configuration).
struct NormLayer {
  std::string name;
  int channels = 0;
  NormMode mode = NormMode::batch;
  double eps = 1e-5;
  double momentum = 0.9;

  static NormLayer make(std::string name, int channels, NormMode mode);
  void init(ParamStore& params, ParamStore& buffers) const;
  VarId forward(Forward& f, VarId x) const;
};

struct ConvLayer {
  std::string name;
  int cin = 0, cout = 0, kh = 1, kw = 1;
  ConvSpec spec{};

  static ConvLayer make(std::string name, int cin, int cout, int kh, int kw,
                        ConvSpec spec = {});
  void init(ParamStore& params, Rng& rng) const;
  VarId forward(Forward& f, VarId x) const;
  std::size_t weight_count() const {
    return static_cast<std::size_t>(cout) * cin * kh * kw;
  }
};

// Factorised large-kernel convolution: two parallel two-stage branches,
// (k x 1 then 1 x k) and (1 x k then k x 1), summed. Padding keeps the
// spatial size; there is no nonlinearity inside, and every stage carries
// a bias. Weight count: 2 * (k*cin*cout + k*cout*cout).
struct GcnBlock {
  std::string name;
  int k = 7, cin = 0, cout = 0;
  ConvLayer a1, a2, b1, b2;

  static GcnBlock make(std::string name, int k, int cin, int cout);
  void init(ParamStore& params, Rng& rng) const;
  VarId forward(Forward& f, VarId x) const;
  std::size_t weight_count() const;
};

enum class MfemVariant { gcn, dilated, trivial, conv1x1 };

// Multi-scale feature extraction on one backbone level. Every variant maps
// cin channels to 4*nf at the same resolution:
//   gcn     - 3x3 conv + factorised convs with k = 7, 11, 15
//   dilated - four 3x3 convs, dilation 1/3/5/7
//   trivial - four dense convs, kernels 3/7/11/15
//   conv1x1 - a single 1x1 reduction (the plain-decoder baseline)
// Each branch output goes through norm + relu before concatenation.
struct Mfem {
  std::string name;
  MfemVariant variant = MfemVariant::gcn;
  int cin = 0, nf = 0;
  std::vector<ConvLayer> convs;
  std::vector<GcnBlock> gcns;
  std::vector<NormLayer> norms;

  static Mfem make(std::string name, MfemVariant variant, int cin, int nf,
                   NormMode norm_mode);
  void init(ParamStore& params, ParamStore& buffers, Rng& rng) const;
  VarId forward(Forward& f, VarId x) const;
  int out_channels() const { return 4 * nf; }
};

// Which gates a guide module applies: spatial weighting of the high-level
// path, channel weighting of the low-level path, or both.
struct GuideParts {
  bool hg = true;
  bool lg = true;
};

// Links two adjacent levels. The high-level features are upsampled x2 to
// the low grid, then:
//   - a 1x1 conv over concat(low, up(high)) -> sigmoid gives a spatial map
//     that scales the high-level path (where to look),
//   - a squeeze-excite branch over the same concat gives channel weights
//     for the low-level path (which channels matter).
struct GuideModule {
  std::string name;
  int channels = 0;  // per input, both sides carry the same width
  int reduction = 4;
  GuideParts parts;
  ConvLayer spatial;
  ConvLayer se1, se2;

  static GuideModule make(std::string name, int channels, int reduction,
                          GuideParts parts);
  void init(ParamStore& params, Rng& rng) const;

  // Returns {guided_low, guided_high}. high enters at half the resolution
  // of low. The gates are computed from (low, up(high)) and applied to the
  // same pair.
  std::pair<VarId, VarId> forward(Forward& f, VarId low, VarId high) const;

  // Same, but the gates are computed from concat(low, up(high_ctx)) while
  // being applied to (low, up(high_gate)); used by the independent-pairs
  // wiring where the context is the raw neighbouring level.
  std::pair<VarId, VarId> forward_ctx(Forward& f, VarId low, VarId high_gate,
                                      VarId high_ctx) const;
};

// Residual refinement: full pre-activation residual branch
// (norm-relu-conv, twice) scaled by a spatial attention map derived from
// the block input via 1x1 conv + sigmoid.
struct Rrm {
  std::string name;
  int channels = 0;
  NormLayer n1, n2;
  ConvLayer c1, c2, attn;

  static Rrm make(std::string name, int channels, NormMode norm_mode);
  void init(ParamStore& params, ParamStore& buffers, Rng& rng) const;
  VarId forward(Forward& f, VarId x) const;
};

}  // namespace cagnet
