#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "cagnet/backbone.hpp"
#include "cagnet/blocks.hpp"

namespace cagnet {

enum class GuideMode { both, hg_only, lg_only, none };
enum class GuideWiring { top_down, independent_pairs };
enum class LossKind { designed, cross_entropy };

struct CagnetConfig {
  BackboneKind backbone = BackboneKind::vgg16;
  int toy_width = 16;
  int nf = 8;  // per-branch width of the multi-scale extraction
  MfemVariant mfem = MfemVariant::gcn;
  GuideMode guide = GuideMode::both;
  GuideWiring wiring = GuideWiring::top_down;
  bool use_rrm = true;
  NormMode norm = NormMode::batch;
  int se_reduction = 4;
  LossKind loss = LossKind::designed;
  int input_size = 480;  // training / inference resolution
};

// The whole network: backbone taps at strides 4/8/16/32, a multi-scale
// extraction per level, then a top-down merge where guide modules weight
// the two paths before each addition, a refinement block after every merge,
// and a two-channel softmax head at stride 4 upsampled to input size.
class Model {
 public:
  static Model build(const CagnetConfig& cfg, std::uint64_t seed);

  const CagnetConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  ParamStore& buffers() { return buffers_; }
  const ParamStore& buffers() const { return buffers_; }

  // image (n,3,h,w) in [0,1], extents multiples of 32; returns the
  // foreground probability map (n,1,h,w), values in (0,1).
  VarId forward(Forward& f, VarId image) const;

  // Inference convenience: one image batch on a throwaway tape.
  Tensor predict(const Tensor& image);

  // (component, counts) rows in display order, plus a "total" row.
  std::vector<std::pair<std::string, ParamCount>> param_table() const;

 private:
  CagnetConfig cfg_;
  Backbone backbone_;
  std::vector<Mfem> mfems_;          // a, b, c, d
  std::vector<GuideModule> guides_;  // cd, bc, ab (absent when ungated)
  std::vector<Rrm> rrms_;            // d, c, b, a (absent when disabled)
  ConvLayer head_;
  ParamStore params_;
  ParamStore buffers_;
};

}  // namespace cagnet
