#include "cagnet/model.hpp"

#include <tuple>

namespace cagnet {

Model Model::build(const CagnetConfig& cfg, std::uint64_t seed) {
  check(cfg.nf >= 1, "feature width nf must be positive");
  Model m;
  m.cfg_ = cfg;
  m.backbone_ = Backbone::make(cfg.backbone, cfg.toy_width);

  const std::array<int, 4> level_ch = m.backbone_.spec.level_channels();
  const char* level_names = "abcd";
  for (int i = 0; i < 4; ++i)
    m.mfems_.push_back(Mfem::make(std::string("mfem_") + level_names[i],
                                  cfg.mfem, level_ch[i], cfg.nf, cfg.norm));

  if (cfg.guide != GuideMode::none) {
    GuideParts parts;
    parts.hg = cfg.guide != GuideMode::lg_only;
    parts.lg = cfg.guide != GuideMode::hg_only;
    const int width = 4 * cfg.nf;
    for (const char* pair : {"guide_cd", "guide_bc", "guide_ab"})
      m.guides_.push_back(
          GuideModule::make(pair, width, cfg.se_reduction, parts));
  }
  if (cfg.use_rrm) {
    for (const char* name : {"rrm_d", "rrm_c", "rrm_b", "rrm_a"})
      m.rrms_.push_back(Rrm::make(name, 4 * cfg.nf, cfg.norm));
  }
  m.head_ = ConvLayer::make("head", 4 * cfg.nf, 2, 1, 1);

  Rng rng(seed);
  m.backbone_.init(m.params_, rng);
  for (const auto& mf : m.mfems_) mf.init(m.params_, m.buffers_, rng);
  for (const auto& g : m.guides_) g.init(m.params_, rng);
  for (const auto& r : m.rrms_) r.init(m.params_, m.buffers_, rng);
  m.head_.init(m.params_, rng);
  return m;
}

VarId Model::forward(Forward& f, VarId image) const {
  const std::array<VarId, 4> taps = backbone_.forward(f, image);
  std::array<VarId, 4> feats{};
  for (int i = 0; i < 4; ++i) feats[i] = mfems_[i].forward(f, taps[i]);

  // Top of the merge path is the deepest level.
  VarId x = feats[3];
  if (!rrms_.empty()) x = rrms_[0].forward(f, x);

  for (int low = 2; low >= 0; --low) {
    VarId guided_low, guided_high;
    if (!guides_.empty()) {
      const GuideModule& guide = guides_[2 - low];
      // In the default wiring the gates see the merged path itself; the
      // alternative derives them from the raw neighbouring level instead.
      const VarId ctx =
          cfg_.wiring == GuideWiring::top_down ? x : feats[low + 1];
      std::tie(guided_low, guided_high) =
          guide.forward_ctx(f, feats[low], x, ctx);
    } else {
      guided_low = feats[low];
      guided_high = upsample_bilinear(f.tape, x, 2);
    }
    x = add(f.tape, guided_low, guided_high);
    if (!rrms_.empty()) x = rrms_[3 - low].forward(f, x);
  }

  // Two logits per pixel at stride 4; the foreground probability is the
  // second softmax channel, upsampled back to the input grid.
  x = head_.forward(f, x);
  x = softmax_channels(f.tape, x);
  x = slice_channels(f.tape, x, 1, 1);
  return upsample_bilinear(f.tape, x, 4);
}

Tensor Model::predict(const Tensor& image) {
  Tape tape;
  Forward f{tape, params_, &buffers_, /*training=*/false};
  const VarId out = forward(f, tape.leaf(image));
  return tape.value(out);
}

std::vector<std::pair<std::string, ParamCount>> Model::param_table() const {
  std::vector<std::string> components = {"backbone", "mfem_a", "mfem_b",
                                         "mfem_c", "mfem_d"};
  for (const auto& g : guides_) components.push_back(g.name);
  for (const auto& r : rrms_) components.push_back(r.name);
  components.push_back("head");

  std::vector<std::pair<std::string, ParamCount>> rows;
  ParamCount total;
  for (const auto& comp : components) {
    ParamCount c = classify_params(params_, comp + ".");
    total += c;
    rows.emplace_back(comp, c);
  }
  check(total.total() == params_.total_elems(),
        "parameter table does not cover every parameter");
  rows.emplace_back("total", total);
  return rows;
}

}  // namespace cagnet
