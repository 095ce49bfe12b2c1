#include <cmath>
#include <stdexcept>

#include <doctest.h>

#include "cagnet/model.hpp"
#include "cagnet/rng.hpp"

using namespace cagnet;

namespace {

Tensor random_image(const Shape& s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform();
  return t;
}

CagnetConfig toy_config() {
  CagnetConfig cfg;
  cfg.backbone = BackboneKind::toy;
  cfg.toy_width = 8;
  cfg.nf = 2;
  cfg.input_size = 64;
  return cfg;
}

}  // namespace

TEST_CASE("model: vgg backbone counts match the closed-form plan") {
  const BackboneSpec spec = vgg16_shape();
  // 13 VGG convolutions plus the extra stride-32 layer
  std::size_t convs = 0;
  for (const auto& item : spec.items)
    if (!item.is_pool) ++convs;
  CHECK(convs == 14);
  CHECK(spec.level_channels() == std::array<int, 4>{256, 512, 512, 1024});

  // conv-only weight total, and the final layer on its own
  CHECK(spec.conv_weight_count() == 14710464u + 4718592u);
  const auto& last = spec.items.back();
  REQUIRE(!last.is_pool);
  CHECK(static_cast<std::size_t>(last.conv.cin) * last.conv.cout * 9 ==
        4718592u);
}

TEST_CASE("model: parameter table covers every parameter exactly once") {
  CagnetConfig cfg = toy_config();
  const Model model = Model::build(cfg, 3);

  const auto table = model.param_table();
  REQUIRE(!table.empty());
  CHECK(table.back().first == "total");
  std::size_t sum = 0;
  for (std::size_t i = 0; i + 1 < table.size(); ++i)
    sum += table[i].second.total();
  CHECK(sum == table.back().second.total());
  CHECK(sum == model.params().total_elems());
}

TEST_CASE("model: trivial minus gcn weight delta at full scale") {
  CagnetConfig gcn_cfg;  // vgg16, nf 8
  CagnetConfig triv_cfg;
  triv_cfg.mfem = MfemVariant::trivial;

  const Model a = Model::build(gcn_cfg, 1);
  const Model b = Model::build(triv_cfg, 1);

  const std::size_t wa = classify_params(a.params()).weights;
  const std::size_t wb = classify_params(b.params()).weights;
  CHECK(wb - wa == 6047232u);
}

TEST_CASE("model: forward yields a probability map at input resolution") {
  CagnetConfig cfg = toy_config();
  Model model = Model::build(cfg, 7);

  const Tensor x = random_image(Shape(2, 3, 64, 64), 19);
  const Tensor y = model.predict(x);
  CHECK(y.shape() == Shape(2, 1, 64, 64));
  for (std::size_t i = 0; i < y.size(); ++i) {
    CHECK(y[i] > 0.0);
    CHECK(y[i] < 1.0);
  }
}

TEST_CASE("model: construction is deterministic in the seed") {
  CagnetConfig cfg = toy_config();
  const Model a = Model::build(cfg, 11);
  const Model b = Model::build(cfg, 11);
  const Model c = Model::build(cfg, 12);

  REQUIRE(a.params().names() == b.params().names());
  bool same = true, different = false;
  for (const auto& name : a.params().names()) {
    const Tensor& ta = a.params().at(name);
    const Tensor& tb = b.params().at(name);
    const Tensor& tc = c.params().at(name);
    for (std::size_t i = 0; i < ta.size(); ++i) {
      if (ta[i] != tb[i]) same = false;
      if (ta[i] != tc[i]) different = true;
    }
  }
  CHECK(same);
  CHECK(different);
}

TEST_CASE("model: predict does not disturb inference state") {
  CagnetConfig cfg = toy_config();
  Model model = Model::build(cfg, 23);
  const Tensor x = random_image(Shape(1, 3, 64, 64), 5);
  const Tensor y1 = model.predict(x);
  const Tensor y2 = model.predict(x);
  for (std::size_t i = 0; i < y1.size(); ++i) CHECK(y1[i] == y2[i]);
}

TEST_CASE("model: backbone rejects malformed inputs") {
  CagnetConfig cfg = toy_config();
  Model model = Model::build(cfg, 2);
  CHECK_THROWS_AS(model.predict(Tensor(Shape(1, 1, 64, 64))),
                  std::invalid_argument);
  CHECK_THROWS_AS(model.predict(Tensor(Shape(1, 3, 60, 64))),
                  std::invalid_argument);
  CHECK_THROWS_AS(model.predict(Tensor(Shape(1, 3, 16, 16))),
                  std::invalid_argument);
}

TEST_CASE("model: guide and rrm ablation switches change the network") {
  CagnetConfig base = toy_config();
  CagnetConfig bare = base;
  bare.guide = GuideMode::none;
  bare.use_rrm = false;

  Model full = Model::build(base, 31);
  Model plain = Model::build(bare, 31);

  bool has_guides = false, has_rrm = false;
  for (const auto& name : full.params().names()) {
    if (name.rfind("guide_", 0) == 0) has_guides = true;
    if (name.rfind("rrm_", 0) == 0) has_rrm = true;
  }
  CHECK(has_guides);
  CHECK(has_rrm);
  for (const auto& name : plain.params().names()) {
    CHECK(name.rfind("guide_", 0) != 0);
    CHECK(name.rfind("rrm_", 0) != 0);
  }

  const Tensor x = random_image(Shape(1, 3, 64, 64), 40);
  const Tensor ya = full.predict(x);
  const Tensor yb = plain.predict(x);
  double diff = 0.0;
  for (std::size_t i = 0; i < ya.size(); ++i)
    diff = std::max(diff, std::abs(ya[i] - yb[i]));
  CHECK(diff > 0.0);
}

TEST_CASE("model: half-guide modes create only their own gates") {
  CagnetConfig hg = toy_config();
  hg.guide = GuideMode::hg_only;
  CagnetConfig lg = toy_config();
  lg.guide = GuideMode::lg_only;

  const Model mh = Model::build(hg, 1);
  bool saw_spatial = false;
  for (const auto& name : mh.params().names()) {
    CHECK(name.find(".se1.") == std::string::npos);
    if (name.find(".spatial.") != std::string::npos) saw_spatial = true;
  }
  CHECK(saw_spatial);

  const Model ml = Model::build(lg, 1);
  bool saw_se = false;
  for (const auto& name : ml.params().names()) {
    CHECK(name.find(".spatial.") == std::string::npos);
    if (name.find(".se1.") != std::string::npos) saw_se = true;
  }
  CHECK(saw_se);
}

TEST_CASE("model: independent-pairs wiring differs from top-down") {
  CagnetConfig td = toy_config();
  CagnetConfig ip = toy_config();
  ip.wiring = GuideWiring::independent_pairs;

  Model a = Model::build(td, 5);
  Model b = Model::build(ip, 5);
  REQUIRE(a.params().names() == b.params().names());

  const Tensor x = random_image(Shape(1, 3, 64, 64), 77);
  const Tensor ya = a.predict(x);
  const Tensor yb = b.predict(x);
  double diff = 0.0;
  for (std::size_t i = 0; i < ya.size(); ++i)
    diff = std::max(diff, std::abs(ya[i] - yb[i]));
  CHECK(diff > 0.0);
}

TEST_CASE("model: stub backbones are named and rejected") {
  CHECK(stub_backbones().size() == 3);
  // the listed names exist purely as documentation; the enum cannot
  // express them, so nothing to construct here
}
