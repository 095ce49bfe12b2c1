#include "cagnet/backbone.hpp"

namespace cagnet {

namespace {

BackboneSpec::Item pool_item() { return BackboneSpec::Item{true, {}}; }

BackboneSpec::Item conv_item(std::string name, int cin, int cout) {
  return BackboneSpec::Item{false, {std::move(name), cin, cout}};
}

}  // namespace

std::array<int, 4> BackboneSpec::level_channels() const {
  std::array<int, 4> ch{};
  for (int level = 0; level < 4; ++level)
    ch[level] = items[tap_items[level]].conv.cout;
  return ch;
}

std::size_t BackboneSpec::conv_weight_count() const {
  std::size_t n = 0;
  for (const auto& item : items)
    if (!item.is_pool)
      n += static_cast<std::size_t>(item.conv.cin) * item.conv.cout * 9;
  return n;
}

BackboneSpec vgg16_shape() {
  BackboneSpec b;
  b.name = "vgg16";
  auto conv = [&](const char* name, int cin, int cout) {
    b.items.push_back(conv_item(name, cin, cout));
  };
  conv("conv1_1", 3, 64);
  conv("conv1_2", 64, 64);
  b.items.push_back(pool_item());
  conv("conv2_1", 64, 128);
  conv("conv2_2", 128, 128);
  b.items.push_back(pool_item());
  conv("conv3_1", 128, 256);
  conv("conv3_2", 256, 256);
  conv("conv3_3", 256, 256);
  b.tap_items[0] = static_cast<int>(b.items.size()) - 1;
  b.items.push_back(pool_item());
  conv("conv4_1", 256, 512);
  conv("conv4_2", 512, 512);
  conv("conv4_3", 512, 512);
  b.tap_items[1] = static_cast<int>(b.items.size()) - 1;
  b.items.push_back(pool_item());
  conv("conv5_1", 512, 512);
  conv("conv5_2", 512, 512);
  conv("conv5_3", 512, 512);
  b.tap_items[2] = static_cast<int>(b.items.size()) - 1;
  b.items.push_back(pool_item());
  conv("conv6", 512, 1024);
  b.tap_items[3] = static_cast<int>(b.items.size()) - 1;
  return b;
}

BackboneSpec toy_backbone(int width) {
  check(width >= 1, "toy backbone width must be positive");
  BackboneSpec b;
  b.name = "toy";
  const int w = width;
  auto conv = [&](const char* name, int cin, int cout) {
    b.items.push_back(conv_item(name, cin, cout));
  };
  conv("stem1", 3, w);
  b.items.push_back(pool_item());
  conv("stem2", w, w);
  b.items.push_back(pool_item());
  conv("a1", w, w);
  conv("a2", w, w);
  b.tap_items[0] = static_cast<int>(b.items.size()) - 1;
  b.items.push_back(pool_item());
  conv("b1", w, 2 * w);
  conv("b2", 2 * w, 2 * w);
  b.tap_items[1] = static_cast<int>(b.items.size()) - 1;
  b.items.push_back(pool_item());
  conv("c1", 2 * w, 4 * w);
  conv("c2", 4 * w, 4 * w);
  b.tap_items[2] = static_cast<int>(b.items.size()) - 1;
  b.items.push_back(pool_item());
  conv("d1", 4 * w, 8 * w);
  conv("d2", 8 * w, 8 * w);
  b.tap_items[3] = static_cast<int>(b.items.size()) - 1;
  return b;
}

BackboneSpec make_backbone(BackboneKind kind, int toy_width) {
  switch (kind) {
    case BackboneKind::vgg16:
      return vgg16_shape();
    case BackboneKind::toy:
      return toy_backbone(toy_width);
  }
  check(false, "unknown backbone kind");
  return {};
}

std::span<const char* const> stub_backbones() {
  static const char* const names[] = {"resnet50", "nasnet_mobile",
                                      "nasnet_large"};
  return names;
}

Backbone Backbone::make(BackboneKind kind, int toy_width) {
  return Backbone{make_backbone(kind, toy_width)};
}

void Backbone::init(ParamStore& params, Rng& rng) const {
  ConvSpec pad1;
  pad1.pad_h = pad1.pad_w = 1;
  for (const auto& item : spec.items) {
    if (item.is_pool) continue;
    ConvLayer::make("backbone." + item.conv.name, item.conv.cin,
                    item.conv.cout, 3, 3, pad1)
        .init(params, rng);
  }
}

std::array<VarId, 4> Backbone::forward(Forward& f, VarId image) const {
  const Shape& s = f.tape.shape(image);
  check(s.c == 3, "backbone expects a 3-channel image, got " + s.str());
  check(s.h % 32 == 0 && s.w % 32 == 0 && s.h >= 32 && s.w >= 32,
        "backbone input extents must be multiples of 32, got " + s.str());

  ConvSpec pad1;
  pad1.pad_h = pad1.pad_w = 1;
  std::array<VarId, 4> taps{};
  VarId x = image;
  for (std::size_t i = 0; i < spec.items.size(); ++i) {
    const auto& item = spec.items[i];
    if (item.is_pool) {
      x = maxpool2(f.tape, x);
    } else {
      const ConvLayer conv =
          ConvLayer::make("backbone." + item.conv.name, item.conv.cin,
                          item.conv.cout, 3, 3, pad1);
      x = relu(f.tape, conv.forward(f, x));
    }
    for (int level = 0; level < 4; ++level)
      if (spec.tap_items[level] == static_cast<int>(i)) taps[level] = x;
  }
  return taps;
}

}  // namespace cagnet
