#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "cagnet/blocks.hpp"

namespace cagnet {

enum class BackboneKind { vgg16, toy };

// A backbone is a flat list of 3x3 conv (+ relu) and 2x2 maxpool items,
// with four tap points at strides 4 / 8 / 16 / 32. Weights are random;
// there is no pretrained initialisation in this build.
struct BackboneSpec {
  struct ConvItem {
    std::string name;
    int cin = 0, cout = 0;
  };
  struct Item {
    bool is_pool = false;
    ConvItem conv;
  };

  std::string name;
  std::vector<Item> items;
  std::array<int, 4> tap_items{};  // index into items per level A..D

  std::array<int, 4> level_channels() const;
  static std::array<int, 4> level_strides() { return {4, 8, 16, 32}; }
  std::size_t conv_weight_count() const;  // kernel elements, biases excluded
};

// 13 VGG-16 convolution layers plus one extra 3x3/1024 layer after the
// last pool, giving the fourth (stride 32) level.
BackboneSpec vgg16_shape();

// Small stand-in with the same four-level contract: two stem convs with
// pools, then four two-conv stages of width w, 2w, 4w, 8w.
BackboneSpec toy_backbone(int width);

BackboneSpec make_backbone(BackboneKind kind, int toy_width);

// Backbones from the original evaluation setting that are documented but
// not runnable in this build; asking for one is an error naming it.
std::span<const char* const> stub_backbones();

struct Backbone {
  BackboneSpec spec;

  static Backbone make(BackboneKind kind, int toy_width);
  void init(ParamStore& params, Rng& rng) const;
  // Returns the four level features, shallowest (stride 4) first.
  std::array<VarId, 4> forward(Forward& f, VarId image) const;
};

}  // namespace cagnet
