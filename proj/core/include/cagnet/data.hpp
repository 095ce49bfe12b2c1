#pragma once

#include <string>
#include <vector>

#include "cagnet/image.hpp"

namespace cagnet {

// Dataset layout on disk: <root>/images/<stem>.ppm holds the photo and
// <root>/masks/<stem>.pgm the binary annotation. Pairs are matched by
// stem and returned sorted; a mask without an image (or vice versa) is an
// error naming the file.
std::vector<SamplePair> load_pairs(const std::string& root);

// Network input: resize to size x size, scale to [0,1]; (1,3,size,size).
Tensor to_input_tensor(const ImageU8& image, int size);
// Training target: resize then re-binarise at 128; (1,1,size,size).
Tensor to_target_tensor(const ImageU8& mask, int size);

// Writes `count` synthetic scenes under root: a salient object made of
// two differently textured regions on a smoothly varying background, plus
// up to two small high-contrast distractor shapes that belong to the
// background. Foreground covers between 5% and 50% of the frame. Output
// is a pure function of (count, size, seed).
void synth_dataset(const std::string& root, int count, int size,
                   std::uint64_t seed);

}  // namespace cagnet
