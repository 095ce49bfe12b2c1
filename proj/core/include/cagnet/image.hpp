#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cagnet/rng.hpp"
#include "cagnet/tensor.hpp"

namespace cagnet {

// 8-bit image with interleaved samples; 1 channel (grey) or 3 (rgb).
struct ImageU8 {
  int channels = 0;
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> pix;  // h * w * channels

  std::uint8_t& at(int y, int x, int c = 0) {
    return pix[(static_cast<std::size_t>(y) * w + x) * channels + c];
  }
  std::uint8_t at(int y, int x, int c = 0) const {
    return pix[(static_cast<std::size_t>(y) * w + x) * channels + c];
  }
};

ImageU8 make_image(int channels, int h, int w);

// Binary PGM (P5) and PPM (P6), maxval 255 only. Parse errors report the
// file and the byte offset where decoding stopped making sense.
ImageU8 decode_pnm(const std::vector<std::uint8_t>& bytes,
                   const std::string& origin);
ImageU8 read_pnm(const std::string& path);
std::vector<std::uint8_t> encode_pnm(const ImageU8& img);
void write_pnm(const ImageU8& img, const std::string& path);

// Planar tensor in [0,1], shape (1, channels, h, w).
Tensor image_to_tensor(const ImageU8& img);
// Greyscale mask thresholded at 128 into exactly {0,1}, shape (1,1,h,w).
Tensor mask_to_tensor(const ImageU8& img);
// Values clamped to [0,1] and rounded to bytes; c must be 1 or 3.
ImageU8 tensor_to_image(const Tensor& t);

// Corner-aligned bilinear resize per channel. Masks come out grey along
// edges and must be re-binarised by the caller.
ImageU8 resize_image(const ImageU8& img, int oh, int ow);
ImageU8 binarize_mask(const ImageU8& mask, int threshold = 128);

ImageU8 flip_horizontal(const ImageU8& img);

// Rotation about the image centre with bilinear sampling; samples falling
// outside the frame are mirrored back in.
ImageU8 rotate_image(const ImageU8& img, double degrees);

struct SamplePair {
  std::string stem;
  ImageU8 image;
  ImageU8 mask;
};

// Training-time augmentation: horizontal flip with probability 1/2, then
// rotation by a uniformly drawn magnitude of up to 12 degrees with random
// sign. The mask undergoes the same transform and is re-binarised.
SamplePair augment(const SamplePair& in, Rng& rng);

}  // namespace cagnet
