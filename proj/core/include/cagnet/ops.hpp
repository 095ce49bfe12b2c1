#pragma once

#include <span>

#include "cagnet/tape.hpp"

namespace cagnet {

struct ConvSpec {
  int stride = 1;
  int pad_h = 0;
  int pad_w = 0;
  int dilation = 1;
};

// weight is (cout, cin, kh, kw), bias (1, cout, 1, 1). Zero padding.
// Output extent (h + 2*pad - k_eff) / stride + 1 must be integral, with
// k_eff = (k-1)*dilation + 1; anything else is a shape error, we never
// silently floor.
VarId conv2d(Tape& t, VarId x, VarId w, VarId b, const ConvSpec& spec = {});
VarId dilated_conv2d(Tape& t, VarId x, VarId w, VarId b, int dilation,
                     int pad);

VarId add(Tape& t, VarId a, VarId b);
VarId scale(Tape& t, VarId x, double k);
VarId add_const(Tape& t, VarId x, double k);
VarId relu(Tape& t, VarId x);
VarId sigmoid(Tape& t, VarId x);

// Elementwise product where every dimension of w either matches x or is 1
// (broadcast). Covers channel gates (n,c,1,1) and spatial gates (n,1,h,w).
VarId mul_broadcast(Tape& t, VarId x, VarId w);

// Softmax across the channel dimension, independently per (n, y, x).
VarId softmax_channels(Tape& t, VarId x);

// 2x2 max pooling, stride 2; spatial extents must be even. Ties take the
// first element in scan order so the subgradient is deterministic.
VarId maxpool2(Tape& t, VarId x);

VarId global_avg_pool(Tape& t, VarId x);  // (n,c,h,w) -> (n,c,1,1)

// Corner-aligned bilinear upsampling by an integer factor >= 1.
VarId upsample_bilinear(Tape& t, VarId x, int factor);

VarId concat_channels(Tape& t, std::span<const VarId> xs);
VarId slice_channels(Tape& t, VarId x, int first, int count);

VarId sum_all(Tape& t, VarId x);   // scalar
VarId mean_all(Tape& t, VarId x);  // scalar

// Per-channel affine y = gamma*x + beta; gamma/beta are (1,c,1,1).
VarId channel_affine(Tape& t, VarId x, VarId gamma, VarId beta);

// Normalisation by statistics of the current batch (mean/variance taken
// over n*h*w per channel), with the full backward through the statistics.
VarId batch_norm_train(Tape& t, VarId x, VarId gamma, VarId beta, double eps);

// Normalisation by fixed running statistics; mean/var are constants of
// shape (1,c,1,1) and receive no gradient.
VarId batch_norm_infer(Tape& t, VarId x, VarId gamma, VarId beta,
                       const Tensor& mean, const Tensor& var, double eps);

// Maps an output index to its source coordinate, corners aligned:
// u * (in-1) / (out-1), and 0 when either extent is 1.
double src_coord(int u, int in_size, int out_size);

// Non-tape resize used by image handling and evaluation; same sampling rule
// as upsample_bilinear, but to an arbitrary target size (up or down).
Tensor resize_bilinear(const Tensor& x, int oh, int ow);

}  // namespace cagnet
