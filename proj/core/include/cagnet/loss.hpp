#pragma once

#include "cagnet/tape.hpp"

namespace cagnet {

struct LossConfig {
  double alpha1 = 1.0;  // precision term
  double alpha2 = 0.5;  // recall term
  double alpha3 = 1.0;  // mean absolute error term
  double epsilon = 1e-7;
};

// Saliency objective built from soft precision, soft recall and MAE,
// each computed per image and averaged over the batch:
//   L = a1*(1 - mean P) + a2*(1 - mean R) + a3*mean MAE
// with P = sum(s*g)/(sum(s)+eps) and R = sum(s*g)/(sum(g)+eps).
// s must lie in [0,1]; g must be exactly 0/1. An all-background g gives
// R = 0 (the recall term saturates at its weight) - no special casing.
VarId designed_loss(Tape& t, VarId s, VarId g, const LossConfig& cfg = {});

// Per-pixel binary cross entropy over all pixels of the batch, with the
// prediction clamped to [delta, 1-delta] before the logs.
VarId cross_entropy_loss(Tape& t, VarId s, VarId g, double delta = 1e-7);

}  // namespace cagnet
