#pragma once

#include <cstdint>
#include <string>

#include "cagnet/loss.hpp"
#include "cagnet/model.hpp"

namespace cagnet {

struct TrainConfig {
  double lr0 = 8e-3;
  double momentum = 0.9;
  int patience = 10;   // epochs without improvement before the lr drops
  double factor = 0.1;
  int epochs = 30;
  int batch_size = 4;  // falls back to 1 when norm is disabled
  std::uint64_t seed = 1;
  bool augment = true;
  double target_mae = 0.0;  // > 0 stops training once train MAE is below
};

struct RunConfig {
  CagnetConfig model;
  LossConfig loss;
  TrainConfig train;
};

// Plain key=value lines; '#' starts a comment. Unknown keys and malformed
// values are errors naming the offender. Keys not present keep their
// defaults; batch_size additionally defaults to 1 when norm=none.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Canonical text form: every key, fixed order, round-trips exactly.
std::string serialize_config(const RunConfig& cfg);

}  // namespace cagnet
