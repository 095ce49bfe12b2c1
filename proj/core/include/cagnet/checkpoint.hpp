#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "cagnet/params.hpp"

namespace cagnet {

// Binary training snapshot: magic + version, the run configuration text,
// then the parameter / buffer / velocity stores as named f64 arrays with
// explicit shapes, the next epoch index, and the RNG state. Everything is
// little-endian. Saving goes through a temp file + rename so a crash can
// never leave a torn checkpoint behind.
struct Checkpoint {
  std::string config_text;
  ParamStore params;
  ParamStore buffers;
  ParamStore velocity;
  std::int64_t next_epoch = 0;
  std::array<std::uint64_t, 4> rng_state{};
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cagnet
