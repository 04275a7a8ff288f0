#pragma once

#include <string>

#include "mml/model.hpp"
#include "mml/trainers.hpp"

namespace mml {

/// A checkpoint directory holds manifest.json (format version, architecture,
/// tensor table with partition labels, counters, blob checksum) and
/// tensors.bin (the tensors as little-endian float64 in manifest order).
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ArchConfig arch;
  std::size_t in_c0 = 0, in_c1 = 0, img = 0;
  TrainSnapshot snap;
};

void save_checkpoint(const std::string& dir, MultiModalNet& net,
                     const TrainSnapshot& snap);
Checkpoint load_checkpoint(const std::string& dir);

/// Rebuilds a network from a loaded checkpoint (weights, stats and counters
/// all restored; momentum stays in cp.snap for resuming).
MultiModalNet restore_net(const Checkpoint& cp);

}  // namespace mml
