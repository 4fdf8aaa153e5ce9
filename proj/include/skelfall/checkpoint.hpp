#pragma once

#include <memory>
#include <string>

#include "skelfall/config.hpp"
#include "skelfall/model.hpp"

namespace skelfall {

/// Versioned binary container: magic, version, a JSON header (effective run
/// config, resolved topology, tensor directory) and raw little-endian float
/// payload. Round-trips are bit-exact. Layout details in
/// docs/checkpoint_format.md.
void save_checkpoint(FallDetectorNet& net, const RunConfig& cfg, const std::string& path);

struct LoadedModel {
  RunConfig config;
  std::unique_ptr<FallDetectorNet> net;
};

LoadedModel load_checkpoint(const std::string& path);

/// FNV-1a over every parameter, batch-norm buffer and normalization statistic
/// byte; evaluation paths assert it unchanged.
uint64_t state_checksum(FallDetectorNet& net);

}  // namespace skelfall
