#pragma once

#include <string>

#include "json.hpp"
#include "skelfall/model.hpp"
#include "skelfall/preprocess.hpp"
#include "skelfall/synthetic.hpp"
#include "skelfall/train.hpp"

namespace skelfall {

struct DataConfig {
  int fall_class = 43;  // NTU action id for "falling"; configurable, not a truth
  std::string split = "xsub60";
  std::string topology = "ntu25";  // builtin name or topology file path
};

/// Everything a run needs; the schema is versioned and strict (unknown keys
/// are config errors). The effective value is echoed into every artifact.
struct RunConfig {
  int version = 1;
  uint64_t seed = 42;
  ModelConfig model;
  PreprocessConfig preprocess;
  TrainConfig train;
  DataConfig data;
  SyntheticSpec synth;
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& cfg);
/// Empty path yields the defaults.
RunConfig load_run_config(const std::string& path);
void validate_run_config(const RunConfig& cfg);

/// "ntu25" resolves to the builtin 25-joint skeleton, anything else is read
/// as a topology file path.
SkeletonTopology resolve_topology(const std::string& spec);

}  // namespace skelfall
