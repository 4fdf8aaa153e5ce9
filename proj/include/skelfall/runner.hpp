#pragma once

#include <functional>
#include <string>

#include "skelfall/config.hpp"

namespace skelfall {

/// Path-level command implementations shared by the C API. Every command
/// echoes its effective config into the artifacts it writes and returns a
/// JSON (or plain-text for inspect) summary. File outputs are atomic.

std::string cmd_synth(const RunConfig& cfg, const std::string& out_dir);

std::string cmd_train(const RunConfig& cfg, const std::string& data_dir,
                      const std::string& out_dir,
                      const std::function<void(const std::string&)>& on_epoch_json = {});

std::string cmd_eval(const std::string& checkpoint_path, const std::string& data_dir,
                     const std::string& split_override, const std::string& topology_override,
                     bool transfer, const std::string& out_path);

std::string cmd_profile(const std::string& checkpoint_path, const RunConfig& cfg, bool from_config,
                        int runs, int epoch_samples, const std::string& out_path);

std::string cmd_inspect(const std::string& skeleton_path);

void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace skelfall
