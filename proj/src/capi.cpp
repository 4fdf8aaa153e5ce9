#include "skelfall/skelfall.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "skelfall/checkpoint.hpp"
#include "skelfall/runner.hpp"

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename Fn>
sf_status guarded(Fn&& fn) {
  try {
    fn();
    return SF_OK;
  } catch (const skelfall::Error& e) {
    g_last_error = e.what();
    return static_cast<sf_status>(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SF_ERR_INTERNAL;
  }
}

skelfall::RunConfig config_from(const char* config_json) {
  if (!config_json || !*config_json) return skelfall::load_run_config("");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(config_json);
  } catch (const nlohmann::json::exception& e) {
    skelfall::fail(skelfall::ErrorCode::config, std::string("invalid config JSON: ") + e.what());
  }
  return skelfall::run_config_from_json(j);
}

}  // namespace

struct sf_model_s {
  skelfall::RunConfig config;
  std::unique_ptr<skelfall::FallDetectorNet> net;
};

extern "C" {

const char* sf_version(void) { return "skelfall 1.0.0"; }

const char* sf_status_name(sf_status status) {
  if (status == SF_OK) return "ok";
  return skelfall::error_code_name(static_cast<skelfall::ErrorCode>(status));
}

const char* sf_last_error(void) { return g_last_error.c_str(); }

void sf_string_free(char* s) { std::free(s); }

sf_status sf_synth(const char* config_json, const char* out_dir, char** out_summary_json) {
  return guarded([&] {
    if (!out_dir) skelfall::fail(skelfall::ErrorCode::invalid_argument, "out_dir is required");
    const std::string summary = skelfall::cmd_synth(config_from(config_json), out_dir);
    if (out_summary_json) *out_summary_json = dup_string(summary);
  });
}

sf_status sf_train(const char* config_json, const char* data_dir, const char* out_dir,
                   sf_epoch_callback callback, void* user, char** out_summary_json) {
  return guarded([&] {
    if (!data_dir || !out_dir)
      skelfall::fail(skelfall::ErrorCode::invalid_argument, "data_dir and out_dir are required");
    std::function<void(const std::string&)> on_epoch;
    if (callback)
      on_epoch = [callback, user](const std::string& line) { callback(line.c_str(), user); };
    const std::string summary =
        skelfall::cmd_train(config_from(config_json), data_dir, out_dir, on_epoch);
    if (out_summary_json) *out_summary_json = dup_string(summary);
  });
}

sf_status sf_evaluate(const char* checkpoint_path, const char* data_dir, const char* split,
                      const char* topology, int transfer, const char* report_path,
                      char** out_report_json) {
  return guarded([&] {
    if (!checkpoint_path || !data_dir)
      skelfall::fail(skelfall::ErrorCode::invalid_argument,
                     "checkpoint_path and data_dir are required");
    const std::string report =
        skelfall::cmd_eval(checkpoint_path, data_dir, split ? split : "", topology ? topology : "",
                           transfer != 0, report_path ? report_path : "");
    if (out_report_json) *out_report_json = dup_string(report);
  });
}

sf_status sf_profile(const char* checkpoint_path, const char* config_json, int runs,
                     int epoch_samples, const char* out_path, char** out_json) {
  return guarded([&] {
    if (!checkpoint_path && !config_json)
      skelfall::fail(skelfall::ErrorCode::invalid_argument,
                     "profile needs a checkpoint or a config");
    const bool from_config = checkpoint_path == nullptr;
    const std::string result =
        skelfall::cmd_profile(checkpoint_path ? checkpoint_path : "", config_from(config_json),
                              from_config, runs, epoch_samples, out_path ? out_path : "");
    if (out_json) *out_json = dup_string(result);
  });
}

sf_status sf_inspect(const char* skeleton_path, char** out_text) {
  return guarded([&] {
    if (!skeleton_path)
      skelfall::fail(skelfall::ErrorCode::invalid_argument, "skeleton_path is required");
    const std::string text = skelfall::cmd_inspect(skeleton_path);
    if (out_text) *out_text = dup_string(text);
  });
}

sf_status sf_model_create(const char* config_json, sf_model** out) {
  return guarded([&] {
    if (!out) skelfall::fail(skelfall::ErrorCode::invalid_argument, "out is required");
    auto model = std::make_unique<sf_model_s>();
    model->config = config_from(config_json);
    const skelfall::SkeletonTopology topo =
        skelfall::resolve_topology(model->config.data.topology);
    model->config.model.num_joints = topo.joint_count;
    model->config.model.seed = model->config.seed;
    model->net = std::make_unique<skelfall::FallDetectorNet>(model->config.model, topo);
    *out = model.release();
  });
}

sf_status sf_model_load(const char* checkpoint_path, sf_model** out) {
  return guarded([&] {
    if (!checkpoint_path || !out)
      skelfall::fail(skelfall::ErrorCode::invalid_argument, "checkpoint_path and out are required");
    auto loaded = skelfall::load_checkpoint(checkpoint_path);
    auto model = std::make_unique<sf_model_s>();
    model->config = loaded.config;
    model->net = std::move(loaded.net);
    *out = model.release();
  });
}

sf_status sf_model_save(sf_model* model, const char* checkpoint_path) {
  return guarded([&] {
    if (!model || !checkpoint_path)
      skelfall::fail(skelfall::ErrorCode::invalid_argument, "model and checkpoint_path are required");
    skelfall::save_checkpoint(*model->net, model->config, checkpoint_path);
  });
}

sf_status sf_model_info(sf_model* model, char** out_json) {
  return guarded([&] {
    if (!model) skelfall::fail(skelfall::ErrorCode::invalid_argument, "model is required");
    nlohmann::json j{{"params", model->net->count_params()},
                     {"flops", model->net->estimate_flops(model->config.preprocess.window)},
                     {"window", model->config.preprocess.window},
                     {"config", skelfall::run_config_to_json(model->config)}};
    if (out_json) *out_json = dup_string(j.dump(2));
  });
}

void sf_model_free(sf_model* model) { delete model; }

}  // extern "C"
