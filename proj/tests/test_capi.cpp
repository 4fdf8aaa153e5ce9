// Exercises the shared-library surface the way an embedder would: opaque
// handles, error codes, JSON strings.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "skelfall/skelfall.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Workspace {
  fs::path root;
  Workspace() : root(fs::temp_directory_path() / "skelfall_capi") {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workspace() { fs::remove_all(root); }
  std::string str(const char* leaf) const { return (root / leaf).string(); }
};

// Small corpus + fast net; shared by the API flow test.
const char* kConfig = R"({
  "seed": 3,
  "model": {"bodies": 1, "embed_channels": 5, "blocks": [{"channels": 7, "stride": 1}, {"channels": 9, "stride": 2}], "temporal_kernel": 3, "hops": 2},
  "preprocess": {"max_frames": 24, "window": 20},
  "train": {"epochs": 2, "batch_size": 8, "eval_every": 2},
  "data": {"split": "xview60"},
  "synth": {"n_fall": 5, "n_other": 25, "frames": [20, 28], "seed": 5}
})";

std::string take(char* s) {
  REQUIRE(s != nullptr);
  std::string out(s);
  sf_string_free(s);
  return out;
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(sf_version()).find("skelfall") != std::string::npos);
  CHECK(std::string(sf_status_name(SF_OK)) == "ok");
  CHECK(std::string(sf_status_name(SF_ERR_CONFIG)) == "config");
  CHECK(std::string(sf_status_name(SF_ERR_TOPOLOGY_MISMATCH)) == "topology_mismatch");
}

TEST_CASE("null arguments are invalid-argument errors with messages") {
  CHECK(sf_synth(kConfig, nullptr, nullptr) == SF_ERR_INVALID_ARGUMENT);
  CHECK(std::string(sf_last_error()).size() > 0);
  CHECK(sf_inspect(nullptr, nullptr) == SF_ERR_INVALID_ARGUMENT);
  CHECK(sf_profile(nullptr, nullptr, 1, 0, nullptr, nullptr) == SF_ERR_INVALID_ARGUMENT);
}

TEST_CASE("bad config JSON and unknown keys map to SF_ERR_CONFIG") {
  Workspace ws;
  CHECK(sf_synth("{nope", ws.str("x").c_str(), nullptr) == SF_ERR_CONFIG);
  CHECK(sf_synth(R"({"bogus_key": 1})", ws.str("x").c_str(), nullptr) == SF_ERR_CONFIG);
  CHECK(std::string(sf_last_error()).find("bogus_key") != std::string::npos);
}

TEST_CASE("end-to-end C API flow: synth, inspect, train, eval, profile") {
  Workspace ws;
  const std::string corpus = ws.str("corpus");
  const std::string run = ws.str("run");

  char* summary = nullptr;
  REQUIRE(sf_synth(kConfig, corpus.c_str(), &summary) == SF_OK);
  const json synth_summary = json::parse(take(summary));
  CHECK(synth_summary.at("samples").get<int>() == 30);
  CHECK(synth_summary.at("falls").get<int>() == 5);

  // inspect one emitted file
  std::string one;
  for (const auto& entry : fs::directory_iterator(corpus))
    if (entry.path().extension() == ".skeleton") {
      one = entry.path().string();
      break;
    }
  REQUIRE_FALSE(one.empty());
  char* text = nullptr;
  REQUIRE(sf_inspect(one.c_str(), &text) == SF_OK);
  CHECK(take(text).find("joints:      25") != std::string::npos);

  int epochs_seen = 0;
  const auto count_epochs = [](const char*, void* user) { ++*static_cast<int*>(user); };
  char* train_summary = nullptr;
  REQUIRE(sf_train(kConfig, corpus.c_str(), run.c_str(), count_epochs, &epochs_seen,
                   &train_summary) == SF_OK);
  const json ts = json::parse(take(train_summary));
  CHECK(epochs_seen == 2);
  CHECK(fs::exists(fs::path(run) / "last.ckpt"));
  CHECK(fs::exists(fs::path(run) / "history.jsonl"));
  CHECK(fs::exists(fs::path(run) / "effective_config.json"));
  const std::string ckpt = ts.at("checkpoint").get<std::string>();

  char* report = nullptr;
  REQUIRE(sf_evaluate(ckpt.c_str(), corpus.c_str(), nullptr, nullptr, 0,
                      ws.str("report.json").c_str(), &report) == SF_OK);
  const json rj = json::parse(take(report));
  CHECK(rj.at("split").get<std::string>() == "xview60");
  CHECK(rj.contains("accuracy"));
  CHECK(fs::exists(ws.str("report.json")));

  char* transfer_report = nullptr;
  REQUIRE(sf_evaluate(ckpt.c_str(), corpus.c_str(), "xset120", nullptr, 1, nullptr,
                      &transfer_report) == SF_OK);
  CHECK(json::parse(take(transfer_report)).at("transfer").get<bool>());

  // topology mismatch: 15-joint star vs the 25-joint checkpoint
  const std::string topo_path = ws.str("uwa15.txt");
  {
    std::ofstream out(topo_path);
    out << "15 0\n";
    for (int i = 1; i < 15; ++i) out << "0 " << i << "\n";
  }
  CHECK(sf_evaluate(ckpt.c_str(), corpus.c_str(), nullptr, topo_path.c_str(), 0, nullptr,
                    nullptr) == SF_ERR_TOPOLOGY_MISMATCH);

  char* profile = nullptr;
  REQUIRE(sf_profile(ckpt.c_str(), nullptr, 2, 50, nullptr, &profile) == SF_OK);
  const json pj = json::parse(take(profile));
  CHECK(pj.at("params").get<int64_t>() > 0);
  CHECK(pj.at("mean_inference_ms").get<double>() > 0);
}

TEST_CASE("model handles create, save, reload and report info") {
  Workspace ws;
  sf_model* model = nullptr;
  REQUIRE(sf_model_create(kConfig, &model) == SF_OK);
  REQUIRE(model != nullptr);
  char* info = nullptr;
  REQUIRE(sf_model_info(model, &info) == SF_OK);
  const json ij = json::parse(take(info));
  CHECK(ij.at("params").get<int64_t>() > 0);
  CHECK(ij.at("flops").get<int64_t>() > 0);

  const std::string ckpt = ws.str("handle.ckpt");
  REQUIRE(sf_model_save(model, ckpt.c_str()) == SF_OK);
  sf_model_free(model);

  sf_model* reloaded = nullptr;
  REQUIRE(sf_model_load(ckpt.c_str(), &reloaded) == SF_OK);
  char* info2 = nullptr;
  REQUIRE(sf_model_info(reloaded, &info2) == SF_OK);
  CHECK(json::parse(take(info2)).at("params") == ij.at("params"));
  sf_model_free(reloaded);

  CHECK(sf_model_load(ws.str("missing.ckpt").c_str(), &reloaded) == SF_ERR_IO);
}
