// Command-line front end over the skelfall C API. Flag overrides win over the
// config file; logs go to stderr, artifacts to files.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "skelfall/skelfall.h"

namespace {

using nlohmann::json;

struct CommonFlags {
  std::string config_path;
  std::string data_dir;
  std::string split;
  std::string checkpoint;
  std::string out;
  std::string topology;
  std::optional<uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> lr;
  std::optional<int> window;
  std::optional<int> hops;
};

void add_config_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON run-config file");
  cmd->add_option("--seed", flags.seed, "Global RNG seed override");
  cmd->add_option("--epochs", flags.epochs, "Training epochs override");
  cmd->add_option("--batch-size", flags.batch_size, "Batch size override");
  cmd->add_option("--lr", flags.lr, "Initial learning rate override");
  cmd->add_option("--window", flags.window, "Temporal window length override");
  cmd->add_option("--hops", flags.hops, "Adjacency hop limit override");
  cmd->add_option("--topology", flags.topology, "Topology: 'ntu25' or an edge-list file");
}

// Loads the config file (when given) and applies flag overrides; the core
// validates the merged document against the schema.
std::string merged_config(const CommonFlags& flags, bool seed_synth) {
  json cfg = json::object();
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    if (!in) {
      std::cerr << "error class=io: cannot open config file: " << flags.config_path << "\n";
      std::exit(SF_ERR_IO);
    }
    try {
      in >> cfg;
    } catch (const json::exception& e) {
      std::cerr << "error class=config: " << flags.config_path << ": " << e.what() << "\n";
      std::exit(SF_ERR_CONFIG);
    }
  }
  if (flags.seed) {
    cfg["seed"] = *flags.seed;
    if (seed_synth) cfg["synth"]["seed"] = *flags.seed;
  }
  if (flags.epochs) cfg["train"]["epochs"] = *flags.epochs;
  if (flags.batch_size) cfg["train"]["batch_size"] = *flags.batch_size;
  if (flags.lr) cfg["train"]["lr"] = *flags.lr;
  if (flags.window) cfg["preprocess"]["window"] = *flags.window;
  if (flags.hops) cfg["model"]["hops"] = *flags.hops;
  if (!flags.split.empty()) cfg["data"]["split"] = flags.split;
  if (!flags.topology.empty()) cfg["data"]["topology"] = flags.topology;
  return cfg.dump();
}

int finish(sf_status status) {
  if (status == SF_OK) return 0;
  std::cerr << "error class=" << sf_status_name(status) << ": " << sf_last_error() << "\n";
  return static_cast<int>(status);
}

void print_and_free(char* text) {
  if (!text) return;
  std::cout << text << "\n";
  sf_string_free(text);
}

void epoch_printer(const char* epoch_json, void*) { std::cerr << epoch_json << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skelfall: skeleton-joint fall detection (train / evaluate / profile)"};
  app.require_subcommand(1);

  CommonFlags synth_flags, train_flags, eval_flags, transfer_flags, profile_flags;

  auto* synth = app.add_subcommand("synth", "Generate a deterministic synthetic corpus");
  add_config_flags(synth, synth_flags);
  synth->add_option("--out", synth_flags.out, "Output corpus directory")->required();

  auto* train = app.add_subcommand("train", "Train a detector on a .skeleton corpus");
  add_config_flags(train, train_flags);
  train->add_option("--data-dir", train_flags.data_dir, "Corpus directory")->required();
  train->add_option("--out", train_flags.out, "Run output directory")->required();
  train->add_option("--split", train_flags.split, "Evaluation split protocol");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a split's test side");
  eval->add_option("--checkpoint", eval_flags.checkpoint, "Checkpoint file")->required();
  eval->add_option("--data-dir", eval_flags.data_dir, "Corpus directory")->required();
  eval->add_option("--split", eval_flags.split, "Split protocol override");
  eval->add_option("--topology", eval_flags.topology, "Topology the data uses");
  eval->add_option("--out", eval_flags.out, "Report file (JSON)");

  auto* transfer =
      app.add_subcommand("transfer-eval", "Evaluate on another dataset without any fine-tuning");
  transfer->add_option("--checkpoint", transfer_flags.checkpoint, "Checkpoint file")->required();
  transfer->add_option("--data-dir", transfer_flags.data_dir, "Corpus directory")->required();
  transfer->add_option("--split", transfer_flags.split, "Split protocol override");
  transfer->add_option("--topology", transfer_flags.topology, "Topology the data uses");
  transfer->add_option("--out", transfer_flags.out, "Report file (JSON)");

  auto* profile = app.add_subcommand("profile", "Parameter / FLOP / timing accounting");
  add_config_flags(profile, profile_flags);
  profile->add_option("--checkpoint", profile_flags.checkpoint, "Checkpoint file");
  profile->add_option("--out", profile_flags.out, "Profile file (JSON)");
  int profile_runs = 10;
  int profile_epoch_samples = 1000;
  profile->add_option("--runs", profile_runs, "Timed forward passes");
  profile->add_option("--epoch-samples", profile_epoch_samples,
                      "Samples per epoch for the training-time estimate");

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect", "Summarize one .skeleton file");
  inspect->add_option("file", inspect_path, "Skeleton file")->required();

  CLI11_PARSE(app, argc, argv);

  if (synth->parsed()) {
    char* summary = nullptr;
    const sf_status status =
        sf_synth(merged_config(synth_flags, true).c_str(), synth_flags.out.c_str(), &summary);
    if (status == SF_OK) print_and_free(summary);
    return finish(status);
  }
  if (train->parsed()) {
    char* summary = nullptr;
    const sf_status status =
        sf_train(merged_config(train_flags, false).c_str(), train_flags.data_dir.c_str(),
                 train_flags.out.c_str(), epoch_printer, nullptr, &summary);
    if (status == SF_OK) print_and_free(summary);
    return finish(status);
  }
  if (eval->parsed() || transfer->parsed()) {
    const CommonFlags& flags = eval->parsed() ? eval_flags : transfer_flags;
    char* report = nullptr;
    const sf_status status = sf_evaluate(
        flags.checkpoint.c_str(), flags.data_dir.c_str(),
        flags.split.empty() ? nullptr : flags.split.c_str(),
        flags.topology.empty() ? nullptr : flags.topology.c_str(), transfer->parsed() ? 1 : 0,
        flags.out.empty() ? nullptr : flags.out.c_str(), &report);
    if (status == SF_OK) print_and_free(report);
    return finish(status);
  }
  if (profile->parsed()) {
    char* result = nullptr;
    const std::string config = merged_config(profile_flags, false);
    const bool have_ckpt = !profile_flags.checkpoint.empty();
    const sf_status status = sf_profile(
        have_ckpt ? profile_flags.checkpoint.c_str() : nullptr,
        have_ckpt ? nullptr : config.c_str(), profile_runs, profile_epoch_samples,
        profile_flags.out.empty() ? nullptr : profile_flags.out.c_str(), &result);
    if (status == SF_OK) print_and_free(result);
    return finish(status);
  }
  if (inspect->parsed()) {
    char* text = nullptr;
    const sf_status status = sf_inspect(inspect_path.c_str(), &text);
    if (status == SF_OK) print_and_free(text);
    return finish(status);
  }
  return 0;
}
