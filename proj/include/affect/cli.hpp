#pragma once

// Run configuration files and the `affect` command-line front end.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "affect/data_io.hpp"
#include "affect/manifold.hpp"
#include "affect/serialization.hpp"
#include "affect/training.hpp"

namespace affect {

/// Adds `amount` to coordinate `axis` of every signal of `state`; used to
/// model a drift in one state's input distribution.
struct DatasetShift {
  std::size_t state = 0;
  std::size_t axis = 0;
  double amount = 0.0;
};

/// JSON run configuration:
///   manifold:  canonical name, path to a spec JSON, or an inline spec
///   dataset:   {source: synthetic, per_state, dim, separation, seed}
///            | {source: idx, images, labels, assignment: {"raw": state}}
///            | {source: csv, path}
///              plus an optional shift {state, axis, amount}
///   holdout_fraction, split_seed, network {hidden, dropout, seed},
///   train {TrainConfig fields}, output_dir
/// Relative paths resolve against the config file's directory.
struct RunConfig {
  Json manifold;
  Json dataset;
  double holdout_fraction = 0.2;
  std::uint64_t split_seed = 1;
  std::vector<std::size_t> hidden{32, 32};
  double dropout = 0.1;
  std::uint64_t network_seed = 1;
  TrainConfig train;
  std::filesystem::path output_dir = "out";
  std::filesystem::path base_dir = ".";
};

RunConfig run_config_from_json(const Json& j, const std::filesystem::path& base_dir);
/// Reads the file and applies the AFFECT_SEED environment override, which
/// replaces the training and network seeds.
RunConfig load_run_config(const std::filesystem::path& path);

struct PreparedRun {
  ManifoldSpec spec;
  SignalDataset train;
  SignalDataset test;
};

SignalDataset load_dataset(const RunConfig& config, std::size_t state_count);
PreparedRun prepare_run(const RunConfig& config);
TrainResult run_training(const RunConfig& config, const PreparedRun& run);

/// Entry point behind the `affect` binary; `args` excludes the program name.
/// Exit codes: 0 success, 1 usage error, 2 data/format error, 3 diverged.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace affect
