#pragma once
// Command layer: run configuration, repeated training runs, the ablation
// sweep and the `otn` command-line front end.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "otn/data.hpp"
#include "otn/model.hpp"
#include "otn/training.hpp"

namespace otn {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::filesystem::path alsc_train;
  std::filesystem::path alsc_test;
  std::filesystem::path aowe_train;
  std::filesystem::path aowe_test;
  // Explicit validation sets; when unset, validation is split off training.
  std::filesystem::path alsc_valid;
  std::filesystem::path aowe_valid;
  std::filesystem::path embeddings;
  std::filesystem::path out_dir = "otn-out";

  // Model and training invariants, plus every path the enabled tasks need
  // must exist. Throws ConfigError.
  void validate() const;
};

// Flat dotted keys: "model.*", "train.*", "data.*", "output.dir". Relative
// paths resolve against base_dir. Unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& flat, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

struct Datasets {
  std::vector<AlscInstance> alsc_train;
  std::vector<AlscInstance> alsc_test;
  std::vector<AoweInstance> aowe_train;
  std::vector<AoweInstance> aowe_test;
  // Empty means split off train.
  std::vector<AlscInstance> alsc_valid;
  std::vector<AoweInstance> aowe_valid;
};

// Datasets plus the vocabulary over all of them and the frozen word table.
struct PreparedData {
  Datasets sets;
  Vocabulary vocab;
  Tensor word_table;
};

// Word vectors come from `embeddings` when given, else are random. Rows
// missing from the file are drawn from `seed`.
PreparedData prepare_data(Datasets sets, const EmbeddingSpec& spec,
                          const std::optional<std::filesystem::path>& embeddings,
                          std::uint64_t seed);
PreparedData load_run_data(const RunConfig& config);

struct RunOutcome {
  std::uint64_t seed = 0;
  TrainResult train;
  EvalReport test;
  OtnParams params;
};

// One seeded run: validation split, initialization, training, test metrics.
RunOutcome train_single_run(const PreparedData& data, const ModelConfig& model,
                            const TrainConfig& train,
                            const std::function<void(const EpochLog&)>& on_epoch = {});

struct ExperimentResult {
  std::vector<RunOutcome> runs;
  std::map<std::string, MetricSummary> summary;

  bool diverged() const;
};

// train.num_runs runs with seeds train.seed, train.seed + 1, ...
ExperimentResult run_experiment(
    const PreparedData& data, const ModelConfig& model, const TrainConfig& train,
    const std::function<void(std::size_t run, const EpochLog&)>& on_epoch = {});

struct AblationVariant {
  std::string name;
  ModelConfig model;
};

// OTN, -ALSC task, -AOWE task, -AOWE2ALSC, -ALSC2AOWE.
std::vector<AblationVariant> ablation_variants(const ModelConfig& full);

struct AblationRow {
  std::string name;
  std::map<std::string, MetricSummary> summary;
};

std::string format_ablation_table(const std::vector<AblationRow>& rows);
nlohmann::json to_json(const std::vector<AblationRow>& rows);

// Entry point of the `otn` binary; returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace otn
