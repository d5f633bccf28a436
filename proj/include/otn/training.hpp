#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "otn/data.hpp"
#include "otn/evaluation.hpp"
#include "otn/model.hpp"
#include "otn/tensor.hpp"

namespace otn {

// -- losses -------------------------------------------------------------------

inline constexpr double kProbabilityFloor = 1e-12;

// -log p[gold], with p[gold] clamped at kProbabilityFloor.
Tensor alsc_loss(Tape& tape, const Tensor& probs, Sentiment gold);
// Sum over unmasked tokens of -log P[i, gold_i].
Tensor aowe_loss(Tape& tape, const Tensor& probs, const std::vector<Tag>& gold, const Mask& mask);

// -- optimizer ----------------------------------------------------------------

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;
};

// Bias-corrected Adam over the tensors that require gradients; frozen
// tensors are skipped. A non-finite gradient aborts the step before any
// parameter changes and names the offending tensor.
void adam_step(const std::vector<NamedTensor>& params, AdamState& state, const AdamConfig& config);

// Rescales gradients so their global L2 norm is at most max_norm. Returns the
// norm before clipping.
double clip_gradients(const std::vector<NamedTensor>& params, double max_norm);
void zero_gradients(const std::vector<NamedTensor>& params);

// -- data split ---------------------------------------------------------------

// Returns the sizes (train, validation) for n items: the validation part is
// floor(fraction * n).
std::pair<std::size_t, std::size_t> split_sizes(std::size_t n, double fraction);

template <typename Instance>
std::pair<std::vector<Instance>, std::vector<Instance>> split_validation(
    const std::vector<Instance>& data, double fraction, Rng& rng) {
  if (data.empty()) throw std::invalid_argument("split_validation: empty dataset");
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("validation fraction must lie in (0, 1)");
  const auto [train_size, valid_size] = split_sizes(data.size(), fraction);
  const auto order = shuffled_order(data.size(), &rng);
  std::pair<std::vector<Instance>, std::vector<Instance>> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < train_size ? out.first : out.second).push_back(data[order[i]]);
  }
  return out;
}

// -- training loop --------------------------------------------------------------

enum class Schedule {
  alternate_batches,  // ALSC batch, AOWE batch, ALSC batch, ...
  task_blocks,        // every ALSC batch of the epoch, then every AOWE batch
};

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 16;
  double validation_fraction = 0.2;
  std::size_t patience = 10;
  std::size_t max_epochs = 100;
  std::uint64_t seed = 1;
  std::size_t num_runs = 5;
  double clip_norm = 5.0;  // <= 0 disables clipping
  Schedule schedule = Schedule::alternate_batches;
  // Stop as soon as the monitored value reaches this.
  std::optional<double> target_monitor;

  void validate() const;
};

struct JointData {
  std::vector<AlscInstance> alsc_train;
  std::vector<AlscInstance> alsc_valid;
  std::vector<AoweInstance> aowe_train;
  std::vector<AoweInstance> aowe_valid;
};

struct EpochLog {
  std::size_t epoch = 0;
  std::optional<double> alsc_loss;  // mean per instance over the epoch
  std::optional<double> aowe_loss;
  std::optional<double> val_alsc_acc;
  std::optional<double> val_alsc_f1;
  std::optional<double> val_aowe_f1;
  double elapsed_s = 0.0;

  nlohmann::json to_json() const;
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;  // 0 when no epoch completed
  double best_monitor = 0.0;
  bool diverged = false;
  std::string divergence;
};

// Seeds derived from one run seed: initialization, split, shuffling, dropout.
struct RunSeeds {
  std::uint64_t init;
  std::uint64_t split;
  std::uint64_t shuffle;
  std::uint64_t dropout;

  explicit RunSeeds(std::uint64_t seed);
};

// Sum of ALSC accuracy and AOWE F1 when both tasks run, else the single
// task's metric.
double monitored_value(const EpochLog& log, const ModelConfig& config);

// Alternating minimization of both losses with Adam. Trains `params` in
// place and leaves them at the best validated epoch. Divergence (non-finite
// loss or gradient) stops training with the last good parameters restored.
TrainResult train_joint(const JointData& data, OtnParams& params, const ModelConfig& config,
                        const TrainConfig& train, const Vocabulary& vocab,
                        const std::function<void(const EpochLog&)>& on_epoch = {});

// Eval-mode metrics of the parameters on the given sets; a task is reported
// when enabled in config and its dataset is non-empty.
EvalReport evaluate_model(const OtnParams& params, const ModelConfig& config,
                          const Vocabulary& vocab, const std::vector<AlscInstance>& alsc,
                          const std::vector<AoweInstance>& aowe);

// -- repeated runs --------------------------------------------------------------

using MetricMap = std::map<std::string, double>;

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single run
  std::size_t count = 0;
};

// Flattens a report into "alsc.accuracy", "alsc.macro_f1", "aowe.precision",
// "aowe.recall", "aowe.f1".
MetricMap flatten(const EvalReport& report);

std::map<std::string, MetricSummary> aggregate_runs(const std::vector<MetricMap>& runs);

// Calls run(seed) for k seeds (base_seed + i, or base_seed every time when
// same_seed) and aggregates the returned metrics.
std::map<std::string, MetricSummary> run_repeated(
    const std::function<MetricMap(std::uint64_t)>& run, std::size_t k, std::uint64_t base_seed,
    bool same_seed = false);

}  // namespace otn
