#include "otn/training.hpp"

#include <atomic>
#include <cmath>
#include <deque>
#include <iostream>
#include <limits>

namespace otn {

using nlohmann::json;

// -- losses -------------------------------------------------------------------

namespace {

std::atomic<std::size_t> clamp_warnings{0};

void warn_if_clamped(std::span<const double> probs, const std::vector<std::size_t>& picks) {
  for (std::size_t i : picks) {
    if (probs[i] < kProbabilityFloor && clamp_warnings.fetch_add(1) < 10) {
      std::clog << "warning: gold-class probability " << probs[i] << " clamped to "
                << kProbabilityFloor << '\n';
    }
  }
}

Tensor negative_log_likelihood(Tape& tape, const Tensor& probs,
                               const std::vector<std::size_t>& picks) {
  warn_if_clamped(probs.values(), picks);
  if (picks.empty()) return Tensor::scalar(0.0);
  Tensor picked = select(tape, probs, picks);
  return scale(tape, sum(tape, log(tape, picked, kProbabilityFloor)), -1.0);
}

}  // namespace

Tensor alsc_loss(Tape& tape, const Tensor& probs, Sentiment gold) {
  if (probs.rank() != 1 || probs.size() != kNumSentiments) {
    throw DimensionError("alsc_loss: expected 3 class probabilities, got " +
                         shape_string(probs.shape()));
  }
  return negative_log_likelihood(tape, probs, {static_cast<std::size_t>(gold)});
}

Tensor aowe_loss(Tape& tape, const Tensor& probs, const std::vector<Tag>& gold, const Mask& mask) {
  if (probs.rank() != 2 || probs.dim(1) != kNumTags || probs.dim(0) != gold.size() ||
      mask.size() != gold.size()) {
    throw DimensionError("aowe_loss: probabilities " + shape_string(probs.shape()) + " for " +
                         std::to_string(gold.size()) + " tags");
  }
  std::vector<std::size_t> picks;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (mask[i]) picks.push_back(i * kNumTags + static_cast<std::size_t>(gold[i]));
  }
  return negative_log_likelihood(tape, probs, picks);
}

// -- optimizer ----------------------------------------------------------------

void adam_step(const std::vector<NamedTensor>& params, AdamState& state, const AdamConfig& config) {
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.tensor.size(), 0.0);
      state.second_moment.emplace_back(p.tensor.size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw std::invalid_argument("adam_step: optimizer state belongs to another parameter set");
  }
  for (const auto& p : params) {
    if (!p.tensor.requires_grad() || !p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient in " + p.name);
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor tensor = params[k].tensor;
    if (!tensor.requires_grad() || !tensor.has_grad()) continue;
    auto values = tensor.values();
    auto grad = tensor.grad();
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      values[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

double clip_gradients(const std::vector<NamedTensor>& params, double max_norm) {
  double squared = 0.0;
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) squared += g * g;
  }
  const double norm = std::sqrt(squared);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (const auto& p : params) {
      if (!p.tensor.has_grad()) continue;
      for (double& g : p.tensor.grad()) g *= factor;
    }
  }
  return norm;
}

void zero_gradients(const std::vector<NamedTensor>& params) {
  for (const auto& p : params) p.tensor.zero_grad();
}

std::pair<std::size_t, std::size_t> split_sizes(std::size_t n, double fraction) {
  const auto valid = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  return {n - valid, valid};
}

// -- training loop --------------------------------------------------------------

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in (0, 1)");
  }
  if (patience == 0) throw ConfigError("patience must be at least 1");
  if (max_epochs == 0) throw ConfigError("max_epochs must be at least 1");
  if (num_runs == 0) throw ConfigError("num_runs must be at least 1");
  if (!(adam.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
}

json EpochLog::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return json{{"epoch", epoch},
              {"alsc_loss", opt(alsc_loss)},
              {"aowe_loss", opt(aowe_loss)},
              {"val_alsc_acc", opt(val_alsc_acc)},
              {"val_alsc_f1", opt(val_alsc_f1)},
              {"val_aowe_f1", opt(val_aowe_f1)},
              {"elapsed_s", elapsed_s}};
}

RunSeeds::RunSeeds(std::uint64_t seed) {
  std::seed_seq seq{seed, std::uint64_t{0x07e1}};
  std::array<std::uint32_t, 8> words{};
  seq.generate(words.begin(), words.end());
  auto combine = [&](std::size_t i) {
    return (static_cast<std::uint64_t>(words[2 * i]) << 32) | words[2 * i + 1];
  };
  init = combine(0);
  split = combine(1);
  shuffle = combine(2);
  dropout = combine(3);
}

double monitored_value(const EpochLog& log, const ModelConfig& config) {
  double value = 0.0;
  if (config.enable_alsc_task) value += log.val_alsc_acc.value_or(0.0);
  if (config.enable_aowe_task) value += log.val_aowe_f1.value_or(0.0);
  return value;
}

namespace {

struct Divergence {
  std::string what;
};

// Endless stream of shuffled batches over one task's training inputs.
class BatchStream {
 public:
  template <typename Instance>
  BatchStream(const std::vector<Instance>& data, const Vocabulary& vocab, std::size_t batch_size,
              Rng& rng)
      : refill_([&data, &vocab, batch_size, &rng] { return batchify(data, vocab, batch_size, &rng); }) {}

  // Batches needed for one pass over the data.
  std::size_t batches_per_pass() {
    fill();
    return pass_length_;
  }

  Batch next() {
    fill();
    Batch b = std::move(pending_.front());
    pending_.pop_front();
    return b;
  }

 private:
  void fill() {
    if (!pending_.empty()) return;
    auto batches = refill_();
    pass_length_ = batches.size();
    for (auto& b : batches) pending_.push_back(std::move(b));
  }

  std::function<std::vector<Batch>()> refill_;
  std::deque<Batch> pending_;
  std::size_t pass_length_ = 0;
};

template <typename Instance>
std::vector<SentenceInput> encode_all(const std::vector<Instance>& data, const Vocabulary& vocab) {
  std::vector<SentenceInput> inputs;
  inputs.reserve(data.size());
  for (const auto& inst : data) inputs.push_back(make_input(vocab, inst.tokens, inst.aspect));
  return inputs;
}

class Trainer {
 public:
  Trainer(const JointData& data, OtnParams& params, const ModelConfig& config,
          const TrainConfig& train, const Vocabulary& vocab)
      : data_(data),
        params_(params),
        trainable_(params.trainable()),
        config_(config),
        train_(train),
        seeds_(train.seed),
        shuffle_rng_(seeds_.shuffle),
        streams_(seeds_.dropout),
        alsc_inputs_(encode_all(data.alsc_train, vocab)),
        aowe_inputs_(encode_all(data.aowe_train, vocab)) {
    if (config.enable_alsc_task) {
      alsc_stream_.emplace(data.alsc_train, vocab, train.batch_size, shuffle_rng_);
    }
    if (config.enable_aowe_task) {
      aowe_stream_.emplace(data.aowe_train, vocab, train.batch_size, shuffle_rng_);
    }
  }

  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  // Returns (mean ALSC loss, mean AOWE loss) over the epoch. The longer task
  // defines the epoch; the shorter one keeps reshuffling.
  std::pair<std::optional<double>, std::optional<double>> epoch() {
    BatchStream* alsc = alsc_stream_ ? &*alsc_stream_ : nullptr;
    BatchStream* aowe = aowe_stream_ ? &*aowe_stream_ : nullptr;
    const std::size_t alsc_passes = alsc ? alsc->batches_per_pass() : 0;
    const std::size_t aowe_passes = aowe ? aowe->batches_per_pass() : 0;
    const std::size_t steps = std::max(alsc_passes, aowe_passes);
    Totals alsc_total, aowe_total;
    if (train_.schedule == Schedule::alternate_batches) {
      for (std::size_t s = 0; s < steps; ++s) {
        if (alsc) alsc_step(alsc->next(), alsc_total);
        if (aowe) aowe_step(aowe->next(), aowe_total);
      }
    } else {
      if (alsc) for (std::size_t s = 0; s < steps; ++s) alsc_step(alsc->next(), alsc_total);
      if (aowe) for (std::size_t s = 0; s < steps; ++s) aowe_step(aowe->next(), aowe_total);
    }
    return {alsc_total.mean(), aowe_total.mean()};
  }

 private:
  struct Totals {
    double loss = 0.0;
    std::size_t count = 0;
    std::optional<double> mean() const {
      if (count == 0) return std::nullopt;
      return loss / static_cast<double>(count);
    }
  };

  void alsc_step(const Batch& batch, Totals& totals) {
    Tape tape;
    Tensor total;
    for (std::size_t member : batch.members) {
      OtnOutput out = forward_joint(tape, alsc_inputs_[member], params_, config_, Mode::train,
                                    streams_, {.alsc = true, .aowe = false});
      Tensor loss = alsc_loss(tape, out.alsc_probs, data_.alsc_train[member].label);
      total = total.defined() ? add(tape, total, loss) : loss;
    }
    totals.loss += optimize(tape, total, "ALSC");
    totals.count += batch.members.size();
  }

  void aowe_step(const Batch& batch, Totals& totals) {
    Tape tape;
    Tensor total;
    for (std::size_t member : batch.members) {
      const SentenceInput& input = aowe_inputs_[member];
      OtnOutput out = forward_joint(tape, input, params_, config_, Mode::train, streams_,
                                    {.alsc = false, .aowe = true});
      Tensor loss = aowe_loss(tape, out.tag_probs, data_.aowe_train[member].tags, input.mask);
      total = total.defined() ? add(tape, total, loss) : loss;
    }
    totals.loss += optimize(tape, total, "AOWE");
    totals.count += batch.members.size();
  }

  double optimize(Tape& tape, const Tensor& loss, const char* task) {
    const double value = loss.item();
    if (!std::isfinite(value)) throw Divergence{std::string(task) + " loss is not finite"};
    tape.backward(loss);
    try {
      clip_gradients(trainable_, train_.clip_norm);
      adam_step(trainable_, adam_, train_.adam);
    } catch (const NumericError& e) {
      zero_gradients(trainable_);
      throw Divergence{e.what()};
    }
    zero_gradients(trainable_);
    return value;
  }

  const JointData& data_;
  OtnParams& params_;
  std::vector<NamedTensor> trainable_;
  const ModelConfig& config_;
  const TrainConfig& train_;
  RunSeeds seeds_;
  Rng shuffle_rng_;
  DropoutStreams streams_;
  AdamState adam_;
  std::vector<SentenceInput> alsc_inputs_;
  std::vector<SentenceInput> aowe_inputs_;
  std::optional<BatchStream> alsc_stream_;
  std::optional<BatchStream> aowe_stream_;
};

}  // namespace

TrainResult train_joint(const JointData& data, OtnParams& params, const ModelConfig& config,
                        const TrainConfig& train, const Vocabulary& vocab,
                        const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  train.validate();
  if (config.enable_alsc_task && (data.alsc_train.empty() || data.alsc_valid.empty())) {
    throw ConfigError("ALSC task enabled without training or validation data");
  }
  if (config.enable_aowe_task && (data.aowe_train.empty() || data.aowe_valid.empty())) {
    throw ConfigError("AOWE task enabled without training or validation data");
  }

  Trainer trainer(data, params, config, train, vocab);

  TrainResult result;
  result.best_monitor = -std::numeric_limits<double>::infinity();
  ParamSnapshot best = snapshot(params);
  std::size_t since_best = 0;
  const auto started = std::chrono::steady_clock::now();

  for (std::size_t epoch = 1; epoch <= train.max_epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch;
    try {
      std::tie(log.alsc_loss, log.aowe_loss) = trainer.epoch();
    } catch (const Divergence& d) {
      result.diverged = true;
      result.divergence = "epoch " + std::to_string(epoch) + ": " + d.what;
      break;
    } catch (const NumericError& e) {
      zero_gradients(params.trainable());
      result.diverged = true;
      result.divergence = "epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }

    const EvalReport report = evaluate_model(
        params, config, vocab, config.enable_alsc_task ? data.alsc_valid : std::vector<AlscInstance>{},
        config.enable_aowe_task ? data.aowe_valid : std::vector<AoweInstance>{});
    if (report.alsc) {
      log.val_alsc_acc = report.alsc->accuracy;
      log.val_alsc_f1 = report.alsc->macro_f1;
    }
    if (report.aowe) log.val_aowe_f1 = report.aowe->f1;
    log.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);

    const double monitor = monitored_value(log, config);
    if (monitor > result.best_monitor) {
      result.best_monitor = monitor;
      result.best_epoch = epoch;
      best = snapshot(params);
      since_best = 0;
    } else {
      ++since_best;
    }
    if (train.target_monitor && result.best_monitor >= *train.target_monitor) break;
    if (since_best >= train.patience) break;
  }
  restore(params, best);
  if (result.best_epoch == 0) result.best_monitor = 0.0;
  return result;
}

EvalReport evaluate_model(const OtnParams& params, const ModelConfig& config,
                          const Vocabulary& vocab, const std::vector<AlscInstance>& alsc,
                          const std::vector<AoweInstance>& aowe) {
  EvalReport report;
  if (config.enable_alsc_task && !alsc.empty()) {
    std::vector<Sentiment> gold, pred;
    for (const auto& inst : alsc) {
      Prediction p = predict(make_input(vocab, inst.tokens, inst.aspect), params, config,
                             {.alsc = true, .aowe = false});
      gold.push_back(inst.label);
      pred.push_back(*p.sentiment);
    }
    report.alsc = make_alsc_report(gold, pred);
  }
  if (config.enable_aowe_task && !aowe.empty()) {
    std::vector<std::vector<Span>> gold, pred;
    for (const auto& inst : aowe) {
      Prediction p = predict(make_input(vocab, inst.tokens, inst.aspect), params, config,
                             {.alsc = false, .aowe = true});
      gold.push_back(decode_bio_spans(inst.tags));
      pred.push_back(decode_bio_spans(p.tags));
    }
    report.aowe = span_prf(gold, pred);
  }
  return report;
}

// -- repeated runs --------------------------------------------------------------

MetricMap flatten(const EvalReport& report) {
  MetricMap m;
  if (report.alsc) {
    m["alsc.accuracy"] = report.alsc->accuracy;
    m["alsc.macro_f1"] = report.alsc->macro_f1;
  }
  if (report.aowe) {
    m["aowe.precision"] = report.aowe->precision;
    m["aowe.recall"] = report.aowe->recall;
    m["aowe.f1"] = report.aowe->f1;
  }
  return m;
}

std::map<std::string, MetricSummary> aggregate_runs(const std::vector<MetricMap>& runs) {
  std::map<std::string, std::vector<double>> columns;
  for (const auto& run : runs) {
    for (const auto& [name, value] : run) columns[name].push_back(value);
  }
  std::map<std::string, MetricSummary> out;
  for (const auto& [name, values] : columns) {
    MetricSummary s;
    s.count = values.size();
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(s.count);
    if (s.count > 1) {
      double squares = 0.0;
      for (double v : values) squares += (v - s.mean) * (v - s.mean);
      s.stddev = std::sqrt(squares / static_cast<double>(s.count - 1));
    }
    out[name] = s;
  }
  return out;
}

std::map<std::string, MetricSummary> run_repeated(
    const std::function<MetricMap(std::uint64_t)>& run, std::size_t k, std::uint64_t base_seed,
    bool same_seed) {
  if (k == 0) throw ConfigError("run_repeated: k must be at least 1");
  std::vector<MetricMap> runs;
  for (std::size_t i = 0; i < k; ++i) runs.push_back(run(same_seed ? base_seed : base_seed + i));
  return aggregate_runs(runs);
}

}  // namespace otn
