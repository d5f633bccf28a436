#include <gtest/gtest.h>

#include <cmath>

#include "component_checks.hpp"
#include "helpers.hpp"
#include "otn/app.hpp"
#include "otn/synthetic.hpp"
#include "otn/training.hpp"

using namespace otn;
using testing_util::TinyModel;

TEST(Loss, MatchesOracle) { EXPECT_LT(checks::loss_error(300), 1e-12); }

TEST(Loss, OneHotIsZeroAndUniformIsLogThree) {
  Tape tape;
  EXPECT_EQ(alsc_loss(tape, Tensor({3}, {0, 1, 0}), Sentiment::neutral).item(), 0.0);
  const double third = 1.0 / 3.0;
  EXPECT_NEAR(alsc_loss(tape, Tensor({3}, {third, third, third}), Sentiment::positive).item(), std::log(3.0), 1e-12);
  Tensor uniform({4, 3}, std::vector<double>(12, third));
  EXPECT_NEAR(aowe_loss(tape, uniform, {Tag::O, Tag::B, Tag::I, Tag::O}, Mask{1, 1, 1, 0}).item(),
              3 * std::log(3.0), 1e-12);
}

TEST(Loss, ClampsZeroProbability) {
  Tape tape;
  Tensor probs({3}, {1.0, 0.0, 0.0}, true);
  Tensor l = alsc_loss(tape, probs, Sentiment::negative);
  EXPECT_NEAR(l.item(), -std::log(kProbabilityFloor), 1e-9);
  tape.backward(l);
  for (double g : probs.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Loss, GradientOfLogProbability) {
  Tape tape;
  Tensor probs({3}, {0.2, 0.5, 0.3}, true);
  tape.backward(alsc_loss(tape, probs, Sentiment::neutral));
  EXPECT_NEAR(probs.grad()[1], -2.0, 1e-12);
  EXPECT_EQ(probs.grad()[0], 0.0);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor w({3}, {1.0, -2.0, 0.5}, true);
  std::vector<NamedTensor> params{{"w", w}};
  w.grad()[0] = 3.0;
  w.grad()[1] = -0.01;
  w.grad()[2] = 0.0;
  AdamState state;
  adam_step(params, state, {});
  EXPECT_NEAR(w.at(0), 1.0 - 1e-3, 1e-9);
  EXPECT_NEAR(w.at(1), -2.0 + 1e-3, 1e-9);
  EXPECT_EQ(w.at(2), 0.5);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, MatchesHandComputedSecondStep) {
  Tensor w({1}, {0.0}, true);
  std::vector<NamedTensor> params{{"w", w}};
  AdamConfig cfg;
  AdamState state;
  w.grad()[0] = 1.0;
  adam_step(params, state, cfg);
  w.grad()[0] = -2.0;
  adam_step(params, state, cfg);
  double m = 0.1, v = 0.001;
  m = 0.9 * m + 0.1 * -2.0;
  v = 0.999 * v + 0.001 * 4.0;
  const double m_hat = m / (1 - 0.81), v_hat = v / (1 - 0.999 * 0.999);
  EXPECT_NEAR(w.at(0), -1e-3 / (1.0 + 1e-8) - 1e-3 * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-15);
}

TEST(Adam, StepCountsAdvanceWithoutGradients) {
  Tensor w({2}, {1.0, 2.0}, true);
  std::vector<NamedTensor> params{{"w", w}};
  AdamState state;
  adam_step(params, state, {});
  EXPECT_EQ(state.step, 1u);
  EXPECT_EQ(w.at(0), 1.0);
}

TEST(Adam, SkipsFrozenTensors) {
  Tensor frozen({2}, {1.0, 2.0});
  Tensor live({1}, {0.0}, true);
  frozen.grad()[0] = 5.0;
  live.grad()[0] = 1.0;
  std::vector<NamedTensor> params{{"frozen", frozen}, {"live", live}};
  AdamState state;
  adam_step(params, state, {});
  EXPECT_EQ(frozen.at(0), 1.0);
  EXPECT_NE(live.at(0), 0.0);
}

TEST(Adam, NonFiniteGradientNamesTensorAndChangesNothing) {
  Tensor a({1}, {1.0}, true), b({1}, {2.0}, true);
  a.grad()[0] = 1.0;
  b.grad()[0] = NAN;
  std::vector<NamedTensor> params{{"alpha", a}, {"beta", b}};
  AdamState state;
  try {
    adam_step(params, state, {});
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("beta"), std::string::npos);
  }
  EXPECT_EQ(a.at(0), 1.0);
  EXPECT_EQ(state.step, 0u);
}

TEST(Clip, RescalesToMaxNorm) {
  Tensor a({2}, {0, 0}, true), b({1}, {0}, true);
  a.grad()[0] = 3.0;
  a.grad()[1] = 0.0;
  b.grad()[0] = 4.0;
  std::vector<NamedTensor> params{{"a", a}, {"b", b}};
  EXPECT_DOUBLE_EQ(clip_gradients(params, 1.0), 5.0);
  EXPECT_NEAR(a.grad()[0], 0.6, 1e-15);
  EXPECT_NEAR(b.grad()[0], 0.8, 1e-15);
  EXPECT_NEAR(clip_gradients(params, 5.0), 1.0, 1e-15);
  EXPECT_NEAR(b.grad()[0], 0.8, 1e-15);
  zero_gradients(params);
  EXPECT_EQ(b.grad()[0], 0.0);
}

TEST(Split, SizesFloorTheFraction) {
  EXPECT_EQ(split_sizes(10, 0.2), (std::pair<std::size_t, std::size_t>{8, 2}));
  EXPECT_EQ(split_sizes(7, 0.2), (std::pair<std::size_t, std::size_t>{6, 1}));
  EXPECT_EQ(split_sizes(250, 0.2), (std::pair<std::size_t, std::size_t>{200, 50}));
}

TEST(Config, TrainConfigValidation) {
  EXPECT_NO_THROW(TrainConfig().validate());
  TrainConfig c;
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.adam.learning_rate = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.validation_fraction = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Seeds, DerivedSeedsDiffer) {
  RunSeeds s(1), t(2);
  EXPECT_NE(s.init, s.split);
  EXPECT_NE(s.shuffle, s.dropout);
  EXPECT_NE(s.init, t.init);
}

TEST(Monitor, SumsEnabledTasks) {
  EpochLog log;
  log.val_alsc_acc = 0.75;
  log.val_aowe_f1 = 0.5;
  ModelConfig c;
  EXPECT_DOUBLE_EQ(monitored_value(log, c), 1.25);
  c.enable_aowe_task = false;
  EXPECT_DOUBLE_EQ(monitored_value(log, c), 0.75);
  c.enable_aowe_task = true;
  c.enable_alsc_task = false;
  EXPECT_DOUBLE_EQ(monitored_value(log, c), 0.5);
}

namespace {

struct SmallProblem {
  Vocabulary vocab;
  JointData data;
  ModelConfig config;
  TrainConfig train;

  SmallProblem() {
    const auto sentences = generate_sentences(24, 3);
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      (i < 16 ? data.alsc_train : data.alsc_valid).push_back(sentences[i].alsc());
      (i < 16 ? data.aowe_train : data.aowe_valid).push_back(sentences[i].aowe());
    }
    vocab = build_vocab({&data.alsc_train, &data.alsc_valid}, {&data.aowe_train, &data.aowe_valid});
    config.dims = small_dims(8);
    config.dims.lstm_hidden = 6;
    config.dims.attention_dim = 6;
    config.dims.cnn = CnnSpec{1, 6, {2, 3, 4}, 3, 5, 6, 1};
    config.dims.tagger_hidden = 6;
    train.max_epochs = 4;
    train.batch_size = 4;
  }

  OtnParams params(std::uint64_t seed) const {
    Rng rng(seed);
    return init_params(config, random_embeddings(vocab, config.dims.embedding, rng), rng);
  }
};

std::vector<nlohmann::json> logs_without_time(const TrainResult& r) {
  std::vector<nlohmann::json> out;
  for (const auto& e : r.log) {
    auto j = e.to_json();
    j.erase("elapsed_s");
    out.push_back(j);
  }
  return out;
}

}  // namespace

TEST(TrainJoint, ReducesLossAndLogsEveryEpoch) {
  SmallProblem prob;
  auto params = prob.params(1);
  std::size_t calls = 0;
  auto r = train_joint(prob.data, params, prob.config, prob.train, prob.vocab, [&](const EpochLog&) { ++calls; });
  ASSERT_EQ(r.log.size(), 4u);
  EXPECT_EQ(calls, 4u);
  EXPECT_FALSE(r.diverged);
  EXPECT_GE(r.best_epoch, 1u);
  EXPECT_LT(*r.log.back().alsc_loss, *r.log.front().alsc_loss);
  EXPECT_LT(*r.log.back().aowe_loss, *r.log.front().aowe_loss);
  EXPECT_TRUE(r.log[0].val_alsc_acc && r.log[0].val_aowe_f1);
}

TEST(TrainJoint, RestoresBestEpochParameters) {
  SmallProblem prob;
  auto params = prob.params(1);
  auto r = train_joint(prob.data, params, prob.config, prob.train, prob.vocab);
  const auto report = evaluate_model(params, prob.config, prob.vocab, prob.data.alsc_valid, prob.data.aowe_valid);
  EXPECT_DOUBLE_EQ(report.alsc->accuracy + report.aowe->f1, r.best_monitor);
}

TEST(TrainJoint, SingleTaskLeavesOtherHeadUntouched) {
  SmallProblem prob;
  prob.config.enable_aowe_task = false;
  auto params = prob.params(2);
  const auto tagger_before = checks::vals(params.tagger_output_weight);
  auto r = train_joint(prob.data, params, prob.config, prob.train, prob.vocab);
  EXPECT_FALSE(r.log[0].aowe_loss.has_value());
  EXPECT_FALSE(r.log[0].val_aowe_f1.has_value());
  EXPECT_TRUE(r.log[0].alsc_loss.has_value());
  // The tagger still feeds the ALSC head through the transmission path.
  EXPECT_NE(checks::vals(params.tagger_output_weight), tagger_before);

  prob.config.enable_aowe2alsc = false;
  auto params2 = prob.params(2);
  train_joint(prob.data, params2, prob.config, prob.train, prob.vocab);
  EXPECT_EQ(checks::vals(params2.tagger_output_weight), tagger_before);
}

TEST(TrainJoint, SameSeedIsBitIdentical) {
  SmallProblem prob;
  prob.train.max_epochs = 2;
  auto p1 = prob.params(4), p2 = prob.params(4);
  auto r1 = train_joint(prob.data, p1, prob.config, prob.train, prob.vocab);
  auto r2 = train_joint(prob.data, p2, prob.config, prob.train, prob.vocab);
  EXPECT_EQ(logs_without_time(r1), logs_without_time(r2));
  EXPECT_EQ(snapshot(p1), snapshot(p2));
}

TEST(TrainJoint, BlockScheduleAlsoTrains) {
  SmallProblem prob;
  prob.train.schedule = Schedule::task_blocks;
  auto params = prob.params(1);
  auto r = train_joint(prob.data, params, prob.config, prob.train, prob.vocab);
  EXPECT_LT(*r.log.back().alsc_loss, *r.log.front().alsc_loss);
}

TEST(TrainJoint, PatienceStopsEarly) {
  SmallProblem prob;
  prob.train.max_epochs = 50;
  prob.train.patience = 1;
  auto params = prob.params(1);
  auto r = train_joint(prob.data, params, prob.config, prob.train, prob.vocab);
  EXPECT_LT(r.log.size(), 50u);
  EXPECT_EQ(r.log.size(), r.best_epoch + 1);
}

TEST(TrainJoint, DivergenceIsReported) {
  SmallProblem prob;
  auto params = prob.params(1);
  Tensor w = params.tagger_bias;
  w.values()[0] = NAN;
  auto r = train_joint(prob.data, params, prob.config, prob.train, prob.vocab);
  EXPECT_TRUE(r.diverged);
  EXPECT_FALSE(r.divergence.empty());
  EXPECT_EQ(r.best_epoch, 0u);
}

TEST(TrainJoint, MissingDataForEnabledTask) {
  SmallProblem prob;
  prob.data.aowe_valid.clear();
  auto params = prob.params(1);
  EXPECT_THROW(train_joint(prob.data, params, prob.config, prob.train, prob.vocab), ConfigError);
}

TEST(Aggregate, SampleStandardDeviation) {
  auto s = aggregate_runs({{{"x", 1.0}}, {{"x", 2.0}}, {{"x", 3.0}, {"y", 7.0}}});
  EXPECT_DOUBLE_EQ(s["x"].mean, 2.0);
  EXPECT_DOUBLE_EQ(s["x"].stddev, 1.0);
  EXPECT_EQ(s["x"].count, 3u);
  EXPECT_EQ(s["y"].count, 1u);
  EXPECT_EQ(s["y"].stddev, 0.0);
}

TEST(Aggregate, RunRepeatedSeeds) {
  std::vector<std::uint64_t> seen;
  auto s = run_repeated([&](std::uint64_t seed) {
    seen.push_back(seed);
    return MetricMap{{"m", static_cast<double>(seed)}};
  }, 4, 10);
  EXPECT_EQ(seen, (std::vector<std::uint64_t>{10, 11, 12, 13}));
  EXPECT_DOUBLE_EQ(s["m"].mean, 11.5);
  seen.clear();
  s = run_repeated([&](std::uint64_t seed) {
    seen.push_back(seed);
    return MetricMap{{"m", 1.0}};
  }, 3, 5, true);
  EXPECT_EQ(seen, (std::vector<std::uint64_t>{5, 5, 5}));
  EXPECT_EQ(s["m"].stddev, 0.0);
  EXPECT_THROW(run_repeated([](std::uint64_t) { return MetricMap{}; }, 0, 1), ConfigError);
}

TEST(Flatten, ReportKeys) {
  EvalReport r;
  r.alsc = AlscReport{};
  auto m = flatten(r);
  EXPECT_TRUE(m.contains("alsc.accuracy"));
  EXPECT_FALSE(m.contains("aowe.f1"));
}
