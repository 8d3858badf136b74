#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spnet/checkpoint.hpp"
#include "spnet/dataset.hpp"
#include "spnet/errors.hpp"
#include "spnet/synthetic.hpp"
#include "spnet/training.hpp"
#include "test_support.hpp"

namespace spnet {
namespace {

TEST(LrSchedule, StepDecay) {
  TrainConfig c;
  EXPECT_DOUBLE_EQ(lr_schedule(0, c), 0.001);
  EXPECT_DOUBLE_EQ(lr_schedule(49, c), 0.001);
  EXPECT_DOUBLE_EQ(lr_schedule(50, c), 0.0003);
  EXPECT_DOUBLE_EQ(lr_schedule(100, c), 0.001 * 0.3 * 0.3);
  double previous = lr_schedule(0, c);
  for (std::size_t e = 1; e < 300; ++e) {
    const double now = lr_schedule(e, c);
    EXPECT_LE(now, previous);
    EXPECT_EQ(now != previous, e % c.decay_every == 0) << e;
    previous = now;
  }
}

TEST(Adam, ZeroGradientLeavesParametersAndDecaysMoments) {
  Parameter<double> p("p", 1, 3);
  p.value << 1, 2, 3;
  ParameterList<double> params{&p};
  AdamState<double> st;
  p.grad.setConstant(1.0);
  adam_step(params, st, 0.1, 0.9, 0.999);
  const Matrix<double> after_one = p.value;
  const double m1 = st.m[0](0, 0);
  p.grad.setZero();
  adam_step(params, st, 0.0, 0.9, 0.999);
  EXPECT_TRUE((p.value.array() == after_one.array()).all());
  EXPECT_LT(std::abs(st.m[0](0, 0)), std::abs(m1));
}

TEST(Adam, FirstStepIsLearningRate) {
  Parameter<double> p("p", 1, 1);
  p.value(0, 0) = 2.0;
  p.grad(0, 0) = 1.0;
  ParameterList<double> params{&p};
  AdamState<double> st;
  adam_step(params, st, 1e-3, 0.9, 0.999, 1e-8);
  EXPECT_NEAR(p.value(0, 0), 2.0 - 1e-3, 1e-10);
}

TEST(Adam, DescendsAQuadraticBowl) {
  Parameter<double> p("p", 1, 2);
  p.value << 3.0, -2.0;
  ParameterList<double> params{&p};
  AdamState<double> st;
  auto loss = [&] { return p.value.squaredNorm(); };
  double previous = loss();
  for (int step = 0; step < 100; ++step) {
    p.grad = 2.0 * p.value;
    adam_step(params, st, 0.05, 0.9, 0.999);
    const double now = loss();
    if (step >= 5) EXPECT_LT(now, previous) << step;
    previous = now;
  }
}

TEST(Adam, NonFiniteGradientNamesTheTensor) {
  Parameter<double> p("enc0.0.conv.w1", 1, 1);
  p.grad(0, 0) = NAN;
  ParameterList<double> params{&p};
  AdamState<double> st;
  try {
    adam_step(params, st, 1e-3, 0.9, 0.999);
    FAIL();
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("enc0.0.conv.w1"), std::string::npos);
  }
  EXPECT_EQ(p.value(0, 0), 0.0);
}

TEST(CrossEntropy, UniformLogitsGiveLogC) {
  const Matrix<double> logits = Matrix<double>::Constant(10, 4, 0.7);
  const std::vector<std::int32_t> y{0, 1, 2, 3, 0, 1, 2, 3, 0, 1};
  EXPECT_NEAR(cross_entropy_loss(logits, y).loss, std::log(4.0), 1e-15);
}

TEST(CrossEntropy, HugeMarginGivesZero) {
  Matrix<double> logits = Matrix<double>::Zero(3, 3);
  const std::vector<std::int32_t> y{2, 0, 1};
  for (int i = 0; i < 3; ++i) logits(i, y[i]) = 1e3;
  EXPECT_LT(cross_entropy_loss(logits, y).loss, 1e-300);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  const Matrix<double> logits = test::random_matrix<double>(6, 3, 4, -2.0, 2.0);
  const std::vector<std::int32_t> y{0, 2, 1, 1, 0, 2};
  const std::vector<double> w{0.5, 1.0, 2.0};
  const auto r = cross_entropy_loss(logits, y, w);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    Matrix<double> a = logits, b = logits;
    a.data()[i] += h;
    b.data()[i] -= h;
    const double num = (cross_entropy_loss(a, y, w).loss - cross_entropy_loss(b, y, w).loss) / (2 * h);
    const double ana = r.grad.data()[i];
    EXPECT_LT(std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-3}), 1e-6);
  }
}

TEST(CrossEntropy, RejectsBadLabels) {
  const std::vector<std::int32_t> y{3};
  const Matrix<double> z = Matrix<double>::Zero(1, 3);
  EXPECT_THROW(cross_entropy_loss(z, y), InputError);
}

TEST(InverseFrequency, NormalisedToMeanOne) {
  Dataset d;
  PointCloud c;
  c.labels = {0, 0, 0, 1};
  d.scenes.push_back(c);
  d.names.push_back("a");
  const auto w = inverse_frequency_weights(d, 3);
  EXPECT_DOUBLE_EQ(w[0], 0.5);
  EXPECT_DOUBLE_EQ(w[1], 1.5);
  EXPECT_EQ(w[2], 0.0);
}

TEST(TrainConfig, ParsesKeysAndRejectsUnknown) {
  const TrainConfig c = TrainConfig::from_text("epochs = 3\nbatch_size = 2\nattention_variant = gaussian\n");
  EXPECT_EQ(c.epochs, 3u);
  EXPECT_EQ(c.batch_size, 2u);
  EXPECT_EQ(c.network.attention, AttentionVariant::gaussian);
  EXPECT_THROW(TrainConfig::from_text("bogus = 1\n"), InputError);
  EXPECT_THROW(TrainConfig::from_text("epochs = 0\n"), ParameterError);
}

struct TinyRun {
  TrainConfig config;
  Dataset data;
};

TinyRun tiny_run() {
  TinyRun r;
  r.config.epochs = 2;
  r.config.batch_size = 2;
  r.config.network.levels = 3;
  r.config.network.base_channels = 4;
  r.config.network.v0 = 0.08;
  SyntheticSceneSpec s;
  s.planes = s.spheres = s.boxes = 1;
  s.points_per_primitive = 120;
  s.bounds = {2.0, 2.0, 1.5};
  r.data = make_synthetic_dataset(4, 3, s);
  return r;
}

TEST(Train, TwoEpochsWriteLogAndLoadableCheckpoint) {
  test::TempDir dir("train");
  const TinyRun r = tiny_run();
  const TrainResult res = train(r.config, r.data, &r.data, dir.path());
  ASSERT_EQ(res.epochs.size(), 2u);
  std::istringstream log(test::read_bytes(res.metrics_log));
  std::string line;
  std::size_t rows = 0;
  std::getline(log, line);
  EXPECT_EQ(line + "\n", metrics_log_header(true));
  while (std::getline(log, line)) ++rows;
  EXPECT_EQ(rows, 2u);

  Network<float> loaded = load_checkpoint(res.checkpoint);
  test::TempDir again("train");
  save_checkpoint(again.path() / "copy.ckpt", loaded);
  EXPECT_EQ(test::read_bytes(res.checkpoint), test::read_bytes(again.path() / "copy.ckpt"));

  // Evaluating the checkpoint reproduces the last logged training accuracy.
  const EvalReport report = evaluate(loaded, r.data);
  EXPECT_NEAR(report.overall_accuracy, res.epochs.back().train_oa, 1e-6);
  EXPECT_NEAR(report.mean_iou, res.epochs.back().train_miou, 1e-6);
}

TEST(Train, SameSeedGivesIdenticalFiles) {
  test::TempDir a("train"), b("train");
  const TinyRun r = tiny_run();
  train(r.config, r.data, nullptr, a.path());
  train(r.config, r.data, nullptr, b.path());
  EXPECT_EQ(test::read_bytes(a.path() / kMetricsLogName), test::read_bytes(b.path() / kMetricsLogName));
  EXPECT_EQ(test::read_bytes(a.path() / kCheckpointName), test::read_bytes(b.path() / kCheckpointName));
}

TEST(Evaluate, EmptyDatasetIsUndefined) {
  NetworkSpec s;
  s.levels = 2;
  s.base_channels = 4;
  Network<float> net(s, 1);
  EXPECT_THROW(evaluate(net, Dataset{}), UndefinedMetricError);
}

TEST(Evaluate, UntrainedModelIsNearChance) {
  const TinyRun r = tiny_run();
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Network<float> net(r.config.network, seed);
    EXPECT_NEAR(evaluate(net, r.data).overall_accuracy, 1.0 / 3.0, 0.15) << seed;
  }
}

TEST(Checkpoint, RejectsSpecMismatchAndGarbage) {
  test::TempDir dir("ckpt");
  const TinyRun r = tiny_run();
  Network<float> net(r.config.network, 1);
  save_checkpoint(dir.path() / "a.ckpt", net);
  EXPECT_EQ(read_checkpoint_spec(dir.path() / "a.ckpt").to_text(), r.config.network.to_text());
  NetworkSpec other = r.config.network;
  other.base_channels = 6;
  Network<float> wrong(other, 1);
  EXPECT_THROW(load_parameters(dir.path() / "a.ckpt", wrong), InputError);
  write_file_atomic(dir.path() / "bad.ckpt", "SPNETCKX");
  EXPECT_THROW(load_checkpoint(dir.path() / "bad.ckpt"), InputError);
}

}  // namespace
}  // namespace spnet
