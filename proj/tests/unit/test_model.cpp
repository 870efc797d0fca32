#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fedfim/error.hpp"
#include "fedfim/model.hpp"
#include "test_support.hpp"

using namespace fedfim;
using fedfim::testing::make_dataset;
using fedfim::testing::random_dataset;

namespace {

ParameterVector random_params(const ModelSpec& spec, RandomStream& rng, double scale = 1.0) {
  ParameterVector p(spec);
  for (double& v : p.values) v = scale * rng.normal();
  return p;
}

ModelSpec random_spec(ModelKind kind, RandomStream& rng) {
  const std::size_t d = 1 + rng.uniform_index(8);
  const std::size_t n = 2 + rng.uniform_index(4);
  switch (kind) {
    case ModelKind::BinaryLogistic: return ModelSpec::binary_logistic(d);
    case ModelKind::SoftmaxRegression: return ModelSpec::softmax_regression(d, n);
    case ModelKind::Mlp1: return ModelSpec::mlp1(d, 2 + rng.uniform_index(6), n);
  }
  return {};
}

}  // namespace

TEST(ModelSpec, ParameterCounts) {
  EXPECT_EQ(ModelSpec::binary_logistic(784).parameter_count(), 785u);
  EXPECT_EQ(ModelSpec::softmax_regression(784, 10).parameter_count(), 7850u);
  EXPECT_EQ(ModelSpec::mlp1(20, 32, 10).parameter_count(), 20u * 32 + 32 + 32 * 10 + 10);
  EXPECT_THROW(ModelSpec::softmax_regression(0, 10).validate(), ConfigError);
  EXPECT_THROW(ModelSpec::mlp1(3, 0, 2).validate(), ConfigError);
  EXPECT_EQ(parse_model_kind("mlp1"), ModelKind::Mlp1);
  EXPECT_THROW(parse_model_kind("cnn"), ConfigError);
}

TEST(ForwardLoss, ZeroWeightsGiveLogClasses) {
  RandomStream rng(RngSeed{1, 0});
  Dataset ds = random_dataset(17, 5, 10, rng);
  EXPECT_NEAR(forward_loss(ParameterVector(ModelSpec::softmax_regression(5, 10)), ds.batch()), std::log(10.0),
              1e-12);
  Dataset bin = random_dataset(9, 5, 2, rng);
  EXPECT_NEAR(forward_loss(ParameterVector(ModelSpec::binary_logistic(5)), bin.batch()), std::numbers::ln2, 1e-12);
}

TEST(ForwardLoss, MlpWithZeroOutputLayer) {
  RandomStream rng(RngSeed{2, 0});
  const ModelSpec spec = ModelSpec::mlp1(4, 6, 3);
  ParameterVector p = random_params(spec, rng);
  // W2 and b2 sit after W1 (6x4) and b1 (6).
  for (std::size_t i = 6 * 4 + 6; i < p.size(); ++i) p.values[i] = 0.0;
  Dataset ds = random_dataset(11, 4, 3, rng);
  EXPECT_NEAR(forward_loss(p, ds.batch()), std::log(3.0), 1e-12);
}

TEST(ForwardLoss, StableAtExtremeLogits) {
  Dataset ds = make_dataset(2, 1, {1.0, -1.0}, {0, 1}, 2);
  ParameterVector p(ModelSpec::binary_logistic(1), DenseVector{800.0, 0.0});
  const double loss = forward_loss(p, ds.batch());
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_NEAR(loss, 800.0, 1e-9);  // both samples are wrong by a logit of 800
  ParameterVector q(ModelSpec::softmax_regression(1, 2), DenseVector{-900.0, 900.0, 0.0, 0.0});
  EXPECT_NEAR(forward_loss(q, ds.batch()), 1800.0, 1e-9);
}

TEST(BatchGradient, BinaryHandExample) {
  Dataset ds = make_dataset(1, 2, {1.0, 0.0}, {1}, 2);
  DenseVector g = batch_gradient(ParameterVector(ModelSpec::binary_logistic(2)), ds.batch());
  EXPECT_DOUBLE_EQ(g[0], -0.5);
  EXPECT_DOUBLE_EQ(g[1], 0.0);
  EXPECT_DOUBLE_EQ(g[2], -0.5);  // bias
}

TEST(BatchGradient, DuplicatedBatchSameGradient) {
  RandomStream rng(RngSeed{3, 0});
  for (ModelKind kind : {ModelKind::BinaryLogistic, ModelKind::SoftmaxRegression, ModelKind::Mlp1}) {
    const ModelSpec spec = random_spec(kind, rng);
    Dataset ds = random_dataset(7, spec.input_dim, spec.num_classes, rng);
    std::vector<std::size_t> once{0, 1, 2, 3, 4, 5, 6};
    std::vector<std::size_t> twice{0, 1, 2, 3, 4, 5, 6, 0, 1, 2, 3, 4, 5, 6};
    ParameterVector p = random_params(spec, rng);
    DenseVector a = batch_gradient(p, ds.batch(once));
    DenseVector b = batch_gradient(p, ds.batch(twice));
    EXPECT_LT(max_relative_error(a.span(), b.span()), 1e-14);
  }
}

TEST(BatchGradient, MatchesFiniteDifferencesForEveryKind) {
  RandomStream rng(RngSeed{4, 0});
  for (ModelKind kind : {ModelKind::BinaryLogistic, ModelKind::SoftmaxRegression, ModelKind::Mlp1}) {
    for (int trial = 0; trial < 20; ++trial) {
      const ModelSpec spec = random_spec(kind, rng);
      Dataset ds = random_dataset(6, spec.input_dim, spec.num_classes, rng);
      ParameterVector p = random_params(spec, rng, 0.7);
      const SampleBatch batch = ds.batch();
      const DenseVector analytic = batch_gradient(p, batch);
      const DenseVector numeric = finite_difference_gradient(
          [&](const DenseVector& w) { return forward_loss(ParameterVector(spec, w), batch); }, p.values, 1e-6);
      EXPECT_LT(max_relative_error(analytic.span(), numeric.span()), 1e-5) << to_string(kind) << " trial " << trial;
    }
  }
}

TEST(BatchGradient, LossAndGradientAgree) {
  RandomStream rng(RngSeed{5, 0});
  const ModelSpec spec = ModelSpec::mlp1(5, 4, 3);
  Dataset ds = random_dataset(12, 5, 3, rng);
  ParameterVector p = random_params(spec, rng);
  DenseVector g(spec.parameter_count());
  const double loss = loss_and_gradient(p, ds.batch(), g);
  EXPECT_DOUBLE_EQ(loss, forward_loss(p, ds.batch()));
  EXPECT_EQ(g, batch_gradient(p, ds.batch()));
}

TEST(PerSampleGradients, BinaryHandExample) {
  Dataset ds = make_dataset(2, 2, {1.0, 0.0, 0.0, 1.0}, {1, 0}, 2);
  auto psg = per_sample_gradients(ParameterVector(ModelSpec::binary_logistic(2)), ds.batch());
  ASSERT_EQ(psg.grads.rows(), 2u);
  EXPECT_DOUBLE_EQ(psg.grads(0, 0), -0.5);
  EXPECT_DOUBLE_EQ(psg.grads(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(psg.grads(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(psg.grads(1, 1), 0.5);
}

TEST(PerSampleGradients, RowMeanIsBatchGradient) {
  RandomStream rng(RngSeed{6, 0});
  for (ModelKind kind : {ModelKind::BinaryLogistic, ModelKind::SoftmaxRegression, ModelKind::Mlp1}) {
    const ModelSpec spec = random_spec(kind, rng);
    Dataset ds = random_dataset(9, spec.input_dim, spec.num_classes, rng);
    ParameterVector p = random_params(spec, rng);
    auto psg = per_sample_gradients(p, ds.batch());
    DenseVector g = batch_gradient(p, ds.batch());
    for (std::size_t j = 0; j < g.size(); ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < psg.grads.rows(); ++i) mean += psg.grads(i, j);
      EXPECT_NEAR(mean / 9.0, g[j], 1e-12);
    }
    std::vector<std::size_t> one{4};
    auto single = per_sample_gradients(p, ds.batch(one));
    DenseVector g1 = batch_gradient(p, ds.batch(one));
    for (std::size_t j = 0; j < g1.size(); ++j) EXPECT_EQ(single.grads(0, j), g1[j]);
  }
}

TEST(PredictProba, ZeroWeightsUniform) {
  RandomStream rng(RngSeed{7, 0});
  Dataset ds = random_dataset(5, 3, 4, rng);
  DenseMatrix p = predict_proba(ParameterVector(ModelSpec::softmax_regression(3, 4)), *ds.features);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_DOUBLE_EQ(p(i, c), 0.25);
  DenseMatrix b = predict_proba(ParameterVector(ModelSpec::binary_logistic(3)), *ds.features);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_DOUBLE_EQ(b(i, 0), 0.5);
    EXPECT_DOUBLE_EQ(b(i, 1), 0.5);
  }
  // Ties go to the lowest class id.
  for (int c : predict_class(ParameterVector(ModelSpec::softmax_regression(3, 4)), *ds.features)) EXPECT_EQ(c, 0);
}

TEST(PredictProba, ScalingSharpensArgmax) {
  RandomStream rng(RngSeed{8, 0});
  const ModelSpec spec = ModelSpec::softmax_regression(4, 5);
  ParameterVector p = random_params(spec, rng);
  Dataset ds = random_dataset(20, 4, 5, rng);
  ParameterVector doubled(spec, scaled(p.values, 2.0));
  DenseMatrix a = predict_proba(p, *ds.features);
  DenseMatrix b = predict_proba(doubled, *ds.features);
  for (std::size_t i = 0; i < 20; ++i) {
    double sum = 0.0;
    std::size_t top = 0;
    for (std::size_t c = 0; c < 5; ++c) {
      sum += a(i, c);
      if (a(i, c) > a(i, top)) top = c;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_GT(b(i, top), a(i, top));
  }
}

TEST(InitParameters, BoundedByFanIn) {
  RandomStream rng(RngSeed{9, 0});
  const ModelSpec spec = ModelSpec::mlp1(16, 4, 3);
  ParameterVector p = init_parameters(spec, rng);
  ASSERT_EQ(p.size(), spec.parameter_count());
  for (std::size_t i = 0; i < 16 * 4 + 4; ++i) EXPECT_LE(std::abs(p.values[i]), 0.25);
  for (std::size_t i = 16 * 4 + 4; i < p.size(); ++i) EXPECT_LE(std::abs(p.values[i]), 0.5);
}

TEST(Model, RejectsOutOfRangeLabels) {
  Dataset ds = make_dataset(1, 1, {1.0}, {3}, 2);
  EXPECT_THROW(forward_loss(ParameterVector(ModelSpec::softmax_regression(1, 2)), ds.batch()), DimensionError);
}
