#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "fedfim/error.hpp"
#include "fedfim/numerics.hpp"

using namespace fedfim;

TEST(WeightedAverage, EqualWeightsGiveMean) {
  std::vector<DenseVector> v{{1, 1}, {3, 3}};
  std::vector<double> w{1, 1};
  EXPECT_EQ(weighted_average(v, w), (DenseVector{2, 2}));
}

TEST(WeightedAverage, SampleCountWeights) {
  std::vector<DenseVector> v{{0, 0}, {4, 4}};
  std::vector<double> w{1, 3};
  EXPECT_EQ(weighted_average(v, w), (DenseVector{3, 3}));
}

TEST(WeightedAverage, SingleVectorIsIdentity) {
  std::vector<DenseVector> v{{0.3, -7.25, 1e-9}};
  std::vector<double> w{5.0};
  EXPECT_EQ(weighted_average(v, w), v[0]);
}

TEST(WeightedAverage, RejectsDegenerateInputs) {
  std::vector<DenseVector> none;
  std::vector<double> no_w;
  EXPECT_THROW(weighted_average(none, no_w), DegenerateInputError);
  std::vector<DenseVector> v{{1}, {2}};
  std::vector<double> zero{0, 0};
  EXPECT_THROW(weighted_average(v, zero), DegenerateInputError);
  std::vector<double> neg{-1, 2};
  EXPECT_THROW(weighted_average(v, neg), DegenerateInputError);
  std::vector<DenseVector> ragged{{1}, {2, 3}};
  std::vector<double> w{1, 1};
  EXPECT_THROW(weighted_average(ragged, w), DimensionError);
}

TEST(FiniteDifference, QuadraticIsExact) {
  auto f = [](const DenseVector& w) { return 0.5 * squared_norm(w.span()); };
  DenseVector g = finite_difference_gradient(f, DenseVector{1, 2}, 1e-5);
  EXPECT_NEAR(g[0], 1.0, 1e-8);
  EXPECT_NEAR(g[1], 2.0, 1e-8);
}

TEST(FiniteDifference, ConstantGivesZero) {
  auto f = [](const DenseVector&) { return 4.5; };
  DenseVector g = finite_difference_gradient(f, DenseVector{-3, 0, 8}, 1e-4);
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(FiniteDifference, ProductRule) {
  auto f = [](const DenseVector& w) { return w[0] * w[1]; };
  DenseVector g = finite_difference_gradient(f, DenseVector{2, 3}, 1e-5);
  EXPECT_NEAR(g[0], 3.0, 1e-8);
  EXPECT_NEAR(g[1], 2.0, 1e-8);
}

TEST(FiniteDifference, RejectsBadStepAndNonFinite) {
  auto f = [](const DenseVector& w) { return w[0]; };
  EXPECT_THROW(finite_difference_gradient(f, DenseVector{1}, 0.0), DegenerateInputError);
  auto bad = [](const DenseVector&) { return std::numeric_limits<double>::quiet_NaN(); };
  EXPECT_THROW(finite_difference_gradient(bad, DenseVector{1}, 1e-3), NumericError);
}

TEST(VectorOps, BasicIdentities) {
  DenseVector a{1, 2, 3}, b{4, 5, 6};
  EXPECT_DOUBLE_EQ(dot(a.span(), b.span()), 32.0);
  EXPECT_DOUBLE_EQ(squared_norm(a.span()), 14.0);
  axpy(2.0, a.span(), b.span());
  EXPECT_EQ(b, (DenseVector{6, 9, 12}));
  EXPECT_EQ(subtract(b, a), (DenseVector{5, 7, 9}));
  EXPECT_EQ(scaled(a, -1.0), (DenseVector{-1, -2, -3}));
  DenseMatrix m(2, 3, {1, 0, 0, 0, 1, 1});
  EXPECT_EQ(matvec(m, a.span()), (DenseVector{1, 5}));
  EXPECT_THROW(dot(a.span(), DenseVector{1}.span()), DimensionError);
}

TEST(VectorOps, RelativeErrorScale) {
  EXPECT_DOUBLE_EQ(relative_error(1e-3, 2e-3), 1e-3);
  EXPECT_DOUBLE_EQ(relative_error(100.0, 101.0), 1.0 / 101.0);
  EXPECT_FALSE(all_finite(DenseVector{1, std::numeric_limits<double>::infinity()}.span()));
  EXPECT_TRUE(all_finite(DenseVector{1, -2}.span()));
}
