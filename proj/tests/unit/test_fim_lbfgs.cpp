#include <gtest/gtest.h>

#include <cmath>

#include "fedfim/error.hpp"
#include "fedfim/fim_lbfgs.hpp"
#include "test_support.hpp"

using namespace fedfim;
using fedfim::testing::invert;
using fedfim::testing::random_vector;

namespace {

PerSampleGradients rows_of(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return PerSampleGradients{DenseMatrix(rows, cols, std::move(v))};
}

FimDiagonal random_fim(std::size_t d, RandomStream& rng, double lo, double hi) {
  FimDiagonal f{DenseVector(d), 1};
  for (double& v : f.diag) v = rng.uniform(lo, hi);
  return f;
}

/// Memory filled with pairs whose y = D s for a positive diagonal D, so every
/// pair passes the cautious test.
LbfgsMemory random_memory(std::size_t d, std::size_t m, std::size_t pushes, H0Mode mode, RandomStream& rng) {
  LbfgsMemory mem(m, mode);
  for (std::size_t k = 0; k < pushes; ++k) {
    DenseVector s = random_vector(d, rng);
    DenseVector y = smooth_y(random_fim(d, rng, 0.1, 3.0), s);
    EXPECT_TRUE(mem.push(std::move(s), std::move(y), 1e-8));
  }
  return mem;
}

/// Direct BFGS update of the Hessian approximation,
/// B <- B - B s s^T B / (s^T B s) + y y^T / (y^T s), from B0 = I / h0_scale.
DenseMatrix direct_b_form(const LbfgsMemory& mem, std::size_t d) {
  DenseMatrix b = DenseMatrix::identity(d, 1.0 / mem.h0_scale());
  for (const CurvaturePair& p : mem.pairs()) {
    DenseVector bs = matvec(b, p.s.span());
    const double sbs = dot(p.s.span(), bs.span());
    const double ys = dot(p.y.span(), p.s.span());
    DenseMatrix next = b;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) next(i, j) += -bs[i] * bs[j] / sbs + p.y[i] * p.y[j] / ys;
    b = next;
  }
  return b;
}

}  // namespace

TEST(FimDiagonal, SquaresSingleRow) {
  FimDiagonal f = fim_diagonal(rows_of(1, 2, {-0.5, 0.0}), 0.0);
  EXPECT_EQ(f.diag, (DenseVector{0.25, 0.0}));
  EXPECT_EQ(f.batch_size, 1u);
}

TEST(FimDiagonal, MeanOfSquares) {
  FimDiagonal f = fim_diagonal(rows_of(2, 2, {1, 0, 0, 1}), 0.0);
  EXPECT_EQ(f.diag, (DenseVector{0.5, 0.5}));
  FimDiagonal damped = fim_diagonal(rows_of(2, 2, {1, 0, 0, 1}), 1e-6);
  EXPECT_DOUBLE_EQ(damped.diag[0], 0.5 + 1e-6);
}

TEST(FimDiagonal, MatchesNaiveLoop) {
  RandomStream rng(RngSeed{1, 0});
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t b = 1 + rng.uniform_index(30), d = 1 + rng.uniform_index(12);
    DenseMatrix g(b, d);
    for (double& v : g.data()) v = rng.normal();
    FimDiagonal f = fim_diagonal(PerSampleGradients{g}, 1e-6);
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < b; ++i) acc += g(i, j) * g(i, j);
      EXPECT_NEAR(f.diag[j], acc / static_cast<double>(b) + 1e-6, 1e-12);
    }
  }
}

TEST(AggregateFim, MeanOfParts) {
  std::vector<FimDiagonal> parts{{DenseVector{0.2, 0.4}, 3}, {DenseVector{0.6, 0.0}, 5}};
  FimDiagonal agg = aggregate_fim(parts);
  EXPECT_NEAR(agg.diag[0], 0.4, 1e-15);
  EXPECT_NEAR(agg.diag[1], 0.2, 1e-15);
  EXPECT_EQ(agg.batch_size, 8u);
  std::vector<FimDiagonal> one{{DenseVector{1.5, 2.5}, 4}};
  EXPECT_EQ(aggregate_fim(one).diag, one[0].diag);
}

TEST(AggregateFim, MatchesNaiveMean) {
  RandomStream rng(RngSeed{2, 0});
  const std::size_t k = 7, d = 9;
  std::vector<FimDiagonal> parts;
  for (std::size_t i = 0; i < k; ++i) parts.push_back(random_fim(d, rng, 0.0, 2.0));
  FimDiagonal agg = aggregate_fim(parts);
  for (std::size_t j = 0; j < d; ++j) {
    double acc = 0.0;
    for (const auto& p : parts) acc += p.diag[j];
    EXPECT_NEAR(agg.diag[j], acc / k, 1e-12);
  }
  EXPECT_THROW(aggregate_fim(std::vector<FimDiagonal>{}), DegenerateInputError);
}

TEST(SmoothY, DiagonalProduct) {
  FimDiagonal two{DenseVector{2, 2}, 1};
  DenseVector y = smooth_y(two, DenseVector{1, 1});
  EXPECT_EQ(y, (DenseVector{2, 2}));
  EXPECT_DOUBLE_EQ(curvature_ratio(DenseVector{1, 1}, y), 2.0);
  RandomStream rng(RngSeed{3, 0});
  DenseVector s = random_vector(6, rng);
  EXPECT_EQ(smooth_y(FimDiagonal{DenseVector(6, 1.0), 1}, s), s);
}

TEST(SmoothY, MatchesDenseDiagonalMultiply) {
  RandomStream rng(RngSeed{4, 0});
  const std::size_t d = 11;
  FimDiagonal f = random_fim(d, rng, 0.0, 5.0);
  DenseMatrix dense(d, d);
  for (std::size_t j = 0; j < d; ++j) dense(j, j) = f.diag[j];
  DenseVector s = random_vector(d, rng);
  DenseVector expect = matvec(dense, s.span());
  DenseVector y = smooth_y(f, s);
  for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(y[j], expect[j], 1e-12);
}

TEST(CurvatureRatio, HandValues) {
  EXPECT_DOUBLE_EQ(curvature_ratio(DenseVector{1, 1}, DenseVector{2, 2}), 2.0);
  EXPECT_DOUBLE_EQ(curvature_ratio(DenseVector{0.3, -2}, DenseVector{0.3, -2}), 1.0);
}

TEST(CurvatureRatio, BoundedByDiagonalRange) {
  RandomStream rng(RngSeed{5, 0});
  for (int trial = 0; trial < 200; ++trial) {
    const double a = rng.uniform(1e-6, 1.0), b = a + rng.uniform(0.0, 10.0);
    const std::size_t d = 1 + rng.uniform_index(20);
    FimDiagonal f = random_fim(d, rng, a, b);
    DenseVector s = random_vector(d, rng);
    const double r = curvature_ratio(s, smooth_y(f, s));
    EXPECT_GE(r, a * (1 - 1e-12));
    EXPECT_LE(r, b * (1 + 1e-12));
  }
}

TEST(LbfgsMemory, SkipsNonPositiveCurvature) {
  LbfgsMemory mem(3);
  EXPECT_FALSE(mem.push(DenseVector{1, 0}, DenseVector{0, 1}, 1e-8));
  EXPECT_TRUE(mem.empty());
  EXPECT_EQ(mem.skipped(), 1u);
  EXPECT_FALSE(mem.push(DenseVector{0, 0}, DenseVector{0, 0}, 1e-8));
  EXPECT_FALSE(mem.push(DenseVector{1, 0}, DenseVector{1e-9, 0}, 1e-8));
  EXPECT_EQ(mem.skipped(), 3u);
  EXPECT_TRUE(mem.push(DenseVector{1, 0}, DenseVector{1e-8, 0}, 1e-8));
}

TEST(LbfgsMemory, FifoEviction) {
  LbfgsMemory mem(2);
  ASSERT_TRUE(mem.push(DenseVector{1, 0}, DenseVector{1, 0}, 1e-8));
  ASSERT_TRUE(mem.push(DenseVector{0, 1}, DenseVector{0, 2}, 1e-8));
  ASSERT_TRUE(mem.push(DenseVector{1, 1}, DenseVector{3, 3}, 1e-8));
  ASSERT_EQ(mem.size(), 2u);
  EXPECT_EQ(mem.pairs()[0].s, (DenseVector{0, 1}));
  EXPECT_EQ(mem.pairs()[1].s, (DenseVector{1, 1}));
  EXPECT_DOUBLE_EQ(mem.pairs()[1].rho, 1.0 / 6.0);
  EXPECT_EQ(mem.accepted(), 3u);
}

TEST(LbfgsMemory, StoredPairsAlwaysCautious) {
  RandomStream rng(RngSeed{6, 0});
  const double eps = 1e-2;
  LbfgsMemory mem(4);
  for (int k = 0; k < 300; ++k) {
    DenseVector s = random_vector(5, rng);
    DenseVector y = random_vector(5, rng);  // arbitrary sign
    mem = update_memory(std::move(mem), std::move(s), std::move(y), eps);
    for (const auto& p : mem.pairs()) {
      ASSERT_GE(dot(p.y.span(), p.s.span()) / squared_norm(p.s.span()), eps);
    }
  }
  EXPECT_GT(mem.skipped(), 0u);
  EXPECT_GT(mem.accepted(), 0u);
}

TEST(LbfgsMemory, GammaScaling) {
  LbfgsMemory id(3, H0Mode::Identity), gamma(3, H0Mode::GammaScaled);
  EXPECT_DOUBLE_EQ(gamma.h0_scale(), 1.0);
  id.push(DenseVector{1, 0}, DenseVector{4, 0}, 1e-8);
  gamma.push(DenseVector{1, 0}, DenseVector{4, 0}, 1e-8);
  EXPECT_DOUBLE_EQ(id.h0_scale(), 1.0);
  EXPECT_DOUBLE_EQ(gamma.h0_scale(), 0.25);
}

TEST(TwoLoop, EmptyMemoryIsSteepestDescent) {
  LbfgsMemory mem(5, H0Mode::Identity);
  EXPECT_EQ(two_loop_direction(mem, DenseVector{1, 1}), (DenseVector{-1, -1}));
}

TEST(TwoLoop, UnitPairKeepsIdentity) {
  LbfgsMemory mem(5, H0Mode::Identity);
  ASSERT_TRUE(mem.push(DenseVector{1, 0}, DenseVector{1, 0}, 1e-8));
  DenseVector p = two_loop_direction(mem, DenseVector{1, 1});
  EXPECT_NEAR(p[0], -1.0, 1e-15);
  EXPECT_NEAR(p[1], -1.0, 1e-15);
  DenseMatrix h = dense_bfgs_oracle(mem, 2);
  EXPECT_NEAR(h(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(h(0, 1), 0.0, 1e-15);
  EXPECT_NEAR(h(1, 1), 1.0, 1e-15);
}

TEST(TwoLoop, MatchesDenseOracle) {
  RandomStream rng(RngSeed{7, 0});
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + rng.uniform_index(8), m = 1 + rng.uniform_index(5);
    const H0Mode mode = trial % 2 == 0 ? H0Mode::GammaScaled : H0Mode::Identity;
    LbfgsMemory mem = random_memory(d, m, rng.uniform_index(m + 3), mode, rng);
    DenseVector g = random_vector(d, rng);
    DenseVector p = two_loop_direction(mem, g);
    DenseVector hg = matvec(dense_bfgs_oracle(mem, d), g.span());
    EXPECT_LT(max_relative_error(p.span(), scaled(hg, -1.0).span()), 1e-10) << "trial " << trial;
  }
}

TEST(DenseOracle, EmptyMemoryIsScaledIdentity) {
  LbfgsMemory mem(3);
  DenseMatrix h = dense_bfgs_oracle(mem, 4);
  EXPECT_EQ(h, DenseMatrix::identity(4));
}

TEST(DenseOracle, SymmetricAndInverseOfDirectUpdate) {
  RandomStream rng(RngSeed{8, 0});
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 2 + rng.uniform_index(7), m = 1 + rng.uniform_index(5);
    LbfgsMemory mem = random_memory(d, m, 1 + rng.uniform_index(m + 2), H0Mode::GammaScaled, rng);
    DenseMatrix h = dense_bfgs_oracle(mem, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) EXPECT_LT(std::abs(h(i, j) - h(j, i)), 1e-12);
    DenseMatrix h_direct = invert(direct_b_form(mem, d));
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) EXPECT_LT(relative_error(h(i, j), h_direct(i, j)), 1e-8);
  }
}

TEST(OptimizerConfig, Validation) {
  OptimizerConfig ok;
  EXPECT_NO_THROW(ok.validate());
  OptimizerConfig bad = ok;
  bad.memory = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = ok;
  bad.cautious_eps = -1;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_EQ(parse_h0_mode("identity"), H0Mode::Identity);
  EXPECT_THROW(parse_h0_mode("diag"), ConfigError);
}
