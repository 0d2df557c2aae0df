#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bm3/graph.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace bm3;
using bm3::testing::random_edges;
using bm3::testing::random_matrix;

namespace {

double rel_err(const Matrix& a, const Matrix& b) {
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

TEST(Adjacency, SingleEdgeHasUnitWeights) {
  std::vector<Edge> e{{0, 0}};
  auto adj = build_adjacency(e, 1, 1);
  ASSERT_EQ(adj.nnz(), 2u);
  EXPECT_EQ(adj.values[0], 1.0);
  EXPECT_EQ(adj.values[1], 1.0);
}

TEST(Adjacency, StarNormalization) {
  std::vector<Edge> e{{0, 0}, {0, 1}};
  auto adj = build_adjacency(e, 1, 2);
  ASSERT_EQ(adj.nnz(), 4u);
  for (Real v : adj.values) EXPECT_NEAR(v, 0.70710678, 1e-8);
}

TEST(Adjacency, OutOfRangeIsAnError) {
  std::vector<Edge> e{{0, 2}};
  EXPECT_THROW(build_adjacency(e, 1, 2), DataError);
  std::vector<Edge> neg{{-1, 0}};
  EXPECT_THROW(build_adjacency(neg, 1, 2), DataError);
}

TEST(Adjacency, StructuralInvariants) {
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 50; ++trial) {
    const Index nu = 1 + gen() % 10, ni = 1 + gen() % 10;
    auto edges = random_edges(nu, ni, 1 + gen() % (nu * ni), gen);
    auto adj = build_adjacency(edges, nu, ni);
    Matrix d = adj.to_dense();
    EXPECT_TRUE((d.array() == d.transpose().array()).all()) << "not bit-symmetric";
    EXPECT_TRUE((d.diagonal().array() == 0).all());
    // No user-user or item-item blocks.
    EXPECT_TRUE(d.topLeftCorner(nu, nu).isZero(0));
    EXPECT_TRUE(d.bottomRightCorner(ni, ni).isZero(0));
  }
}

TEST(Adjacency, MatchesDenseOracle) {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Index nu = 1 + gen() % 12, ni = 1 + gen() % 12;
    auto edges = random_edges(nu, ni, std::min<std::size_t>(20, nu * ni), gen);
    auto adj = build_adjacency(edges, nu, ni);
    EXPECT_LE(rel_err(adj.to_dense(), oracle::normalized_adjacency(edges, nu, ni)), 1e-12);
  }
}

TEST(Propagate, SingleEdgeSwapsRows) {
  std::vector<Edge> e{{0, 0}};
  auto adj = build_adjacency(e, 1, 1);
  Matrix h(2, 2);
  h << 1, 2, 3, 4;
  Matrix expected(2, 2);
  expected << 3, 4, 1, 2;
  EXPECT_EQ(propagate(adj, h), expected);
}

TEST(Propagate, ZeroInZeroOut) {
  std::mt19937_64 gen(1);
  auto edges = random_edges(5, 6, 12, gen);
  auto adj = build_adjacency(edges, 5, 6);
  EXPECT_TRUE(propagate(adj, Matrix::Zero(11, 3)).isZero(0));
}

TEST(Propagate, IsolatedNodesGetZeroRows) {
  std::vector<Edge> e{{0, 0}};
  auto adj = build_adjacency(e, 2, 2);
  Matrix out = propagate(adj, Matrix::Ones(4, 3));
  EXPECT_TRUE(out.row(1).isZero(0));
  EXPECT_TRUE(out.row(3).isZero(0));
}

TEST(Propagate, DimensionMismatch) {
  std::vector<Edge> e{{0, 0}};
  auto adj = build_adjacency(e, 1, 1);
  EXPECT_THROW(propagate(adj, Matrix::Zero(3, 2)), DataError);
}

TEST(Propagate, MatchesDenseMatmulOracle) {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 100; ++trial) {
    const Index nu = 1 + gen() % 8, ni = 1 + gen() % 7;
    auto edges = random_edges(nu, ni, 1 + gen() % (nu * ni), gen);
    auto adj = build_adjacency(edges, nu, ni);
    Matrix h = random_matrix(nu + ni, 1 + gen() % 6, gen);
    Matrix expected = oracle::normalized_adjacency(edges, nu, ni) * h;
    EXPECT_LE(rel_err(propagate(adj, h), expected), 1e-6);
  }
}

TEST(Propagate, IsLinear) {
  std::mt19937_64 gen(12);
  auto edges = random_edges(6, 9, 25, gen);
  auto adj = build_adjacency(edges, 6, 9);
  Matrix h1 = random_matrix(15, 4, gen), h2 = random_matrix(15, 4, gen);
  const double a = 1.7, b = -0.3;
  EXPECT_LE(rel_err(propagate(adj, a * h1 + b * h2), a * propagate(adj, h1) + b * propagate(adj, h2)), 1e-6);
}

TEST(Propagate, SelfAdjoint) {
  std::mt19937_64 gen(13);
  for (int trial = 0; trial < 20; ++trial) {
    auto edges = random_edges(7, 8, 20, gen);
    auto adj = build_adjacency(edges, 7, 8);
    Matrix x = random_matrix(15, 1, gen), y = random_matrix(15, 1, gen);
    const double lhs = (x.transpose() * propagate(adj, y))(0, 0);
    const double rhs = (y.transpose() * propagate(adj, x))(0, 0);
    EXPECT_NEAR(lhs, rhs, 1e-6 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(Propagate, SpectralRadiusAtMostOne) {
  std::mt19937_64 gen(14);
  for (int trial = 0; trial < 20; ++trial) {
    const Index nu = 2 + gen() % 40, ni = 2 + gen() % 40;
    auto edges = random_edges(nu, ni, 1 + gen() % (nu * ni / 2 + 1), gen);
    auto adj = build_adjacency(edges, nu, ni);
    // Power iteration on A^2 (PSD) converges to the largest |eigenvalue|^2.
    Matrix v = random_matrix(nu + ni, 1, gen);
    double lambda_sq = 0;
    for (int it = 0; it < 500; ++it) {
      Matrix w = propagate(adj, propagate(adj, v));
      const double n = w.norm();
      if (n == 0) break;
      lambda_sq = (v.transpose() * w)(0, 0) / v.squaredNorm();
      v = w / n;
    }
    EXPECT_LE(std::sqrt(std::max(0.0, lambda_sq)), 1.0 + 1e-6);
  }
}
