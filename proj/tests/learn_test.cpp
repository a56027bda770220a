// Copyright 2026 The spnasi Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "spnasi/kmeans.hpp"
#include "spnasi/learn_spn.hpp"
#include "spnasi/rdc.hpp"

using namespace spnasi;

namespace {

Matrix gaussian_columns(std::size_t n, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix m(n, cols);
    for (double& v : m.data()) v = g(rng);
    return m;
}

std::vector<double> uniforms(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    return v;
}

}  // namespace

TEST(Rdc, IdenticalColumnsNearOne) {
    const auto x = uniforms(500, 1);
    EXPECT_GT(rdc_dependence(x, x, 20, 1.0 / 6.0, 7), 0.95);
}

TEST(Rdc, IndependentUniformsLow) {
    const auto x = uniforms(2000, 2), y = uniforms(2000, 3);
    EXPECT_LT(rdc_dependence(x, y, 20, 1.0 / 6.0, 7), 0.2);
}

TEST(Rdc, ConstantColumnIsZero) {
    const std::vector<double> c(100, 3.0);
    EXPECT_EQ(rdc_dependence(c, uniforms(100, 4), 20, 1.0 / 6.0, 7), 0.0);
}

TEST(Rdc, NonlinearDependenceDetected) {
    auto x = uniforms(1000, 5);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - 0.5) * (x[i] - 0.5);
    EXPECT_GT(rdc_dependence(x, y, 20, 1.0 / 6.0, 9), 0.9);
}

TEST(Rdc, DeterministicAndInRange) {
    const auto x = uniforms(300, 6), y = uniforms(300, 8);
    const double a = rdc_dependence(x, y, 20, 1.0 / 6.0, 1);
    EXPECT_EQ(a, rdc_dependence(x, y, 20, 1.0 / 6.0, 1));
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
    EXPECT_THROW(rdc_dependence(x, uniforms(10, 1), 20, 1.0 / 6.0, 1), Error);
}

TEST(CopulaTransform, RanksOverN) {
    const std::vector<double> x{3.0, 1.0, 2.0};
    EXPECT_EQ(copula_transform(x), (std::vector<double>{1.0, 1.0 / 3.0, 2.0 / 3.0}));
}

TEST(PartitionVariables, AllIndependentGivesSingletons) {
    LearnParams p;
    p.seed = 3;
    const auto parts = partition_variables(gaussian_columns(1000, 3, 4), p);
    EXPECT_EQ(parts, (std::vector<std::vector<std::size_t>>{{0}, {1}, {2}}));
}

TEST(PartitionVariables, DependentPairGrouped) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix m(1000, 3);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        m(r, 0) = g(rng);
        m(r, 1) = m(r, 0) + 0.1 * g(rng);
        m(r, 2) = g(rng);
    }
    LearnParams p;
    const auto parts = partition_variables(m, p);
    EXPECT_EQ(parts, (std::vector<std::vector<std::size_t>>{{0, 1}, {2}}));
}

TEST(PartitionVariables, AllDependentIsOneComponent) {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix m(500, 3);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        m(r, 0) = g(rng);
        m(r, 1) = m(r, 0) + 0.05 * g(rng);
        m(r, 2) = m(r, 1) + 0.05 * g(rng);
    }
    EXPECT_EQ(partition_variables(m, LearnParams{}).size(), 1u);
}

TEST(ClusterInstances, SeparatedBlobs) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix m(200, 2);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double c = r < 100 ? -5.0 : 5.0;
        m(r, 0) = c + g(rng);
        m(r, 1) = c + g(rng);
    }
    const auto cl = cluster_instances(m, 2, 100, 1);
    for (std::size_t r = 0; r < 100; ++r) EXPECT_EQ(cl.labels[r], cl.labels[0]);
    for (std::size_t r = 100; r < 200; ++r) EXPECT_NE(cl.labels[r], cl.labels[0]);
    EXPECT_EQ(cl.sizes[0] + cl.sizes[1], 200u);
}

TEST(ClusterInstances, KEqualsN) {
    const auto cl = cluster_instances(gaussian_columns(6, 2, 1), 6, 100, 2);
    EXPECT_EQ(std::set<std::size_t>(cl.labels.begin(), cl.labels.end()).size(), 6u);
    for (auto s : cl.sizes) EXPECT_EQ(s, 1u);
}

TEST(ClusterInstances, IdenticalRowsTerminate) {
    const Matrix m(10, 3, 1.5);
    const auto cl = cluster_instances(m, 2, 100, 3);
    EXPECT_EQ(cl.sizes.size(), 2u);
    EXPECT_EQ(cl.sizes[0] + cl.sizes[1], 10u);
    for (auto s : cl.sizes) EXPECT_GE(s, 1u);
}

TEST(KmeansPlusPlus, DistinctSeeds) {
    std::mt19937_64 rng(4);
    const auto seeds = kmeans_pp_seeds(gaussian_columns(50, 2, 9), 5, rng);
    EXPECT_EQ(std::set<std::size_t>(seeds.begin(), seeds.end()).size(), 5u);
}

TEST(FitLeaf, HandValues) {
    const std::vector<double> two{0.0, 2.0};
    auto leaf = fit_leaf(two);
    EXPECT_DOUBLE_EQ(leaf.means[0], 1.0);
    EXPECT_DOUBLE_EQ(leaf.variances[0], 1.0);
    const std::vector<double> one{5.0};
    leaf = fit_leaf(one);
    EXPECT_DOUBLE_EQ(leaf.means[0], 5.0);
    EXPECT_DOUBLE_EQ(leaf.variances[0], kVarianceFloor);
}

TEST(FitLeaf, LargeSample) {
    std::mt19937_64 rng(10);
    std::normal_distribution<double> g(3.0, 2.0);
    std::vector<double> v(100000);
    for (double& x : v) x = g(rng);
    const auto leaf = fit_leaf(v);
    EXPECT_NEAR(leaf.means[0], 3.0, 0.05);
    EXPECT_NEAR(leaf.variances[0], 4.0, 0.15);
}

TEST(LearnSpn, SingleColumnIsLeaf) {
    const auto g = learn_spn(gaussian_columns(80, 1, 1), LearnParams{});
    ASSERT_EQ(g.nodes.size(), 1u);
    EXPECT_TRUE(std::holds_alternative<GaussianLeaf>(g.nodes[g.root]));
}

TEST(LearnSpn, IndependentColumnsGiveProductOfLeaves) {
    const auto g = learn_spn(gaussian_columns(1000, 2, 2), LearnParams{});
    const auto* p = std::get_if<ProductNode>(&g.nodes[g.root]);
    ASSERT_NE(p, nullptr);
    ASSERT_EQ(p->children.size(), 2u);
    for (auto c : p->children) EXPECT_TRUE(std::holds_alternative<GaussianLeaf>(g.nodes[c]));
}

TEST(LearnSpn, DuplicatedColumnGivesSum) {
    Matrix m(200, 2);
    const auto src = gaussian_columns(200, 1, 3);
    for (std::size_t r = 0; r < 200; ++r) m(r, 0) = m(r, 1) = src(r, 0);
    const auto g = learn_spn(m, LearnParams{});
    EXPECT_TRUE(std::holds_alternative<SumNode>(g.nodes[g.root]));
    EXPECT_TRUE(validate(g).is_valid());
}

TEST(LearnSpn, DeterministicAndValid) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix m(400, 5);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double shift = r % 2 ? 3.0 : -3.0;
        for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = shift + g(rng);
    }
    LearnParams p;
    p.seed = 17;
    const auto a = learn_spn(m, p), b = learn_spn(m, p);
    EXPECT_EQ(a, b);
    const auto r = validate(a);
    EXPECT_TRUE(r.is_valid());
    EXPECT_TRUE(r.weights_normalized);
}

TEST(LearnSpn, RejectsBadInput) {
    LearnParams p;
    p.independence_threshold = 1.5;
    EXPECT_THROW(learn_spn(gaussian_columns(10, 2, 1), p), Error);
    Matrix bad = gaussian_columns(10, 2, 1);
    bad(3, 1) = NAN;
    EXPECT_THROW(learn_spn(bad, LearnParams{}), Error);
    EXPECT_THROW(learn_spn(Matrix{}, LearnParams{}), Error);
}
