#include <gtest/gtest.h>

#include <random>

#include "cardprune/convex_qp.hpp"
#include "cardprune/mask.hpp"
#include "oracles.hpp"

using namespace cardprune;

namespace {
TrackingProblem identity_problem(Eigen::VectorXd g, double eps0) {
    TrackingProblem p;
    p.sigma = Eigen::MatrixXd::Identity(g.size(), g.size());
    p.g = std::move(g);
    p.epsilon0 = eps0;
    for (Eigen::Index i = 0; i < p.g.size(); ++i) p.asset_ids.push_back("a" + std::to_string(i));
    return p;
}
} // namespace

TEST(ProjectSimplex, Examples) {
    EXPECT_TRUE(project_simplex(Eigen::Vector2d(0.6, 0.4)).isApprox(Eigen::Vector2d(0.6, 0.4)));
    EXPECT_TRUE(project_simplex(Eigen::Vector2d(2, 0)).isApprox(Eigen::Vector2d(1, 0)));
    EXPECT_TRUE(project_simplex(Eigen::Vector3d(0.5, 0.5, 0.5)).isApprox(Eigen::Vector3d::Constant(1.0 / 3)));
}

TEST(ProjectSimplex, IsTheClosestSimplexPoint) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd v(5);
        for (int i = 0; i < 5; ++i) v(i) = nd(rng);
        const Eigen::VectorXd p = project_simplex(v);
        EXPECT_NEAR(p.sum(), 1.0, 1e-12);
        EXPECT_GE(p.minCoeff(), 0.0);
        // variational inequality: (v - p)'(y - p) <= 0 for every vertex y
        for (int k = 0; k < 5; ++k) {
            Eigen::VectorXd y = Eigen::VectorXd::Zero(5);
            y(k) = 1.0;
            EXPECT_LE((v - p).dot(y - p), 1e-12);
        }
    }
}

TEST(SolveFull, IdentityExamples) {
    auto s = solve_full(identity_problem(Eigen::Vector2d(0.6, 0.4), 0.52));
    EXPECT_NEAR(s.weights(0), 0.6, 1e-9);
    EXPECT_NEAR(s.weights(1), 0.4, 1e-9);
    EXPECT_NEAR(s.objective, 0.0, 1e-12);
    s = solve_full(identity_problem(Eigen::Vector2d(2, 0), 4));
    EXPECT_NEAR(s.weights(0), 1.0, 1e-12);
    EXPECT_NEAR(s.weights(1), 0.0, 1e-12);
}

TEST(SolveFull, MatchesSupportEnumerationOracle) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 40; ++trial) {
        const int periods = trial % 4 == 0 ? 4 : 12; // some rank-deficient Σ
        const auto p = oracle::random_problem(6, periods, rng);
        const auto s = solve_full(p);
        const auto o = oracle::simplex_qp(p.sigma, p.g, p.epsilon0);
        EXPECT_NEAR(s.objective, o.objective, 1e-6 * (1.0 + std::abs(o.objective))) << "trial " << trial;
        EXPECT_NEAR(s.weights.sum(), 1.0, 1e-8);
        EXPECT_GE(s.weights.minCoeff(), 0.0);
        EXPECT_NEAR(s.objective, p.tracking_error(s.weights), 1e-10 * (1.0 + std::abs(s.objective)));
        EXPECT_TRUE(s.converged);
    }
}

TEST(SolveReduced, AllMaskEqualsFull) {
    std::mt19937_64 rng(3);
    const auto p = oracle::random_problem(5, 10, rng);
    const auto a = solve_full(p);
    const auto b = solve_reduced(p, SelectionMask::all(5));
    EXPECT_TRUE(a.weights.isApprox(b.weights, 1e-12));
    EXPECT_DOUBLE_EQ(a.objective, b.objective);
}

TEST(SolveReduced, SingleVariable) {
    const auto p = identity_problem(Eigen::Vector3d(0.2, 0.5, 0.1), 0.7);
    const auto s = solve_reduced(p, SelectionMask::from_indices(3, {1}));
    EXPECT_EQ(s.weights(1), 1.0);
    EXPECT_EQ(s.weights(0), 0.0);
    EXPECT_NEAR(s.objective, 1.0 - 2 * 0.5 + 0.7, 1e-14);
}

TEST(SolveReduced, EverySizeThreeMaskMatchesOracle) {
    std::mt19937_64 rng(4);
    const auto p = oracle::random_problem(6, 9, rng);
    for (std::uint64_t idx = 0; idx < 64; ++idx) {
        if (popcount64(idx) != 3) continue;
        const auto mask = SelectionMask::from_index(6, idx);
        std::uint64_t allowed = 0;
        for (auto i : mask.indices()) allowed |= std::uint64_t{1} << i;
        const auto s = solve_reduced(p, mask);
        const auto o = oracle::simplex_qp(p.sigma, p.g, p.epsilon0, allowed);
        EXPECT_NEAR(s.objective, o.objective, 1e-6 * (1.0 + std::abs(o.objective)));
        for (Eigen::Index i = 0; i < 6; ++i)
            if (!mask[static_cast<std::size_t>(i)]) EXPECT_EQ(s.weights(i), 0.0);
    }
}

TEST(SolveFull, RejectsInvalidProblems) {
    auto p = identity_problem(Eigen::Vector2d(0.5, 0.5), 1.0);
    p.sigma(0, 1) = 0.3;
    EXPECT_THROW(solve_full(p), ValidationError);
    p = identity_problem(Eigen::Vector2d(0.5, 0.5), 1.0);
    p.sigma(0, 0) = -1.0;
    EXPECT_THROW(solve_full(p), ValidationError);
    p = identity_problem(Eigen::Vector2d(0.5, 0.5), -1.0);
    EXPECT_THROW(solve_full(p), ValidationError);
    p = identity_problem(Eigen::Vector2d(0.5, 0.5), 1.0);
    EXPECT_THROW(solve_reduced(p, SelectionMask(2)), ValidationError);
}
