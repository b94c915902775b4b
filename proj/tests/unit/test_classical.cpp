#include <gtest/gtest.h>

#include <random>

#include "cardprune/annealing.hpp"
#include "cardprune/exhaustive.hpp"
#include "oracles.hpp"

using namespace cardprune;

namespace {
QuboProblem raw(const Eigen::MatrixXd& q, double offset = 0.0) {
    QuboProblem out;
    out.q = q;
    out.offset = offset;
    return out;
}
} // namespace

TEST(SimulatedAnnealing, SingleDownhillVariable) {
    Eigen::MatrixXd q(1, 1);
    q << -1.0;
    const auto s = simulated_annealing_qubo(raw(q), 20, 10, 1);
    ASSERT_EQ(s.records.size(), 1u);
    EXPECT_EQ(s.records[0].index, 1u);
    EXPECT_EQ(s.records[0].count, 20);
}

TEST(SimulatedAnnealing, ZeroSweepsReturnsRandomStart) {
    std::mt19937_64 rng(1);
    const auto q = raw(oracle::random_symmetric(12, rng));
    const auto s = simulated_annealing_qubo(q, 1, 0, 99);
    ASSERT_EQ(s.records.size(), 1u);
    Rng start(derive_seed(99, 1));
    std::uint64_t index = 0;
    for (int i = 0; i < 12; ++i) index = (index << 1) | (uniform01(start) < 0.5 ? 1U : 0U);
    EXPECT_EQ(s.records[0].index, index);
}

TEST(SimulatedAnnealing, FindsGroundStateOnRandomInstances) {
    std::mt19937_64 rng(2);
    int hits = 0;
    for (int t = 0; t < 100; ++t) {
        const auto q = raw(oracle::random_symmetric(10, rng));
        const auto s = simulated_annealing_qubo(q, 100, 1000, static_cast<std::uint64_t>(t));
        double best = 1e300;
        for (const auto& r : s.records) best = std::min(best, *r.energy);
        hits += std::abs(best - brute_force_qubo(q).energy) < 1e-9;
    }
    EXPECT_GE(hits, 95);
}

TEST(SimulatedAnnealing, DeterministicAndAnnotated) {
    std::mt19937_64 rng(3);
    const auto q = raw(oracle::random_symmetric(8, rng));
    const auto a = simulated_annealing_qubo(q, 30, 50, 4), b = simulated_annealing_qubo(q, 30, 50, 4);
    ASSERT_EQ(a.records.size(), b.records.size());
    int total = 0;
    for (std::size_t k = 0; k < a.records.size(); ++k) {
        EXPECT_EQ(a.records[k].index, b.records[k].index);
        EXPECT_EQ(a.records[k].count, b.records[k].count);
        EXPECT_NEAR(*a.records[k].energy, q.energy(a.records[k].index), 1e-12);
        total += a.records[k].count;
    }
    EXPECT_EQ(total, 30);
}

TEST(SimulatedAnnealing, Guards) {
    const auto q = raw(Eigen::Matrix2d::Identity());
    EXPECT_THROW(simulated_annealing_qubo(q, 0, 10, 1), ValidationError);
    EXPECT_THROW(simulated_annealing_qubo(q, 1, -1, 1), ValidationError);
}

TEST(BruteForceQubo, DiagonalWithCardinality) {
    Eigen::MatrixXd q = Eigen::Vector4d(1, 2, 3, 4).asDiagonal();
    const auto o = brute_force_qubo(raw(q), 2);
    EXPECT_EQ(o.mask.indices(), (std::vector<std::size_t>{0, 1}));
    EXPECT_DOUBLE_EQ(o.energy, 3.0);
    EXPECT_EQ(o.evaluated, 6u);
}

TEST(BruteForceQubo, PositiveDiagonalGivesEmptySelection) {
    Eigen::MatrixXd q = Eigen::Vector3d(1, 2, 3).asDiagonal();
    const auto o = brute_force_qubo(raw(q, 0.5));
    EXPECT_EQ(o.mask.popcount(), 0u);
    EXPECT_DOUBLE_EQ(o.energy, 0.5);
}

TEST(BruteForceQubo, FullCardinalityForced) {
    std::mt19937_64 rng(4);
    const auto o = brute_force_qubo(raw(oracle::random_symmetric(5, rng)), 5);
    EXPECT_EQ(o.mask.popcount(), 5u);
}

TEST(BruteForceQubo, AgreesWithPlainEnumeration) {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 20; ++t) {
        const auto q = raw(oracle::random_symmetric(9, rng), 0.1);
        for (int d : {-1, 3}) {
            double best = 1e300;
            std::uint64_t arg = 0;
            for (std::uint64_t x = 0; x < 512; ++x) {
                if (d >= 0 && popcount64(x) != d) continue;
                const double e = oracle::qubo_energy(q.q, q.offset, x);
                if (e < best) best = e, arg = x;
            }
            const auto o = d < 0 ? brute_force_qubo(q) : brute_force_qubo(q, d);
            EXPECT_EQ(o.mask.to_index(), arg);
            EXPECT_NEAR(o.energy, best, 1e-12);
        }
    }
}

TEST(BruteForceQubo, TiesGoToLowestIndex) {
    const auto o = brute_force_qubo(raw(Eigen::Matrix3d::Zero()), 1);
    EXPECT_EQ(o.mask.to_index(), 0b001u);
}

TEST(BruteForceQubo, SizeGuard) { EXPECT_THROW(brute_force_qubo(raw(Eigen::MatrixXd::Zero(27, 27))), ValidationError); }

TEST(BruteForceTracking, FullBasketEqualsSolveFull) {
    std::mt19937_64 rng(6);
    const auto p = oracle::random_problem(5, 9, rng);
    const auto o = brute_force_tracking(p, 5);
    EXPECT_NEAR(o.t_err, solve_full(p).objective, 1e-12);
}

TEST(BruteForceTracking, SingleAssetIsArgminOfReducedSolves) {
    std::mt19937_64 rng(7);
    const auto p = oracle::random_problem(4, 9, rng);
    const auto o = brute_force_tracking(p, 1);
    double best = 1e300;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        const double v = p.sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) -
                         2 * p.g(static_cast<Eigen::Index>(i)) + p.epsilon0;
        if (v < best) best = v, arg = i;
    }
    EXPECT_EQ(o.mask.indices(), std::vector<std::size_t>{arg});
    EXPECT_NEAR(o.t_err, best, 1e-10);
}

TEST(BruteForceTracking, RecoversPlantedBasket) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd(0.0, 0.01);
    Eigen::MatrixXd r(40, 9);
    for (int t = 0; t < 40; ++t)
        for (int i = 0; i < 9; ++i) r(t, i) = nd(rng);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(9);
    w(2) = 0.2, w(5) = 0.5, w(7) = 0.3;
    const Eigen::VectorXd ri = r * w;
    TrackingProblem p;
    p.sigma = r.transpose() * r;
    p.sigma = (0.5 * (p.sigma + p.sigma.transpose())).eval();
    p.g = r.transpose() * ri;
    p.epsilon0 = ri.squaredNorm();
    for (int i = 0; i < 9; ++i) p.asset_ids.push_back("a" + std::to_string(i));
    const auto o = brute_force_tracking(p, 3);
    EXPECT_EQ(o.mask.indices(), (std::vector<std::size_t>{2, 5, 7}));
    EXPECT_NEAR(o.t_err, 0.0, 1e-12);
}

TEST(BruteForceTracking, CombinationGuard) {
    TrackingProblem p;
    p.sigma = Eigen::MatrixXd::Identity(40, 40);
    p.g = Eigen::VectorXd::Zero(40);
    for (int i = 0; i < 40; ++i) p.asset_ids.push_back("a");
    EXPECT_THROW(brute_force_tracking(p, 20), ValidationError);
    EXPECT_DOUBLE_EQ(binomial(10, 3), 120.0);
}
