#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "cardprune/exhaustive.hpp"
#include "cardprune/pruner.hpp"
#include "cardprune/track_model.hpp"
#include "oracles.hpp"

using namespace cardprune;

namespace {

SampleSet samples_of(int n, const std::vector<std::pair<std::uint64_t, int>>& counts) {
    SampleSet s;
    s.n = n;
    for (const auto& [index, count] : counts) {
        s.records.push_back({index, count, std::nullopt});
        s.total_shots += count;
    }
    return s;
}

QuboProblem raw(const Eigen::MatrixXd& q) {
    QuboProblem out;
    out.q = q;
    return out;
}

TrackingProblem synthetic(int n, std::uint64_t seed) {
    SyntheticConfig c;
    c.n_assets = n;
    c.n_periods = 30;
    return synthetic_problem(c, seed);
}

SolverBackend brute() { return SolverBackend{}; }

SolverBackend annealer(std::uint64_t seed, int reads = 1) {
    SolverBackend b;
    b.kind = BackendKind::simulated_annealing;
    b.reads = reads;
    b.sweeps = 200;
    b.seed = seed;
    return b;
}

// Index returns equal to one asset's returns exactly.
TrackingProblem planted_single(int n, int hit, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 0.01);
    Eigen::MatrixXd r(25, n);
    for (int t = 0; t < 25; ++t)
        for (int i = 0; i < n; ++i) r(t, i) = nd(rng);
    const Eigen::VectorXd ri = r.col(hit);
    TrackingProblem p;
    p.sigma = r.transpose() * r;
    p.sigma = (0.5 * (p.sigma + p.sigma.transpose())).eval();
    p.g = r.transpose() * ri;
    p.epsilon0 = ri.squaredNorm();
    for (int i = 0; i < n; ++i) p.asset_ids.push_back("a" + std::to_string(i));
    return p;
}

} // namespace

// --- select_best_feasible ----------------------------------------------------

TEST(SelectBestFeasible, PicksLowerEnergyFeasibleSample) {
    Eigen::MatrixXd q(2, 2);
    q << 0.5, 0.1, 0.1, -0.3;
    // (1,0) has energy 0.5, (0,1) has -0.3, (1,1) has 0.4
    const auto s = samples_of(2, {{2, 5}, {1, 3}, {3, 2}});
    const auto pick = select_best_feasible(s, raw(q), 1);
    EXPECT_EQ(pick.mask.to_string(), "01");
    EXPECT_DOUBLE_EQ(pick.energy, -0.3);
    EXPECT_FALSE(pick.repaired);
    EXPECT_FALSE(pick.closest.has_value());
}

TEST(SelectBestFeasible, AllFeasibleIsPlainArgmin) {
    std::mt19937_64 rng(4);
    const auto q = raw(oracle::random_symmetric(5, rng));
    std::vector<std::pair<std::uint64_t, int>> counts;
    for (std::uint64_t i = 0; i < 32; ++i)
        if (popcount64(i) == 2) counts.emplace_back(i, 1);
    const auto pick = select_best_feasible(samples_of(5, counts), q, 2);
    EXPECT_EQ(pick.mask, brute_force_qubo(q, 2).mask);
    EXPECT_FALSE(pick.repaired);
}

TEST(SelectBestFeasible, TiesGoToLowestEncoding) {
    const Eigen::MatrixXd q = Eigen::MatrixXd::Zero(3, 3);
    const auto pick = select_best_feasible(samples_of(3, {{4, 1}, {1, 7}, {2, 2}}), raw(q), 1);
    EXPECT_EQ(pick.mask.to_index(), 1u);
}

TEST(SelectBestFeasible, RepairsClosestSampleGreedily) {
    std::mt19937_64 rng(10);
    for (int t = 0; t < 20; ++t) {
        const auto q = raw(oracle::random_symmetric(3, rng));
        const auto pick = select_best_feasible(samples_of(3, {{0b100, 9}}), q, 2);
        ASSERT_TRUE(pick.repaired);
        ASSERT_TRUE(pick.closest.has_value());
        EXPECT_EQ(pick.closest->to_string(), "100");
        // oracle: keep bit 0 and add whichever of bits 1, 2 costs less
        const double e1 = q.energy(0b110), e2 = q.energy(0b101);
        EXPECT_EQ(pick.mask.to_index(), e1 <= e2 ? 0b110u : 0b101u);
        EXPECT_DOUBLE_EQ(pick.energy, std::min(e1, e2));
    }
}

TEST(SelectBestFeasible, RepairStartsFromClosestCardinality) {
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(4, 4);
    q.diagonal() << 1.0, 2.0, 3.0, 4.0;
    // 0000 is two bits away, 1110 is one bit away
    const auto pick = select_best_feasible(samples_of(4, {{0b0000, 50}, {0b1110, 1}}), raw(q), 2);
    EXPECT_TRUE(pick.repaired);
    EXPECT_EQ(pick.closest->to_string(), "1110");
    EXPECT_EQ(pick.mask.to_string(), "1100");
}

TEST(SelectBestFeasible, Guards) {
    const Eigen::MatrixXd q = Eigen::MatrixXd::Zero(2, 2);
    EXPECT_THROW(select_best_feasible(samples_of(2, {}), raw(q), 1), ValidationError);
    EXPECT_THROW(select_best_feasible(samples_of(3, {{1, 1}}), raw(q), 1), ValidationError);
    EXPECT_THROW(select_best_feasible(samples_of(2, {{1, 1}}), raw(q), 3), ValidationError);
}

// --- schedule ----------------------------------------------------------------

TEST(PruneSchedule, RepetitionRecurrence) {
    PruneSchedule s{15, 5, 5, 20, 1.0, {}};
    EXPECT_EQ(s.step_count(), 2);
    EXPECT_EQ(s.sizes(), (std::vector<int>{10, 5}));
    EXPECT_EQ(s.repetitions(), (std::vector<long>{20, 40}));

    PruneSchedule three{15, 5, 4, 20, 1.0, {}};
    EXPECT_EQ(three.repetitions(), (std::vector<long>{20, 40, 60}));

    PruneSchedule growth{15, 5, 5, 20, 4.0, {}};
    EXPECT_EQ(growth.repetitions(), (std::vector<long>{20, 100}));
}

TEST(PruneSchedule, LastStepClampsToTarget) {
    PruneSchedule s{15, 5, 4, 1, 0.0, {}};
    EXPECT_EQ(s.sizes(), (std::vector<int>{11, 7, 5}));
    PruneSchedule big{10, 3, 20, 1, 0.0, {}};
    EXPECT_EQ(big.sizes(), (std::vector<int>{3}));
}

TEST(PruneSchedule, Validation) {
    EXPECT_THROW((PruneSchedule{5, 0, 1, 1, 0.0, {}}.validate()), ValidationError);
    EXPECT_THROW((PruneSchedule{5, 6, 1, 1, 0.0, {}}.validate()), ValidationError);
    EXPECT_THROW((PruneSchedule{5, 2, 0, 1, 0.0, {}}.validate()), ValidationError);
    EXPECT_THROW((PruneSchedule{5, 2, 1, 0, 0.0, {}}.validate()), ValidationError);
    EXPECT_THROW((PruneSchedule{5, 2, 1, 1, -1.0, {}}.validate()), ValidationError);
    EXPECT_NO_THROW((PruneSchedule{5, 2, 1, 1, 0.0, {}}.validate()));
}

// --- single-step algorithms --------------------------------------------------

TEST(Solve1sa, FullBasketEqualsFullSolve) {
    const auto p = synthetic(6, 1);
    const auto r = solve_1sa(p, 6, brute());
    EXPECT_EQ(r.mask.popcount(), 6u);
    EXPECT_NEAR(r.t_err, solve_full(p).objective, 1e-14);
}

TEST(Solve1sa, BruteForceMinimizesSelectionObjective) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto p = synthetic(6, seed);
        const auto r = solve_1sa(p, 3, brute());
        const auto q = selection_objective(p);
        double best = std::numeric_limits<double>::infinity();
        for (std::uint64_t i = 0; i < 64; ++i)
            if (popcount64(i) == 3) best = std::min(best, oracle::qubo_energy(q.q, q.offset, i));
        EXPECT_NEAR(q.energy(r.mask), best, 1e-15);
        EXPECT_NEAR(r.t_err, solve_reduced(p, r.mask).objective, 1e-10);
        ASSERT_EQ(r.steps.size(), 1u);
        EXPECT_EQ(r.steps[0].chosen, r.mask.indices());
    }
}

TEST(Solve1sa, PlantedSingleAsset) {
    for (int hit = 0; hit < 4; ++hit) {
        const auto p = planted_single(4, hit, 40 + static_cast<std::uint64_t>(hit));
        const auto r = solve_1sa(p, 1, brute());
        EXPECT_EQ(r.mask.indices(), (std::vector<std::size_t>{static_cast<std::size_t>(hit)}));
        EXPECT_NEAR(r.t_err, 0.0, 1e-12);
    }
}

TEST(Solve1pa, FullBasketEqualsFullSolve) {
    const auto p = synthetic(7, 2);
    const auto r = solve_1pa(p, 7, brute());
    EXPECT_EQ(r.mask.popcount(), 7u);
    EXPECT_NEAR(r.t_err, solve_full(p).objective, 1e-14);
    EXPECT_TRUE(r.steps.empty());
}

TEST(Solve1pa, ResultInvariants) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto p = synthetic(9, seed);
        const auto r = solve_1pa(p, 4, brute());
        EXPECT_EQ(r.algorithm, "1-PA");
        EXPECT_EQ(r.mask.popcount(), 4u);
        for (std::size_t i = 0; i < 9; ++i)
            if (!r.mask[i]) EXPECT_EQ(r.weights(static_cast<Eigen::Index>(i)), 0.0);
        EXPECT_NEAR(r.t_err, solve_reduced(p, r.mask).objective, 1e-10);
        EXPECT_GE(r.t_err, brute_force_tracking(p, 4).t_err - 1e-12);
        // the step picks the exact optimum of its pruning QUBO
        const auto q = pruning_objective(p, solve_full(p).weights);
        EXPECT_EQ(r.mask, brute_force_qubo(q, 4).mask);
    }
}

TEST(Solve1pa, BeatsSelectionWithinTwentyPercentMoreOften) {
    int pa_hits = 0, sa_hits = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto p = synthetic(10, 1000 + seed);
        const double opt = brute_force_tracking(p, 4).t_err;
        if (solve_1pa(p, 4, brute()).t_err <= 1.2 * opt) ++pa_hits;
        if (solve_1sa(p, 4, brute()).t_err <= 1.2 * opt) ++sa_hits;
    }
    EXPECT_GT(pa_hits, sa_hits);
}

namespace {
// Lowest pruning-QUBO energy over subsets of `pool` with exactly k members.
double best_subset_energy(const QuboProblem& q, const std::vector<std::size_t>& pool, int k) {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t m = pool.size();
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << m); ++bits) {
        if (popcount64(bits) != k) continue;
        std::vector<std::size_t> pick;
        for (std::size_t a = 0; a < m; ++a)
            if (bits >> a & 1U) pick.push_back(pool[a]);
        best = std::min(best, q.energy(SelectionMask::from_indices(static_cast<std::size_t>(q.n()), pick)));
    }
    return best;
}
} // namespace

// A zero-weight asset has a zero row in the pruning QUBO, so picking it costs
// nothing; it is chosen exactly when a smaller positive-weight basket beats
// every positive-weight basket of full size.
TEST(Solve1pa, ZeroWeightAssetsOnlyFillForPositiveMarginals) {
    std::mt19937_64 rng(71);
    int checked = 0, filled = 0;
    for (int t = 0; t < 300 && checked < 60; ++t) {
        const auto p = oracle::random_problem(8, 6, rng);
        const Eigen::VectorXd w = solve_full(p).weights;
        std::vector<std::size_t> pos, zero;
        for (Eigen::Index i = 0; i < w.size(); ++i) (w(i) > 0.0 ? pos : zero).push_back(static_cast<std::size_t>(i));
        if (zero.empty()) continue;
        const QuboProblem q = pruning_objective(p, w);
        for (std::size_t z : zero) EXPECT_EQ(q.q.row(static_cast<Eigen::Index>(z)).cwiseAbs().maxCoeff(), 0.0);
        for (int d = 1; d <= static_cast<int>(pos.size()); ++d) {
            const auto r = solve_1pa(p, d, brute());
            int zeros_taken = 0;
            for (std::size_t z : zero) zeros_taken += r.mask[z];
            const double full = best_subset_energy(q, pos, d);
            double smaller = std::numeric_limits<double>::infinity();
            for (int k = std::max(0, d - static_cast<int>(zero.size())); k < d; ++k)
                smaller = std::min(smaller, best_subset_energy(q, pos, k));
            if (zeros_taken > 0) {
                EXPECT_LT(smaller, full) << "trial " << t << " d " << d;
                ++filled;
            } else {
                EXPECT_LE(full, smaller) << "trial " << t << " d " << d;
            }
            ++checked;
        }
    }
    EXPECT_GT(checked, 0);
    EXPECT_GT(filled, 0); // the situation does occur on this family
}

// --- k-step pruning ----------------------------------------------------------

TEST(SolveKpa, OneStepEqualsOnePa) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto p = synthetic(4, seed);
        const auto k = solve_kpa(p, PruneSchedule{4, 2, 2, 1, 0.0, {}}, brute());
        const auto one = solve_1pa(p, 2, brute());
        EXPECT_EQ(k.mask, one.mask);
        EXPECT_EQ(k.weights, one.weights);
        EXPECT_EQ(k.steps.size(), 1u);
        EXPECT_EQ(k.algorithm, "1-PA");
    }
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto p = synthetic(10, seed);
        const auto k = solve_kpa(p, PruneSchedule{10, 3, 7, 1, 0.0, {}}, brute());
        const auto one = solve_1pa(p, 3, brute());
        EXPECT_EQ(k.mask, one.mask);
        EXPECT_EQ(k.weights, one.weights);
    }
}

TEST(SolveKpa, StochasticOneStepMatchesOnePa) {
    const auto p = synthetic(10, 77);
    const auto k = solve_kpa(p, PruneSchedule{10, 4, 6, 3, 0.0, {}}, annealer(5, 4));
    const auto one = solve_1pa(p, 4, annealer(5, 4), {}, 3);
    EXPECT_EQ(k.mask, one.mask);
    EXPECT_EQ(k.weights, one.weights);
    EXPECT_EQ(k.total_evaluations(), one.total_evaluations());
}

TEST(SolveKpa, AuditTrailIsNestedAndCountsRepetitions) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto p = synthetic(15, seed);
        const PruneSchedule s{15, 5, 4, 20, 1.0, {}};
        const auto r = solve_kpa(p, s, annealer(seed, 2));
        EXPECT_EQ(r.algorithm, "3-PA");
        ASSERT_EQ(r.steps.size(), 3u);
        EXPECT_EQ(r.steps[0].universe_size, 15);
        EXPECT_EQ(r.steps[1].universe_size, 11);
        EXPECT_EQ(r.steps[2].universe_size, 7);
        std::vector<std::size_t> universe(15);
        for (std::size_t i = 0; i < 15; ++i) universe[i] = i;
        for (std::size_t k = 0; k < r.steps.size(); ++k) {
            const auto& chosen = r.steps[k].chosen;
            EXPECT_EQ(static_cast<int>(chosen.size()), s.sizes()[k]);
            for (auto a : chosen) EXPECT_NE(std::find(universe.begin(), universe.end(), a), universe.end());
            universe = chosen;
            EXPECT_EQ(r.steps[k].n_evaluations, r.steps[k].repetitions * 2);
        }
        EXPECT_EQ(r.total_repetitions(), 120);
        EXPECT_EQ(r.mask.indices(), universe);
        EXPECT_NEAR(r.t_err, solve_reduced(p, r.mask).objective, 1e-10);
        EXPECT_GE(r.t_err, brute_force_tracking(p, 5).t_err - 1e-12);
        EXPECT_NE(r.note.find("d_target"), std::string::npos);
    }
}

TEST(SolveKpa, SameSeedIsReproducible) {
    const auto p = synthetic(12, 3);
    const PruneSchedule s{12, 4, 3, 5, 1.0, {}};
    const auto a = solve_kpa(p, s, annealer(9));
    const auto b = solve_kpa(p, s, annealer(9));
    EXPECT_EQ(a.mask, b.mask);
    EXPECT_EQ(a.weights, b.weights);
}

TEST(SolveKpa, SoftLambdaDecreasesToTarget) {
    const auto p = synthetic(10, 8);
    ConstraintSpec soft;
    soft.mode = ConstraintMode::soft;
    soft.lambda = 0.3;
    const auto r = solve_kpa(p, PruneSchedule{10, 4, 2, 2, 0.0, soft}, annealer(1, 3));
    ASSERT_EQ(r.steps.size(), 3u);
    EXPECT_DOUBLE_EQ(r.steps[0].lambda, 0.6);
    EXPECT_DOUBLE_EQ(r.steps[1].lambda, 0.3 * std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(r.steps[2].lambda, 0.3);
    EXPECT_EQ(r.mask.popcount(), 4u);
}

TEST(SolveKpa, HardPenaltyRecomputedEachStep) {
    const auto p = synthetic(10, 6);
    const auto r = solve_kpa(p, PruneSchedule{10, 4, 3, 1, 0.0, {}}, annealer(2));
    ASSERT_EQ(r.steps.size(), 2u);
    for (const auto& st : r.steps) EXPECT_GT(st.penalty, 0.0);
    EXPECT_NE(r.steps[0].penalty, r.steps[1].penalty);
}

TEST(SolveKpa, NothingToPruneIsASingleConvexPass) {
    const auto p = synthetic(6, 2);
    const auto r = solve_kpa(p, PruneSchedule{6, 6, 1, 1, 0.0, {}}, brute());
    EXPECT_EQ(r.algorithm, "0-PA");
    EXPECT_TRUE(r.steps.empty());
    EXPECT_EQ(r.mask.popcount(), 6u);
    EXPECT_NEAR(r.t_err, solve_full(p).objective, 1e-14);
}

TEST(SolveKpa, StepFailuresCarryContext) {
    const auto p = synthetic(26, 1);
    SolverBackend b;
    b.kind = BackendKind::variational;
    try {
        solve_kpa(p, PruneSchedule{26, 10, 16, 1, 0.0, {}}, b);
        FAIL() << "expected a rejection";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("pruning step 1 (universe 26 -> 10)"), std::string::npos) << e.what();
    }
    EXPECT_THROW(solve_kpa(p, PruneSchedule{25, 10, 1, 1, 0.0, {}}, brute()), ValidationError);
}
