#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "cardprune/track_model.hpp"
#include "oracles.hpp"

using namespace cardprune;

namespace {
Eigen::MatrixXd mat(std::initializer_list<std::initializer_list<double>> rows) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index r = 0;
    for (const auto& row : rows) {
        Eigen::Index c = 0;
        for (double v : row) m(r, c++) = v;
        ++r;
    }
    return m;
}

ReturnSeries series(const Eigen::MatrixXd& r, std::vector<std::string> ids) {
    ReturnSeries s;
    s.returns = r;
    s.asset_ids = std::move(ids);
    return s;
}
} // namespace

TEST(ComputeReturns, DirectRatio) {
    const auto r = compute_returns(mat({{100}, {110}, {99}}), {"A"});
    ASSERT_EQ(r.returns.rows(), 2);
    EXPECT_NEAR(r.returns(0, 0), 0.10, 1e-15);
    EXPECT_NEAR(r.returns(1, 0), -0.10, 1e-15);
}

TEST(ComputeReturns, FlatPricesGiveZero) {
    const auto r = compute_returns(mat({{50, 200}, {50, 200}, {50, 200}}), {"A", "B"});
    EXPECT_EQ(r.returns.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ComputeReturns, NonPositivePriceRejected) {
    try {
        compute_returns(mat({{100}, {0}}), {"A"});
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("non-positive price"), std::string::npos);
    }
}

TEST(ComputeReturns, MissingPriceRejected) {
    EXPECT_THROW(compute_returns(mat({{100}, {NAN}, {101}}), {"A"}), ValidationError);
}

TEST(BuildProblem, HandSummation) {
    const auto p = build_tracking_problem(series(mat({{1, 0}, {0, 1}}), {"a", "b"}), series(mat({{0.5}, {0.5}}), {"I"}));
    EXPECT_TRUE(p.sigma.isApprox(Eigen::Matrix2d::Identity()));
    EXPECT_NEAR(p.g(0), 0.5, 1e-15);
    EXPECT_NEAR(p.g(1), 0.5, 1e-15);
    EXPECT_NEAR(p.epsilon0, 0.5, 1e-15);
}

TEST(BuildProblem, PerfectReplicationOfOneAsset) {
    const Eigen::MatrixXd r = mat({{0.01}, {-0.02}, {0.03}});
    const auto p = build_tracking_problem(series(r, {"a"}), series(r, {"I"}));
    EXPECT_DOUBLE_EQ(p.g(0), p.sigma(0, 0));
    EXPECT_NEAR(p.tracking_error(Eigen::VectorXd::Ones(1)), 0.0, 1e-18);
}

TEST(BuildProblem, ZeroIndex) {
    const auto p = build_tracking_problem(series(mat({{0.1, 0.2}, {0.3, -0.1}}), {"a", "b"}),
                                          series(Eigen::MatrixXd::Zero(2, 1), {"I"}));
    EXPECT_EQ(p.g.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(p.epsilon0, 0.0);
}

TEST(BuildProblem, LengthMismatchRejected) {
    EXPECT_THROW(build_tracking_problem(series(mat({{0.1}, {0.2}, {0.3}}), {"a"}), series(mat({{0.1}, {0.2}}), {"I"})),
                 ValidationError);
}

TEST(BuildProblem, QuadraticFormEqualsResidualSum) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd(0.0, 0.01);
    Eigen::MatrixXd r(30, 5);
    for (int t = 0; t < 30; ++t)
        for (int i = 0; i < 5; ++i) r(t, i) = nd(rng);
    Eigen::MatrixXd ri(30, 1);
    for (int t = 0; t < 30; ++t) ri(t, 0) = nd(rng);
    const auto a = series(r, {"a", "b", "c", "d", "e"});
    const auto idx = series(ri, {"I"});
    const auto p = build_tracking_problem(a, idx);
    p.validate();
    Eigen::VectorXd w(5);
    w << 0.1, 0.2, 0.3, 0.15, 0.25;
    const double direct = residual_tracking_error(a, idx, w);
    EXPECT_NEAR(p.tracking_error(w), direct, 1e-12 * direct);
}

TEST(RecoverWeights, PlantedCombination) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd(0.0, 0.01);
    Eigen::MatrixXd r(50, 2);
    for (int t = 0; t < 50; ++t) r(t, 0) = nd(rng), r(t, 1) = nd(rng);
    Eigen::MatrixXd ri = r * Eigen::Vector2d(0.3, 0.7);
    const auto w = recover_index_weights(build_tracking_problem(series(r, {"a", "b"}), series(ri, {"I"})));
    EXPECT_NEAR(w(0), 0.3, 1e-6);
    EXPECT_NEAR(w(1), 0.7, 1e-6);
}

TEST(RecoverWeights, SingleAsset) {
    const auto p = build_tracking_problem(series(mat({{0.1}, {0.2}}), {"a"}), series(mat({{0.3}, {-0.1}}), {"I"}));
    EXPECT_DOUBLE_EQ(recover_index_weights(p)(0), 1.0);
}

TEST(RecoverWeights, UncorrelatedIdentityGivesUniform) {
    TrackingProblem p;
    p.sigma = Eigen::MatrixXd::Identity(4, 4);
    p.g = Eigen::VectorXd::Zero(4);
    p.asset_ids = {"a", "b", "c", "d"};
    const auto w = recover_index_weights(p);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(w(i), 0.25, 1e-9);
}

TEST(Synthetic, Deterministic) {
    const SyntheticConfig cfg;
    const auto a = generate_synthetic_universe(cfg, 42);
    const auto b = generate_synthetic_universe(cfg, 42);
    EXPECT_EQ(a.assets.returns, b.assets.returns);
    EXPECT_EQ(a.index.returns, b.index.returns);
    const auto c = generate_synthetic_universe(cfg, 43);
    EXPECT_NE(a.assets.returns, c.assets.returns);
}

TEST(Synthetic, OneFactorLimitIsPerfectlyCorrelated) {
    SyntheticConfig cfg;
    cfg.n_factors = 1;
    cfg.idio_vol = 1e-12;
    cfg.n_assets = 6;
    const auto u = generate_synthetic_universe(cfg, 1);
    const Eigen::MatrixXd& r = u.assets.returns;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
            const Eigen::VectorXd a = r.col(i).array() - r.col(i).mean();
            const Eigen::VectorXd b = r.col(j).array() - r.col(j).mean();
            EXPECT_NEAR(std::abs(a.dot(b) / (a.norm() * b.norm())), 1.0, 1e-6);
        }
}

TEST(Synthetic, DefaultProblemIsPsdWithStrongCouplings) {
    const auto p = synthetic_problem(SyntheticConfig{}, 3);
    p.validate();
    EXPECT_GE(p.min_eigenvalue(), -1e-9 * p.sigma.norm());
    double ratio = 0.0;
    int count = 0;
    for (int i = 0; i < p.size(); ++i)
        for (int j = 0; j < p.size(); ++j)
            if (i != j) {
                ratio += std::abs(p.sigma(i, j)) / std::sqrt(p.sigma(i, i) * p.sigma(j, j));
                ++count;
            }
    EXPECT_GT(ratio / count, 0.3);
}

TEST(Synthetic, IndexIsDirichletCombination) {
    const auto u = generate_synthetic_universe(SyntheticConfig{}, 5);
    EXPECT_NEAR(u.index_weights.sum(), 1.0, 1e-12);
    EXPECT_GE(u.index_weights.minCoeff(), 0.0);
    EXPECT_TRUE(u.index.returns.col(0).isApprox(u.assets.returns * u.index_weights));
}

TEST(PriceCsv, ParseWindowAndDropIncomplete) {
    std::istringstream in(
        "timestamp,AAA,BBB,IDX\n"
        "2021-01-04T10:00,10,20,100\n"
        "2021-01-04T11:00,11,,101\n"
        "2021-01-04T12:00,12,21,102\n"
        "2021-01-05T10:00,13,22,103\n");
    const PriceTable t = read_price_csv(in);
    ASSERT_EQ(t.symbols.size(), 3u);
    EXPECT_TRUE(std::isnan(t.prices(1, 1)));
    std::vector<std::string> dropped;
    const auto p = problem_from_prices(t, "IDX", "2021-01-04", dropped);
    EXPECT_EQ(dropped, std::vector<std::string>{"BBB"});
    ASSERT_EQ(p.size(), 1);
    const double r1 = 0.1, r2 = 12.0 / 11.0 - 1.0;
    EXPECT_NEAR(p.sigma(0, 0), r1 * r1 + r2 * r2, 1e-14);
    EXPECT_NEAR(p.epsilon0, 0.01 * 0.01 + std::pow(102.0 / 101.0 - 1.0, 2), 1e-14);
}

TEST(PriceCsv, AttachSeparateIndexFile) {
    std::istringstream a("timestamp,AAA\nd1,1\nd2,2\nd3,3\n");
    std::istringstream b("timestamp,index\nd1,5\nd2,6\nd3,7\n");
    const auto t = attach_index_column(read_price_csv(a), read_price_csv(b), "index");
    std::vector<std::string> dropped;
    const auto p = problem_from_prices(t, "index", "d", dropped);
    EXPECT_NEAR(p.g(0), 1.0 * 0.2 + 0.5 * (1.0 / 6.0), 1e-14);
}

TEST(PriceCsv, BadHeaderAndNumbersRejected) {
    std::istringstream bad_header("time,AAA\n1,2\n");
    EXPECT_THROW(read_price_csv(bad_header), ValidationError);
    std::istringstream bad_number("timestamp,AAA\n1,abc\n");
    EXPECT_THROW(read_price_csv(bad_number), ValidationError);
}
