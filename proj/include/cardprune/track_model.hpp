#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cardprune/common.hpp"
#include "cardprune/convex_qp.hpp"
#include "cardprune/problem.hpp"

namespace cardprune {

/// T x N matrix of simple per-period returns.
struct ReturnSeries {
    std::vector<std::string> asset_ids;
    Eigen::MatrixXd returns;
    std::vector<std::string> timestamps;

    Eigen::Index periods() const { return returns.rows(); }
    Eigen::Index assets() const { return returns.cols(); }

    void validate() const {
        require(returns.rows() >= 2, "return series needs at least two periods");
        require(static_cast<Eigen::Index>(asset_ids.size()) == returns.cols(), "one asset id per return column");
        require(timestamps.empty() || static_cast<Eigen::Index>(timestamps.size()) == returns.rows(),
                "one timestamp per return row");
        require(returns.allFinite(), "return series contains non-finite values");
    }
};

/// r[n][i] = P[n+1][i] / P[n][i] - 1. Row labels are the timestamps of the
/// period ends when given.
inline ReturnSeries compute_returns(const Eigen::MatrixXd& prices, const std::vector<std::string>& assets,
                                    const std::vector<std::string>& timestamps = {}) {
    require(static_cast<Eigen::Index>(assets.size()) == prices.cols(), "one asset id per price column");
    for (Eigen::Index r = 0; r < prices.rows(); ++r)
        for (Eigen::Index c = 0; c < prices.cols(); ++c) {
            const double p = prices(r, c);
            if (std::isnan(p))
                throw ValidationError("missing price at row " + std::to_string(r) + " for asset " + assets[c]);
            if (!(p > 0.0) || !std::isfinite(p))
                throw ValidationError("non-positive price at row " + std::to_string(r) + " for asset " + assets[c]);
        }
    require(prices.rows() >= 3, "need at least 3 price rows to form 2 returns");
    ReturnSeries out;
    out.asset_ids = assets;
    const auto t = prices.rows() - 1;
    out.returns = (prices.bottomRows(t).array() / prices.topRows(t).array() - 1.0).matrix();
    if (!timestamps.empty()) {
        require(static_cast<Eigen::Index>(timestamps.size()) == prices.rows(), "one timestamp per price row");
        out.timestamps.assign(timestamps.begin() + 1, timestamps.end());
    }
    return out;
}

/// Σ_ij = Σ_n r_i r_j, g_j = Σ_n r_j r_I, ε0 = Σ_n r_I².
inline TrackingProblem build_tracking_problem(const ReturnSeries& asset_returns, const ReturnSeries& index_returns) {
    asset_returns.validate();
    index_returns.validate();
    require(index_returns.assets() == 1, "index series must have exactly one column");
    require(asset_returns.periods() == index_returns.periods(), "asset and index series differ in length");
    const Eigen::MatrixXd& r = asset_returns.returns;
    const Eigen::VectorXd ri = index_returns.returns.col(0);
    TrackingProblem p;
    p.sigma = r.transpose() * r;
    // exact symmetry regardless of BLAS summation order
    p.sigma = (0.5 * (p.sigma + p.sigma.transpose())).eval();
    p.g = r.transpose() * ri;
    p.epsilon0 = ri.squaredNorm();
    p.asset_ids = asset_returns.asset_ids;
    return p;
}

/// Tracking error as the literal sum of squared residuals, independent of the
/// quadratic-form route.
inline double residual_tracking_error(const ReturnSeries& asset_returns, const ReturnSeries& index_returns,
                                      const Eigen::VectorXd& w) {
    return (asset_returns.returns * w - index_returns.returns.col(0)).squaredNorm();
}

/// Long-only budget weights that best reproduce the index over the window.
inline Eigen::VectorXd recover_index_weights(const TrackingProblem& problem) {
    const auto sol = solve_full(problem);
    if (!sol.converged) throw SolverError("index weight recovery did not converge");
    return sol.weights;
}

struct SyntheticConfig {
    int n_assets = 15;
    int n_periods = 20;
    int n_factors = 3;
    double factor_vol = 0.01;
    double idio_vol = 0.004;
    std::uint64_t index_weight_seed = 7;
    int cluster_count = 3;

    void validate() const {
        require(n_assets >= 1 && n_periods >= 2 && n_factors >= 1 && cluster_count >= 1,
                "synthetic counts must be >= 1 (periods >= 2)");
        require(factor_vol > 0.0 && idio_vol > 0.0, "synthetic volatilities must be positive");
    }
};

struct SyntheticUniverse {
    ReturnSeries assets;
    ReturnSeries index;
    Eigen::VectorXd index_weights;
};

/// Linear factor model. Factor 0 is a market factor every asset loads on;
/// cluster c additionally loads on factor 1 + (c mod (K-1)), which produces
/// the block-correlated structure of a single-sector index. The index is a
/// fixed Dirichlet(1) combination of all assets drawn from
/// cfg.index_weight_seed, so windows generated with different seeds share
/// one index composition.
inline SyntheticUniverse generate_synthetic_universe(const SyntheticConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const int n = cfg.n_assets;
    const int t = cfg.n_periods;
    const int k = cfg.n_factors;

    Rng weight_rng(derive_seed(cfg.index_weight_seed, 0));
    Eigen::VectorXd weights(n);
    for (int i = 0; i < n; ++i) weights(i) = -std::log(1.0 - uniform01(weight_rng));
    weights /= weights.sum();

    Rng loading_rng(derive_seed(cfg.index_weight_seed, 1));
    Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(n, k);
    for (int i = 0; i < n; ++i) {
        beta(i, 0) = 0.8 + 0.4 * uniform01(loading_rng);
        if (k > 1) {
            const int cluster = i % cfg.cluster_count;
            const int dominant = 1 + cluster % (k - 1);
            for (int f = 1; f < k; ++f) {
                const double noise = 0.15 * standard_normal(loading_rng);
                beta(i, f) = (f == dominant ? 0.9 : 0.0) + noise;
            }
        }
    }

    Rng rng(derive_seed(seed, 2));
    Eigen::MatrixXd factors(t, k);
    for (int p = 0; p < t; ++p)
        for (int f = 0; f < k; ++f) factors(p, f) = cfg.factor_vol * standard_normal(rng);
    Eigen::MatrixXd idio(t, n);
    for (int p = 0; p < t; ++p)
        for (int i = 0; i < n; ++i) idio(p, i) = cfg.idio_vol * standard_normal(rng);

    SyntheticUniverse u;
    u.assets.returns = factors * beta.transpose() + idio;
    for (int i = 0; i < n; ++i) {
        std::ostringstream id;
        id << "A" << (i < 10 ? "0" : "") << i;
        u.assets.asset_ids.push_back(id.str());
    }
    for (int p = 0; p < t; ++p) u.assets.timestamps.push_back("t" + std::to_string(p + 1));
    u.index.returns = u.assets.returns * weights;
    u.index.asset_ids = {"INDEX"};
    u.index.timestamps = u.assets.timestamps;
    u.index_weights = weights;
    return u;
}

inline TrackingProblem synthetic_problem(const SyntheticConfig& cfg, std::uint64_t seed) {
    const auto u = generate_synthetic_universe(cfg, seed);
    return build_tracking_problem(u.assets, u.index);
}

// ---------------------------------------------------------------------------
// Price CSV ingestion

/// Dense price table; missing cells are NaN.
struct PriceTable {
    std::vector<std::string> timestamps;
    std::vector<std::string> symbols;
    Eigen::MatrixXd prices;

    Eigen::Index column(const std::string& symbol) const {
        for (std::size_t c = 0; c < symbols.size(); ++c)
            if (symbols[c] == symbol) return static_cast<Eigen::Index>(c);
        return -1;
    }
};

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}
} // namespace detail

inline PriceTable read_price_csv(std::istream& in) {
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "price CSV is empty");
    auto header = detail::split_csv_line(line);
    require(header.size() >= 2 && header[0] == "timestamp", "price CSV header must be timestamp,SYMBOL,...");
    PriceTable table;
    table.symbols.assign(header.begin() + 1, header.end());
    std::vector<std::vector<double>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = detail::split_csv_line(line);
        require(cells.size() <= header.size(), "too many cells on CSV line " + std::to_string(line_no));
        cells.resize(header.size());
        table.timestamps.push_back(cells[0]);
        std::vector<double> row(table.symbols.size(), std::numeric_limits<double>::quiet_NaN());
        for (std::size_t c = 1; c < cells.size(); ++c) {
            if (cells[c].empty()) continue;
            try {
                std::size_t used = 0;
                row[c - 1] = std::stod(cells[c], &used);
                require(used == cells[c].size(), "bad number");
            } catch (const std::exception&) {
                throw ValidationError("unparseable price '" + cells[c] + "' on CSV line " + std::to_string(line_no));
            }
        }
        rows.push_back(std::move(row));
    }
    table.prices.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.symbols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            table.prices(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return table;
}

inline PriceTable read_price_csv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open price file " + path);
    return read_price_csv(in);
}

/// Rows whose timestamp starts with `prefix` (an ISO date selects one day).
/// Returns spanning two windows are never formed, so overnight moves drop out.
inline PriceTable select_window(const PriceTable& table, const std::string& prefix) {
    PriceTable out;
    out.symbols = table.symbols;
    std::vector<Eigen::Index> rows;
    for (std::size_t r = 0; r < table.timestamps.size(); ++r)
        if (table.timestamps[r].rfind(prefix, 0) == 0) rows.push_back(static_cast<Eigen::Index>(r));
    out.prices.resize(static_cast<Eigen::Index>(rows.size()), table.prices.cols());
    for (std::size_t a = 0; a < rows.size(); ++a) {
        out.timestamps.push_back(table.timestamps[static_cast<std::size_t>(rows[a])]);
        out.prices.row(static_cast<Eigen::Index>(a)) = table.prices.row(rows[a]);
    }
    return out;
}

/// Drops assets with any missing or non-positive price; names of dropped
/// assets are appended to `dropped`.
inline PriceTable drop_incomplete_assets(const PriceTable& table, std::vector<std::string>& dropped) {
    PriceTable out;
    out.timestamps = table.timestamps;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index c = 0; c < table.prices.cols(); ++c) {
        const auto col = table.prices.col(c);
        const bool complete = col.allFinite() && (col.array() > 0.0).all();
        if (complete) {
            keep.push_back(c);
        } else {
            dropped.push_back(table.symbols[static_cast<std::size_t>(c)]);
        }
    }
    out.prices.resize(table.prices.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t a = 0; a < keep.size(); ++a) {
        out.symbols.push_back(table.symbols[static_cast<std::size_t>(keep[a])]);
        out.prices.col(static_cast<Eigen::Index>(a)) = table.prices.col(keep[a]);
    }
    return out;
}

/// Appends the first price column of `index_table` to `table` as `name`,
/// matching rows by timestamp; unmatched rows get NaN.
inline PriceTable attach_index_column(const PriceTable& table, const PriceTable& index_table, const std::string& name) {
    require(index_table.prices.cols() >= 1, "index CSV has no price column");
    require(table.column(name) < 0, "column '" + name + "' already present");
    PriceTable out = table;
    out.symbols.push_back(name);
    out.prices.conservativeResize(Eigen::NoChange, table.prices.cols() + 1);
    for (std::size_t r = 0; r < table.timestamps.size(); ++r) {
        double v = std::numeric_limits<double>::quiet_NaN();
        for (std::size_t k = 0; k < index_table.timestamps.size(); ++k)
            if (index_table.timestamps[k] == table.timestamps[r]) {
                v = index_table.prices(static_cast<Eigen::Index>(k), 0);
                break;
            }
        out.prices(static_cast<Eigen::Index>(r), table.prices.cols()) = v;
    }
    return out;
}

/// One tracking problem from the rows of `window`: constituents with gaps are
/// dropped (and reported), the index column must be complete.
inline TrackingProblem problem_from_prices(const PriceTable& table, const std::string& index_column,
                                           const std::string& window, std::vector<std::string>& dropped) {
    const Eigen::Index ic = table.column(index_column);
    require(ic >= 0, "index column '" + index_column + "' not found");
    const PriceTable rows = select_window(table, window);
    require(rows.prices.rows() >= 3, "window '" + window + "' has fewer than 3 price rows");
    const auto index_prices = rows.prices.col(ic);
    require(index_prices.allFinite() && (index_prices.array() > 0.0).all(),
            "index prices in window '" + window + "' are incomplete or non-positive");

    PriceTable constituents;
    constituents.timestamps = rows.timestamps;
    constituents.prices.resize(rows.prices.rows(), rows.prices.cols() - 1);
    for (Eigen::Index c = 0, k = 0; c < rows.prices.cols(); ++c) {
        if (c == ic) continue;
        constituents.symbols.push_back(rows.symbols[static_cast<std::size_t>(c)]);
        constituents.prices.col(k++) = rows.prices.col(c);
    }
    const PriceTable clean = drop_incomplete_assets(constituents, dropped);
    require(clean.prices.cols() >= 1, "no constituent has complete prices in window '" + window + "'");
    const ReturnSeries assets = compute_returns(clean.prices, clean.symbols, clean.timestamps);
    const ReturnSeries index = compute_returns(Eigen::MatrixXd(index_prices), {index_column}, rows.timestamps);
    return build_tracking_problem(assets, index);
}

} // namespace cardprune
