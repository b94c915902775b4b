#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cardprune/common.hpp"
#include "cardprune/mask.hpp"

namespace cardprune {

/// Quadratic tracking objective T_err(w) = w'Σw - 2w'g + ε0.
///
/// Σ and g are sums of products of per-period returns, ε0 the sum of squared
/// index returns, so T_err is a sum of squared residuals and never negative.
struct TrackingProblem {
    Eigen::MatrixXd sigma;
    Eigen::VectorXd g;
    double epsilon0 = 0.0;
    std::vector<std::string> asset_ids;

    Eigen::Index size() const { return g.size(); }

    double tracking_error(const Eigen::VectorXd& w) const {
        return w.dot(sigma * w) - 2.0 * w.dot(g) + epsilon0;
    }

    /// Characteristic magnitude used to turn absolute tolerances relative.
    double scale() const {
        return std::max({sigma.cwiseAbs().maxCoeff(), g.cwiseAbs().maxCoeff(), epsilon0, 1e-300});
    }

    /// Sub-problem over the listed assets; ε0 carries over unchanged.
    TrackingProblem restricted(const std::vector<std::size_t>& keep) const {
        TrackingProblem sub;
        const auto d = static_cast<Eigen::Index>(keep.size());
        sub.sigma.resize(d, d);
        sub.g.resize(d);
        for (Eigen::Index a = 0; a < d; ++a) {
            const auto i = static_cast<Eigen::Index>(keep[a]);
            sub.g(a) = g(i);
            for (Eigen::Index b = 0; b < d; ++b) sub.sigma(a, b) = sigma(i, static_cast<Eigen::Index>(keep[b]));
            if (!asset_ids.empty()) sub.asset_ids.push_back(asset_ids[keep[a]]);
        }
        sub.epsilon0 = epsilon0;
        return sub;
    }

    double min_eigenvalue() const {
        if (size() == 0) return 0.0;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }

    void validate() const {
        const auto n = size();
        require(n >= 1, "tracking problem has no assets");
        require(sigma.rows() == n && sigma.cols() == n, "sigma must be N x N with N = len(g)");
        require(asset_ids.empty() || static_cast<Eigen::Index>(asset_ids.size()) == n,
                "asset_ids length must equal N");
        require(sigma.allFinite() && g.allFinite() && std::isfinite(epsilon0), "tracking problem has non-finite entries");
        const double norm = sigma.cwiseAbs().maxCoeff();
        require((sigma - sigma.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(norm, 1e-300),
                "sigma is not symmetric");
        require(epsilon0 >= 0.0, "epsilon0 must be non-negative");
        require(min_eigenvalue() >= -1e-9 * std::max(norm, 1e-300), "sigma is not positive semi-definite");
    }
};

} // namespace cardprune
