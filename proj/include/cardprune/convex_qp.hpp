#pragma once

// Weight assignment over the long-only budget simplex {w >= 0, sum(w) = 1}.
//
// Projected gradient with Barzilai-Borwein steps finds the active support;
// a primal active-set pass then solves the KKT system on that support
// exactly so that objectives are accurate to rounding, which the relative
// error metric downstream depends on.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "cardprune/common.hpp"
#include "cardprune/mask.hpp"
#include "cardprune/problem.hpp"

namespace cardprune {

struct QpSolution {
    Eigen::VectorXd weights;
    double objective = 0.0;
    int iterations = 0;
    /// ||w - P(w - grad/L)||, a distance in weight units.
    double kkt_residual = 0.0;
    bool converged = false;
};

struct QpOptions {
    double tolerance = 1e-7;
    int max_iterations = 20000;
    bool polish = true;
};

/// Euclidean projection onto the probability simplex (sort-and-threshold).
inline Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
    const auto n = v.size();
    require(n >= 1, "cannot project an empty vector");
    require(v.allFinite(), "projection input must be finite");
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        cumulative += u[j];
        const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0) theta = t;
    }
    return (v.array() - theta).max(0.0).matrix();
}

namespace detail {

struct SupportKkt {
    Eigen::VectorXd w;
    double mu = 0.0;
};

// min w'Σw - 2w'g subject to 1'w = 1 on the given support.
inline std::optional<SupportKkt> solve_support_kkt(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& g,
                                                   const std::vector<Eigen::Index>& support) {
    const auto d = static_cast<Eigen::Index>(support.size());
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(d + 1, d + 1);
    Eigen::VectorXd rhs(d + 1);
    for (Eigen::Index a = 0; a < d; ++a) {
        for (Eigen::Index b = 0; b < d; ++b) k(a, b) = 2.0 * sigma(support[a], support[b]);
        k(a, d) = -1.0;
        k(d, a) = 1.0;
        rhs(a) = 2.0 * g(support[a]);
    }
    rhs(d) = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(k);
    Eigen::VectorXd sol;
    if (lu.isInvertible()) {
        sol = lu.solve(rhs);
    } else {
        sol = k.completeOrthogonalDecomposition().solve(rhs);
        const double scale = std::max(k.cwiseAbs().maxCoeff(), rhs.cwiseAbs().maxCoeff());
        // inconsistent system: objective unbounded along the null space of Σ_S
        if ((k * sol - rhs).cwiseAbs().maxCoeff() > 1e-9 * scale) return std::nullopt;
    }
    if (!sol.allFinite()) return std::nullopt;
    return SupportKkt{sol.head(d), sol(d)};
}

inline double quadratic_value(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& g, const Eigen::VectorXd& w) {
    return w.dot(sigma * w) - 2.0 * w.dot(g);
}

// Primal active-set iterations from a feasible start.
inline std::optional<Eigen::VectorXd> active_set_polish(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& g,
                                                        Eigen::VectorXd w) {
    const auto n = g.size();
    const double scale = std::max({sigma.cwiseAbs().maxCoeff(), g.cwiseAbs().maxCoeff(), 1e-300});
    std::vector<char> free(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i) free[i] = w(i) > 1e-12;

    for (int iter = 0; iter < 10 * static_cast<int>(n) + 10; ++iter) {
        std::vector<Eigen::Index> support;
        for (Eigen::Index i = 0; i < n; ++i)
            if (free[i]) support.push_back(i);
        if (support.empty()) return std::nullopt;
        auto kkt = solve_support_kkt(sigma, g, support);
        if (!kkt) return std::nullopt;

        Eigen::VectorXd target = Eigen::VectorXd::Zero(n);
        for (std::size_t a = 0; a < support.size(); ++a) target(support[a]) = kkt->w(static_cast<Eigen::Index>(a));

        if (kkt->w.minCoeff() >= 0.0) {
            w = target;
            const Eigen::VectorXd grad = 2.0 * (sigma * w - g);
            Eigen::Index entering = -1;
            double most_negative = -1e-10 * scale;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (free[i]) continue;
                const double reduced = grad(i) - kkt->mu;
                if (reduced < most_negative) {
                    most_negative = reduced;
                    entering = i;
                }
            }
            if (entering < 0) return w;
            free[entering] = 1;
        } else {
            // move toward the support optimum until a weight hits zero
            double step = 1.0;
            Eigen::Index blocking = -1;
            for (auto i : support) {
                const double delta = target(i) - w(i);
                if (delta < 0.0 && target(i) < 0.0) {
                    const double t = w(i) / -delta;
                    if (t < step) {
                        step = t;
                        blocking = i;
                    }
                }
            }
            w += step * (target - w);
            if (blocking >= 0) {
                w(blocking) = 0.0;
                free[blocking] = 0;
            }
            w = w.cwiseMax(0.0);
            w /= w.sum();
        }
    }
    return std::nullopt;
}

inline QpSolution finish(const TrackingProblem& problem, Eigen::VectorXd w, int iterations, bool converged) {
    w = w.cwiseMax(0.0);
    w /= w.sum();
    const Eigen::VectorXd grad = 2.0 * (problem.sigma * w - problem.g);
    double lipschitz = 2.0 * problem.sigma.cwiseAbs().rowwise().sum().maxCoeff();
    if (!(lipschitz > 0.0)) lipschitz = std::max(2.0 * problem.g.cwiseAbs().maxCoeff(), 1.0);
    QpSolution out;
    out.kkt_residual = (w - project_simplex(w - grad / lipschitz)).norm();
    out.weights = std::move(w);
    out.objective = problem.tracking_error(out.weights);
    out.iterations = iterations;
    out.converged = converged;
    return out;
}

} // namespace detail

/// Minimizes T_err over the simplex. Starts from the uniform portfolio.
inline QpSolution solve_simplex_qp(const TrackingProblem& problem, const QpOptions& options = {}) {
    const auto n = problem.size();
    require(n >= 1, "empty problem");
    const Eigen::MatrixXd& sigma = problem.sigma;
    const Eigen::VectorXd& g = problem.g;

    double lipschitz = 2.0 * sigma.cwiseAbs().rowwise().sum().maxCoeff();
    if (!(lipschitz > 0.0)) lipschitz = std::max(2.0 * g.cwiseAbs().maxCoeff(), 1.0);

    Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    if (n == 1) return detail::finish(problem, w, 0, true);

    Eigen::VectorXd grad = 2.0 * (sigma * w - g);
    double value = detail::quadratic_value(sigma, g, w);
    Eigen::VectorXd w_prev = w;
    Eigen::VectorXd grad_prev = grad;
    bool converged = false;
    int it = 0;
    for (; it < options.max_iterations; ++it) {
        const double residual = (w - project_simplex(w - grad / lipschitz)).norm();
        if (residual <= options.tolerance) {
            converged = true;
            break;
        }
        double step = 1.0 / lipschitz;
        if (it > 0) {
            const Eigen::VectorXd s = w - w_prev;
            const Eigen::VectorXd y = grad - grad_prev;
            const double sy = s.dot(y);
            if (sy > 0.0) step = std::clamp(s.squaredNorm() / sy, 1e-6 / lipschitz, 1e6 / lipschitz);
        }
        Eigen::VectorXd candidate = project_simplex(w - step * grad);
        double candidate_value = detail::quadratic_value(sigma, g, candidate);
        if (candidate_value > value) {
            candidate = project_simplex(w - grad / lipschitz);
            candidate_value = detail::quadratic_value(sigma, g, candidate);
        }
        w_prev = w;
        grad_prev = grad;
        w = std::move(candidate);
        value = candidate_value;
        grad = 2.0 * (sigma * w - g);
    }

    if (options.polish) {
        if (auto polished = detail::active_set_polish(sigma, g, w)) {
            const double polished_value = detail::quadratic_value(sigma, g, *polished);
            const double slack = 1e-13 * std::max(problem.scale(), std::abs(value));
            if (polished_value <= value + slack) return detail::finish(problem, *polished, it, true);
        }
    }
    return detail::finish(problem, w, it, converged);
}

/// Full-universe weights: argmin T_err over every asset.
inline QpSolution solve_full(const TrackingProblem& problem, const QpOptions& options = {}) {
    problem.validate();
    return solve_simplex_qp(problem, options);
}

/// Weights restricted to the selected assets; zero elsewhere. The objective
/// keeps ε0 so it is directly comparable with solve_full.
inline QpSolution solve_reduced(const TrackingProblem& problem, const SelectionMask& mask,
                                const QpOptions& options = {}) {
    require(static_cast<Eigen::Index>(mask.size()) == problem.size(), "mask length must equal N");
    const auto keep = mask.indices();
    require(!keep.empty(), "cannot solve the reduced problem on an empty selection");
    const TrackingProblem sub = problem.restricted(keep);
    const QpSolution inner = solve_simplex_qp(sub, options);
    QpSolution out = inner;
    out.weights = Eigen::VectorXd::Zero(problem.size());
    for (std::size_t a = 0; a < keep.size(); ++a)
        out.weights(static_cast<Eigen::Index>(keep[a])) = inner.weights(static_cast<Eigen::Index>(a));
    out.objective = problem.tracking_error(out.weights);
    return out;
}

} // namespace cardprune
