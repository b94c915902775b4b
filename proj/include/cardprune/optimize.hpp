#pragma once

// Derivative-free minimizers for the variational parameter loop.
//
// local_minimize is a linear-model trust-region method in the style of
// Powell's COBYLA (unconstrained case): an (n+1)-point simplex defines a
// linear interpolant, steps go to the trust-region boundary along the model
// gradient, and the radius only ever shrinks, down to `tol`.
//
// dual_anneal is generalized simulated annealing (Tsallis visiting
// distribution, generalized Metropolis acceptance) over a box, followed by a
// local_minimize polish of the incumbent.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "cardprune/common.hpp"

namespace cardprune {

using Objective = std::function<double(const std::vector<double>&)>;

struct OptimizeResult {
    std::vector<double> best_params;
    double best_value = std::numeric_limits<double>::infinity();
    int n_evaluations = 0;
    bool converged = false;
    /// (evaluation index, best value so far), when tracing is enabled.
    std::vector<std::pair<int, double>> trace;
};

namespace detail {

class CountingObjective {
public:
    CountingObjective(const Objective& f, OptimizeResult& result, bool trace)
        : f_(f), result_(result), trace_(trace) {}

    double operator()(const std::vector<double>& x) {
        const double v = f_(x);
        ++result_.n_evaluations;
        if (std::isfinite(v) && v < result_.best_value) {
            result_.best_value = v;
            result_.best_params = x;
        }
        if (trace_) result_.trace.emplace_back(result_.n_evaluations, result_.best_value);
        return v;
    }

    int count() const { return result_.n_evaluations; }

private:
    const Objective& f_;
    OptimizeResult& result_;
    bool trace_;
};

inline double finite_or_max(double v) {
    return std::isfinite(v) ? v : std::numeric_limits<double>::max();
}

} // namespace detail

struct LocalOptions {
    double tol = 0.01;          ///< final trust-region radius
    int max_evaluations = 2000; ///< cap on objective calls
    double rho_begin = 0.5;     ///< initial trust-region radius
    bool trace = false;
};

inline OptimizeResult local_minimize(const Objective& objective, const std::vector<double>& x0,
                                     const LocalOptions& options = {}) {
    const auto n = static_cast<Eigen::Index>(x0.size());
    require(n >= 1, "local_minimize needs at least one parameter");
    require(options.tol > 0.0, "tol must be positive");
    require(options.max_evaluations >= 1, "evaluation cap must be positive");
    for (double v : x0) require(std::isfinite(v), "x0 must be finite");

    OptimizeResult result;
    detail::CountingObjective f(objective, result, options.trace);
    const double f0 = f(x0);
    require(std::isfinite(f0), "objective is not finite at x0");

    double rho = std::max(options.rho_begin, options.tol);
    const double rho_end = options.tol;
    const double rho_cap = rho;

    auto to_vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };

    std::vector<Eigen::VectorXd> vertex(static_cast<std::size_t>(n + 1));
    std::vector<double> value(static_cast<std::size_t>(n + 1));
    vertex[0] = Eigen::Map<const Eigen::VectorXd>(x0.data(), n);
    value[0] = f0;
    for (Eigen::Index i = 0; i < n && f.count() < options.max_evaluations; ++i) {
        vertex[static_cast<std::size_t>(i + 1)] = vertex[0];
        vertex[static_cast<std::size_t>(i + 1)](i) += rho;
        value[static_cast<std::size_t>(i + 1)] = detail::finite_or_max(f(to_vec(vertex[static_cast<std::size_t>(i + 1)])));
    }
    if (f.count() < n + 1) return result;

    bool poor_last_step = false;
    while (f.count() < options.max_evaluations) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < value.size(); ++j)
            if (value[j] < value[best]) best = j;

        // rows: displacement of every other vertex from the best one
        std::vector<std::size_t> others;
        for (std::size_t j = 0; j < vertex.size(); ++j)
            if (j != best) others.push_back(j);
        Eigen::MatrixXd disp(n, n);
        Eigen::VectorXd diff(n);
        for (Eigen::Index r = 0; r < n; ++r) {
            disp.row(r) = (vertex[others[r]] - vertex[best]).transpose();
            diff(r) = value[others[r]] - value[best];
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(disp);
        const bool invertible = lu.isInvertible();
        Eigen::MatrixXd inv = invertible ? Eigen::MatrixXd(lu.inverse()) : Eigen::MatrixXd::Zero(n, n);

        // geometry: vertex distance and distance to the opposite face
        Eigen::Index worst = -1;
        double worst_dist = 2.1 * rho;
        for (Eigen::Index r = 0; r < n; ++r) {
            const double dist = disp.row(r).norm();
            if (dist > worst_dist) {
                worst_dist = dist;
                worst = r;
            }
        }
        if (worst < 0) {
            double worst_sigma = 0.25 * rho;
            for (Eigen::Index r = 0; r < n; ++r) {
                const double col = invertible ? inv.col(r).norm() : std::numeric_limits<double>::infinity();
                const double sigma = col > 0.0 ? 1.0 / col : std::numeric_limits<double>::infinity();
                if (sigma < worst_sigma) {
                    worst_sigma = sigma;
                    worst = r;
                }
            }
        }
        const bool acceptable = worst < 0 && invertible;
        const Eigen::VectorXd grad = invertible ? Eigen::VectorXd(inv * diff) : Eigen::VectorXd::Zero(n);

        if (!acceptable && (poor_last_step || !invertible)) {
            // replace the offending vertex by one at distance rho/2 along the
            // normal of its opposite face
            if (worst < 0) worst = 0;
            Eigen::VectorXd dir;
            if (invertible) {
                dir = inv.col(worst);
            } else {
                dir = Eigen::VectorXd::Zero(n);
                dir(worst % n) = 1.0;
            }
            dir.normalize();
            if (grad.dot(dir) > 0.0) dir = -dir;
            const Eigen::VectorXd x = vertex[best] + 0.5 * rho * dir;
            const std::size_t slot = others[static_cast<std::size_t>(worst)];
            vertex[slot] = x;
            value[slot] = detail::finite_or_max(f(to_vec(x)));
            poor_last_step = false;
            continue;
        }

        const double gnorm = grad.norm();
        if (!(gnorm > 0.0)) {
            if (rho <= rho_end) {
                result.converged = true;
                break;
            }
            rho = std::max(0.5 * rho, rho_end);
            poor_last_step = true;
            continue;
        }

        const Eigen::VectorXd step = -rho * grad / gnorm;
        const Eigen::VectorXd x = vertex[best] + step;
        const double fx = detail::finite_or_max(f(to_vec(x)));
        const double predicted = rho * gnorm;
        const double ratio = (value[best] - fx) / predicted;

        // barycentric weight of each vertex in the step; a large |c_j| keeps
        // the simplex well-conditioned when vertex j is replaced
        Eigen::VectorXd c = invertible ? Eigen::VectorXd(inv.transpose() * step) : Eigen::VectorXd::Zero(n);
        Eigen::Index replace = 0;
        double best_score = -1.0;
        for (Eigen::Index r = 0; r < n; ++r) {
            const double dist = (vertex[others[r]] - x).norm() / rho;
            const double score = std::abs(c(r)) * std::max(1.0, dist * dist);
            if (score > best_score) {
                best_score = score;
                replace = r;
            }
        }
        vertex[others[static_cast<std::size_t>(replace)]] = x;
        value[others[static_cast<std::size_t>(replace)]] = fx;

        poor_last_step = ratio <= 0.1;
        // a step that did better than the linear model predicts widens the
        // region again, up to the starting radius
        if (ratio >= 0.75 && acceptable) rho = std::min(2.0 * rho, rho_cap);
        if (poor_last_step && acceptable) {
            if (rho <= rho_end) {
                result.converged = true;
                break;
            }
            rho = 0.5 * rho;
            if (rho <= 1.5 * rho_end) rho = rho_end;
        }
    }
    return result;
}

struct AnnealOptions {
    int maxiter = 10;
    std::uint64_t seed = 0;
    double initial_temp = 5230.0;
    double visit = 2.62;   ///< q_v, visiting-distribution shape
    double accept = -5.0;  ///< q_a, acceptance shape
    double restart_temp_ratio = 2e-5;
    bool polish = true;
    LocalOptions local{0.001, 2000, 0.25, false};
    bool trace = false;
};

namespace detail {

// Tsallis-distributed step, one draw per dimension.
class VisitingDistribution {
public:
    explicit VisitingDistribution(double qv) : qv_(qv) {
        factor2_ = std::exp((4.0 - qv) * std::log(qv - 1.0));
        factor3_ = std::exp((2.0 - qv) * std::log(2.0) / (qv - 1.0));
        factor4p_ = std::sqrt(std::numbers::pi) * factor2_ / (factor3_ * (3.0 - qv));
        const double factor5 = 1.0 / (qv - 1.0) - 0.5;
        const double d1 = 2.0 - factor5;
        factor6_ = std::numbers::pi * (1.0 - factor5) / std::sin(std::numbers::pi * (1.0 - factor5)) /
                   std::exp(std::lgamma(d1));
    }

    double draw(double temperature, Rng& rng) const {
        const double factor1 = std::exp(std::log(temperature) / (qv_ - 1.0));
        const double factor4 = factor4p_ * factor1;
        const double sigmax = std::exp(-(qv_ - 1.0) * std::log(factor6_ / factor4) / (3.0 - qv_));
        const double x = sigmax * standard_normal(rng);
        const double y = std::abs(standard_normal(rng));
        const double den = std::exp((qv_ - 1.0) * std::log(y) / (3.0 - qv_));
        double v = x / den;
        constexpr double tail = 1e8;
        if (!(v <= tail)) v = tail * uniform01(rng);
        else if (v < -tail) v = -tail * uniform01(rng);
        return v;
    }

private:
    double qv_, factor2_, factor3_, factor4p_, factor6_;
};

inline double wrap_into(double v, double lo, double hi) {
    const double range = hi - lo;
    const double a = std::fmod(v - lo, range) + range;
    return std::fmod(a, range) + lo;
}

} // namespace detail

inline OptimizeResult dual_anneal(const Objective& objective, const std::vector<std::pair<double, double>>& bounds,
                                  const AnnealOptions& options = {}, const std::vector<double>& x0 = {}) {
    const std::size_t n = bounds.size();
    require(n >= 1, "dual_anneal needs at least one dimension");
    for (const auto& [lo, hi] : bounds)
        require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, "each bound must be finite with lo < hi");
    require(options.maxiter >= 1, "maxiter must be positive");
    require(x0.empty() || x0.size() == n, "x0 length must match bounds");

    OptimizeResult result;
    detail::CountingObjective f(objective, result, options.trace);
    Rng rng(options.seed);
    const detail::VisitingDistribution visiting(options.visit);

    auto random_point = [&] {
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = uniform(rng, bounds[i].first, bounds[i].second);
        return x;
    };

    std::vector<double> current = x0.empty() ? random_point() : x0;
    for (std::size_t i = 0; i < n; ++i)
        require(current[i] >= bounds[i].first && current[i] <= bounds[i].second, "x0 must lie within bounds");
    double current_energy = f(current);
    for (int tries = 0; !std::isfinite(current_energy) && tries < 1000; ++tries) {
        current = random_point();
        current_energy = f(current);
    }
    if (!std::isfinite(current_energy)) throw SolverError("dual_anneal found no finite starting point");

    const double t1 = std::exp((options.visit - 1.0) * std::log(2.0)) - 1.0;
    const double restart_temp = options.initial_temp * options.restart_temp_ratio;
    int iteration = 0;
    while (iteration < options.maxiter) {
        for (int i = 0; i < options.maxiter && iteration < options.maxiter; ++i) {
            const double s = static_cast<double>(i) + 2.0;
            const double t2 = std::exp((options.visit - 1.0) * std::log(s)) - 1.0;
            const double temperature = options.initial_temp * t1 / t2;
            if (temperature < restart_temp) {
                current = random_point();
                current_energy = detail::finite_or_max(f(current));
                break;
            }
            const double temperature_step = temperature / static_cast<double>(i + 1);
            for (std::size_t j = 0; j < 2 * n; ++j) {
                std::vector<double> candidate = current;
                if (j < n) {
                    for (std::size_t k = 0; k < n; ++k)
                        candidate[k] = detail::wrap_into(current[k] + visiting.draw(temperature, rng), bounds[k].first,
                                                         bounds[k].second);
                } else {
                    const std::size_t k = j - n;
                    candidate[k] = detail::wrap_into(current[k] + visiting.draw(temperature, rng), bounds[k].first,
                                                     bounds[k].second);
                }
                const double e = detail::finite_or_max(f(candidate));
                if (e < current_energy) {
                    current = std::move(candidate);
                    current_energy = e;
                } else {
                    const double r = uniform01(rng);
                    const double pqv_temp =
                        1.0 - (1.0 - options.accept) * (e - current_energy) / temperature_step;
                    const double pqv = pqv_temp <= 0.0 ? 0.0 : std::exp(std::log(pqv_temp) / (1.0 - options.accept));
                    if (r <= pqv) {
                        current = std::move(candidate);
                        current_energy = e;
                    }
                }
            }
            ++iteration;
        }
    }

    if (options.polish) {
        const std::vector<double> start = result.best_params;
        // the polish may step outside the box; clamp before evaluating
        Objective boxed = [&](const std::vector<double>& x) {
            std::vector<double> y = x;
            for (std::size_t i = 0; i < n; ++i) y[i] = std::clamp(y[i], bounds[i].first, bounds[i].second);
            return f(y);
        };
        LocalOptions local = options.local;
        local.trace = false;
        local_minimize(boxed, start, local);
    }
    result.converged = true;
    return result;
}

} // namespace cardprune
