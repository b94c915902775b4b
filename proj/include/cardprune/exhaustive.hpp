#pragma once

// Exhaustive baselines. These define the optimum every heuristic is scored
// against, so ties are broken deterministically.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "cardprune/common.hpp"
#include "cardprune/convex_qp.hpp"
#include "cardprune/mask.hpp"
#include "cardprune/qubo.hpp"

namespace cardprune {

inline constexpr int kMaxBruteForceBits = 26;
inline constexpr double kMaxBruteForceSupports = 1e7;

struct QuboOptimum {
    SelectionMask mask;
    double energy = 0.0;
    std::uint64_t evaluated = 0;
};

/// Exact argmin of x'Qx + offset, optionally over popcount(x) == d only.
/// Energies within rounding of each other count as ties; the lowest integer
/// encoding wins.
inline QuboOptimum brute_force_qubo(const QuboProblem& qubo, std::optional<int> cardinality = std::nullopt) {
    qubo.validate();
    const int n = qubo.n();
    require(n >= 1, "empty QUBO");
    if (n > kMaxBruteForceBits)
        throw ValidationError("brute force limited to " + std::to_string(kMaxBruteForceBits) +
                              " variables; use simulated annealing or a variational backend");
    if (cardinality) require(*cardinality >= 0 && *cardinality <= n, "cardinality must lie in [0, n]");

    const double tie = 1e-12 * (qubo.q.cwiseAbs().sum() + std::abs(qubo.offset) + 1e-300);
    const std::uint64_t dim = std::uint64_t{1} << n;
    // Gray-code walk with field_i = q_ii + 2 Σ_{j≠i} q_ij x_j
    std::vector<std::uint8_t> x(static_cast<std::size_t>(n), 0);
    Eigen::VectorXd field = qubo.q.diagonal();
    double energy = qubo.offset;
    int ones = 0;
    std::uint64_t index = 0;
    double best = std::numeric_limits<double>::infinity();
    std::uint64_t best_index = 0;
    std::uint64_t evaluated = 0;
    auto consider = [&] {
        if (cardinality && ones != *cardinality) return;
        ++evaluated;
        if (energy < best - tie || (energy <= best + tie && index < best_index)) {
            best = energy;
            best_index = index;
        }
    };
    consider();
    for (std::uint64_t k = 1; k < dim; ++k) {
        const int bit = __builtin_ctzll(k);
        const int i = n - 1 - bit;
        if (x[i]) {
            energy -= field(i);
            x[i] = 0;
            --ones;
            for (int j = 0; j < n; ++j)
                if (j != i) field(j) -= 2.0 * qubo.q(j, i);
        } else {
            energy += field(i);
            x[i] = 1;
            ++ones;
            for (int j = 0; j < n; ++j)
                if (j != i) field(j) += 2.0 * qubo.q(j, i);
        }
        index ^= std::uint64_t{1} << bit;
        consider();
    }
    QuboOptimum out;
    out.mask = SelectionMask::from_index(static_cast<std::size_t>(n), best_index);
    out.energy = qubo.energy(out.mask);
    out.evaluated = evaluated;
    return out;
}

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return std::round(r);
}

struct TrackingOptimum {
    SelectionMask mask;
    Eigen::VectorXd weights;
    double t_err = 0.0;
};

/// Best size-d basket by solving the reduced convex problem on every support.
inline TrackingOptimum brute_force_tracking(const TrackingProblem& problem, int d, const QpOptions& options = {}) {
    problem.validate();
    const int n = static_cast<int>(problem.size());
    require(d >= 1 && d <= n, "basket size d must lie in [1, N]");
    if (binomial(n, d) > kMaxBruteForceSupports)
        throw ValidationError("C(N, d) exceeds 1e7 supports; exhaustive tracking search refused");

    TrackingOptimum best;
    best.t_err = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> combo(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) combo[static_cast<std::size_t>(i)] = static_cast<std::size_t>(i);
    const double tie = 1e-12 * problem.scale();
    for (;;) {
        const SelectionMask mask = SelectionMask::from_indices(static_cast<std::size_t>(n), combo);
        const QpSolution sol = solve_reduced(problem, mask, options);
        if (sol.objective < best.t_err - tie) {
            best.t_err = sol.objective;
            best.weights = sol.weights;
            best.mask = mask;
        }
        // next combination in lexicographic order
        int pos = d - 1;
        while (pos >= 0 && combo[static_cast<std::size_t>(pos)] == static_cast<std::size_t>(n - d + pos)) --pos;
        if (pos < 0) break;
        ++combo[static_cast<std::size_t>(pos)];
        for (int k = pos + 1; k < d; ++k) combo[static_cast<std::size_t>(k)] = combo[static_cast<std::size_t>(k - 1)] + 1;
    }
    return best;
}

} // namespace cardprune
