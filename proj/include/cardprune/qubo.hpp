#pragma once

// Binary selection objectives and their Ising form.
//
// Linear terms are folded onto the diagonal (x_i² = x_i), so a QUBO is just
// a symmetric matrix plus a constant: E(x) = x'Qx + offset.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cardprune/common.hpp"
#include "cardprune/mask.hpp"
#include "cardprune/problem.hpp"

namespace cardprune {

enum class ConstraintMode { unconstrained, hard, soft };

inline std::string to_string(ConstraintMode m) {
    switch (m) {
    case ConstraintMode::unconstrained: return "unconstrained";
    case ConstraintMode::hard: return "hard";
    case ConstraintMode::soft: return "soft";
    }
    return "unknown";
}

struct QuboProblem {
    Eigen::MatrixXd q;
    double offset = 0.0;
    ConstraintMode mode = ConstraintMode::unconstrained;
    std::optional<int> cardinality;
    double penalty = 0.0;
    double lambda = 0.0;
    /// Diagonal of D when this is a pruning objective; soft constraints use it.
    std::optional<Eigen::VectorXd> scaling;

    int n() const { return static_cast<int>(q.rows()); }

    void validate() const {
        require(q.rows() == q.cols(), "QUBO matrix must be square");
        require(q.allFinite() && std::isfinite(offset), "QUBO has non-finite entries");
        const double norm = q.size() ? q.cwiseAbs().maxCoeff() : 0.0;
        require((q - q.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(norm, 1e-300), "QUBO matrix must be symmetric");
    }

    double energy(const SelectionMask& x) const {
        require(static_cast<int>(x.size()) == n(), "assignment length must equal QUBO size");
        double e = offset;
        const auto on = x.indices();
        for (auto i : on)
            for (auto j : on) e += q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        return e;
    }

    /// Energy of the bitstring encoded as an integer (variable 0 = MSB).
    double energy(std::uint64_t index) const {
        const int size = n();
        double e = offset;
        for (int i = 0; i < size; ++i) {
            if (!((index >> (size - 1 - i)) & 1U)) continue;
            e += q(i, i);
            for (int j = i + 1; j < size; ++j)
                if ((index >> (size - 1 - j)) & 1U) e += 2.0 * q(i, j);
        }
        return e;
    }
};

/// H(s) = Σ_{i≠j} J_ij s_i s_j + Σ_i h_i s_i + e0 with J symmetric, zero diagonal.
struct IsingHamiltonian {
    Eigen::MatrixXd j;
    Eigen::VectorXd h;
    double e0 = 0.0;

    int n() const { return static_cast<int>(h.size()); }

    double energy(const std::vector<int>& spins) const {
        require(static_cast<int>(spins.size()) == n(), "spin vector length must equal Hamiltonian size");
        double e = e0;
        for (int a = 0; a < n(); ++a) {
            require(spins[a] == 1 || spins[a] == -1, "spins must be +1 or -1");
            e += h(a) * spins[a];
            for (int b = 0; b < n(); ++b) e += j(a, b) * spins[a] * spins[b];
        }
        return e;
    }

    /// Basis state `index` has spin s_i = 1 - 2 x_i, variable 0 = MSB.
    double energy(std::uint64_t index) const {
        const int size = n();
        double e = e0;
        for (int a = 0; a < size; ++a) {
            const double sa = ((index >> (size - 1 - a)) & 1U) ? -1.0 : 1.0;
            e += h(a) * sa;
            for (int b = a + 1; b < size; ++b) {
                const double sb = ((index >> (size - 1 - b)) & 1U) ? -1.0 : 1.0;
                e += 2.0 * j(a, b) * sa * sb;
            }
        }
        return e;
    }

    /// Energies of all 2^n basis states, filled by Gray-code walk.
    std::vector<double> diagonal() const {
        const int size = n();
        require(size <= 30, "Hamiltonian too large to tabulate");
        const std::uint64_t dim = std::uint64_t{1} << size;
        std::vector<double> out(dim);
        // local field f_a = h_a + 2 Σ_b J_ab s_b; flipping a changes E by -2 s_a f_a
        std::vector<double> spin(static_cast<std::size_t>(size), 1.0);
        Eigen::VectorXd field = h + 2.0 * j * Eigen::VectorXd::Ones(size);
        double e = e0 + h.sum() + j.sum();
        std::uint64_t index = 0;
        out[0] = e;
        for (std::uint64_t k = 1; k < dim; ++k) {
            const int bit = __builtin_ctzll(k);
            const int a = size - 1 - bit;
            e += -2.0 * spin[a] * field(a);
            spin[a] = -spin[a];
            for (int b = 0; b < size; ++b)
                if (b != a) field(b) += 4.0 * j(b, a) * spin[a];
            index ^= std::uint64_t{1} << bit;
            out[index] = e;
        }
        return out;
    }
};

/// x'Σx - 2x'g: the selection objective that ignores weights.
inline QuboProblem selection_objective(const TrackingProblem& problem) {
    problem.validate();
    QuboProblem out;
    out.q = problem.sigma;
    out.q.diagonal() -= 2.0 * problem.g;
    return out;
}

/// x'DΣDx - 2x'Dg with D = diag(weights).
inline QuboProblem pruning_objective(const TrackingProblem& problem, const Eigen::VectorXd& weights) {
    require(weights.size() == problem.size(), "weights length must equal N");
    require(weights.allFinite(), "weights must be finite");
    QuboProblem out;
    out.q = weights.asDiagonal() * problem.sigma * weights.asDiagonal();
    out.q = (0.5 * (out.q + out.q.transpose())).eval();
    out.q.diagonal() -= 2.0 * weights.cwiseProduct(problem.g);
    out.scaling = weights;
    return out;
}

/// Penalty that makes every infeasible bitstring worse than the best feasible
/// one: a single bit flip changes the base energy by at most (2n-1)·max|q|.
inline double default_penalty(const QuboProblem& qubo) {
    const double m = qubo.q.size() ? qubo.q.cwiseAbs().maxCoeff() : 0.0;
    return 2.0 * m * qubo.n() + 1e-9;
}

/// Adds P(1'x - d)², keeping the constant P d².
inline QuboProblem add_hard_cardinality(const QuboProblem& qubo, int d, std::optional<double> penalty = std::nullopt) {
    require(d >= 1 && d <= qubo.n(), "cardinality d must lie in [1, n]");
    const double p = penalty.value_or(default_penalty(qubo));
    require(p > 0.0, "penalty must be positive");
    require(std::isfinite(p), "penalty overflows double precision; rescale the QUBO");
    QuboProblem out = qubo;
    out.q.array() += p;
    out.q.diagonal().array() -= 2.0 * p * d;
    out.offset += p * static_cast<double>(d) * static_cast<double>(d);
    out.mode = ConstraintMode::hard;
    out.cardinality = d;
    out.penalty = p;
    return out;
}

/// Chemical-potential term. On a pruning objective adds λ Σ D_ii² x_i
/// (x'D(λ·1)Dx); on a raw QUBO adds λ per selected variable.
inline QuboProblem add_soft_cardinality(const QuboProblem& qubo, double lambda) {
    require(std::isfinite(lambda), "lambda must be finite");
    if (lambda < 0.0) std::cerr << "warning: negative lambda favours larger selections\n";
    QuboProblem out = qubo;
    if (qubo.scaling) {
        out.q.diagonal() += lambda * qubo.scaling->cwiseAbs2();
    } else {
        out.q.diagonal().array() += lambda;
    }
    out.mode = ConstraintMode::soft;
    out.lambda = lambda;
    return out;
}

/// Substitutes x_i = (1 - s_i)/2.
inline IsingHamiltonian to_ising(const QuboProblem& qubo) {
    qubo.validate();
    const int n = qubo.n();
    IsingHamiltonian out;
    out.j = 0.25 * qubo.q;
    out.j.diagonal().setZero();
    out.h = Eigen::VectorXd::Zero(n);
    out.e0 = qubo.offset;
    for (int i = 0; i < n; ++i) {
        out.h(i) -= 0.5 * qubo.q(i, i);
        out.e0 += 0.5 * qubo.q(i, i);
        for (int k = 0; k < n; ++k) {
            if (k == i) continue;
            out.h(i) -= 0.5 * qubo.q(i, k);
            out.e0 += 0.25 * qubo.q(i, k);
        }
    }
    return out;
}

inline std::vector<int> spins_from_mask(const SelectionMask& x) {
    std::vector<int> s(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) s[i] = x[i] ? -1 : 1;
    return s;
}

} // namespace cardprune
