#pragma once

// Selection and pruning drivers.
//
//  * 1-SA picks d assets from x'Σx - 2x'g, ignoring weights, then solves the
//    reduced convex problem on them.
//  * 1-PA first solves the full convex problem, rescales the selection
//    objective by D = diag(w_opt) and picks d assets from that.
//  * k-PA repeats the pruning step on a shrinking universe, re-optimizing the
//    weights in between, with r <- r0 + alpha*r repetitions per step.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cardprune/annealing.hpp"
#include "cardprune/common.hpp"
#include "cardprune/convex_qp.hpp"
#include "cardprune/exhaustive.hpp"
#include "cardprune/mask.hpp"
#include "cardprune/problem.hpp"
#include "cardprune/qubo.hpp"
#include "cardprune/qvsim.hpp"
#include "cardprune/variational.hpp"

namespace cardprune {

enum class BackendKind { brute_force, simulated_annealing, variational };

inline std::string to_string(BackendKind k) {
    switch (k) {
    case BackendKind::brute_force: return "brute";
    case BackendKind::simulated_annealing: return "sa";
    case BackendKind::variational: return "variational";
    }
    return "unknown";
}

/// How the cardinality requirement enters the combinatorial step.
struct ConstraintSpec {
    ConstraintMode mode = ConstraintMode::hard;
    std::optional<double> penalty; ///< hard: override of the default P
    double lambda = 0.0;           ///< soft: target λ* (the last step uses it)
};

struct SolverBackend {
    BackendKind kind = BackendKind::brute_force;
    int reads = 1;
    int sweeps = 1000;
    VariationalConfig variational;
    std::uint64_t seed = 0;

    std::string describe() const {
        if (kind != BackendKind::variational) return to_string(kind);
        return to_string(variational.ansatz) + "/" + to_string(variational.optimizer) + "/p" +
               std::to_string(variational.layers);
    }
};

struct PruneSchedule {
    int n_start = 0;
    int d_target = 1;
    int step_size = 1;
    int r0 = 1;
    double alpha = 0.0;
    ConstraintSpec constraint;

    void validate() const {
        require(d_target >= 1 && d_target <= n_start, "schedule needs 1 <= d_target <= N");
        require(step_size >= 1, "step size must be >= 1");
        require(r0 >= 1, "r0 must be >= 1");
        require(alpha >= 0.0 && std::isfinite(alpha), "alpha must be >= 0");
    }

    int step_count() const { return (n_start - d_target + step_size - 1) / step_size; }

    /// r_k from r <- r0 + alpha*r starting at r = 0.
    std::vector<long> repetitions() const {
        std::vector<long> out;
        long r = 0;
        for (int k = 0; k < step_count(); ++k) {
            r = r0 + std::lround(alpha * static_cast<double>(r));
            out.push_back(r);
        }
        return out;
    }

    /// Basket size after each step: d <- max(d_target, d - s).
    std::vector<int> sizes() const {
        std::vector<int> out;
        int d = n_start;
        while (d > d_target) {
            d = std::max(d_target, d - step_size);
            out.push_back(d);
        }
        return out;
    }
};

struct PruneStep {
    int universe_size = 0;
    std::vector<std::size_t> chosen; ///< indices into the original universe
    double reduced_t_err = 0.0;
    long repetitions = 0;
    long n_evaluations = 0;
    bool repaired = false;
    double step_energy = 0.0;
    double lambda = 0.0;
    double penalty = 0.0;
};

struct PruneResult {
    SelectionMask mask;
    Eigen::VectorXd weights;
    double t_err = 0.0;
    std::vector<PruneStep> steps;
    std::string algorithm;
    std::string backend;
    std::string note;

    long total_evaluations() const {
        long s = 0;
        for (const auto& st : steps) s += st.n_evaluations;
        return s;
    }
    long total_repetitions() const {
        long s = 0;
        for (const auto& st : steps) s += st.repetitions;
        return s;
    }
};

/// Best feasible configuration drawn from a sample set.
struct FeasibleSelection {
    SelectionMask mask;
    double energy = 0.0;
    bool repaired = false;
    /// The sample the repair started from, when repaired.
    std::optional<SelectionMask> closest;
};

namespace detail {

inline SelectionMask greedy_repair(const QuboProblem& qubo, SelectionMask x, int d) {
    while (static_cast<int>(x.popcount()) != d) {
        const bool grow = static_cast<int>(x.popcount()) < d;
        std::size_t pick = 0;
        double pick_energy = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] == grow) continue;
            SelectionMask y = x;
            y.set(i, grow);
            const double e = qubo.energy(y);
            if (e < pick_energy) {
                pick_energy = e;
                pick = i;
            }
        }
        x.set(pick, grow);
    }
    return x;
}

} // namespace detail

/// Lowest-energy sample with popcount d (ties: lowest integer encoding). If
/// no sample is feasible, greedily repairs the sample closest in popcount by
/// adding or removing the bit of lowest marginal energy, and flags it.
inline FeasibleSelection select_best_feasible(const SampleSet& samples, const QuboProblem& qubo, int d) {
    require(!samples.records.empty(), "sample set is empty");
    require(samples.n == qubo.n(), "sample width differs from QUBO size");
    require(d >= 0 && d <= qubo.n(), "cardinality must lie in [0, n]");
    const auto width = static_cast<std::size_t>(samples.n);

    std::optional<FeasibleSelection> best;
    for (const auto& r : samples.records) {
        if (popcount64(r.index) != d) continue;
        const double e = qubo.energy(r.index);
        if (!best || e < best->energy || (e == best->energy && r.index < best->mask.to_index())) {
            best = FeasibleSelection{SelectionMask::from_index(width, r.index), e, false, std::nullopt};
        }
    }
    if (best) return *best;

    const SampleRecord* closest = nullptr;
    int closest_gap = std::numeric_limits<int>::max();
    double closest_energy = 0.0;
    for (const auto& r : samples.records) {
        const int gap = std::abs(popcount64(r.index) - d);
        const double e = qubo.energy(r.index);
        if (gap < closest_gap || (gap == closest_gap && (e < closest_energy ||
                                                         (e == closest_energy && r.index < closest->index)))) {
            closest = &r;
            closest_gap = gap;
            closest_energy = e;
        }
    }
    FeasibleSelection out;
    out.closest = SelectionMask::from_index(width, closest->index);
    out.mask = detail::greedy_repair(qubo, *out.closest, d);
    out.energy = qubo.energy(out.mask);
    out.repaired = true;
    return out;
}

struct SubsetChoice {
    FeasibleSelection selection;
    long n_evaluations = 0;
    double penalty = 0.0;
};

/// One sampling run of a stochastic backend on `base` with the cardinality
/// encoding of `mode`. The swap ansatz ignores `mode`: it never leaves the
/// popcount-d subspace.
struct BackendDraw {
    SampleSet samples;
    long n_evaluations = 0;
    double penalty = 0.0;
};

inline BackendDraw draw_samples(const QuboProblem& base, int d, const SolverBackend& backend, ConstraintMode mode,
                                std::optional<double> penalty, double lambda, std::uint64_t seed) {
    require(backend.kind != BackendKind::brute_force, "brute force does not sample");
    const bool subspace_ansatz =
        backend.kind == BackendKind::variational && backend.variational.ansatz == AnsatzKind::swap_network;
    BackendDraw out;
    QuboProblem qubo = base;
    if (!subspace_ansatz) {
        if (mode == ConstraintMode::hard) {
            qubo = add_hard_cardinality(base, d, penalty);
            out.penalty = qubo.penalty;
        } else if (mode == ConstraintMode::soft) {
            qubo = add_soft_cardinality(base, lambda);
        }
    }
    if (backend.kind == BackendKind::simulated_annealing) {
        out.samples = simulated_annealing_qubo(qubo, backend.reads, backend.sweeps, seed);
        out.n_evaluations = backend.reads;
    } else {
        VariationalRun run = run_variational(qubo, backend.variational, d, seed);
        out.n_evaluations = run.optimization.n_evaluations;
        out.samples = std::move(run.samples);
    }
    return out;
}

/// Runs the backend `repetitions` times on `base` and keeps the best feasible
/// configuration, comparing energies of `base` itself (no penalty or λ).
/// Unrepaired answers beat repaired ones.
inline SubsetChoice choose_subset(const QuboProblem& base, int d, const SolverBackend& backend,
                                  ConstraintMode mode, std::optional<double> penalty, double lambda,
                                  long repetitions, std::uint64_t seed) {
    require(repetitions >= 1, "need at least one repetition");
    SubsetChoice out;
    if (backend.kind == BackendKind::brute_force) {
        const QuboOptimum opt = brute_force_qubo(base, d);
        out.selection = FeasibleSelection{opt.mask, opt.energy, false, std::nullopt};
        out.n_evaluations = static_cast<long>(opt.evaluated);
        return out;
    }
    std::optional<FeasibleSelection> best;
    for (long rep = 0; rep < repetitions; ++rep) {
        BackendDraw draw =
            draw_samples(base, d, backend, mode, penalty, lambda, derive_seed(seed, static_cast<std::uint64_t>(rep)));
        out.n_evaluations += draw.n_evaluations;
        out.penalty = draw.penalty;
        FeasibleSelection candidate = select_best_feasible(draw.samples, base, d);
        const bool better = !best || (best->repaired && !candidate.repaired) ||
                            (best->repaired == candidate.repaired &&
                             (candidate.energy < best->energy ||
                              (candidate.energy == best->energy && candidate.mask.to_index() < best->mask.to_index())));
        if (better) best = std::move(candidate);
    }
    out.selection = std::move(*best);
    return out;
}

namespace detail {

inline PruneResult full_solution(const TrackingProblem& problem, const std::string& algorithm,
                                 const SolverBackend& backend) {
    const QpSolution sol = solve_full(problem);
    PruneResult out;
    out.mask = SelectionMask::all(static_cast<std::size_t>(problem.size()));
    out.weights = sol.weights;
    out.t_err = sol.objective;
    out.algorithm = algorithm;
    out.backend = backend.describe();
    return out;
}

inline constexpr const char* kClampNote =
    "basket size per step follows d <- max(d_target, d - s)";

} // namespace detail

/// Single-step selection: choose on x'Σx - 2x'g, then weight the winners.
inline PruneResult solve_1sa(const TrackingProblem& problem, int d, const SolverBackend& backend,
                             const ConstraintSpec& constraint = {}, long repetitions = 1) {
    problem.validate();
    const int n = static_cast<int>(problem.size());
    require(d >= 1 && d <= n, "basket size d must lie in [1, N]");
    if (d == n) return detail::full_solution(problem, "1-SA", backend);

    const QuboProblem base = selection_objective(problem);
    const SubsetChoice choice = choose_subset(base, d, backend, constraint.mode, constraint.penalty, constraint.lambda,
                                              repetitions, derive_seed(backend.seed, 0));
    const QpSolution sol = solve_reduced(problem, choice.selection.mask);

    PruneResult out;
    out.mask = choice.selection.mask;
    out.weights = sol.weights;
    out.t_err = sol.objective;
    out.algorithm = "1-SA";
    out.backend = backend.describe();
    PruneStep step;
    step.universe_size = n;
    step.chosen = out.mask.indices();
    step.reduced_t_err = sol.objective;
    step.repetitions = repetitions;
    step.n_evaluations = choice.n_evaluations;
    step.repaired = choice.selection.repaired;
    step.step_energy = choice.selection.energy;
    step.lambda = constraint.mode == ConstraintMode::soft ? constraint.lambda : 0.0;
    step.penalty = choice.penalty;
    out.steps.push_back(step);
    return out;
}

/// k-step pruning. Each step builds x'DΣDx - 2x'Dg over the surviving
/// universe with D from the latest convex weights, keeps the best feasible
/// answer out of r repetitions, and re-solves the convex problem on it.
inline PruneResult solve_kpa(const TrackingProblem& problem, const PruneSchedule& schedule,
                             const SolverBackend& backend) {
    problem.validate();
    schedule.validate();
    require(schedule.n_start == static_cast<int>(problem.size()), "schedule N must equal the problem size");
    if (schedule.d_target == schedule.n_start) {
        // nothing to prune: a single convex pass over the whole universe
        PruneResult out = detail::full_solution(problem, "0-PA", backend);
        out.note = detail::kClampNote;
        return out;
    }

    const auto reps = schedule.repetitions();
    const auto sizes = schedule.sizes();
    const int k_steps = static_cast<int>(sizes.size());

    std::vector<std::size_t> universe(static_cast<std::size_t>(problem.size()));
    for (std::size_t i = 0; i < universe.size(); ++i) universe[i] = i;
    Eigen::VectorXd weights = solve_full(problem).weights;

    PruneResult out;
    out.algorithm = std::to_string(k_steps) + "-PA";
    out.backend = backend.describe();
    out.note = detail::kClampNote;
    QpSolution last;
    for (int step = 0; step < k_steps; ++step) {
        const int d = sizes[static_cast<std::size_t>(step)];
        const TrackingProblem sub = problem.restricted(universe);
        Eigen::VectorXd sub_weights(static_cast<Eigen::Index>(universe.size()));
        for (std::size_t a = 0; a < universe.size(); ++a)
            sub_weights(static_cast<Eigen::Index>(a)) = weights(static_cast<Eigen::Index>(universe[a]));
        const QuboProblem base = pruning_objective(sub, sub_weights);

        // soft mode: λ decreases geometrically from 2λ* to λ* over the steps
        double lambda = schedule.constraint.lambda;
        if (schedule.constraint.mode == ConstraintMode::soft && k_steps > 1)
            lambda *= std::pow(2.0, static_cast<double>(k_steps - 1 - step) / (k_steps - 1));

        SubsetChoice choice;
        try {
            choice = choose_subset(base, d, backend, schedule.constraint.mode, schedule.constraint.penalty, lambda,
                                   reps[static_cast<std::size_t>(step)],
                                   derive_seed(backend.seed, static_cast<std::uint64_t>(step)));
        } catch (const SolverError& e) {
            throw SolverError("pruning step " + std::to_string(step + 1) + " (universe " +
                              std::to_string(universe.size()) + " -> " + std::to_string(d) + "): " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError("pruning step " + std::to_string(step + 1) + " (universe " +
                                  std::to_string(universe.size()) + " -> " + std::to_string(d) + "): " + e.what());
        }

        std::vector<std::size_t> chosen;
        for (auto a : choice.selection.mask.indices()) chosen.push_back(universe[a]);
        last = solve_reduced(problem, SelectionMask::from_indices(static_cast<std::size_t>(problem.size()), chosen));
        weights = last.weights;

        PruneStep record;
        record.universe_size = static_cast<int>(universe.size());
        record.chosen = chosen;
        record.reduced_t_err = last.objective;
        record.repetitions = reps[static_cast<std::size_t>(step)];
        record.n_evaluations = choice.n_evaluations;
        record.repaired = choice.selection.repaired;
        record.step_energy = choice.selection.energy;
        record.lambda = schedule.constraint.mode == ConstraintMode::soft ? lambda : 0.0;
        record.penalty = choice.penalty;
        out.steps.push_back(std::move(record));
        universe = std::move(chosen);
    }
    out.mask = SelectionMask::from_indices(static_cast<std::size_t>(problem.size()), universe);
    out.weights = last.weights;
    out.t_err = last.objective;
    return out;
}

/// Single-step pruning: k-PA with one step of size N - d.
inline PruneResult solve_1pa(const TrackingProblem& problem, int d, const SolverBackend& backend,
                             const ConstraintSpec& constraint = {}, long repetitions = 1) {
    problem.validate();
    const int n = static_cast<int>(problem.size());
    require(d >= 1 && d <= n, "basket size d must lie in [1, N]");
    if (d == n) return detail::full_solution(problem, "1-PA", backend);
    PruneSchedule schedule;
    schedule.n_start = n;
    schedule.d_target = d;
    schedule.step_size = n - d;
    schedule.r0 = static_cast<int>(repetitions);
    schedule.alpha = 0.0;
    schedule.constraint = constraint;
    PruneResult out = solve_kpa(problem, schedule, backend);
    out.algorithm = "1-PA";
    out.note.clear();
    return out;
}

// ---------------------------------------------------------------------------
// Chemical-potential calibration

struct LambdaPoint {
    double lambda = 0.0;
    double mean_d = 0.0;
};

struct LambdaCalibration {
    double lambda_star = 0.0;
    double mean_d = 0.0;
    std::vector<LambdaPoint> curve;     ///< grid evaluations, ascending λ
    std::vector<LambdaPoint> bisection; ///< refinement evaluations in order
    bool non_monotone = false;
    bool reached = false;
};

struct CalibrationOptions {
    int grid_points = 10;
    double grid_span = 1e-3; ///< lowest grid λ as a fraction of the highest
    int repeats = 3;         ///< variational runs averaged per λ
    int bisection_steps = 6;
    double band = 0.5;
};

/// λ above which adding any single asset raises the energy regardless of
/// the rest of the basket, so the empty basket is optimal.
inline double lambda_upper_bound(const TrackingProblem& problem, const Eigen::VectorXd& weights) {
    double bound = 0.0;
    for (Eigen::Index i = 0; i < problem.size(); ++i) {
        const double w = weights(i);
        if (w == 0.0) continue;
        double coupling = 0.0;
        for (Eigen::Index j = 0; j < problem.size(); ++j)
            if (j != i) coupling += std::abs(w * weights(j) * problem.sigma(i, j));
        const double gain = 2.0 * std::abs(w * problem.g(i)) + 2.0 * coupling - w * w * problem.sigma(i, i);
        bound = std::max(bound, gain / (w * w));
    }
    return bound > 0.0 ? 2.0 * bound : 1.0;
}

/// Mean sampled basket size of the optimized variational state at each λ on
/// a geometric grid, then bisection in log λ toward d_target.
inline LambdaCalibration calibrate_lambda(const TrackingProblem& problem, const Eigen::VectorXd& weights,
                                          int d_target, const VariationalConfig& variational, std::uint64_t seed,
                                          const CalibrationOptions& options = {}) {
    problem.validate();
    const int n = static_cast<int>(problem.size());
    require(d_target >= 1 && d_target <= n, "d_target must lie in [1, N]");
    require(variational.ansatz != AnsatzKind::swap_network,
            "the swap ansatz fixes the basket size; calibrate with vqe or qaoa");
    require(options.grid_points >= 2 && options.repeats >= 1, "need >= 2 grid points and >= 1 repeat");

    const QuboProblem base = pruning_objective(problem, weights);
    std::uint64_t stream = 0;
    auto mean_size = [&](double lambda) {
        const QuboProblem qubo = add_soft_cardinality(base, lambda);
        double total = 0.0;
        for (int r = 0; r < options.repeats; ++r)
            total += run_variational(qubo, variational, std::nullopt, derive_seed(seed, stream++)).samples.mean_popcount();
        return total / options.repeats;
    };

    LambdaCalibration out;
    const double hi = lambda_upper_bound(problem, weights);
    const double lo = hi * options.grid_span;
    for (int k = 0; k < options.grid_points; ++k) {
        const double lambda = lo * std::pow(hi / lo, static_cast<double>(k) / (options.grid_points - 1));
        out.curve.push_back({lambda, mean_size(lambda)});
    }
    for (std::size_t k = 1; k < out.curve.size(); ++k)
        if (out.curve[k].mean_d > out.curve[k - 1].mean_d + options.band) out.non_monotone = true;

    const double target = d_target;
    LambdaPoint best = out.curve.front();
    for (const auto& p : out.curve)
        if (std::abs(p.mean_d - target) < std::abs(best.mean_d - target)) best = p;

    // bracket: first adjacent pair straddling the target
    std::optional<std::pair<LambdaPoint, LambdaPoint>> bracket;
    for (std::size_t k = 1; k < out.curve.size(); ++k)
        if (out.curve[k - 1].mean_d >= target && out.curve[k].mean_d <= target) {
            bracket = std::make_pair(out.curve[k - 1], out.curve[k]);
            break;
        }
    if (bracket && std::abs(best.mean_d - target) > options.band * 0.5) {
        auto [left, right] = *bracket;
        for (int it = 0; it < options.bisection_steps; ++it) {
            const double mid = std::sqrt(left.lambda * right.lambda);
            const LambdaPoint p{mid, mean_size(mid)};
            out.bisection.push_back(p);
            if (std::abs(p.mean_d - target) < std::abs(best.mean_d - target)) best = p;
            if (std::abs(p.mean_d - target) <= options.band * 0.5) break;
            if (p.mean_d >= target) left = p;
            else right = p;
        }
    }
    out.lambda_star = best.lambda;
    out.mean_d = best.mean_d;
    out.reached = std::abs(best.mean_d - target) <= options.band;
    return out;
}

} // namespace cardprune
