#pragma once

// Hybrid loop: a classical optimizer tunes ansatz parameters against the
// simulated energy, then the optimized state is measured N_meas times.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cardprune/common.hpp"
#include "cardprune/optimize.hpp"
#include "cardprune/qubo.hpp"
#include "cardprune/qvsim.hpp"

namespace cardprune {

enum class OptimizerKind { local, dual_anneal };

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::local ? "local" : "dual"; }

struct VariationalConfig {
    AnsatzKind ansatz = AnsatzKind::qaoa;
    int layers = 1;
    OptimizerKind optimizer = OptimizerKind::local;
    int n_meas = 100;
    LocalOptions local{0.01, 2000, 0.5, false};
    int maxiter = 10;
    /// Estimate the energy from n_meas shots instead of the exact expectation.
    bool sampled_objective = false;
    bool trace = false;
};

struct VariationalRun {
    SampleSet samples;
    OptimizeResult optimization;
    /// Exact expectation of the QUBO energy (original units) at the optimum.
    double expectation = 0.0;
    double energy_scale = 1.0;
};

/// Ising energies divided by the largest |J_ij| or |h_i|. Rescaling leaves
/// the ground states unchanged and keeps QAOA angles meaningful whatever the
/// units of the data.
inline double ising_scale(const IsingHamiltonian& ising) {
    double s = 0.0;
    if (ising.n() > 0) s = std::max(ising.j.cwiseAbs().maxCoeff(), ising.h.cwiseAbs().maxCoeff());
    return s > 0.0 ? s : 1.0;
}

/// `excitations` is required for the swap-network ansatz.
inline VariationalRun run_variational(const QuboProblem& qubo, const VariationalConfig& cfg,
                                      std::optional<int> excitations, std::uint64_t seed) {
    require(cfg.n_meas >= 1, "n_meas must be >= 1");
    AnsatzSpec spec;
    spec.kind = cfg.ansatz;
    spec.layers = cfg.layers;
    spec.n = qubo.n();
    if (cfg.ansatz == AnsatzKind::swap_network) {
        require(excitations.has_value(), "swap ansatz needs the target cardinality");
        spec.d = *excitations;
    }
    spec.validate();
    const auto bounds = spec.bounds();

    const IsingHamiltonian ising = to_ising(qubo);
    const double scale = ising_scale(ising);
    std::vector<double> energies = ising.diagonal();
    for (auto& e : energies) {
        e /= scale;
        if (!std::isfinite(e)) throw SolverError("Hamiltonian energies overflow double precision");
    }

    std::uint64_t shot_stream = 0;
    Objective objective = [&](const std::vector<double>& params) {
        const StateVector psi = prepare_state(spec, params, energies);
        if (!cfg.sampled_objective) return expectation(psi, energies);
        const SampleSet shots = sample(psi, cfg.n_meas, derive_seed(seed, 1000 + shot_stream++));
        double e = 0.0;
        for (const auto& r : shots.records) e += r.count * energies[r.index];
        return e / shots.total_shots;
    };

    Rng rng(derive_seed(seed, 0));
    std::vector<double> x0(bounds.size());
    for (std::size_t i = 0; i < bounds.size(); ++i) x0[i] = uniform(rng, bounds[i].first, bounds[i].second);

    VariationalRun run;
    if (cfg.optimizer == OptimizerKind::local) {
        LocalOptions local = cfg.local;
        local.trace = cfg.trace;
        run.optimization = local_minimize(objective, x0, local);
    } else {
        AnnealOptions anneal;
        anneal.maxiter = cfg.maxiter;
        anneal.seed = derive_seed(seed, 1);
        anneal.local = cfg.local;
        anneal.trace = cfg.trace;
        run.optimization = dual_anneal(objective, bounds, anneal, x0);
    }
    const StateVector psi = prepare_state(spec, run.optimization.best_params, energies);
    run.energy_scale = scale;
    run.expectation = expectation(psi, energies) * scale;
    run.samples = sample(psi, cfg.n_meas, derive_seed(seed, 2));
    run.samples.annotate(qubo);
    return run;
}

} // namespace cardprune
