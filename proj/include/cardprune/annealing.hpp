#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "cardprune/common.hpp"
#include "cardprune/qubo.hpp"
#include "cardprune/qvsim.hpp"

namespace cardprune {

struct TemperatureRange {
    double hot = 1.0;
    double cold = 1e-3;
};

/// Hot end accepts a typical uphill move half the time; cold end accepts the
/// smallest observed uphill move with probability 1e-3. Both are measured on
/// a random walk of single-bit flips.
inline TemperatureRange estimate_temperatures(const QuboProblem& qubo, std::uint64_t seed, int walk_length = 256) {
    const int n = qubo.n();
    Rng rng(seed);
    std::vector<std::uint8_t> x(static_cast<std::size_t>(n));
    for (auto& b : x) b = uniform01(rng) < 0.5;
    std::vector<double> uphill;
    for (int step = 0; step < walk_length; ++step) {
        const int i = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n)));
        double field = qubo.q(i, i);
        for (int j = 0; j < n; ++j)
            if (j != i && x[j]) field += 2.0 * qubo.q(i, j);
        const double delta = x[i] ? -field : field;
        if (delta > 0.0) uphill.push_back(delta);
        x[i] ^= 1U;
    }
    TemperatureRange t;
    if (uphill.empty()) return t;
    std::sort(uphill.begin(), uphill.end());
    t.hot = uphill[uphill.size() / 2] / std::log(2.0);
    t.cold = std::min(uphill.front() / std::log(1000.0), t.hot);
    return t;
}

/// Single-bit-flip Metropolis annealing with a geometric schedule. Each read
/// restarts from a uniformly random bitstring and contributes its final
/// state to the returned sample set.
inline SampleSet simulated_annealing_qubo(const QuboProblem& qubo, int reads, int sweeps, std::uint64_t seed) {
    qubo.validate();
    require(reads >= 1, "reads must be >= 1");
    require(sweeps >= 0, "sweeps must be >= 0");
    const int n = qubo.n();
    require(n >= 1 && n <= 64, "annealer supports 1..64 variables");
    const TemperatureRange temps = estimate_temperatures(qubo, derive_seed(seed, 0));

    std::map<std::uint64_t, int> counts;
    std::vector<std::uint8_t> x(static_cast<std::size_t>(n));
    std::vector<double> field(static_cast<std::size_t>(n));
    for (int read = 0; read < reads; ++read) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(read) + 1));
        for (auto& b : x) b = uniform01(rng) < 0.5;
        // field_i = Σ_{j≠i} q_ij x_j
        for (int i = 0; i < n; ++i) {
            double f = 0.0;
            for (int j = 0; j < n; ++j)
                if (j != i && x[j]) f += qubo.q(i, j);
            field[i] = f;
        }
        for (int s = 0; s < sweeps; ++s) {
            const double frac = sweeps > 1 ? static_cast<double>(s) / (sweeps - 1) : 1.0;
            const double temperature = temps.hot * std::pow(temps.cold / temps.hot, frac);
            for (int i = 0; i < n; ++i) {
                const double gain = qubo.q(i, i) + 2.0 * field[i];
                const double delta = x[i] ? -gain : gain;
                if (delta <= 0.0 || uniform01(rng) < std::exp(-delta / temperature)) {
                    x[i] ^= 1U;
                    const double change = x[i] ? 1.0 : -1.0;
                    for (int j = 0; j < n; ++j)
                        if (j != i) field[j] += change * qubo.q(j, i);
                }
            }
        }
        std::uint64_t index = 0;
        for (int i = 0; i < n; ++i) index = (index << 1) | x[i];
        ++counts[index];
    }
    SampleSet out = SampleSet::from_counts(n, counts);
    out.annotate(qubo);
    return out;
}

} // namespace cardprune
