#pragma once

// Dense statevector simulation of the three variational circuits used for
// the selection step, plus projective sampling in the computational basis.
//
// Qubit q (0-based) is bit (n-1-q) of the basis index, so qubit 0 is the most
// significant bit and basis index == SelectionMask::to_index().

#include <algorithm>
#include <cmath>
#include <utility>
#include <complex>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "cardprune/common.hpp"
#include "cardprune/mask.hpp"
#include "cardprune/qubo.hpp"

namespace cardprune {

using Complex = std::complex<double>;

inline constexpr int kMaxQubits = 24;

class StateVector {
public:
    /// |0...0>
    explicit StateVector(int n) : n_(n) {
        require(n >= 1 && n <= kMaxQubits, "qubit count must be in [1, 24]");
        amps_.assign(std::size_t{1} << n, Complex{0.0, 0.0});
        amps_[0] = 1.0;
    }

    static StateVector basis(int n, std::uint64_t index) {
        StateVector s(n);
        require(index < s.dim(), "basis index out of range");
        s.amps_[0] = 0.0;
        s.amps_[index] = 1.0;
        return s;
    }

    static StateVector uniform(int n) {
        StateVector s(n);
        std::fill(s.amps_.begin(), s.amps_.end(), Complex{std::pow(2.0, -0.5 * n), 0.0});
        return s;
    }

    /// Arbitrary state; the amplitudes must have power-of-two length and unit norm.
    static StateVector from_amplitudes(std::vector<Complex> amps) {
        int n = 0;
        while ((std::size_t{1} << n) < amps.size()) ++n;
        require(n >= 1 && (std::size_t{1} << n) == amps.size(), "amplitude count must be a power of two >= 2");
        StateVector s(n);
        s.amps_ = std::move(amps);
        require(std::abs(s.norm_squared() - 1.0) < 1e-10, "amplitudes must have unit norm");
        return s;
    }

    int qubits() const { return n_; }
    std::size_t dim() const { return amps_.size(); }
    const std::vector<Complex>& amplitudes() const { return amps_; }
    Complex amplitude(std::uint64_t index) const { return amps_[index]; }

    double norm_squared() const {
        double s = 0.0;
        for (const auto& a : amps_) s += std::norm(a);
        return s;
    }

    std::vector<double> probabilities() const {
        std::vector<double> p(amps_.size());
        for (std::size_t i = 0; i < amps_.size(); ++i) p[i] = std::norm(amps_[i]);
        return p;
    }

    /// exp(-i θ/2 Y)
    void apply_ry(int q, double theta) {
        const double c = std::cos(0.5 * theta), s = std::sin(0.5 * theta);
        for_pairs(q, [&](Complex& a0, Complex& a1) {
            const Complex x = a0, y = a1;
            a0 = c * x - s * y;
            a1 = s * x + c * y;
        });
    }

    /// exp(-i θ/2 X)
    void apply_rx(int q, double theta) {
        const double c = std::cos(0.5 * theta), s = std::sin(0.5 * theta);
        const Complex mis{0.0, -s};
        for_pairs(q, [&](Complex& a0, Complex& a1) {
            const Complex x = a0, y = a1;
            a0 = c * x + mis * y;
            a1 = mis * x + c * y;
        });
    }

    /// exp(-i θ/2 Z)
    void apply_rz(int q, double theta) {
        const Complex lo = std::polar(1.0, -0.5 * theta), hi = std::polar(1.0, 0.5 * theta);
        for_pairs(q, [&](Complex& a0, Complex& a1) {
            a0 *= lo;
            a1 *= hi;
        });
    }

    void apply_cz(int a, int b) {
        check_qubit(a);
        check_qubit(b);
        const std::uint64_t mask = bit(a) | bit(b);
        for (std::uint64_t i = 0; i < amps_.size(); ++i)
            if ((i & mask) == mask) amps_[i] = -amps_[i];
    }

    /// 50-50 beam splitter exp(iπ/4 (σ+σ- + σ-σ+)) on the {|01>,|10>} block.
    void apply_sqrt_swap(int a, int b) {
        check_qubit(a);
        check_qubit(b);
        const double c = std::numbers::sqrt2 / 2.0;
        const Complex is{0.0, c};
        const std::uint64_t ba = bit(a), bb = bit(b);
        for (std::uint64_t i = 0; i < amps_.size(); ++i) {
            // visit each |..1_a..0_b..> once, paired with |..0_a..1_b..>
            if ((i & ba) && !(i & bb)) {
                const std::uint64_t k = (i & ~ba) | bb;
                const Complex u = amps_[i], v = amps_[k];
                amps_[i] = c * u + is * v;
                amps_[k] = is * u + c * v;
            }
        }
    }

    /// |x> -> exp(-i γ E(x)) |x>
    void apply_diagonal_phase(const std::vector<double>& energies, double gamma) {
        require(energies.size() == amps_.size(), "diagonal size must equal state dimension");
        for (std::size_t i = 0; i < amps_.size(); ++i) amps_[i] *= std::polar(1.0, -gamma * energies[i]);
    }

private:
    std::uint64_t bit(int q) const { return std::uint64_t{1} << (n_ - 1 - q); }
    void check_qubit(int q) const { require(q >= 0 && q < n_, "qubit index out of range"); }

    template <class F>
    void for_pairs(int q, F&& f) {
        check_qubit(q);
        const std::uint64_t stride = bit(q);
        for (std::uint64_t base = 0; base < amps_.size(); base += 2 * stride)
            for (std::uint64_t i = base; i < base + stride; ++i) f(amps_[i], amps_[i + stride]);
    }

    int n_;
    std::vector<Complex> amps_;
};

enum class AnsatzKind { vqe_ry, qaoa, swap_network };

inline std::string to_string(AnsatzKind k) {
    switch (k) {
    case AnsatzKind::vqe_ry: return "vqe";
    case AnsatzKind::qaoa: return "qaoa";
    case AnsatzKind::swap_network: return "swap";
    }
    return "unknown";
}

struct AnsatzSpec {
    AnsatzKind kind = AnsatzKind::qaoa;
    int layers = 1;
    int n = 1;
    int d = 0; ///< excitation number, swap_network only

    int parameter_count() const { return kind == AnsatzKind::qaoa ? 2 * layers : layers * n; }

    void validate() const {
        require(layers >= 1, "ansatz needs at least one layer");
        require(n >= 1 && n <= kMaxQubits, "qubit count must be in [1, 24]");
        if (kind == AnsatzKind::swap_network) require(d >= 1 && d <= n, "swap ansatz needs 1 <= d <= n");
    }

    /// Search box per parameter. QAOA packs (γ_1..γ_p, β_1..β_p).
    std::vector<std::pair<double, double>> bounds() const {
        constexpr double pi = std::numbers::pi;
        std::vector<std::pair<double, double>> b(static_cast<std::size_t>(parameter_count()), {0.0, 2.0 * pi});
        if (kind == AnsatzKind::qaoa)
            for (int l = 0; l < layers; ++l) b[static_cast<std::size_t>(layers + l)] = {0.0, pi};
        return b;
    }
};

/// Ry layer, then (CZ chain, Ry layer) p-1 times, from |0...0>.
inline StateVector prepare_vqe_state(const AnsatzSpec& spec, const std::vector<double>& theta) {
    spec.validate();
    require(static_cast<int>(theta.size()) == spec.parameter_count(), "VQE needs layers*n parameters");
    StateVector psi(spec.n);
    for (int l = 0; l < spec.layers; ++l) {
        if (l > 0)
            for (int q = 0; q + 1 < spec.n; ++q) psi.apply_cz(q, q + 1);
        for (int q = 0; q < spec.n; ++q) psi.apply_ry(q, theta[static_cast<std::size_t>(l * spec.n + q)]);
    }
    return psi;
}

/// Layers of exp(-iγH) then exp(-iβΣX) from the uniform superposition.
/// `energies` is the tabulated Ising diagonal.
inline StateVector prepare_qaoa_state(const std::vector<double>& energies, const std::vector<double>& gammas,
                                      const std::vector<double>& betas) {
    require(gammas.size() == betas.size() && !gammas.empty(), "QAOA needs equal, non-empty gamma and beta lists");
    int n = 0;
    while ((std::size_t{1} << n) < energies.size()) ++n;
    require((std::size_t{1} << n) == energies.size(), "diagonal length must be a power of two");
    StateVector psi = StateVector::uniform(n);
    for (std::size_t l = 0; l < gammas.size(); ++l) {
        psi.apply_diagonal_phase(energies, gammas[l]);
        for (int q = 0; q < n; ++q) psi.apply_rx(q, 2.0 * betas[l]);
    }
    return psi;
}

inline StateVector prepare_qaoa_state(const IsingHamiltonian& ising, const std::vector<double>& gammas,
                                      const std::vector<double>& betas) {
    return prepare_qaoa_state(ising.diagonal(), gammas, betas);
}

/// Basis index with d excitations at qubits floor(k n / d).
inline std::uint64_t equispaced_excitations(int n, int d) {
    require(d >= 1 && d <= n, "excitation count must lie in [1, n]");
    std::uint64_t index = 0;
    int last = -1;
    for (int k = 0; k < d; ++k) {
        int pos = std::max(k * n / d, last + 1);
        last = pos;
        index |= std::uint64_t{1} << (n - 1 - pos);
    }
    return index;
}

/// Per layer: exp(-iθ Z) on every qubit, then √SWAP on pairs (0,1),(2,3),...
/// followed by (1,2),(3,4),... on an open chain.
inline StateVector prepare_swap_state(const AnsatzSpec& spec, const std::vector<double>& theta) {
    spec.validate();
    require(spec.kind == AnsatzKind::swap_network, "spec is not a swap-network ansatz");
    require(static_cast<int>(theta.size()) == spec.parameter_count(), "swap ansatz needs layers*n parameters");
    StateVector psi = StateVector::basis(spec.n, equispaced_excitations(spec.n, spec.d));
    for (int l = 0; l < spec.layers; ++l) {
        for (int q = 0; q < spec.n; ++q) psi.apply_rz(q, 2.0 * theta[static_cast<std::size_t>(l * spec.n + q)]);
        for (int q = 0; q + 1 < spec.n; q += 2) psi.apply_sqrt_swap(q, q + 1);
        for (int q = 1; q + 1 < spec.n; q += 2) psi.apply_sqrt_swap(q, q + 1);
    }
    return psi;
}

/// Dispatch on ansatz kind. QAOA reads (γ..., β...) from `params`.
inline StateVector prepare_state(const AnsatzSpec& spec, const std::vector<double>& params,
                                 const std::vector<double>& energies) {
    switch (spec.kind) {
    case AnsatzKind::vqe_ry: return prepare_vqe_state(spec, params);
    case AnsatzKind::swap_network: return prepare_swap_state(spec, params);
    case AnsatzKind::qaoa: {
        spec.validate();
        require(static_cast<int>(params.size()) == spec.parameter_count(), "QAOA needs 2*layers parameters");
        const auto mid = params.begin() + spec.layers;
        return prepare_qaoa_state(energies, std::vector<double>(params.begin(), mid),
                                  std::vector<double>(mid, params.end()));
    }
    }
    throw ValidationError("unknown ansatz");
}

/// <ψ|H|ψ> for a diagonal Hamiltonian given by its tabulated energies.
inline double expectation(const StateVector& psi, const std::vector<double>& energies) {
    require(energies.size() == psi.dim(), "Hamiltonian and state sizes differ");
    double e = 0.0;
    const auto& a = psi.amplitudes();
    for (std::size_t i = 0; i < a.size(); ++i) e += std::norm(a[i]) * energies[i];
    return e;
}

inline double expectation(const StateVector& psi, const IsingHamiltonian& ising) {
    require(ising.n() == psi.qubits(), "Hamiltonian and state sizes differ");
    return expectation(psi, ising.diagonal());
}

struct SampleRecord {
    std::uint64_t index = 0;
    int count = 0;
    std::optional<double> energy;
};

/// Measurement outcomes aggregated per bitstring, sorted by basis index.
struct SampleSet {
    int n = 0;
    int total_shots = 0;
    std::vector<SampleRecord> records;

    double mean_popcount() const {
        double s = 0.0;
        for (const auto& r : records) s += static_cast<double>(r.count) * popcount64(r.index);
        return total_shots > 0 ? s / total_shots : 0.0;
    }

    void annotate(const QuboProblem& qubo) {
        for (auto& r : records) r.energy = qubo.energy(r.index);
    }

    std::string bitstring(const SampleRecord& r) const { return SelectionMask::from_index(static_cast<std::size_t>(n), r.index).to_string(); }

    static SampleSet from_counts(int n, const std::map<std::uint64_t, int>& counts) {
        SampleSet s;
        s.n = n;
        for (const auto& [index, count] : counts) {
            s.records.push_back({index, count, std::nullopt});
            s.total_shots += count;
        }
        return s;
    }
};

/// Multinomial draw of `shots` outcomes from |amplitude|².
inline SampleSet sample(const StateVector& psi, int shots, std::uint64_t seed) {
    require(shots >= 1, "need at least one shot");
    std::vector<double> cumulative(psi.dim());
    double total = 0.0;
    const auto& a = psi.amplitudes();
    for (std::size_t i = 0; i < a.size(); ++i) {
        total += std::norm(a[i]);
        cumulative[i] = total;
    }
    Rng rng(seed);
    std::map<std::uint64_t, int> counts;
    for (int s = 0; s < shots; ++s) {
        const double u = uniform01(rng) * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        auto index = static_cast<std::uint64_t>(std::distance(cumulative.begin(), it));
        if (index >= psi.dim()) index = psi.dim() - 1;
        // never report an outcome of zero probability
        while (std::norm(a[index]) == 0.0 && index > 0) --index;
        ++counts[index];
    }
    return SampleSet::from_counts(psi.qubits(), counts);
}

} // namespace cardprune
