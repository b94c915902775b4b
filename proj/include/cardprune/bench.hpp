#pragma once

// Experiment harness: statistics, trial generation and report writing.

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cardprune/common.hpp"
#include "cardprune/exhaustive.hpp"
#include "cardprune/io.hpp"
#include "cardprune/pruner.hpp"
#include "cardprune/track_model.hpp"

namespace cardprune {

// ---------------------------------------------------------------------------
// Statistics

/// (value - optimum) / optimum.
inline double relative_error(double value, double optimum) {
    if (!(optimum > 0.0))
        throw ValidationError("relative error undefined for optimum <= 0; report the absolute error instead");
    return (value - optimum) / optimum;
}

/// Δ for a trial, or NaN when the optimum is a perfect fit (at most
/// `zero_level`); such rows are judged on the absolute error instead.
inline double trial_delta(double value, double optimum, double zero_level) {
    if (optimum <= zero_level) return std::numeric_limits<double>::quiet_NaN();
    return relative_error(value, optimum);
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() == y.size(), "pearson needs equal-length inputs");
    require(x.size() >= 2, "pearson needs at least two points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw ValidationError("pearson undefined for a constant input");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double median(std::vector<double> v) {
    require(!v.empty(), "median of an empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline double mean(const std::vector<double>& v) {
    require(!v.empty(), "mean of an empty sample");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Midranks (1-based) of the pooled values.
inline std::vector<double> midranks(const std::vector<double>& pooled) {
    std::vector<std::size_t> order(pooled.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
    std::vector<double> ranks(pooled.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && pooled[order[j + 1]] == pooled[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

struct RankSumResult {
    double statistic = 0.0; ///< Mann-Whitney U of the first sample
    double p_value = 1.0;
    bool exact = false;
};

inline constexpr std::size_t kExactRankSumLimit = 12;

/// Two-sided Wilcoxon rank-sum test. Exact permutation distribution of the
/// midrank sum when the pooled size is at most 12, otherwise the normal
/// approximation with tie and continuity corrections.
inline RankSumResult ranksum_test(const std::vector<double>& a, const std::vector<double>& b) {
    require(a.size() >= 3 && b.size() >= 3, "rank-sum test needs at least 3 values per sample");
    for (double v : a) require(std::isfinite(v), "rank-sum input must be finite");
    for (double v : b) require(std::isfinite(v), "rank-sum input must be finite");
    std::vector<double> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto ranks = midranks(pooled);
    const std::size_t na = a.size(), nb = b.size(), n = na + nb;
    double w = 0.0;
    for (std::size_t i = 0; i < na; ++i) w += ranks[i];
    const double expected = static_cast<double>(na) * static_cast<double>(n + 1) / 2.0;

    RankSumResult out;
    out.statistic = w - static_cast<double>(na * (na + 1)) / 2.0;
    const double observed = std::abs(w - expected);
    if (n <= kExactRankSumLimit) {
        out.exact = true;
        std::uint64_t extreme = 0, total = 0;
        for (std::uint32_t subset = 0; subset < (1U << n); ++subset) {
            if (static_cast<std::size_t>(__builtin_popcount(subset)) != na) continue;
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (subset >> i & 1U) s += ranks[i];
            ++total;
            if (std::abs(s - expected) >= observed - 1e-9) ++extreme;
        }
        out.p_value = static_cast<double>(extreme) / static_cast<double>(total);
        return out;
    }
    std::map<double, int> ties;
    for (double v : pooled) ++ties[v];
    double tie_term = 0.0;
    for (const auto& [v, t] : ties) tie_term += static_cast<double>(t) * t * t - t;
    const double dn = static_cast<double>(n);
    const double variance = static_cast<double>(na) * static_cast<double>(nb) / 12.0 *
                            ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
    if (variance <= 0.0) {
        out.p_value = 1.0;
        return out;
    }
    const double z = std::max(0.0, observed - 0.5) / std::sqrt(variance);
    out.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    return out;
}

// ---------------------------------------------------------------------------
// Experiment configuration

enum class MethodAlgorithm { one_sa, one_pa, k_pa, select, exact };

inline std::string to_string(MethodAlgorithm a) {
    switch (a) {
    case MethodAlgorithm::one_sa: return "1sa";
    case MethodAlgorithm::one_pa: return "1pa";
    case MethodAlgorithm::k_pa: return "kpa";
    case MethodAlgorithm::select: return "select";
    case MethodAlgorithm::exact: return "exact";
    }
    return "unknown";
}

inline MethodAlgorithm method_algorithm_from_string(const std::string& s) {
    if (s == "1sa") return MethodAlgorithm::one_sa;
    if (s == "1pa") return MethodAlgorithm::one_pa;
    if (s == "kpa") return MethodAlgorithm::k_pa;
    if (s == "select") return MethodAlgorithm::select;
    if (s == "exact") return MethodAlgorithm::exact;
    throw ValidationError("unknown algorithm '" + s + "' (expected 1sa, 1pa, kpa, select or exact)");
}

/// One competitor in an experiment. `select` scores a single pruning-QUBO
/// step at the QUBO level; `exact` is the exhaustive tracking search; the
/// others score the final tracking error of a pruning run.
struct MethodSpec {
    std::string id;
    MethodAlgorithm algorithm = MethodAlgorithm::one_pa;
    std::string backend = "brute"; ///< brute | sa | vqe | qaoa | swap
    OptimizerKind optimizer = OptimizerKind::local;
    int layers = 1;
    ConstraintSpec constraint;
    int step = 1;
    int r0 = 1;
    double alpha = 0.0;
    long repetitions = 1;
    int reads = 1;
    int sweeps = 1000;
    int maxiter = 10;
    double tol = 0.01;
};

/// Backend for a method; the seed is filled in per trial.
inline SolverBackend make_backend(const std::string& name, OptimizerKind optimizer, int layers, int n_meas, int reads,
                                  int sweeps, int maxiter, double tol) {
    SolverBackend b;
    if (name == "brute") {
        b.kind = BackendKind::brute_force;
    } else if (name == "sa") {
        b.kind = BackendKind::simulated_annealing;
    } else if (name == "vqe" || name == "qaoa" || name == "swap") {
        b.kind = BackendKind::variational;
        b.variational.ansatz = name == "vqe"    ? AnsatzKind::vqe_ry
                               : name == "qaoa" ? AnsatzKind::qaoa
                                                : AnsatzKind::swap_network;
    } else {
        throw ValidationError("unknown backend '" + name + "' (expected brute, sa, vqe, qaoa or swap)");
    }
    require(layers >= 1, "layers must be >= 1");
    require(reads >= 1 && sweeps >= 0, "reads must be >= 1 and sweeps >= 0");
    require(n_meas >= 1, "n_meas must be >= 1");
    require(maxiter >= 1, "maxiter must be >= 1");
    require(tol > 0.0, "tol must be positive");
    b.reads = reads;
    b.sweeps = sweeps;
    b.variational.layers = layers;
    b.variational.optimizer = optimizer;
    b.variational.n_meas = n_meas;
    b.variational.maxiter = maxiter;
    b.variational.local.tol = tol;
    return b;
}

inline OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "local" || s == "cobyla") return OptimizerKind::local;
    if (s == "dual" || s == "dual_anneal") return OptimizerKind::dual_anneal;
    throw ValidationError("unknown optimizer '" + s + "' (expected local or dual)");
}

/// "hard", "soft:LAMBDA", or "none".
inline ConstraintSpec parse_constraint(const std::string& s) {
    ConstraintSpec c;
    if (s == "hard") {
        c.mode = ConstraintMode::hard;
    } else if (s == "none" || s == "unconstrained") {
        c.mode = ConstraintMode::unconstrained;
    } else if (s.rfind("soft:", 0) == 0) {
        c.mode = ConstraintMode::soft;
        try {
            std::size_t used = 0;
            c.lambda = std::stod(s.substr(5), &used);
            require(used == s.size() - 5, "trailing text");
        } catch (const std::exception&) {
            throw ValidationError("bad soft constraint '" + s + "' (expected soft:LAMBDA)");
        }
        require(std::isfinite(c.lambda), "lambda must be finite");
    } else {
        throw ValidationError("unknown constraint '" + s + "' (expected hard, soft:LAMBDA or none)");
    }
    return c;
}

/// Where the windows come from. Synthetic windows share one index
/// composition and differ in the return draws.
struct ProblemSource {
    std::optional<SyntheticConfig> synthetic;
    int window_count = 20;
    std::string prices_file;
    std::string index_column;
    std::string index_file;
    std::vector<std::string> windows;
    std::string problem_file;
};

struct ExperimentConfig {
    ProblemSource source;
    std::uint64_t master_seed = 0;
    std::vector<std::uint64_t> seeds;
    std::vector<int> d_values;
    int n_meas = 100;
    std::vector<MethodSpec> methods;
    std::string out_dir;

    void validate() const {
        require(!methods.empty(), "experiment needs at least one method");
        require(!seeds.empty(), "experiment needs at least one seed");
        require(!d_values.empty(), "experiment needs at least one d");
        require(n_meas >= 1, "n_meas must be >= 1");
        std::vector<std::string> ids;
        for (const auto& m : methods) {
            require(!m.id.empty(), "every method needs an id");
            require(std::find(ids.begin(), ids.end(), m.id) == ids.end(), "duplicate method id '" + m.id + "'");
            ids.push_back(m.id);
            require(m.repetitions >= 1, "method '" + m.id + "': repetitions must be >= 1");
            (void)make_backend(m.backend, m.optimizer, m.layers, n_meas, m.reads, m.sweeps, m.maxiter, m.tol);
        }
        const bool synthetic = source.synthetic.has_value();
        const bool prices = !source.prices_file.empty();
        const bool file = !source.problem_file.empty();
        require(static_cast<int>(synthetic) + static_cast<int>(prices) + static_cast<int>(file) == 1,
                "problem source must be exactly one of synthetic, prices or problem_file");
        if (synthetic) require(source.window_count >= 1, "window count must be >= 1");
        if (prices) {
            require(!source.windows.empty(), "price source needs a windows list");
            require(!source.index_column.empty() || !source.index_file.empty(), "price source needs an index");
        }
    }
};

inline std::string resolve_path(const std::string& path, const std::string& base_dir) {
    if (path.empty() || base_dir.empty() || std::filesystem::path(path).is_absolute()) return path;
    return (std::filesystem::path(base_dir) / path).lexically_normal().string();
}

/// Relative file paths resolve against `base_dir` (the config's directory).
inline ExperimentConfig experiment_from_json(const json& j, const std::string& base_dir = "") {
    require(j.is_object(), "experiment config must be an object");
    ExperimentConfig c;
    try {
        const json& p = j.at("problem");
        require(p.is_object(), "'problem' must be an object");
        if (p.contains("synthetic")) {
            c.source.synthetic = synthetic_from_json(p.at("synthetic"));
            c.source.window_count = p.value("windows", 20);
        }
        if (p.contains("prices")) {
            c.source.prices_file = resolve_path(p.at("prices").get<std::string>(), base_dir);
            c.source.index_column = p.value("index", std::string());
            c.source.index_file = resolve_path(p.value("index_file", std::string()), base_dir);
            c.source.windows = p.value("windows", std::vector<std::string>{});
        }
        if (p.contains("problem_file")) c.source.problem_file = resolve_path(p.at("problem_file").get<std::string>(), base_dir);

        c.master_seed = j.value("master_seed", std::uint64_t{0});
        if (j.contains("seeds")) {
            c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        } else {
            const int count = j.value("n_seeds", 5);
            require(count >= 1, "n_seeds must be >= 1");
            for (int s = 0; s < count; ++s) c.seeds.push_back(static_cast<std::uint64_t>(s));
        }
        const json& d = j.at("d");
        if (d.is_array()) {
            c.d_values = d.get<std::vector<int>>();
        } else if (d.is_object()) {
            const int lo = d.at("min").get<int>(), hi = d.at("max").get<int>();
            require(lo <= hi, "d range min exceeds max");
            for (int v = lo; v <= hi; ++v) c.d_values.push_back(v);
        } else {
            c.d_values = {d.get<int>()};
        }
        c.n_meas = j.value("n_meas", 100);
        c.out_dir = j.value("out_dir", std::string());
        for (const auto& m : j.at("methods")) {
            MethodSpec s;
            s.id = m.at("id").get<std::string>();
            s.algorithm = method_algorithm_from_string(m.value("algorithm", std::string("1pa")));
            s.backend = m.value("backend", std::string("brute"));
            s.optimizer = optimizer_from_string(m.value("optimizer", std::string("local")));
            s.layers = m.value("layers", 1);
            s.constraint = parse_constraint(m.value("constraint", std::string("hard")));
            if (m.contains("penalty")) s.constraint.penalty = m.at("penalty").get<double>();
            s.step = m.value("step", 1);
            s.r0 = m.value("r0", 1);
            s.alpha = m.value("alpha", 0.0);
            s.repetitions = m.value("repetitions", 1L);
            s.reads = m.value("reads", 1);
            s.sweeps = m.value("sweeps", 1000);
            s.maxiter = m.value("maxiter", 10);
            s.tol = m.value("tol", 0.01);
            c.methods.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("experiment config: ") + e.what());
    }
    c.validate();
    return c;
}

struct Window {
    std::string id;
    TrackingProblem problem;
};

inline std::vector<Window> load_windows(const ExperimentConfig& cfg) {
    std::vector<Window> out;
    const auto& src = cfg.source;
    if (src.synthetic) {
        for (int w = 0; w < src.window_count; ++w) {
            char id[16];
            std::snprintf(id, sizeof id, "w%03d", w);
            out.push_back({id, synthetic_problem(*src.synthetic, derive_seed(cfg.master_seed, static_cast<std::uint64_t>(w)))});
        }
    } else if (!src.prices_file.empty()) {
        PriceTable table = read_price_csv(src.prices_file);
        std::string column = src.index_column;
        if (!src.index_file.empty()) {
            if (column.empty()) column = "index";
            table = attach_index_column(table, read_price_csv(src.index_file), column);
        }
        for (const auto& w : src.windows) {
            std::vector<std::string> dropped;
            out.push_back({w, problem_from_prices(table, column, w, dropped)});
        }
    } else {
        out.push_back({"problem", problem_from_json(read_json_file(src.problem_file))});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Trials

struct TrialRecord {
    std::string method;
    std::string window;
    std::uint64_t seed = 0;
    int d = 0;
    double delta = std::numeric_limits<double>::quiet_NaN();
    double value = std::numeric_limits<double>::quiet_NaN();   ///< achieved T_err (or QUBO cost for select)
    double optimum = std::numeric_limits<double>::quiet_NaN(); ///< exact counterpart of value
    double abs_error = std::numeric_limits<double>::quiet_NaN(); ///< value - optimum
    long n_evaluations = 0;
    bool feasible = false;
    double mean_d = std::numeric_limits<double>::quiet_NaN(); ///< sampled ⟨d⟩ (select, soft mode)
    double wall_seconds = 0.0;
    std::string error;

    bool ok() const { return error.empty(); }
};

/// Per-trial seed: derived from (seed, window index, d) only, so every method
/// sees the same seed on the same cell and new seeds never disturb old ones.
inline std::uint64_t trial_seed(std::uint64_t seed, std::size_t window, int d) {
    return derive_seed(derive_seed(seed, static_cast<std::uint64_t>(window) + 1), static_cast<std::uint64_t>(d));
}

namespace detail {

struct Baselines {
    std::map<int, TrackingOptimum> tracking;
    std::optional<Eigen::VectorXd> full_weights;
    std::map<int, QuboOptimum> pruning_qubo;
};

inline void run_trial(const MethodSpec& m, const TrackingProblem& problem, Baselines& base, int n_meas,
                      TrialRecord& rec) {
    SolverBackend backend = make_backend(m.backend, m.optimizer, m.layers, n_meas, m.reads, m.sweeps, m.maxiter, m.tol);
    backend.seed = rec.seed;
    const int d = rec.d;
    // optima this small are round-off of a perfect fit
    const double zero_level = 1e-12 * problem.scale();
    if (m.algorithm == MethodAlgorithm::select) {
        if (!base.full_weights) base.full_weights = solve_full(problem).weights;
        const QuboProblem q = pruning_objective(problem, *base.full_weights);
        if (!base.pruning_qubo.count(d)) base.pruning_qubo[d] = brute_force_qubo(q, d);
        const double opt = base.pruning_qubo[d].energy + problem.epsilon0;
        const auto start = std::chrono::steady_clock::now();
        double energy = 0.0;
        if (backend.kind == BackendKind::brute_force) {
            const QuboOptimum o = brute_force_qubo(q, d);
            energy = o.energy;
            rec.n_evaluations = static_cast<long>(o.evaluated);
            rec.feasible = true;
        } else {
            const BackendDraw draw = draw_samples(q, d, backend, m.constraint.mode, m.constraint.penalty,
                                                  m.constraint.lambda, derive_seed(backend.seed, 0));
            const FeasibleSelection pick = select_best_feasible(draw.samples, q, d);
            energy = pick.energy;
            rec.n_evaluations = draw.n_evaluations;
            rec.feasible = !pick.repaired;
            if (m.constraint.mode == ConstraintMode::soft) rec.mean_d = draw.samples.mean_popcount();
        }
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        rec.value = energy + problem.epsilon0;
        rec.optimum = opt;
        rec.abs_error = rec.value - rec.optimum;
        rec.delta = trial_delta(rec.value, rec.optimum, zero_level);
        return;
    }

    if (!base.tracking.count(d)) base.tracking[d] = brute_force_tracking(problem, d);
    const auto start = std::chrono::steady_clock::now();
    if (m.algorithm == MethodAlgorithm::exact) {
        const TrackingOptimum o = brute_force_tracking(problem, d);
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        rec.value = o.t_err;
        rec.optimum = base.tracking[d].t_err;
        rec.abs_error = rec.value - rec.optimum;
        rec.delta = trial_delta(rec.value, rec.optimum, zero_level);
        rec.n_evaluations = static_cast<long>(binomial(static_cast<int>(problem.size()), d));
        rec.feasible = true;
        return;
    }
    PruneResult r;
    switch (m.algorithm) {
    case MethodAlgorithm::one_sa: r = solve_1sa(problem, d, backend, m.constraint, m.repetitions); break;
    case MethodAlgorithm::one_pa: r = solve_1pa(problem, d, backend, m.constraint, m.repetitions); break;
    default: {
        PruneSchedule s;
        s.n_start = static_cast<int>(problem.size());
        s.d_target = d;
        s.step_size = m.step;
        s.r0 = m.r0;
        s.alpha = m.alpha;
        s.constraint = m.constraint;
        r = solve_kpa(problem, s, backend);
    }
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rec.value = r.t_err;
    rec.optimum = base.tracking[d].t_err;
    rec.abs_error = rec.value - rec.optimum;
    rec.delta = trial_delta(rec.value, rec.optimum, zero_level);
    rec.n_evaluations = std::max(1L, r.total_evaluations());
    rec.feasible = std::none_of(r.steps.begin(), r.steps.end(), [](const PruneStep& s) { return s.repaired; });
}

} // namespace detail

/// Every (method, window, d, seed) cell, in that nesting order. Failures are
/// recorded in the row's error column and the run continues.
inline std::vector<TrialRecord> run_experiment(const ExperimentConfig& cfg, const std::vector<Window>& windows) {
    cfg.validate();
    for (const auto& w : windows)
        for (int d : cfg.d_values) {
            require(d >= 1 && d <= static_cast<int>(w.problem.size()),
                    "d = " + std::to_string(d) + " outside [1, N] for window " + w.id);
            if (binomial(static_cast<int>(w.problem.size()), d) > kMaxBruteForceSupports)
                throw ValidationError("exact baseline too large for window " + w.id);
        }
    std::vector<detail::Baselines> baselines(windows.size());
    std::vector<TrialRecord> out;
    for (const auto& m : cfg.methods)
        for (std::size_t wi = 0; wi < windows.size(); ++wi)
            for (int d : cfg.d_values)
                for (std::uint64_t seed : cfg.seeds) {
                    TrialRecord rec;
                    rec.method = m.id;
                    rec.window = windows[wi].id;
                    rec.seed = seed;
                    rec.d = d;
                    const std::uint64_t s = trial_seed(seed, wi, d);
                    try {
                        TrialRecord work = rec;
                        work.seed = s;
                        detail::run_trial(m, windows[wi].problem, baselines[wi], cfg.n_meas, work);
                        work.seed = seed;
                        rec = work;
                    } catch (const std::exception& e) {
                        rec.error = e.what();
                    }
                    out.push_back(std::move(rec));
                }
    return out;
}

inline std::vector<TrialRecord> run_experiment(const ExperimentConfig& cfg) { return run_experiment(cfg, load_windows(cfg)); }

// ---------------------------------------------------------------------------
// Reports

inline std::string format_double(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

/// Deterministic trial table; wall time lives in timings_csv.
inline std::string trials_csv(const std::vector<TrialRecord>& trials) {
    std::ostringstream out;
    out << "method,window,seed,d,delta,value,optimum,abs_error,n_evaluations,feasible,mean_d,error\n";
    for (const auto& t : trials)
        out << csv_escape(t.method) << ',' << csv_escape(t.window) << ',' << t.seed << ',' << t.d << ','
            << format_double(t.delta) << ',' << format_double(t.value) << ',' << format_double(t.optimum) << ','
            << format_double(t.abs_error) << ',' << t.n_evaluations << ',' << (t.ok() ? (t.feasible ? "1" : "0") : "") << ',' << format_double(t.mean_d)
            << ',' << csv_escape(t.error) << '\n';
    return out.str();
}

inline std::vector<std::string> split_csv_record(const std::string& line) {
    std::vector<std::string> cells(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cells.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cells.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.emplace_back();
        } else {
            cells.back() += c;
        }
    }
    return cells;
}

/// Inverse of trials_csv (wall time is not part of the table).
inline std::vector<TrialRecord> read_trials_csv(std::istream& in) {
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "trial table is empty");
    std::vector<TrialRecord> out;
    auto num = [](const std::string& s) { return s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(s); };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c = split_csv_record(line);
        require(c.size() == 12, "trial row must have 12 columns");
        TrialRecord t;
        t.method = c[0];
        t.window = c[1];
        t.seed = std::stoull(c[2]);
        t.d = std::stoi(c[3]);
        t.delta = num(c[4]);
        t.value = num(c[5]);
        t.optimum = num(c[6]);
        t.abs_error = num(c[7]);
        t.n_evaluations = std::stol(c[8]);
        t.feasible = c[9] == "1";
        t.mean_d = num(c[10]);
        t.error = c[11];
        out.push_back(std::move(t));
    }
    return out;
}

inline std::string timings_csv(const std::vector<TrialRecord>& trials) {
    std::ostringstream out;
    out << "method,window,seed,d,wall_seconds\n";
    for (const auto& t : trials)
        out << csv_escape(t.method) << ',' << csv_escape(t.window) << ',' << t.seed << ',' << t.d << ','
            << format_double(t.wall_seconds) << '\n';
    return out.str();
}

inline json null_or(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

/// Aggregates per method plus pairwise rank-sum tests on Δ, in method order.
inline json summarize(const std::vector<TrialRecord>& trials, const std::vector<std::string>& method_order) {
    json methods = json::array();
    std::map<std::string, std::vector<double>> deltas;
    for (const auto& id : method_order) {
        std::vector<double> delta, value, optimum, evals, md, fit_abs;
        int errors = 0, completed = 0, feasible = 0, optimal = 0, within = 0;
        for (const auto& t : trials) {
            if (t.method != id) continue;
            if (!t.ok()) {
                ++errors;
                continue;
            }
            ++completed;
            value.push_back(t.value);
            optimum.push_back(t.optimum);
            evals.push_back(static_cast<double>(t.n_evaluations));
            if (!std::isnan(t.mean_d)) md.push_back(t.mean_d);
            feasible += t.feasible;
            if (std::isnan(t.delta)) {
                fit_abs.push_back(t.abs_error);
                continue;
            }
            delta.push_back(t.delta);
            optimal += t.delta <= 1e-9;
            within += t.delta <= 0.2;
        }
        deltas[id] = delta;
        json row{{"id", id}, {"trials", completed + errors}, {"errors", errors},
                 {"perfect_fit_trials", static_cast<int>(fit_abs.size())}};
        if (!fit_abs.empty()) row["mean_abs_error_perfect_fit"] = mean(fit_abs);
        if (completed > 0) {
            row["mean_evaluations"] = mean(evals);
            row["feasible_fraction"] = feasible / static_cast<double>(completed);
            std::optional<double> r;
            try {
                r = pearson(value, optimum);
            } catch (const ValidationError&) {
            }
            row["pearson_value_vs_optimum"] = null_or(r);
            row["mean_sampled_d"] = md.empty() ? json(nullptr) : json(mean(md));
        }
        if (!delta.empty()) {
            const double count = static_cast<double>(delta.size());
            row["median_delta"] = median(delta);
            row["mean_delta"] = mean(delta);
            row["max_delta"] = *std::max_element(delta.begin(), delta.end());
            row["optimum_fraction"] = optimal / count;
            row["within_20pct_fraction"] = within / count;
        }
        methods.push_back(std::move(row));
    }
    json tests = json::array();
    for (std::size_t i = 0; i < method_order.size(); ++i)
        for (std::size_t k = i + 1; k < method_order.size(); ++k) {
            const auto& a = deltas[method_order[i]];
            const auto& b = deltas[method_order[k]];
            json row{{"a", method_order[i]}, {"b", method_order[k]}};
            if (a.size() >= 3 && b.size() >= 3) {
                const RankSumResult rs = ranksum_test(a, b);
                row["U"] = rs.statistic;
                row["p_value"] = rs.p_value;
                row["exact"] = rs.exact;
            } else {
                row["U"] = nullptr;
                row["p_value"] = nullptr;
            }
            tests.push_back(std::move(row));
        }
    return json{{"trials", trials.size()}, {"methods", methods}, {"ranksum", tests}};
}

inline std::vector<std::string> method_ids(const ExperimentConfig& cfg) {
    std::vector<std::string> ids;
    for (const auto& m : cfg.methods) ids.push_back(m.id);
    return ids;
}

/// Writes trials.csv, summary.json and timings.csv into `dir`.
inline json write_experiment(const std::vector<TrialRecord>& trials, const ExperimentConfig& cfg, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ValidationError("cannot create output directory " + dir + ": " + ec.message());
    const json summary = summarize(trials, method_ids(cfg));
    write_text_file((std::filesystem::path(dir) / "trials.csv").string(), trials_csv(trials));
    write_json_file((std::filesystem::path(dir) / "summary.json").string(), summary);
    write_text_file((std::filesystem::path(dir) / "timings.csv").string(), timings_csv(trials));
    return summary;
}

} // namespace cardprune
