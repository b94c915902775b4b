// cardprune: command-line front end for problem construction, single-step
// solves, pruning runs, λ calibration and benchmark experiments.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "cardprune.hpp"

namespace {

using namespace cardprune;

constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;

void emit(const std::string& path, const json& j) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << "\n";
    } else {
        write_json_file(path, j);
    }
}

struct VariationalFlags {
    std::string optimizer = "local";
    int layers = 1;
    int shots = 100;
    int reads = 1;
    int sweeps = 1000;
    int maxiter = 10;
    double tol = 0.01;
    std::uint64_t seed = 0;

    void attach(CLI::App* app) {
        app->add_option("--optimizer", optimizer, "local | dual")->check(CLI::IsMember({"local", "dual"}));
        app->add_option("--layers", layers, "ansatz layers p")->check(CLI::PositiveNumber);
        app->add_option("--shots", shots, "measurements of the optimized state")->check(CLI::PositiveNumber);
        app->add_option("--reads", reads, "simulated-annealing reads per repetition")->check(CLI::PositiveNumber);
        app->add_option("--sweeps", sweeps, "simulated-annealing sweeps per read")->check(CLI::NonNegativeNumber);
        app->add_option("--maxiter", maxiter, "dual-annealing iterations")->check(CLI::PositiveNumber);
        app->add_option("--tol", tol, "local optimizer final trust radius")->check(CLI::PositiveNumber);
        app->add_option("--seed", seed, "master seed");
    }

    SolverBackend backend(const std::string& method) const {
        SolverBackend b = make_backend(method, optimizer_from_string(optimizer), layers, shots, reads, sweeps, maxiter, tol);
        b.seed = seed;
        return b;
    }
};

int cmd_build_problem(const std::string& prices, const std::string& index, const std::string& window,
                      const std::string& out) {
    PriceTable table = read_price_csv(prices);
    std::string column = index;
    if (std::filesystem::is_regular_file(index)) {
        column = "index";
        table = attach_index_column(table, read_price_csv(index), column);
    }
    std::vector<std::string> dropped;
    const TrackingProblem p = problem_from_prices(table, column, window, dropped);
    for (const auto& d : dropped) std::cerr << "dropped " << d << ": incomplete prices in window\n";
    emit(out, to_json(p));
    return 0;
}

int cmd_synth(const std::string& config, std::uint64_t seed, const std::string& out) {
    SyntheticConfig cfg;
    if (!config.empty()) cfg = synthetic_from_json(read_json_file(config));
    emit(out, to_json(synthetic_problem(cfg, seed)));
    return 0;
}

struct SolveArgs {
    std::string problem, qubo, method = "brute", constraint = "hard", objective = "pruning", out, qubo_out;
    int d = 0;
    bool samples = false;
    VariationalFlags flags;
};

int cmd_solve(const SolveArgs& a) {
    require(a.problem.empty() != a.qubo.empty(), "give exactly one of --problem or --qubo");
    std::optional<TrackingProblem> problem;
    QuboProblem base;
    if (!a.problem.empty()) {
        problem = problem_from_json(read_json_file(a.problem));
        base = a.objective == "selection" ? selection_objective(*problem)
                                          : pruning_objective(*problem, solve_full(*problem).weights);
    } else {
        base = qubo_from_json(read_json_file(a.qubo));
    }
    require(a.d >= 1 && a.d <= base.n(), "--d must lie in [1, n]");
    const ConstraintSpec c = parse_constraint(a.constraint);
    const SolverBackend backend = a.flags.backend(a.method);

    json out{{"method", backend.describe()}, {"d", a.d}, {"constraint", a.constraint}, {"seed", a.flags.seed}};
    FeasibleSelection pick;
    if (backend.kind == BackendKind::brute_force) {
        const QuboOptimum o = brute_force_qubo(base, a.d);
        pick = {o.mask, o.energy, false, std::nullopt};
        out["n_evaluations"] = o.evaluated;
    } else {
        const BackendDraw draw = draw_samples(base, a.d, backend, c.mode, c.penalty, c.lambda, derive_seed(a.flags.seed, 0));
        pick = select_best_feasible(draw.samples, base, a.d);
        out["n_evaluations"] = draw.n_evaluations;
        out["mean_popcount"] = draw.samples.mean_popcount();
        if (c.mode == ConstraintMode::hard && draw.penalty > 0.0) out["penalty"] = draw.penalty;
        if (a.samples) {
            SampleSet s = draw.samples;
            s.annotate(base);
            out["samples"] = to_json(s);
        }
    }
    out["mask"] = pick.mask.to_string();
    out["selected"] = pick.mask.indices();
    out["energy"] = pick.energy;
    out["repaired"] = pick.repaired;
    if (pick.closest) out["closest_sample"] = pick.closest->to_string();
    if (problem) {
        const QpSolution sol = solve_reduced(*problem, pick.mask);
        out["weights"] = vector_to_json(sol.weights);
        out["t_err"] = sol.objective;
    }
    if (!a.qubo_out.empty()) {
        QuboProblem exported = base;
        if (c.mode == ConstraintMode::hard) exported = add_hard_cardinality(base, a.d, c.penalty);
        if (c.mode == ConstraintMode::soft) exported = add_soft_cardinality(base, c.lambda);
        write_json_file(a.qubo_out, to_json(exported));
    }
    emit(a.out, out);
    return 0;
}

struct PruneArgs {
    std::string problem, backend = "brute", constraint = "hard", algorithm = "kpa", out;
    int d_target = 0, step = 1, r0 = 1;
    double alpha = 0.0;
    VariationalFlags flags;
};

int cmd_prune(const PruneArgs& a) {
    const TrackingProblem problem = problem_from_json(read_json_file(a.problem));
    const ConstraintSpec c = parse_constraint(a.constraint);
    const SolverBackend backend = a.flags.backend(a.backend);
    PruneResult r;
    if (a.algorithm == "kpa") {
        PruneSchedule s;
        s.n_start = static_cast<int>(problem.size());
        s.d_target = a.d_target;
        s.step_size = a.step;
        s.r0 = a.r0;
        s.alpha = a.alpha;
        s.constraint = c;
        r = solve_kpa(problem, s, backend);
    } else if (a.algorithm == "1pa") {
        r = solve_1pa(problem, a.d_target, backend, c, a.r0);
    } else {
        r = solve_1sa(problem, a.d_target, backend, c, a.r0);
    }
    emit(a.out, to_json(r));
    return 0;
}

struct CalibrateArgs {
    std::string problem, ansatz = "vqe", out, summary;
    int d_target = 0, repeats = 3, grid = 10;
    VariationalFlags flags;
};

int cmd_calibrate(const CalibrateArgs& a) {
    const TrackingProblem problem = problem_from_json(read_json_file(a.problem));
    const SolverBackend backend = a.flags.backend(a.ansatz);
    CalibrationOptions opts;
    opts.repeats = a.repeats;
    opts.grid_points = a.grid;
    const LambdaCalibration cal =
        calibrate_lambda(problem, solve_full(problem).weights, a.d_target, backend.variational, a.flags.seed, opts);
    std::ostringstream csv;
    csv << "phase,lambda,mean_d\n";
    for (const auto& p : cal.curve) csv << "grid," << format_double(p.lambda) << ',' << format_double(p.mean_d) << '\n';
    for (const auto& p : cal.bisection)
        csv << "bisect," << format_double(p.lambda) << ',' << format_double(p.mean_d) << '\n';
    if (a.out.empty() || a.out == "-") {
        std::cout << csv.str();
    } else {
        write_text_file(a.out, csv.str());
    }
    const json s{{"lambda_star", cal.lambda_star}, {"mean_d", cal.mean_d}, {"d_target", a.d_target},
                 {"reached", cal.reached},        {"non_monotone", cal.non_monotone}};
    if (!a.summary.empty()) write_json_file(a.summary, s);
    std::cerr << s.dump() << "\n";
    return 0;
}

int cmd_bench(const std::string& config, const std::string& out_dir) {
    const std::string base = std::filesystem::path(config).parent_path().string();
    const ExperimentConfig cfg = experiment_from_json(read_json_file(config), base);
    const std::string dir = out_dir.empty() ? cfg.out_dir : out_dir;
    require(!dir.empty(), "bench needs --out-dir (or out_dir in the config)");
    const auto trials = run_experiment(cfg);
    const json summary = write_experiment(trials, cfg, dir);
    for (const auto& m : summary.at("methods")) {
        std::cerr << m.at("id").get<std::string>() << ": ";
        if (m.contains("median_delta"))
            std::cerr << "median delta " << m.at("median_delta").get<double>() << ", mean "
                      << m.at("mean_delta").get<double>();
        std::cerr << " (" << m.at("errors").get<int>() << " errors)\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cardinality-constrained tracking by hybrid pruning"};
    app.require_subcommand(1);

    std::string prices, index, window, out, config;
    std::uint64_t synth_seed = 0;
    auto* build = app.add_subcommand("build-problem", "tracking problem from price CSVs");
    build->add_option("--prices", prices, "constituent price CSV")->required();
    build->add_option("--index", index, "index column name, or a CSV with timestamp,index")->required();
    build->add_option("--window", window, "timestamp prefix selecting the window, e.g. a date")->required();
    build->add_option("--out", out, "problem JSON (default stdout)");

    auto* synth = app.add_subcommand("synth", "synthetic correlated tracking problem");
    synth->add_option("--config", config, "synthetic config JSON");
    synth->add_option("--seed", synth_seed, "window seed");
    synth->add_option("--out", out, "problem JSON (default stdout)");

    SolveArgs sa;
    auto* solve = app.add_subcommand("solve", "single combinatorial selection step");
    solve->add_option("--problem", sa.problem, "problem JSON");
    solve->add_option("--qubo", sa.qubo, "QUBO JSON");
    solve->add_option("--d", sa.d, "basket size")->required();
    solve->add_option("--method", sa.method, "brute | sa | vqe | qaoa | swap")
        ->check(CLI::IsMember({"brute", "sa", "vqe", "qaoa", "swap"}));
    solve->add_option("--constraint", sa.constraint, "hard | soft:LAMBDA | none");
    solve->add_option("--objective", sa.objective, "pruning | selection (with --problem)")
        ->check(CLI::IsMember({"pruning", "selection"}));
    solve->add_flag("--samples", sa.samples, "include the sample histogram");
    solve->add_option("--qubo-out", sa.qubo_out, "write the encoded QUBO JSON");
    solve->add_option("--out", sa.out, "result JSON (default stdout)");
    sa.flags.attach(solve);

    PruneArgs pa;
    auto* prune = app.add_subcommand("prune", "pruning run (k-PA by default)");
    prune->add_option("--problem", pa.problem, "problem JSON")->required();
    prune->add_option("--d-target", pa.d_target, "final basket size")->required();
    prune->add_option("--step", pa.step, "assets removed per step");
    prune->add_option("--r0", pa.r0, "repetitions at the first step");
    prune->add_option("--alpha", pa.alpha, "repetition growth: r <- r0 + alpha*r");
    prune->add_option("--backend", pa.backend, "brute | sa | vqe | qaoa | swap")
        ->check(CLI::IsMember({"brute", "sa", "vqe", "qaoa", "swap"}));
    prune->add_option("--constraint", pa.constraint, "hard | soft:LAMBDA | none");
    prune->add_option("--algorithm", pa.algorithm, "kpa | 1pa | 1sa")->check(CLI::IsMember({"kpa", "1pa", "1sa"}));
    prune->add_option("--out", pa.out, "result JSON (default stdout)");
    pa.flags.attach(prune);

    CalibrateArgs ca;
    auto* calibrate = app.add_subcommand("calibrate-lambda", "find λ with mean basket size near d_target");
    calibrate->add_option("--problem", ca.problem, "problem JSON")->required();
    calibrate->add_option("--d-target", ca.d_target, "target mean basket size")->required();
    calibrate->add_option("--ansatz", ca.ansatz, "vqe | qaoa")->check(CLI::IsMember({"vqe", "qaoa"}));
    calibrate->add_option("--repeats", ca.repeats, "runs averaged per λ")->check(CLI::PositiveNumber);
    calibrate->add_option("--grid", ca.grid, "grid points")->check(CLI::Range(2, 1000));
    calibrate->add_option("--summary", ca.summary, "write λ* summary JSON");
    calibrate->add_option("--out", ca.out, "curve CSV (default stdout)");
    ca.flags.attach(calibrate);

    std::string bench_config, out_dir;
    auto* bench = app.add_subcommand("bench", "run an experiment config");
    bench->add_option("--config", bench_config, "experiment JSON")->required();
    bench->add_option("--out-dir", out_dir, "directory for trials.csv and summary.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (*build) return cmd_build_problem(prices, index, window, out);
        if (*synth) return cmd_synth(config, synth_seed, out);
        if (*solve) return cmd_solve(sa);
        if (*prune) return cmd_prune(pa);
        if (*calibrate) return cmd_calibrate(ca);
        if (*bench) return cmd_bench(bench_config, out_dir);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const json::exception& e) {
        std::cerr << "error: malformed input: " << e.what() << "\n";
        return kExitValidation;
    } catch (const SolverError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kExitSolver;
    }
    return kExitValidation;
}
