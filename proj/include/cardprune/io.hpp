#pragma once

// JSON interchange for problems, QUBOs, sample sets and pruning results.

#include <Eigen/Dense>
#include <json.hpp>

#include <fstream>
#include <string>
#include <vector>

#include "cardprune/common.hpp"
#include "cardprune/convex_qp.hpp"
#include "cardprune/problem.hpp"
#include "cardprune/pruner.hpp"
#include "cardprune/qubo.hpp"
#include "cardprune/qvsim.hpp"
#include "cardprune/track_model.hpp"

namespace cardprune {

using json = nlohmann::json;

inline json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

inline json matrix_to_json(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(std::move(row));
    }
    return out;
}

inline Eigen::VectorXd vector_from_json(const json& j, const std::string& what) {
    require(j.is_array(), what + " must be an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        require(j[i].is_number(), what + " must hold numbers");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

/// Accepts a nested array of rows, or a flat row-major array of n*n values.
inline Eigen::MatrixXd square_from_json(const json& j, const std::string& what, std::optional<int> n = std::nullopt) {
    require(j.is_array(), what + " must be an array");
    if (!j.empty() && j[0].is_array()) {
        const auto rows = static_cast<Eigen::Index>(j.size());
        Eigen::MatrixXd m(rows, rows);
        for (Eigen::Index r = 0; r < rows; ++r) {
            const auto& row = j[static_cast<std::size_t>(r)];
            require(row.is_array() && static_cast<Eigen::Index>(row.size()) == rows, what + " must be square");
            for (Eigen::Index c = 0; c < rows; ++c) {
                require(row[static_cast<std::size_t>(c)].is_number(), what + " must hold numbers");
                m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
            }
        }
        require(!n || *n == rows, what + " size disagrees with n");
        return m;
    }
    const auto count = static_cast<Eigen::Index>(j.size());
    const auto side = n ? static_cast<Eigen::Index>(*n)
                        : static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(count))));
    require(side * side == count, what + " must hold n*n values");
    Eigen::MatrixXd m(side, side);
    for (Eigen::Index r = 0; r < side; ++r)
        for (Eigen::Index c = 0; c < side; ++c) {
            const auto& v = j[static_cast<std::size_t>(r * side + c)];
            require(v.is_number(), what + " must hold numbers");
            m(r, c) = v.get<double>();
        }
    return m;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path);
    out << text;
    if (!out) throw ValidationError("failed writing " + path);
}

inline void write_json_file(const std::string& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

// --- problem ---------------------------------------------------------------

inline json to_json(const TrackingProblem& p) {
    return json{{"assets", p.asset_ids}, {"sigma", matrix_to_json(p.sigma)}, {"g", vector_to_json(p.g)},
                {"epsilon0", p.epsilon0}};
}

inline TrackingProblem problem_from_json(const json& j) {
    require(j.is_object(), "problem JSON must be an object");
    for (const char* key : {"sigma", "g", "epsilon0"})
        require(j.contains(key), std::string("problem JSON lacks '") + key + "'");
    TrackingProblem p;
    p.sigma = square_from_json(j.at("sigma"), "sigma");
    p.g = vector_from_json(j.at("g"), "g");
    require(j.at("epsilon0").is_number(), "epsilon0 must be a number");
    p.epsilon0 = j.at("epsilon0").get<double>();
    if (j.contains("assets")) {
        require(j.at("assets").is_array(), "assets must be an array");
        for (const auto& a : j.at("assets")) {
            require(a.is_string(), "asset ids must be strings");
            p.asset_ids.push_back(a.get<std::string>());
        }
    } else {
        for (Eigen::Index i = 0; i < p.g.size(); ++i) p.asset_ids.push_back("x" + std::to_string(i));
    }
    require(p.sigma.rows() == p.g.size(), "sigma and g sizes differ");
    require(static_cast<Eigen::Index>(p.asset_ids.size()) == p.g.size(), "assets and g sizes differ");
    p.validate();
    return p;
}

// --- synthetic config ------------------------------------------------------

inline json to_json(const SyntheticConfig& c) {
    return json{{"n_assets", c.n_assets},         {"n_periods", c.n_periods}, {"n_factors", c.n_factors},
                {"factor_vol", c.factor_vol},     {"idio_vol", c.idio_vol},   {"index_weight_seed", c.index_weight_seed},
                {"cluster_count", c.cluster_count}};
}

inline SyntheticConfig synthetic_from_json(const json& j) {
    require(j.is_object(), "synthetic config must be an object");
    SyntheticConfig c;
    try {
        c.n_assets = j.value("n_assets", c.n_assets);
        c.n_periods = j.value("n_periods", c.n_periods);
        c.n_factors = j.value("n_factors", c.n_factors);
        c.factor_vol = j.value("factor_vol", c.factor_vol);
        c.idio_vol = j.value("idio_vol", c.idio_vol);
        c.index_weight_seed = j.value("index_weight_seed", c.index_weight_seed);
        c.cluster_count = j.value("cluster_count", c.cluster_count);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("synthetic config: ") + e.what());
    }
    c.validate();
    return c;
}

// --- QUBO ------------------------------------------------------------------

inline ConstraintMode constraint_mode_from_string(const std::string& s) {
    if (s == "unconstrained" || s == "none") return ConstraintMode::unconstrained;
    if (s == "hard") return ConstraintMode::hard;
    if (s == "soft") return ConstraintMode::soft;
    throw ValidationError("unknown constraint mode '" + s + "'");
}

inline json to_json(const QuboProblem& q) {
    json flat = json::array();
    for (Eigen::Index r = 0; r < q.q.rows(); ++r)
        for (Eigen::Index c = 0; c < q.q.cols(); ++c) flat.push_back(q.q(r, c));
    json out{{"n", q.n()}, {"mode", to_string(q.mode)}, {"q", flat}, {"offset", q.offset}};
    if (q.cardinality) out["cardinality"] = *q.cardinality;
    if (q.mode == ConstraintMode::hard) out["penalty"] = q.penalty;
    if (q.mode == ConstraintMode::soft) out["lambda"] = q.lambda;
    return out;
}

inline QuboProblem qubo_from_json(const json& j) {
    require(j.is_object(), "QUBO JSON must be an object");
    require(j.contains("n") && j.at("n").is_number_integer(), "QUBO JSON needs integer 'n'");
    require(j.contains("q"), "QUBO JSON lacks 'q'");
    const int n = j.at("n").get<int>();
    require(n >= 1, "QUBO n must be >= 1");
    QuboProblem q;
    q.q = square_from_json(j.at("q"), "q", n);
    q.offset = j.contains("offset") ? j.at("offset").get<double>() : 0.0;
    q.mode = constraint_mode_from_string(j.value("mode", std::string("unconstrained")));
    if (j.contains("cardinality")) q.cardinality = j.at("cardinality").get<int>();
    q.penalty = j.value("penalty", 0.0);
    q.lambda = j.value("lambda", 0.0);
    q.validate();
    return q;
}

// --- samples and results ---------------------------------------------------

inline json to_json(const SampleSet& s) {
    json records = json::array();
    for (const auto& r : s.records) {
        json rec{{"bits", s.bitstring(r)}, {"count", r.count}};
        if (r.energy) rec["energy"] = *r.energy;
        records.push_back(std::move(rec));
    }
    return json{{"n", s.n}, {"shots", s.total_shots}, {"mean_popcount", s.mean_popcount()}, {"records", records}};
}

inline json to_json(const QpSolution& s) {
    return json{{"weights", vector_to_json(s.weights)}, {"objective", s.objective}, {"iterations", s.iterations},
                {"kkt_residual", s.kkt_residual}, {"converged", s.converged}};
}

inline json to_json(const PruneStep& s) {
    return json{{"universe_size", s.universe_size}, {"chosen", s.chosen},           {"reduced_t_err", s.reduced_t_err},
                {"repetitions", s.repetitions},     {"n_evaluations", s.n_evaluations}, {"repaired", s.repaired},
                {"step_energy", s.step_energy},     {"lambda", s.lambda},           {"penalty", s.penalty}};
}

inline json to_json(const PruneResult& r) {
    json steps = json::array();
    for (const auto& s : r.steps) steps.push_back(to_json(s));
    json out{{"algorithm", r.algorithm},
             {"backend", r.backend},
             {"mask", r.mask.to_string()},
             {"selected", r.mask.indices()},
             {"weights", vector_to_json(r.weights)},
             {"t_err", r.t_err},
             {"total_repetitions", r.total_repetitions()},
             {"total_evaluations", r.total_evaluations()},
             {"steps", steps}};
    if (!r.note.empty()) out["note"] = r.note;
    return out;
}

inline PruneResult prune_result_from_json(const json& j) {
    require(j.is_object(), "result JSON must be an object");
    PruneResult r;
    r.algorithm = j.value("algorithm", std::string());
    r.backend = j.value("backend", std::string());
    r.note = j.value("note", std::string());
    r.mask = SelectionMask::parse(j.at("mask").get<std::string>());
    r.weights = vector_from_json(j.at("weights"), "weights");
    r.t_err = j.at("t_err").get<double>();
    for (const auto& s : j.value("steps", json::array())) {
        PruneStep st;
        st.universe_size = s.at("universe_size").get<int>();
        st.chosen = s.at("chosen").get<std::vector<std::size_t>>();
        st.reduced_t_err = s.at("reduced_t_err").get<double>();
        st.repetitions = s.at("repetitions").get<long>();
        st.n_evaluations = s.at("n_evaluations").get<long>();
        st.repaired = s.at("repaired").get<bool>();
        st.step_energy = s.value("step_energy", 0.0);
        st.lambda = s.value("lambda", 0.0);
        st.penalty = s.value("penalty", 0.0);
        r.steps.push_back(std::move(st));
    }
    return r;
}

} // namespace cardprune
