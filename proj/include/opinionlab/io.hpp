#pragma once

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "dynamics.hpp"
#include "equilibria.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "sbm.hpp"

namespace opinionlab {

using json = nlohmann::json;

namespace detail {

inline void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
    if (!j.is_object()) throw Error(Errc::invalid_argument, where + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) throw Error(Errc::invalid_argument, "unknown key '" + key + "' in " + where);
    }
}

template <class T>
T get_required(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw Error(Errc::invalid_argument, where + " is missing '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(Errc::invalid_argument, where + "." + key + ": " + e.what());
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
    return j.contains(key) ? get_required<T>(j, key, where) : fallback;
}

/// NaN and infinities become null, which JSON cannot represent otherwise.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double number_from(const json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

} // namespace detail

// ---------------------------------------------------------------------------
// Inputs
// ---------------------------------------------------------------------------

inline json to_json(const PlatformFunction& f) {
    struct Visitor {
        json operator()(const SgnEps& k) const { return {{"kind", "sgn_eps"}, {"epsilon", k.epsilon}}; }
        json operator()(const AntiSgnEps& k) const { return {{"kind", "anti_sgn_eps"}, {"epsilon", k.epsilon}}; }
        json operator()(const Linear& k) const { return {{"kind", "linear"}, {"alpha", k.alpha}}; }
        json operator()(const PiecewiseLinear& k) const {
            json knots = json::array();
            for (auto [x, y] : k.knots) knots.push_back({x, y});
            return {{"kind", "piecewise"}, {"knots", knots}};
        }
    };
    return std::visit(Visitor{}, f.kind());
}

inline PlatformFunction function_from_json(const json& j) {
    const std::string where = "function";
    if (!j.is_object()) throw Error(Errc::invalid_function, "function must be a JSON object");
    const auto kind = detail::get_required<std::string>(j, "kind", where);
    if (kind == "sgn_eps" || kind == "anti_sgn_eps") {
        detail::check_keys(j, {"kind", "epsilon"}, where);
        const double eps = detail::get_required<double>(j, "epsilon", where);
        return kind == "sgn_eps" ? PlatformFunction::sgn_eps(eps) : PlatformFunction::anti_sgn_eps(eps);
    }
    if (kind == "linear") {
        detail::check_keys(j, {"kind", "alpha"}, where);
        return PlatformFunction::linear(detail::get_required<double>(j, "alpha", where));
    }
    if (kind == "piecewise") {
        detail::check_keys(j, {"kind", "knots"}, where);
        const auto raw = detail::get_required<std::vector<std::vector<double>>>(j, "knots", where);
        std::vector<std::pair<double, double>> knots;
        for (const auto& k : raw) {
            if (k.size() != 2) throw Error(Errc::invalid_function, "each knot must be an [x, y] pair");
            knots.emplace_back(k[0], k[1]);
        }
        return PlatformFunction::piecewise(std::move(knots));
    }
    throw Error(Errc::invalid_function, "unknown function kind '" + kind + "'");
}

inline json to_json(const SystemParams& p) { return {{"a", p.a}, {"b", p.b}}; }

inline SystemParams params_from_json(const json& j) {
    detail::check_keys(j, {"a", "b"}, "params");
    SystemParams p{detail::get_or(j, "a", 1.0, "params"), detail::get_or(j, "b", 1.0, "params")};
    validate_params(p);
    return p;
}

inline json to_json(const IntegratorConfig& c) {
    json j{{"rel_tol", c.rel_tol},
           {"abs_tol", c.abs_tol},
           {"convergence_tol", c.convergence_tol},
           {"convergence_window", c.convergence_window},
           {"output_interval", c.output_interval},
           {"stop_on_convergence", c.stop_on_convergence},
           {"max_steps", c.max_steps}};
    j["max_time"] = c.max_time ? json(*c.max_time) : json(nullptr);
    return j;
}

inline IntegratorConfig integrator_from_json(const json& j) {
    const std::string w = "integrator";
    detail::check_keys(j,
                       {"rel_tol", "abs_tol", "max_time", "convergence_tol", "convergence_window", "output_interval",
                        "stop_on_convergence", "max_steps"},
                       w);
    IntegratorConfig c;
    c.rel_tol = detail::get_or(j, "rel_tol", c.rel_tol, w);
    c.abs_tol = detail::get_or(j, "abs_tol", c.abs_tol, w);
    if (j.contains("max_time") && !j.at("max_time").is_null()) c.max_time = detail::get_required<double>(j, "max_time", w);
    c.convergence_tol = detail::get_or(j, "convergence_tol", c.convergence_tol, w);
    c.convergence_window = detail::get_or(j, "convergence_window", c.convergence_window, w);
    c.output_interval = detail::get_or(j, "output_interval", c.output_interval, w);
    c.stop_on_convergence = detail::get_or(j, "stop_on_convergence", c.stop_on_convergence, w);
    c.max_steps = detail::get_or(j, "max_steps", c.max_steps, w);
    return c;
}

inline json to_json(const Topology& topo) {
    struct Visitor {
        json operator()(const TwoAgent&) const { return {{"kind", "two_agent"}}; }
        json operator()(const Complete& c) const { return {{"kind", "complete"}, {"n", c.n}}; }
        json operator()(const Graph& g) const {
            json edges = json::array();
            for (std::size_t i = 0; i < g.size(); ++i)
                for (std::size_t j : g.neighbors(i))
                    if (i < j) edges.push_back({i, j});
            json out{{"kind", "graph"}, {"n", g.size()}, {"edges", edges}};
            if (g.has_blocks()) out["blocks"] = g.blocks();
            return out;
        }
    };
    return std::visit(Visitor{}, topo);
}

inline Topology topology_from_json(const json& j) {
    const std::string w = "topology";
    const auto kind = detail::get_required<std::string>(j, "kind", w);
    if (kind == "two_agent") {
        detail::check_keys(j, {"kind"}, w);
        return TwoAgent{};
    }
    if (kind == "complete") {
        detail::check_keys(j, {"kind", "n"}, w);
        Topology t = Complete{detail::get_required<std::size_t>(j, "n", w)};
        validate_topology(t);
        return t;
    }
    if (kind == "graph") {
        detail::check_keys(j, {"kind", "n", "edges", "adjacency", "blocks"}, w);
        auto blocks = detail::get_or(j, "blocks", std::vector<int>{}, w);
        if (j.contains("adjacency"))
            return Graph::from_adjacency(detail::get_required<std::vector<std::vector<int>>>(j, "adjacency", w),
                                         std::move(blocks));
        const auto raw = detail::get_required<std::vector<std::vector<std::size_t>>>(j, "edges", w);
        std::vector<std::pair<std::size_t, std::size_t>> edges;
        for (const auto& e : raw) {
            if (e.size() != 2) throw Error(Errc::invalid_topology, "each edge must be an [i, j] pair");
            edges.emplace_back(e[0], e[1]);
        }
        return Graph::from_edges(detail::get_required<std::size_t>(j, "n", w), edges, std::move(blocks));
    }
    throw Error(Errc::invalid_topology, "unknown topology kind '" + kind + "'");
}

inline json to_json(const SbmConfig& c) {
    return {{"n", c.n},         {"p", c.p},         {"q", c.q},           {"delta", c.delta},
            {"seed", c.seed},   {"x_left", c.x_left}, {"x_right", c.x_right}};
}

inline SbmConfig sbm_config_from_json(const json& j) {
    const std::string w = "sbm";
    detail::check_keys(j, {"n", "p", "q", "delta", "seed", "x_left", "x_right"}, w);
    SbmConfig c;
    c.n = detail::get_or(j, "n", c.n, w);
    c.p = detail::get_or(j, "p", c.p, w);
    c.q = detail::get_or(j, "q", c.q, w);
    c.delta = detail::get_or(j, "delta", c.delta, w);
    c.seed = detail::get_or(j, "seed", c.seed, w);
    c.x_left = detail::get_or(j, "x_left", c.x_left, w);
    c.x_right = detail::get_or(j, "x_right", c.x_right, w);
    validate_sbm(c);
    return c;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline json to_json(const PropertyReport& r) {
    return {{"lipschitz_estimate", detail::number(r.lipschitz_estimate)},
            {"symmetric", r.symmetric},
            {"sign_preserving", r.sign_preserving},
            {"bounded", r.bounded},
            {"feasible", r.feasible},
            {"monotone_increasing", r.monotone_increasing},
            {"f_at_zero", r.f_at_zero},
            {"max_symmetry_error", r.max_symmetry_error}};
}

inline Classification classification_from_string(const std::string& s) {
    for (auto c : {Classification::StrongConsensus, Classification::Consensus, Classification::PersistentDisagreement,
                   Classification::NotEquilibrium})
        if (s == to_string(c)) return c;
    throw Error(Errc::invalid_argument, "unknown classification '" + s + "'");
}

inline json to_json(const EquilibriumReport& r) {
    return {{"classification", to_string(r.classification)},
            {"residual", r.residual},
            {"state", r.state.x},
            {"t", r.state.t}};
}

inline EquilibriumReport report_from_json(const json& j) {
    const std::string w = "equilibrium report";
    detail::check_keys(j, {"classification", "residual", "state", "t", "band_interior", "family", "k", "label"}, w);
    EquilibriumReport r;
    r.classification = classification_from_string(detail::get_required<std::string>(j, "classification", w));
    r.residual = detail::get_required<double>(j, "residual", w);
    r.state.x = detail::get_required<std::vector<double>>(j, "state", w);
    r.state.t = detail::get_or(j, "t", 0.0, w);
    validate_opinions(r.state.x);
    return r;
}

inline json to_json(const OracleEquilibrium& e) {
    json j = to_json(e.report);
    j["band_interior"] = e.band_interior;
    return j;
}

inline json to_json(const PdWitness& w) {
    return {{"z", w.z}, {"y", w.y}, {"grid_z", w.grid_z}, {"grid_y", w.grid_y},
            {"boundary_degenerate", w.boundary_degenerate}};
}

inline Verdict verdict_from_string(const std::string& s) {
    for (auto v : {Verdict::Polarizing, Verdict::Harmonizing, Verdict::Inconclusive})
        if (s == to_string(v)) return v;
    throw Error(Errc::invalid_argument, "unknown verdict '" + s + "'");
}

inline json to_json(const PdCertificate& c) {
    json j{{"verdict", to_string(c.verdict)},
           {"certified_margin", c.certified_margin},
           {"cells_checked", c.cells_checked},
           {"cells_certified", c.cells_certified},
           {"unresolved_cells", c.unresolved_cells},
           {"excluded_radius", c.excluded_radius},
           {"grid_resolution", c.grid_resolution},
           {"suggested_resolution", c.suggested_resolution}};
    j["witness"] = c.witness ? to_json(*c.witness) : json(nullptr);
    return j;
}

inline PdCertificate certificate_from_json(const json& j) {
    const std::string w = "certificate";
    detail::check_keys(j,
                       {"verdict", "certified_margin", "cells_checked", "cells_certified", "unresolved_cells",
                        "excluded_radius", "grid_resolution", "suggested_resolution", "witness", "function",
                        "params", "properties"},
                       w);
    PdCertificate c;
    c.verdict = verdict_from_string(detail::get_required<std::string>(j, "verdict", w));
    c.certified_margin = detail::get_required<double>(j, "certified_margin", w);
    c.cells_checked = detail::get_required<std::size_t>(j, "cells_checked", w);
    c.cells_certified = detail::get_required<std::size_t>(j, "cells_certified", w);
    c.unresolved_cells = detail::get_required<std::size_t>(j, "unresolved_cells", w);
    c.excluded_radius = detail::get_required<double>(j, "excluded_radius", w);
    c.grid_resolution = detail::get_required<int>(j, "grid_resolution", w);
    c.suggested_resolution = detail::get_required<int>(j, "suggested_resolution", w);
    if (j.contains("witness") && !j.at("witness").is_null()) {
        const auto& wj = j.at("witness");
        detail::check_keys(wj, {"z", "y", "grid_z", "grid_y", "boundary_degenerate"}, "witness");
        c.witness = PdWitness{wj.at("z").get<double>(), wj.at("y").get<double>(), wj.at("grid_z").get<double>(),
                              wj.at("grid_y").get<double>(), wj.at("boundary_degenerate").get<bool>()};
    }
    if ((c.verdict == Verdict::Polarizing) != c.witness.has_value())
        throw Error(Errc::invalid_argument, "certificate witness must be present exactly for polarizing verdicts");
    return c;
}

inline json to_json(const FamilyState& s) {
    return {{"family", to_string(s.family)}, {"k", s.k}, {"state", s.x}};
}

inline json to_json(const CompleteAudit& a) {
    json entries = json::array();
    for (const auto& e : a.entries) {
        json j = to_json(e.closed_form);
        j["residual"] = e.residual;
        j["verified"] = e.verified;
        j["oracle_match"] = e.oracle_match;
        j["rescaled_state"] = e.rescaled;
        j["rescaled_residual"] = e.rescaled_residual;
        j["rescaled_oracle_match"] = e.rescaled_oracle_match;
        entries.push_back(std::move(j));
    }
    json families = json::array();
    for (const auto& f : a.families)
        families.push_back({{"family", to_string(f.family)},
                            {"members", f.members},
                            {"verified", f.verified},
                            {"oracle_matched", f.oracle_matched},
                            {"rescaled_matched", f.rescaled_matched},
                            {"status", f.status}});
    return {{"n", a.n},
            {"params", to_json(a.params)},
            {"epsilon", a.epsilon},
            {"oracle_states", a.oracle_states},
            {"oracle_band_interior", a.oracle_band_interior},
            {"entries", entries},
            {"families", families},
            {"unexplained_oracle_states", a.unexplained_oracle_states}};
}

inline json to_json(const SbmExperimentResult& r) {
    const auto& c = r.concentration;
    return {{"concentration", c.in_event},
            {"max_dev_left", detail::number(r.max_dev_left)},
            {"max_dev_right", detail::number(r.max_dev_right)},
            {"envelope_contained", r.envelope_contained},
            {"e_L", detail::number(r.e_left)},
            {"e_R", detail::number(r.e_right)},
            {"seed", r.config.seed},
            {"n", r.config.n},
            {"p", r.config.p},
            {"q", r.config.q},
            {"delta", r.config.delta},
            {"t_eval", r.t_eval},
            {"containment_status", to_string(r.containment_status)},
            {"envelope_ordering_holds", r.ordering_holds},
            {"worst_envelope_gap", r.worst_envelope_gap},
            {"final_envelope", r.final_envelope},
            {"a1", r.rates.a1},
            {"a2", r.rates.a2},
            {"beta", r.rates.beta},
            {"concentration_failing_agents", c.failing_agents},
            {"within_degree_range", {c.within_min, c.within_max}},
            {"cross_degree_range", {c.cross_min, c.cross_max}},
            {"within_band", {c.within_lo, c.within_hi}},
            {"cross_band", {c.cross_lo, c.cross_hi}},
            {"concentration_note", c.note},
            {"meanfield_hypothesis", r.meanfield.hypothesis_holds ? "holds" : "violated"},
            {"meanfield_reference", {detail::number(r.meanfield.integrated.first),
                                     detail::number(r.meanfield.integrated.second)}},
            {"output_samples", r.output_samples},
            {"warnings", r.warnings}};
}

/// Parses the core fields of a serialized SBM result; extra keys are ignored.
inline SbmExperimentResult sbm_result_from_json(const json& j) {
    const std::string w = "sbm result";
    SbmExperimentResult r;
    r.concentration.in_event = detail::get_required<bool>(j, "concentration", w);
    r.max_dev_left = detail::number_from(j.at("max_dev_left"));
    r.max_dev_right = detail::number_from(j.at("max_dev_right"));
    r.envelope_contained = detail::get_required<bool>(j, "envelope_contained", w);
    r.e_left = detail::number_from(j.at("e_L"));
    r.e_right = detail::number_from(j.at("e_R"));
    r.config.seed = detail::get_required<std::uint64_t>(j, "seed", w);
    r.config.n = detail::get_required<std::size_t>(j, "n", w);
    r.config.p = detail::get_required<double>(j, "p", w);
    r.config.q = detail::get_required<double>(j, "q", w);
    r.config.delta = detail::get_required<double>(j, "delta", w);
    r.t_eval = detail::get_required<double>(j, "t_eval", w);
    return r;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Header t,x_0,...,x_{n-1}; `stride` > 1 keeps every stride-th sample plus the last.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj, std::size_t stride = 1) {
    if (traj.samples.empty()) return;
    const std::size_t n = traj.samples.front().x.size();
    os << "t";
    for (std::size_t i = 0; i < n; ++i) os << ",x_" << i;
    os << '\n';
    stride = std::max<std::size_t>(stride, 1);
    for (std::size_t s = 0; s < traj.samples.size(); ++s) {
        if (s % stride != 0 && s + 1 != traj.samples.size()) continue;
        const auto& smp = traj.samples[s];
        os << format_double(smp.t);
        for (double v : smp.x) os << ',' << format_double(v);
        os << '\n';
    }
}

inline void write_vector_field_csv(std::ostream& os, const std::vector<VectorFieldPoint>& grid) {
    os << "x1,x2,dx1,dx2\n";
    for (const auto& p : grid)
        os << format_double(p.x1) << ',' << format_double(p.x2) << ',' << format_double(p.dx1) << ','
           << format_double(p.dx2) << '\n';
}

} // namespace opinionlab
