#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dynamics.hpp"
#include "errors.hpp"
#include "model.hpp"

namespace opinionlab {

struct SbmConfig {
    /// Agents per block; the graph has 2n agents, left block first.
    std::size_t n = 100;
    double p = 0.5;
    double q = 0.5;
    double delta = 0.1;
    std::uint64_t seed = 0;
    std::array<double, 2> x_left{-1.0, -0.1};
    std::array<double, 2> x_right{0.1, 1.0};
};

/// Throws on invalid configurations; returns advisory warnings for configs
/// outside the dense regime (p n or q n not comfortably above ln n).
inline std::vector<std::string> validate_sbm(const SbmConfig& c) {
    if (c.n < 1) throw Error(Errc::invalid_argument, "sbm n must be >= 1");
    if (!(c.p >= 0.0 && c.p <= 1.0) || !(c.q >= 0.0 && c.q <= 1.0))
        throw Error(Errc::invalid_argument, "sbm p and q must lie in [0, 1]");
    if (!(c.delta > 0.0 && c.delta < 1.0)) throw Error(Errc::invalid_argument, "sbm delta must lie in (0, 1)");
    const auto& l = c.x_left;
    const auto& r = c.x_right;
    if (!(l[0] >= -1.0 && l[0] <= l[1] && l[1] <= 0.0))
        throw Error(Errc::domain_error, "x_left range must be an interval inside [-1, 0]");
    if (!(r[0] >= 0.0 && r[0] <= r[1] && r[1] <= 1.0))
        throw Error(Errc::domain_error, "x_right range must be an interval inside [0, 1]");

    std::vector<std::string> warnings;
    const double nn = static_cast<double>(c.n);
    const double ln = std::log(std::max(nn, 2.0));
    if (c.p * nn <= ln) warnings.push_back("p*n = " + std::to_string(c.p * nn) + " is not above ln(n) = " +
                                           std::to_string(ln) + "; degree concentration is unlikely");
    if (c.q * nn <= ln) warnings.push_back("q*n = " + std::to_string(c.q * nn) + " is not above ln(n) = " +
                                           std::to_string(ln) + "; degree concentration is unlikely");
    return warnings;
}

namespace detail {

/// 53-bit uniform on [0,1) that is identical on every platform, unlike
/// std::uniform_real_distribution.
inline double unit_uniform(std::mt19937_64& eng) { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }

inline constexpr std::uint64_t kOpinionStream = 0x9e3779b97f4a7c15ULL;

} // namespace detail

inline int block_of(std::size_t i, std::size_t n) { return i < n ? 0 : 1; }

/// Two-block SBM with blocks labelled 0 (left, agents 0..n-1) and 1 (right).
inline Graph sample_adjacency(const SbmConfig& cfg) {
    validate_sbm(cfg);
    const std::size_t total = 2 * cfg.n;
    std::mt19937_64 eng(cfg.seed);
    std::vector<std::vector<std::size_t>> lists(total);
    for (std::size_t i = 0; i < total; ++i) {
        for (std::size_t j = i + 1; j < total; ++j) {
            const double prob = block_of(i, cfg.n) == block_of(j, cfg.n) ? cfg.p : cfg.q;
            if (detail::unit_uniform(eng) < prob) {
                lists[i].push_back(j);
                lists[j].push_back(i);
            }
        }
    }
    std::vector<int> blocks(total);
    for (std::size_t i = 0; i < total; ++i) blocks[i] = block_of(i, cfg.n);
    return Graph(lists, std::move(blocks));
}

struct ConcentrationReport {
    bool in_event = false;
    std::size_t failing_agents = 0;
    std::size_t within_min = 0, within_max = 0;
    std::size_t cross_min = 0, cross_max = 0;
    double within_lo = 0.0, within_hi = 0.0;
    double cross_lo = 0.0, cross_hi = 0.0;
    /// Within-block degrees are Binomial(n-1, p), so the band centre pn sits
    /// p above the mean.
    std::string note;
};

/// Membership in the event that every agent's within-block degree lies in
/// [(1-d)pn, (1+d)pn] and cross-block degree in [(1-d)qn, (1+d)qn].
inline ConcentrationReport check_concentration(const Graph& g, const SbmConfig& cfg) {
    if (!g.has_blocks()) throw Error(Errc::invalid_topology, "concentration check needs block labels");
    const double nn = static_cast<double>(cfg.n);
    ConcentrationReport r;
    r.within_lo = (1.0 - cfg.delta) * cfg.p * nn;
    r.within_hi = (1.0 + cfg.delta) * cfg.p * nn;
    r.cross_lo = (1.0 - cfg.delta) * cfg.q * nn;
    r.cross_hi = (1.0 + cfg.delta) * cfg.q * nn;
    r.within_min = r.cross_min = g.size();
    const auto& blocks = g.blocks();
    for (std::size_t i = 0; i < g.size(); ++i) {
        std::size_t within = 0;
        for (std::size_t j : g.neighbors(i)) within += blocks[j] == blocks[i];
        const std::size_t cross = g.degree(i) - within;
        r.within_min = std::min(r.within_min, within);
        r.within_max = std::max(r.within_max, within);
        r.cross_min = std::min(r.cross_min, cross);
        r.cross_max = std::max(r.cross_max, cross);
        const double w = static_cast<double>(within), c = static_cast<double>(cross);
        if (w < r.within_lo || w > r.within_hi || c < r.cross_lo || c > r.cross_hi) ++r.failing_agents;
    }
    r.in_event = r.failing_agents == 0;
    r.note = "within-block band uses p*n although the expected within-block degree is p*(n-1)";
    return r;
}

struct EnvelopeRates {
    double a1 = 0.0;
    double a2 = 0.0;
    double beta = 0.0;
};

inline EnvelopeRates envelope_rates(const SbmConfig& cfg, const SystemParams& params) {
    if (!(cfg.p + cfg.q > 0.0)) throw Error(Errc::invalid_argument, "p + q must be > 0");
    const double beta = cfg.q / (cfg.p + cfg.q);
    const double d = cfg.delta;
    return {params.a * (1.0 - d) * beta / (1.0 + d), params.a * (1.0 + d) * beta / (1.0 - d), beta};
}

/// Envelope components in trajectory order.
enum EnvelopeIndex : std::size_t { kUpperLeft = 0, kLowerLeft = 1, kUpperRight = 2, kLowerRight = 3 };

inline void require_monotone(const PlatformFunction& f) {
    const auto& props = f.properties();
    if (!props.monotone_increasing)
        throw Error(Errc::monotonicity_violation,
                    kind_name(f) + std::string(" has decreasing segments; the envelope bounds need increasing f"));
    if (!props.feasible) throw Error(Errc::invalid_function, kind_name(f) + std::string(" is not feasible"));
}

/// Integrates the upper/lower block envelopes (components ordered as
/// EnvelopeIndex), started from the ends of the initial opinion ranges.
inline Trajectory integrate_envelopes(const SbmConfig& cfg, const PlatformFunction& f, const SystemParams& params,
                                      const IntegratorConfig& icfg = {}) {
    validate_params(params);
    validate_sbm(cfg);
    require_monotone(f);
    const auto [a1, a2, beta] = envelope_rates(cfg, params);
    (void)beta;
    const double b = params.b;
    auto system = [&](std::span<const double> x, std::span<double> dx) {
        dx[kUpperLeft] = a2 * (x[kUpperRight] - x[kUpperLeft]) + b * (f(x[kUpperLeft]) - x[kUpperLeft]);
        dx[kLowerLeft] = a1 * (x[kLowerRight] - x[kLowerLeft]) + b * (f(x[kLowerLeft]) - x[kLowerLeft]);
        dx[kUpperRight] = a1 * (x[kUpperLeft] - x[kUpperRight]) + b * (f(x[kUpperRight]) - x[kUpperRight]);
        dx[kLowerRight] = a2 * (x[kLowerLeft] - x[kLowerRight]) + b * (f(x[kLowerRight]) - x[kLowerRight]);
    };
    std::vector<double> x0{cfg.x_left[1], cfg.x_left[0], cfg.x_right[1], cfg.x_right[0]};
    return integrate_ode(system, std::move(x0), 0.0, icfg, icfg.max_time.value_or(default_max_time(params)));
}

/// Closed-form equilibrium of the two-agent system with coupling a*beta:
/// e = ((ab(c+d) + b d)/(b + 2ab), (ab(c+d) + b c)/(b + 2ab)) with
/// c = f(x_right), d = f(x_left), writing ab for a*beta.
inline std::pair<double, double> meanfield_equilibrium(const PlatformFunction& f, const SystemParams& params,
                                                       double beta, double x_left, double x_right) {
    validate_params(params);
    if (!(beta > 0.0 && beta < 1.0)) throw Error(Errc::invalid_argument, "beta must lie in (0, 1)");
    if (!(x_left < 0.0 && 0.0 < x_right)) throw Error(Errc::invalid_argument, "need x_left < 0 < x_right");
    const double c = evaluate(f, x_right), d = evaluate(f, x_left);
    const double ab = params.a * beta, b = params.b;
    return {(ab * (c + d) + b * d) / (b + 2.0 * ab), (ab * (c + d) + b * c) / (b + 2.0 * ab)};
}

struct MeanfieldReference {
    std::pair<double, double> closed_form;
    /// Limit of the two-agent system with coupling a*beta started at (x_left, x_right).
    std::pair<double, double> integrated;
    bool converged = false;
    /// The integrated limit matches the closed form within `tol`.
    bool hypothesis_holds = false;
};

inline MeanfieldReference meanfield_reference(const PlatformFunction& f, const SystemParams& params, double beta,
                                              double x_left, double x_right, double tol = 1e-6) {
    MeanfieldReference ref;
    ref.closed_form = meanfield_equilibrium(f, params, beta, x_left, x_right);
    const SystemParams coupled{params.a * beta, params.b};
    IntegratorConfig icfg;
    icfg.max_time = 2000.0 / std::min(coupled.a, coupled.b);
    const auto traj = integrate(OpinionState{{x_left, x_right}, 0.0}, TwoAgent{}, f, coupled, icfg);
    ref.integrated = {traj.final_sample().x[0], traj.final_sample().x[1]};
    ref.converged = traj.converged;
    ref.hypothesis_holds = traj.converged && std::abs(ref.integrated.first - ref.closed_form.first) <= tol &&
                           std::abs(ref.integrated.second - ref.closed_form.second) <= tol;
    return ref;
}

/// Left agents uniform on x_left, right agents uniform on x_right, drawn
/// from a stream independent of the adjacency stream.
inline std::vector<double> sbm_initial_opinions(const SbmConfig& cfg) {
    validate_sbm(cfg);
    std::mt19937_64 eng(cfg.seed ^ detail::kOpinionStream);
    std::vector<double> x(2 * cfg.n);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto& r = i < cfg.n ? cfg.x_left : cfg.x_right;
        x[i] = r[0] + (r[1] - r[0]) * detail::unit_uniform(eng);
    }
    return x;
}

enum class ContainmentStatus { Contained, Violated, Unsupported };

inline const char* to_string(ContainmentStatus s) noexcept {
    switch (s) {
    case ContainmentStatus::Contained: return "contained";
    case ContainmentStatus::Violated: return "violated";
    case ContainmentStatus::Unsupported: return "unsupported";
    }
    return "unknown";
}

struct SbmExperimentResult {
    SbmConfig config;
    double t_eval = 0.0;
    ConcentrationReport concentration;
    EnvelopeRates rates;
    double e_left = 0.0, e_right = 0.0;
    double max_dev_left = 0.0, max_dev_right = 0.0;
    /// Every agent sample lies inside its block envelope (within 1e-7).
    bool envelope_contained = false;
    /// Upper-left envelope stayed strictly below lower-right at every sample.
    bool ordering_holds = false;
    /// Contained/Violated when the ordering holds, Unsupported otherwise.
    ContainmentStatus containment_status = ContainmentStatus::Unsupported;
    double worst_envelope_gap = 0.0;
    MeanfieldReference meanfield;
    std::array<double, 4> final_envelope{};
    std::size_t output_samples = 0;
    std::vector<std::string> warnings;
};

inline constexpr double kContainmentTol = 1e-7;

/// Samples one SBM graph and initial opinions, integrates the 2n-agent
/// system and its envelopes on a shared output grid to t_eval, and reports
/// block deviations from the mean-field equilibrium (evaluated at the
/// midpoints of the initial ranges) and envelope containment.
inline SbmExperimentResult run_sbm_experiment(const SbmConfig& cfg, const PlatformFunction& f,
                                              const SystemParams& params, const IntegratorConfig& icfg,
                                              double t_eval) {
    validate_params(params);
    if (!(t_eval > 0.0) || !std::isfinite(t_eval)) throw Error(Errc::invalid_argument, "t_eval must be > 0");
    SbmExperimentResult res;
    res.config = cfg;
    res.t_eval = t_eval;
    res.warnings = validate_sbm(cfg);
    require_monotone(f);

    const Topology topo = sample_adjacency(cfg);
    res.concentration = check_concentration(std::get<Graph>(topo), cfg);
    res.rates = envelope_rates(cfg, params);

    const double xl = 0.5 * (cfg.x_left[0] + cfg.x_left[1]);
    const double xr = 0.5 * (cfg.x_right[0] + cfg.x_right[1]);
    if (xl < 0.0 && xr > 0.0 && res.rates.beta > 0.0 && res.rates.beta < 1.0) {
        res.meanfield = meanfield_reference(f, params, res.rates.beta, xl, xr);
        std::tie(res.e_left, res.e_right) = res.meanfield.closed_form;
    } else {
        res.warnings.push_back("mean-field equilibrium undefined for these ranges or beta");
        res.e_left = res.e_right = std::nan("");
    }

    IntegratorConfig run = icfg;
    run.max_time = t_eval;
    run.stop_on_convergence = false;
    if (run.output_interval <= 0.0) run.output_interval = t_eval / 200.0;

    const auto traj = integrate(OpinionState{sbm_initial_opinions(cfg), 0.0}, topo, f, params, run);
    const auto env = integrate_envelopes(cfg, f, params, run);
    if (traj.samples.size() != env.samples.size())
        throw Error(Errc::invalid_argument, "agent and envelope output grids differ");
    res.output_samples = traj.samples.size();

    const std::size_t n = cfg.n;
    res.envelope_contained = true;
    res.ordering_holds = true;
    for (std::size_t s = 0; s < traj.samples.size(); ++s) {
        const auto& x = traj.samples[s].x;
        const auto& e = env.samples[s].x;
        if (!(e[kUpperLeft] < e[kLowerRight])) res.ordering_holds = false;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double hi = i < n ? e[kUpperLeft] : e[kUpperRight];
            const double lo = i < n ? e[kLowerLeft] : e[kLowerRight];
            const double gap = std::max(x[i] - hi, lo - x[i]);
            res.worst_envelope_gap = std::max(res.worst_envelope_gap, gap);
            if (gap > kContainmentTol) res.envelope_contained = false;
        }
    }
    res.containment_status = !res.ordering_holds         ? ContainmentStatus::Unsupported
                             : res.envelope_contained ? ContainmentStatus::Contained
                                                      : ContainmentStatus::Violated;
    for (std::size_t k = 0; k < 4; ++k) res.final_envelope[k] = env.final_sample().x[k];

    const auto& xf = traj.final_sample().x;
    for (std::size_t i = 0; i < xf.size(); ++i) {
        if (i < n)
            res.max_dev_left = std::max(res.max_dev_left, std::abs(xf[i] - res.e_left));
        else
            res.max_dev_right = std::max(res.max_dev_right, std::abs(xf[i] - res.e_right));
    }
    return res;
}

} // namespace opinionlab
