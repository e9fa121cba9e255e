#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "errors.hpp"
#include "model.hpp"

namespace opinionlab {

// ---------------------------------------------------------------------------
// Right-hand side
// ---------------------------------------------------------------------------

/// Writes dx/dt into `out`. No allocation, no validation; callers guarantee
/// that `x.size()` matches the topology.
inline void rhs_into(std::span<const double> x, const Topology& topo, const PlatformFunction& f,
                     const SystemParams& p, std::span<double> out) {
    const std::size_t n = x.size();
    if (std::holds_alternative<TwoAgent>(topo)) {
        out[0] = p.a * (x[1] - x[0]) + p.b * (f(x[0]) - x[0]);
        out[1] = p.a * (x[0] - x[1]) + p.b * (f(x[1]) - x[1]);
        return;
    }
    if (std::holds_alternative<Complete>(topo)) {
        double total = 0.0;
        for (double v : x) total += v;
        for (std::size_t i = 0; i < n; ++i) {
            const double mean = neighbor_mean(x, topo, i, total);
            out[i] = p.a * (mean - x[i]) + p.b * (f(x[i]) - x[i]);
        }
        return;
    }
    const auto& g = std::get<Graph>(topo);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j : g.neighbors(i)) sum += x[j];
        const double mean = sum / static_cast<double>(g.degree(i));
        out[i] = p.a * (mean - x[i]) + p.b * (f(x[i]) - x[i]);
    }
}

inline void check_dimension(std::size_t n, const Topology& topo) {
    validate_topology(topo);
    if (n != agent_count(topo))
        throw Error(Errc::dimension_mismatch, "state has " + std::to_string(n) + " agents, topology has " +
                                                  std::to_string(agent_count(topo)));
}

inline std::vector<double> rhs(const OpinionState& state, const Topology& topo, const PlatformFunction& f,
                               const SystemParams& params) {
    check_dimension(state.x.size(), topo);
    std::vector<double> out(state.x.size());
    rhs_into(state.x, topo, f, params, out);
    return out;
}

inline double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double e : v) m = std::max(m, std::abs(e));
    return m;
}

// ---------------------------------------------------------------------------
// Integrator
// ---------------------------------------------------------------------------

struct IntegratorConfig {
    double rel_tol = 1e-9;
    double abs_tol = 1e-11;
    /// Unset means 200 / min(a, b).
    std::optional<double> max_time;
    double convergence_tol = 1e-9;
    double convergence_window = 1.0;
    /// 0 records every accepted step; > 0 records on a fixed time stride
    /// using the method's dense output.
    double output_interval = 0.0;
    bool stop_on_convergence = true;
    std::size_t max_steps = 50'000'000;
};

inline double default_max_time(const SystemParams& p) { return 200.0 / std::min(p.a, p.b); }

inline void validate_integrator(const IntegratorConfig& c, double max_time) {
    auto unit = [](double v, const char* name) {
        if (!(v > 0.0 && v < 1.0)) throw Error(Errc::invalid_argument, std::string(name) + " must lie in (0, 1)");
    };
    unit(c.rel_tol, "rel_tol");
    unit(c.abs_tol, "abs_tol");
    if (!(max_time > 0.0) || !std::isfinite(max_time))
        throw Error(Errc::invalid_argument, "max_time must be finite and > 0");
    if (!(c.convergence_tol > 0.0)) throw Error(Errc::invalid_argument, "convergence_tol must be > 0");
    if (!(c.convergence_window > 0.0)) throw Error(Errc::invalid_argument, "convergence_window must be > 0");
    if (c.stop_on_convergence && !(c.convergence_window < max_time))
        throw Error(Errc::invalid_argument, "convergence_window must be shorter than max_time");
    if (!(c.output_interval >= 0.0)) throw Error(Errc::invalid_argument, "output_interval must be >= 0");
}

struct Sample {
    double t;
    std::vector<double> x;
};

struct Trajectory {
    std::vector<Sample> samples;
    bool converged = false;
    /// Infinity norm of the right-hand side at the last sample.
    double final_residual = 0.0;
    /// Largest amount by which any pre-clamp state left [-1, 1].
    double max_excursion = 0.0;
    /// Clamps where the excursion exceeded abs_tol.
    std::size_t clamp_events = 0;
    /// Largest overshoot of the dense-output interpolant between two in-domain
    /// steps; clamped away and kept apart from max_excursion.
    double max_dense_excursion = 0.0;
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;

    const Sample& final_sample() const { return samples.back(); }
};

namespace detail {

// Dormand-Prince 5(4) tableau and Hairer's dense-output coefficients.
struct Dopri5 {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                            a76 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                            d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                            d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
};

inline double clamp_into_domain(std::vector<double>& y, double abs_tol, Trajectory& traj) {
    bool changed = false;
    for (double& v : y) {
        const double excess = std::abs(v) - 1.0;
        if (excess > 0.0) {
            traj.max_excursion = std::max(traj.max_excursion, excess);
            if (excess > abs_tol) ++traj.clamp_events;
            v = std::clamp(v, -1.0, 1.0);
            changed = true;
        }
    }
    return changed;
}

} // namespace detail

/// Adaptive Dormand-Prince 5(4) integration of dx/dt = rhs(x) on [-1,1]^n,
/// starting at time t0. `rhs` is callable as rhs(span<const double>, span<double>).
/// Stops once the residual stays below `convergence_tol` for `convergence_window`
/// (when `stop_on_convergence`) or at `max_time`.
template <class Rhs>
Trajectory integrate_ode(Rhs&& rhs, std::vector<double> y, double t0, const IntegratorConfig& cfg, double max_time) {
    using T = detail::Dopri5;
    validate_integrator(cfg, max_time);
    const std::size_t n = y.size();
    const double t_end = t0 + max_time;

    Trajectory traj;
    detail::clamp_into_domain(y, cfg.abs_tol, traj);

    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ys(n), ynew(n), err(n);
    std::vector<double> r1(n), r2(n), r3(n), r4(n), r5(n);

    rhs(std::span<const double>(y), std::span<double>(k1));
    double residual = inf_norm(k1);

    auto scaled_rms = [&](const std::vector<double>& v, const std::vector<double>& ya, const std::vector<double>& yb) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(ya[i]), std::abs(yb[i]));
            const double q = v[i] / sc;
            s += q * q;
        }
        return std::sqrt(s / static_cast<double>(n));
    };

    // Hairer's starting step heuristic.
    double h;
    {
        const double d0 = scaled_rms(y, y, y);
        const double d1 = scaled_rms(k1, y, y);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, max_time);
        for (std::size_t i = 0; i < n; ++i) ys[i] = y[i] + h0 * k1[i];
        rhs(std::span<const double>(ys), std::span<double>(k2));
        for (std::size_t i = 0; i < n; ++i) err[i] = k2[i] - k1[i];
        const double d2 = scaled_rms(err, y, y) / h0;
        const double dm = std::max(d1, d2);
        const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 1.0 / 5.0);
        h = std::min({100.0 * h0, h1, max_time});
    }

    double t = t0;
    const double stride = cfg.output_interval;
    std::size_t next_output = 1;
    traj.samples.push_back({t, y});

    double below_since = std::numeric_limits<double>::quiet_NaN();
    if (residual < cfg.convergence_tol) below_since = t;

    bool reject_previous = false;
    while (true) {
        if (t_end - t <= 1e-13 * std::max(1.0, std::abs(t_end))) break;
        if (traj.accepted_steps + traj.rejected_steps >= cfg.max_steps)
            throw Error(Errc::step_size_underflow, "step budget exhausted at t = " + std::to_string(t));
        // Stretch a step that would otherwise leave a sliver before t_end.
        const bool last = t + 1.01 * h >= t_end;
        if (last) h = t_end - t;
        if (h < 1e-14 * std::max(1.0, std::abs(t)))
            throw Error(Errc::step_size_underflow, "step size " + std::to_string(h) + " at t = " + std::to_string(t));

        for (std::size_t i = 0; i < n; ++i) ys[i] = y[i] + h * T::a21 * k1[i];
        rhs(std::span<const double>(ys), std::span<double>(k2));
        for (std::size_t i = 0; i < n; ++i) ys[i] = y[i] + h * (T::a31 * k1[i] + T::a32 * k2[i]);
        rhs(std::span<const double>(ys), std::span<double>(k3));
        for (std::size_t i = 0; i < n; ++i) ys[i] = y[i] + h * (T::a41 * k1[i] + T::a42 * k2[i] + T::a43 * k3[i]);
        rhs(std::span<const double>(ys), std::span<double>(k4));
        for (std::size_t i = 0; i < n; ++i)
            ys[i] = y[i] + h * (T::a51 * k1[i] + T::a52 * k2[i] + T::a53 * k3[i] + T::a54 * k4[i]);
        rhs(std::span<const double>(ys), std::span<double>(k5));
        for (std::size_t i = 0; i < n; ++i)
            ys[i] = y[i] + h * (T::a61 * k1[i] + T::a62 * k2[i] + T::a63 * k3[i] + T::a64 * k4[i] + T::a65 * k5[i]);
        rhs(std::span<const double>(ys), std::span<double>(k6));
        for (std::size_t i = 0; i < n; ++i)
            ynew[i] = y[i] + h * (T::a71 * k1[i] + T::a73 * k3[i] + T::a74 * k4[i] + T::a75 * k5[i] + T::a76 * k6[i]);
        rhs(std::span<const double>(ynew), std::span<double>(k7));
        for (std::size_t i = 0; i < n; ++i)
            err[i] = h * (T::e1 * k1[i] + T::e3 * k3[i] + T::e4 * k4[i] + T::e5 * k5[i] + T::e6 * k6[i] + T::e7 * k7[i]);

        const double e = scaled_rms(err, y, ynew);
        if (!std::isfinite(e))
            throw Error(Errc::step_size_underflow, "non-finite error estimate at t = " + std::to_string(t));

        if (e > 1.0) {
            ++traj.rejected_steps;
            h *= std::max(0.2, 0.9 * std::pow(e, -0.2));
            reject_previous = true;
            continue;
        }
        // The exact flow never leaves the cube, so a step that does is inaccurate.
        const double bound = 1.0 + cfg.abs_tol;
        if (std::any_of(ynew.begin(), ynew.end(), [bound](double v) { return std::abs(v) > bound; })) {
            ++traj.rejected_steps;
            h *= 0.5;
            reject_previous = true;
            continue;
        }

        // accepted
        ++traj.accepted_steps;
        const double t_new = last ? t_end : t + h;
        if (stride > 0.0) {
            for (std::size_t i = 0; i < n; ++i) {
                const double diff = ynew[i] - y[i];
                const double bspl = h * k1[i] - diff;
                r1[i] = y[i];
                r2[i] = diff;
                r3[i] = bspl;
                r4[i] = diff - h * k7[i] - bspl;
                r5[i] = h * (T::d1 * k1[i] + T::d3 * k3[i] + T::d4 * k4[i] + T::d5 * k5[i] + T::d6 * k6[i] +
                             T::d7 * k7[i]);
            }
            while (true) {
                const double to = t0 + static_cast<double>(next_output) * stride;
                if (to > t_new || to > t_end) break;
                const double th = (to - t) / h;
                const double th1 = 1.0 - th;
                std::vector<double> yo(n);
                for (std::size_t i = 0; i < n; ++i)
                    yo[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
                for (double& v : yo) {
                    traj.max_dense_excursion = std::max(traj.max_dense_excursion, std::abs(v) - 1.0);
                    v = std::clamp(v, -1.0, 1.0);
                }
                traj.samples.push_back({to, std::move(yo)});
                ++next_output;
            }
        }

        t = t_new;
        std::swap(y, ynew);
        std::swap(k1, k7);
        if (detail::clamp_into_domain(y, cfg.abs_tol, traj))
            rhs(std::span<const double>(y), std::span<double>(k1));
        residual = inf_norm(k1);
        if (stride == 0.0) traj.samples.push_back({t, y});

        if (residual < cfg.convergence_tol) {
            if (std::isnan(below_since)) below_since = t;
            if (t - below_since >= cfg.convergence_window) {
                traj.converged = true;
                if (cfg.stop_on_convergence) break;
            }
        } else {
            below_since = std::numeric_limits<double>::quiet_NaN();
            traj.converged = false;
        }

        double fac = e > 0.0 ? 0.9 * std::pow(e, -0.2) : 10.0;
        fac = std::clamp(fac, 0.2, 10.0);
        if (reject_previous) fac = std::min(fac, 1.0);
        reject_previous = false;
        h *= fac;
    }

    if (traj.samples.back().t < t) traj.samples.push_back({t, y});
    traj.final_residual = residual;
    return traj;
}

inline Trajectory integrate(const OpinionState& x0, const Topology& topo, const PlatformFunction& f,
                            const SystemParams& params, const IntegratorConfig& cfg = {}) {
    validate_params(params);
    check_dimension(x0.x.size(), topo);
    validate_opinions(x0.x);
    const double max_time = cfg.max_time.value_or(default_max_time(params));
    auto system = [&](std::span<const double> x, std::span<double> dx) { rhs_into(x, topo, f, params, dx); };
    return integrate_ode(system, x0.x, x0.t, cfg, max_time);
}

// ---------------------------------------------------------------------------
// Phase portrait
// ---------------------------------------------------------------------------

struct VectorFieldPoint {
    double x1, x2, dx1, dx2;
};

/// Two-agent vector field on a resolution x resolution grid over [-1,1]^2,
/// x1-major order.
inline std::vector<VectorFieldPoint> vector_field_grid(const PlatformFunction& f, const SystemParams& params,
                                                       int resolution) {
    validate_params(params);
    if (resolution < 2) throw Error(Errc::invalid_argument, "vector field resolution must be >= 2");
    const Topology topo = TwoAgent{};
    std::vector<VectorFieldPoint> grid;
    grid.reserve(static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution));
    const double denom = static_cast<double>(resolution - 1);
    std::array<double, 2> x{}, dx{};
    for (int i = 0; i < resolution; ++i) {
        for (int j = 0; j < resolution; ++j) {
            x[0] = -1.0 + 2.0 * i / denom;
            x[1] = -1.0 + 2.0 * j / denom;
            rhs_into(x, topo, f, params, dx);
            grid.push_back({x[0], x[1], dx[0], dx[1]});
        }
    }
    return grid;
}

} // namespace opinionlab
