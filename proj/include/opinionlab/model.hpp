#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "errors.hpp"

namespace opinionlab {

// ---------------------------------------------------------------------------
// Parameters and state
// ---------------------------------------------------------------------------

/// Peer-influence strength `a` and platform-influence strength `b`.
struct SystemParams {
    double a = 1.0;
    double b = 1.0;
};

inline SystemParams validate_params(const SystemParams& params) {
    if (!(params.a > 0.0) || !std::isfinite(params.a))
        throw Error(Errc::non_positive_parameter, "a must be finite and > 0, got " + std::to_string(params.a));
    if (!(params.b > 0.0) || !std::isfinite(params.b))
        throw Error(Errc::non_positive_parameter, "b must be finite and > 0, got " + std::to_string(params.b));
    return params;
}

struct OpinionState {
    std::vector<double> x;
    double t = 0.0;
};

inline void validate_opinions(std::span<const double> x) {
    if (x.size() < 2)
        throw Error(Errc::invalid_argument, "an opinion state needs at least two agents");
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] >= -1.0 && x[i] <= 1.0))
            throw Error(Errc::domain_error,
                        "opinion " + std::to_string(i) + " = " + std::to_string(x[i]) + " lies outside [-1, 1]");
    }
}

inline OpinionState make_state(std::vector<double> x, double t = 0.0) {
    validate_opinions(x);
    if (!(t >= 0.0))
        throw Error(Errc::invalid_argument, "state time must be >= 0");
    return OpinionState{std::move(x), t};
}

// ---------------------------------------------------------------------------
// Topology
// ---------------------------------------------------------------------------

struct TwoAgent {};

/// K_n; every ordered pair interacts with weight a/(n-1).
struct Complete {
    std::size_t n = 2;
};

/// Undirected simple graph stored as compressed neighbour lists. Agent i
/// weighs each neighbour by a/|N(i)|. Optional block labels (0 = left,
/// 1 = right) are carried for the two-block SBM.
class Graph {
public:
    Graph() = default;

    /// Builds from a symmetric 0/1 matrix with zero diagonal.
    static Graph from_adjacency(const std::vector<std::vector<int>>& adjacency, std::vector<int> blocks = {}) {
        const std::size_t n = adjacency.size();
        std::vector<std::vector<std::size_t>> lists(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (adjacency[i].size() != n)
                throw Error(Errc::invalid_topology, "adjacency matrix must be square");
            if (adjacency[i][i] != 0)
                throw Error(Errc::invalid_topology, "adjacency diagonal must be zero (agent " + std::to_string(i) + ")");
            for (std::size_t j = 0; j < n; ++j) {
                const int v = adjacency[i][j];
                if (v != 0 && v != 1)
                    throw Error(Errc::invalid_topology, "adjacency entries must be 0 or 1");
                if (v != adjacency[j][i])
                    throw Error(Errc::invalid_topology, "adjacency matrix must be symmetric");
                if (v == 1)
                    lists[i].push_back(j);
            }
        }
        return Graph(lists, std::move(blocks));
    }

    /// Builds from an undirected edge list; duplicate edges are rejected.
    static Graph from_edges(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                            std::vector<int> blocks = {}) {
        std::vector<std::vector<std::size_t>> lists(n);
        for (auto [i, j] : edges) {
            if (i >= n || j >= n)
                throw Error(Errc::invalid_topology, "edge endpoint out of range");
            if (i == j)
                throw Error(Errc::invalid_topology, "self loops are not allowed");
            lists[i].push_back(j);
            lists[j].push_back(i);
        }
        for (auto& l : lists) {
            std::sort(l.begin(), l.end());
            if (std::adjacent_find(l.begin(), l.end()) != l.end())
                throw Error(Errc::invalid_topology, "duplicate edge");
        }
        return Graph(lists, std::move(blocks));
    }

    /// Takes ownership of prebuilt sorted neighbour lists (used by the SBM sampler).
    Graph(const std::vector<std::vector<std::size_t>>& lists, std::vector<int> blocks)
        : blocks_(std::move(blocks)) {
        const std::size_t n = lists.size();
        if (n < 2)
            throw Error(Errc::invalid_topology, "a graph needs at least two agents");
        if (!blocks_.empty() && blocks_.size() != n)
            throw Error(Errc::invalid_topology, "block label count does not match agent count");
        offsets_.reserve(n + 1);
        offsets_.push_back(0);
        for (std::size_t i = 0; i < n; ++i) {
            if (lists[i].empty())
                throw Error(Errc::isolated_agent, "agent " + std::to_string(i) + " has no neighbours");
            indices_.insert(indices_.end(), lists[i].begin(), lists[i].end());
            offsets_.push_back(indices_.size());
        }
    }

    std::size_t size() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
    std::size_t degree(std::size_t i) const noexcept { return offsets_[i + 1] - offsets_[i]; }
    std::span<const std::size_t> neighbors(std::size_t i) const noexcept {
        return {indices_.data() + offsets_[i], degree(i)};
    }
    std::size_t edge_count() const noexcept { return indices_.size() / 2; }
    const std::vector<int>& blocks() const noexcept { return blocks_; }
    bool has_blocks() const noexcept { return !blocks_.empty(); }

    bool adjacent(std::size_t i, std::size_t j) const {
        auto nb = neighbors(i);
        return std::binary_search(nb.begin(), nb.end(), j);
    }

private:
    std::vector<std::size_t> offsets_;
    std::vector<std::size_t> indices_;
    std::vector<int> blocks_;
};

using Topology = std::variant<TwoAgent, Complete, Graph>;

inline std::size_t agent_count(const Topology& topo) {
    struct Visitor {
        std::size_t operator()(const TwoAgent&) const { return 2; }
        std::size_t operator()(const Complete& c) const { return c.n; }
        std::size_t operator()(const Graph& g) const { return g.size(); }
    };
    return std::visit(Visitor{}, topo);
}

inline void validate_topology(const Topology& topo) {
    if (const auto* c = std::get_if<Complete>(&topo); c && c->n < 2)
        throw Error(Errc::invalid_topology, "Complete(n) needs n >= 2");
}

/// Mean opinion of agent i's neighbours under the topology's weighting.
inline double neighbor_mean(std::span<const double> x, const Topology& topo, std::size_t i, double total = std::nan("")) {
    if (std::holds_alternative<TwoAgent>(topo))
        return x[1 - i];
    if (const auto* c = std::get_if<Complete>(&topo)) {
        if (std::isnan(total)) {
            total = 0.0;
            for (double v : x) total += v;
        }
        return (total - x[i]) / static_cast<double>(c->n - 1);
    }
    const auto& g = std::get<Graph>(topo);
    double sum = 0.0;
    for (std::size_t j : g.neighbors(i)) sum += x[j];
    return sum / static_cast<double>(g.degree(i));
}

// ---------------------------------------------------------------------------
// Platform influence functions
// ---------------------------------------------------------------------------

/// Continuous sign: -1 below -eps, x/eps inside the band, 1 above eps.
struct SgnEps {
    double epsilon = 0.05;
};

/// Continuous anti-sign: 1 below -eps, -x/eps inside the band, -1 above eps.
struct AntiSgnEps {
    double epsilon = 0.05;
};

struct Linear {
    double alpha = 0.9;
};

/// Linear interpolation through knots (x, f(x)) with x strictly increasing
/// from -1 to 1.
struct PiecewiseLinear {
    std::vector<std::pair<double, double>> knots;
};

using FunctionKind = std::variant<SgnEps, AntiSgnEps, Linear, PiecewiseLinear>;

inline constexpr double kTolSymClosed = 1e-12;
inline constexpr double kTolSymPiecewise = 1e-9;
inline constexpr double kTolZero = 1e-9;
inline constexpr int kDefaultPropertyGrid = 4097;

struct PropertyReport {
    double lipschitz_estimate = 0.0;
    bool symmetric = false;
    bool sign_preserving = false;
    bool bounded = false;
    bool feasible = false;
    /// Non-decreasing on every sampled pair; required by the SBM envelope bounds.
    bool monotone_increasing = false;
    double f_at_zero = 0.0;
    double max_symmetry_error = 0.0;
};

/// One affine piece f(x) = slope*x + intercept on [lo, hi].
struct Segment {
    double lo, hi, slope, intercept;
};

class PlatformFunction;
PropertyReport validate_function(const PlatformFunction& f, int grid_resolution);

/// An immutable platform function with its cached property report.
class PlatformFunction {
public:
    explicit PlatformFunction(FunctionKind kind) : kind_(std::move(kind)) {
        check_kind();
        report_ = validate_function(*this, kDefaultPropertyGrid);
    }

    static PlatformFunction sgn_eps(double eps) { return PlatformFunction(SgnEps{eps}); }
    static PlatformFunction anti_sgn_eps(double eps) { return PlatformFunction(AntiSgnEps{eps}); }
    static PlatformFunction linear(double alpha) { return PlatformFunction(Linear{alpha}); }
    static PlatformFunction piecewise(std::vector<std::pair<double, double>> knots) {
        return PlatformFunction(PiecewiseLinear{std::move(knots)});
    }

    const FunctionKind& kind() const noexcept { return kind_; }
    const PropertyReport& properties() const noexcept { return report_; }

    bool is_closed_form() const noexcept { return !std::holds_alternative<PiecewiseLinear>(kind_); }

    /// Half-width of the linear band for the sign-like kinds.
    std::optional<double> band() const noexcept {
        if (const auto* s = std::get_if<SgnEps>(&kind_)) return s->epsilon;
        if (const auto* s = std::get_if<AntiSgnEps>(&kind_)) return s->epsilon;
        return std::nullopt;
    }

    /// Total evaluation. Closed forms use their formula on all reals;
    /// piecewise inputs are clamped into [-1, 1] first. Integrator stages may
    /// probe slightly outside the opinion domain, which is why this exists
    /// next to the checked `evaluate`.
    double operator()(double x) const noexcept {
        switch (kind_.index()) {
        case 0: {
            const double e = std::get<SgnEps>(kind_).epsilon;
            if (x > e) return 1.0;
            if (x < -e) return -1.0;
            return x / e;
        }
        case 1: {
            const double e = std::get<AntiSgnEps>(kind_).epsilon;
            if (x > e) return -1.0;
            if (x < -e) return 1.0;
            return -x / e;
        }
        case 2:
            return std::get<Linear>(kind_).alpha * x;
        default:
            return interpolate(std::get<PiecewiseLinear>(kind_).knots, std::clamp(x, -1.0, 1.0));
        }
    }

    /// Affine pieces covering [-1, 1], in increasing order.
    std::vector<Segment> segments() const {
        std::vector<Segment> out;
        if (const auto* s = std::get_if<SgnEps>(&kind_)) {
            const double e = s->epsilon;
            if (e >= 1.0) return {{-1.0, 1.0, 1.0 / e, 0.0}};
            return {{-1.0, -e, 0.0, -1.0}, {-e, e, 1.0 / e, 0.0}, {e, 1.0, 0.0, 1.0}};
        }
        if (const auto* s = std::get_if<AntiSgnEps>(&kind_)) {
            const double e = s->epsilon;
            if (e >= 1.0) return {{-1.0, 1.0, -1.0 / e, 0.0}};
            return {{-1.0, -e, 0.0, 1.0}, {-e, e, -1.0 / e, 0.0}, {e, 1.0, 0.0, -1.0}};
        }
        if (const auto* l = std::get_if<Linear>(&kind_))
            return {{-1.0, 1.0, l->alpha, 0.0}};
        const auto& knots = std::get<PiecewiseLinear>(kind_).knots;
        for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
            const auto [x0, y0] = knots[k];
            const auto [x1, y1] = knots[k + 1];
            const double slope = (y1 - y0) / (x1 - x0);
            out.push_back({x0, x1, slope, y0 - slope * x0});
        }
        return out;
    }

    /// Largest absolute slope over the affine pieces (the exact Lipschitz constant).
    double exact_lipschitz() const {
        double best = 0.0;
        for (const auto& s : segments()) best = std::max(best, std::abs(s.slope));
        return best;
    }

private:
    static double interpolate(const std::vector<std::pair<double, double>>& knots, double x) noexcept {
        auto it = std::upper_bound(knots.begin(), knots.end(), x,
                                   [](double v, const std::pair<double, double>& k) { return v < k.first; });
        if (it == knots.begin()) return knots.front().second;
        if (it == knots.end()) return knots.back().second;
        const auto& [x1, y1] = *it;
        const auto& [x0, y0] = *(it - 1);
        if (x == x0) return y0;
        // Symmetric in the two endpoints, so mirrored knots give a bitwise odd function.
        return (y0 * (x1 - x) + y1 * (x - x0)) / (x1 - x0);
    }

    void check_kind() const {
        auto positive_eps = [](double e) {
            if (!(e > 0.0) || !std::isfinite(e))
                throw Error(Errc::invalid_function, "epsilon must be finite and > 0");
        };
        if (const auto* s = std::get_if<SgnEps>(&kind_)) positive_eps(s->epsilon);
        if (const auto* s = std::get_if<AntiSgnEps>(&kind_)) positive_eps(s->epsilon);
        if (const auto* l = std::get_if<Linear>(&kind_)) {
            if (!(l->alpha > 0.0 && l->alpha < 1.0))
                throw Error(Errc::invalid_function, "linear alpha must lie in (0, 1)");
        }
        if (const auto* p = std::get_if<PiecewiseLinear>(&kind_)) {
            const auto& k = p->knots;
            if (k.size() < 2)
                throw Error(Errc::invalid_function, "piecewise function needs at least two knots");
            if (k.front().first != -1.0 || k.back().first != 1.0)
                throw Error(Errc::invalid_function, "piecewise knots must start at x=-1 and end at x=1");
            for (std::size_t i = 0; i < k.size(); ++i) {
                if (!std::isfinite(k[i].second) || k[i].second < -1.0 || k[i].second > 1.0)
                    throw Error(Errc::invalid_function, "piecewise knot values must lie in [-1, 1]");
                if (i > 0 && !(k[i].first > k[i - 1].first))
                    throw Error(Errc::invalid_function, "piecewise knots must be strictly increasing in x");
            }
        }
    }

    FunctionKind kind_;
    PropertyReport report_;
};

/// Checked evaluation on the opinion domain.
inline double evaluate(const PlatformFunction& f, double x) {
    if (!(x >= -1.0 && x <= 1.0))
        throw Error(Errc::domain_error, "x = " + std::to_string(x) + " lies outside [-1, 1]");
    return f(x);
}

inline std::string kind_name(const PlatformFunction& f) {
    switch (f.kind().index()) {
    case 0: return "sgn_eps";
    case 1: return "anti_sgn_eps";
    case 2: return "linear";
    default: return "piecewise";
    }
}

/// Samples f on a uniform grid over [-1, 1] and reports the four
/// feasibility properties plus monotonicity.
inline PropertyReport validate_function(const PlatformFunction& f, int grid_resolution) {
    if (grid_resolution < 16)
        throw Error(Errc::invalid_argument, "grid_resolution must be >= 16");
    const double tol_sym = f.is_closed_form() ? kTolSymClosed : kTolSymPiecewise;
    const auto n = static_cast<std::size_t>(grid_resolution);

    std::vector<double> xs(n), ys(n);
    for (std::size_t k = 0; k < n; ++k) {
        xs[k] = -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(n - 1);
        ys[k] = f(xs[k]);
    }
    // pin the endpoints and the origin
    xs.front() = -1.0;
    xs.back() = 1.0;

    PropertyReport r;
    r.f_at_zero = f(0.0);
    r.max_symmetry_error = std::abs(r.f_at_zero);
    r.sign_preserving = true;
    r.bounded = true;
    r.monotone_increasing = true;
    double grid_slope = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double x = xs[k];
        const double y = ys[k];
        r.max_symmetry_error = std::max(r.max_symmetry_error, std::abs(f(-x) + y));
        if (x > kTolZero && !(y > 0.0)) r.sign_preserving = false;
        if (x < -kTolZero && !(y < 0.0)) r.sign_preserving = false;
        if (!(y >= -1.0 && y <= 1.0)) r.bounded = false;
        if (k > 0) {
            grid_slope = std::max(grid_slope, std::abs(y - ys[k - 1]) / (x - xs[k - 1]));
            if (y < ys[k - 1] - 1e-15) r.monotone_increasing = false;
        }
    }
    r.symmetric = r.max_symmetry_error <= tol_sym;
    // Linear interpolation makes the segment slope exact, so it dominates the grid estimate.
    r.lipschitz_estimate = f.is_closed_form() ? f.exact_lipschitz() : std::max(grid_slope, f.exact_lipschitz());
    r.feasible = r.symmetric && r.sign_preserving && r.bounded && std::isfinite(r.lipschitz_estimate);
    return r;
}

} // namespace opinionlab
