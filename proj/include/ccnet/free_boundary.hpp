#pragma once

// Workload singular control problem on a truncated square grid.
//
// The diffusion B is replaced by a locally consistent Markov chain on the
// lattice h*Z^2 (Kushner's construction: central weights for the covariance
// with the cross term carried by the diagonal neighbours, upwind weights for
// the drift). Singular controls are instantaneous lattice jumps, so the
// discrete dynamic programming equation at node x is
//
//   J(x) = min( e^{-gamma dt} E[J(next)] + hhat(x) dt,  J(x + h e1),  J(x + h e2) ).
//
// Moves below an axis are reflected back onto it (costless pushing at the
// state constraint); the outer edge at w_max is reflecting as well.

#include <algorithm>
#include <cmath>
#include <array>
#include <cstdint>
#include <limits>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ccnet/errors.hpp"
#include "ccnet/kv_config.hpp"
#include "ccnet/model_params.hpp"

namespace ccnet {

using CostFunction = std::function<double(double w1, double w2)>;

struct GridSpec {
    double h = 0.0;       // lattice spacing (both directions)
    double w_max = 0.0;   // domain is [0, w_max]^2; <= 0 selects the default extent
    double tol_vi = 1e-8;
    double tol_act = 1e-6;
    double tol_grad = -1.0;  // < 0: 1e-6 * max hhat on the domain / gamma
    long max_sweeps = 0;     // 0: derived from the discount contraction rate
};

// 8 * sqrt(largest eigenvalue of b_cov / gamma).
inline double default_w_max(const BrownianData& bd, double gamma) {
    const auto& s = bd.b_cov;
    const double tr = s[0][0] + s[1][1];
    const double det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    const double lmax = 0.5 * tr + std::sqrt(std::max(0.25 * tr * tr - det, 0.0));
    return 8.0 * std::sqrt(lmax / gamma);
}

enum ActionBits : std::uint8_t { kContinue = 1, kPushE1 = 2, kPushE2 = 4 };

struct ValueGrid {
    double h1 = 0.0, h2 = 0.0;
    int n1 = 0, n2 = 0;  // nodes i = 0..n1, j = 0..n2
    std::vector<double> values;
    std::vector<std::uint8_t> action_mask;
    bool converged = false;
    long sweeps = 0;
    double last_update = 0.0;

    ValueGrid() = default;
    ValueGrid(double h1_, double h2_, int n1_, int n2_)
        : h1(h1_), h2(h2_), n1(n1_), n2(n2_),
          values(static_cast<std::size_t>(n1_ + 1) * (n2_ + 1), 0.0),
          action_mask(values.size(), kContinue) {}

    std::size_t index(int i, int j) const noexcept {
        return static_cast<std::size_t>(j) * (n1 + 1) + static_cast<std::size_t>(i);
    }
    double& at(int i, int j) noexcept { return values[index(i, j)]; }
    double at(int i, int j) const noexcept { return values[index(i, j)]; }
    std::uint8_t mask(int i, int j) const noexcept { return action_mask[index(i, j)]; }
    double w1(int i) const noexcept { return i * h1; }
    double w2(int j) const noexcept { return j * h2; }
};

// Transition weights of the approximating chain. Order: +e1, -e1, +e2, -e2,
// (+,+), (-,-), (+,-), (-,+).
struct Stencil {
    std::array<double, 8> p{};
    double dt = 0.0;
    double discount = 1.0;
};

inline Stencil build_stencil(const BrownianData& bd, double h, double gamma) {
    const double s11 = bd.b_cov[0][0], s22 = bd.b_cov[1][1], s12 = bd.b_cov[0][1];
    const double b1 = bd.b_drift[0], b2 = bd.b_drift[1];
    if (s11 < std::abs(s12) || s22 < std::abs(s12))
        throw NumericError("NonMonotoneScheme", "covariance is not diagonally dominant");
    const double q = s11 + s22 - std::abs(s12) + h * (std::abs(b1) + std::abs(b2));
    if (!(q > 0.0)) throw NumericError("DegenerateDiffusion", "zero covariance and drift");
    Stencil st;
    const double a = std::abs(s12);
    st.p[0] = (0.5 * (s11 - a) + h * std::max(b1, 0.0)) / q;
    st.p[1] = (0.5 * (s11 - a) + h * std::max(-b1, 0.0)) / q;
    st.p[2] = (0.5 * (s22 - a) + h * std::max(b2, 0.0)) / q;
    st.p[3] = (0.5 * (s22 - a) + h * std::max(-b2, 0.0)) / q;
    st.p[4] = st.p[5] = 0.5 * std::max(s12, 0.0) / q;
    st.p[6] = st.p[7] = 0.5 * std::max(-s12, 0.0) / q;
    st.dt = h * h / q;
    st.discount = std::exp(-gamma * st.dt);
    return st;
}

namespace detail {

inline std::vector<double> node_costs(const NetworkParams& p, const ValueGrid& g, const CostFunction& cost) {
    std::vector<double> c(g.values.size());
    for (int j = 0; j <= g.n2; ++j)
        for (int i = 0; i <= g.n1; ++i)
            c[g.index(i, j)] = cost ? cost(g.w1(i), g.w2(j)) : lp_value(p, {g.w1(i), g.w2(j)});
    return c;
}

// E[J(next)] with reflection at both the axes and the outer edge.
inline double expected_next(const ValueGrid& g, const Stencil& st, int i, int j) {
    const int im = std::max(i - 1, 0), ip = std::min(i + 1, g.n1);
    const int jm = std::max(j - 1, 0), jp = std::min(j + 1, g.n2);
    const auto& p = st.p;
    return p[0] * g.at(ip, j) + p[1] * g.at(im, j) + p[2] * g.at(i, jp) + p[3] * g.at(i, jm) +
           p[4] * g.at(ip, jp) + p[5] * g.at(im, jm) + p[6] * g.at(ip, jm) + p[7] * g.at(im, jp);
}

inline double max_cost_on_box(const NetworkParams& p, double w_max, const CostFunction& cost) {
    auto eval = [&](double a, double b) { return cost ? cost(a, b) : lp_value(p, {a, b}); };
    return std::max({eval(0.0, 0.0), eval(w_max, 0.0), eval(0.0, w_max), eval(w_max, w_max)});
}

}  // namespace detail

struct SolveResult {
    ValueGrid grid;
    Stencil stencil;
    GridSpec spec;  // with defaults resolved
};

// Gauss-Seidel value iteration until the sup-norm update falls below tol_vi.
// `cost` replaces hhat when set (used by tests).
inline SolveResult solve_value(const NetworkParams& p, const BrownianData& bd, GridSpec spec,
                               const CostFunction& cost = {}) {
    const Regime r = classify_regime(p);
    if (r != Regime::CaseIIA && r != Regime::CaseIIB && r != Regime::CaseIIC)
        throw ConfigError("WrongRegime", std::string("free boundary solver needs Case IIA/IIB/IIC, got ") +
                                             to_string(r));
    if (spec.w_max <= 0.0) spec.w_max = default_w_max(bd, p.gamma());
    if (!(spec.h > 0.0) || spec.h >= spec.w_max)
        throw ConfigError("InvalidGrid", "need 0 < h < w_max");
    const int n = static_cast<int>(std::lround(spec.w_max / spec.h));
    spec.h = spec.w_max / n;
    if (spec.tol_grad < 0.0) spec.tol_grad = 1e-6 * detail::max_cost_on_box(p, spec.w_max, cost) / p.gamma();

    Stencil st = build_stencil(bd, spec.h, p.gamma());
    if (spec.max_sweeps <= 0)
        spec.max_sweeps = static_cast<long>(60.0 / (1.0 - st.discount)) + 1000;

    ValueGrid g(spec.h, spec.h, n, n);
    std::vector<double> run_cost = detail::node_costs(p, g, cost);
    for (auto& c : run_cost) c *= st.dt;

    for (long sweep = 1; sweep <= spec.max_sweeps; ++sweep) {
        double delta = 0.0;
        for (int j = 0; j <= n; ++j) {
            for (int i = 0; i <= n; ++i) {
                const std::size_t k = g.index(i, j);
                double v = st.discount * detail::expected_next(g, st, i, j) + run_cost[k];
                if (i < n) v = std::min(v, g.values[k + 1]);
                if (j < n) v = std::min(v, g.values[k + n + 1]);
                delta = std::max(delta, std::abs(v - g.values[k]));
                g.values[k] = v;
            }
        }
        g.sweeps = sweep;
        g.last_update = delta;
        if (delta < spec.tol_vi) {
            g.converged = true;
            break;
        }
    }
    if (!g.converged)
        throw NumericError("NoConvergence", "value iteration stopped after " + std::to_string(g.sweeps) +
                                                " sweeps, update " + format_double(g.last_update));

    for (int j = 0; j <= n; ++j) {
        for (int i = 0; i <= n; ++i) {
            const std::size_t k = g.index(i, j);
            const double dyn = st.discount * detail::expected_next(g, st, i, j) + run_cost[k];
            const double best = g.values[k];
            std::uint8_t m = 0;
            if (dyn - best <= spec.tol_act) m |= kContinue;
            if (i < n && g.values[k + 1] - best <= spec.tol_act) m |= kPushE1;
            if (j < n && g.values[k + n + 1] - best <= spec.tol_act) m |= kPushE2;
            g.action_mask[k] = m;
        }
    }
    return {std::move(g), st, spec};
}

// ---------------------------------------------------------------------------

struct FreeBoundary {
    std::vector<double> w2_knots;
    std::vector<double> psi_values;
    double max_slope = 0.0;  // mu3/mu2

    double operator()(double w2) const;
};

// Piecewise-linear interpolation; past the last knot the last segment is
// continued with its slope clipped to [0, max_slope].
inline double psi_eval(const FreeBoundary& fb, double w2) {
    if (!(w2 >= 0.0)) throw ConfigError("NegativeInput", "psi_eval needs w2 >= 0");
    const auto& x = fb.w2_knots;
    const auto& y = fb.psi_values;
    if (x.empty()) return 0.0;
    if (x.size() == 1 || w2 <= x.front()) return y.front();
    if (w2 >= x.back()) {
        const std::size_t m = x.size() - 1;
        const double slope = std::clamp((y[m] - y[m - 1]) / (x[m] - x[m - 1]), 0.0, fb.max_slope);
        return y[m] + slope * (w2 - x[m]);
    }
    const auto it = std::upper_bound(x.begin(), x.end(), w2);
    const std::size_t hi = static_cast<std::size_t>(it - x.begin());
    const std::size_t lo = hi - 1;
    const double t = (w2 - x[lo]) / (x[hi] - x[lo]);
    return y[lo] + t * (y[hi] - y[lo]);
}

inline double FreeBoundary::operator()(double w2) const { return psi_eval(*this, w2); }

// Boundary identically zero: normal reflection on both axes.
inline FreeBoundary zero_boundary(double max_slope, double w2_max = 1.0) {
    return {{0.0, w2_max}, {0.0, 0.0}, max_slope};
}

// Boundary on the upper envelope psi(w2) = max_slope * w2.
inline FreeBoundary cone_boundary(double max_slope, double w2_max = 1.0) {
    return {{0.0, w2_max}, {0.0, max_slope * w2_max}, max_slope};
}

// Projects raw knot values onto {psi(0) = 0, 0 <= increments <= slope * dw}:
// isotonic regression (pool adjacent violators) followed by a forward cap on
// increments, which also enforces psi <= slope * w2.
inline std::vector<double> project_boundary(const std::vector<double>& knots, std::vector<double> raw,
                                            double slope) {
    const std::size_t m = raw.size();
    if (m == 0) return raw;
    for (auto& v : raw) v = std::max(v, 0.0);
    // PAVA with unit weights.
    std::vector<double> level;
    std::vector<std::size_t> count;
    for (double v : raw) {
        level.push_back(v);
        count.push_back(1);
        while (level.size() > 1 && level[level.size() - 2] > level.back()) {
            const std::size_t c = count.back() + count[count.size() - 2];
            const double merged =
                (level.back() * count.back() + level[level.size() - 2] * count[count.size() - 2]) / c;
            level.pop_back();
            count.pop_back();
            level.back() = merged;
            count.back() = c;
        }
    }
    std::vector<double> out;
    out.reserve(m);
    for (std::size_t b = 0; b < level.size(); ++b) out.insert(out.end(), count[b], level[b]);
    out[0] = 0.0;
    for (std::size_t k = 1; k < m; ++k)
        out[k] = std::clamp(out[k], out[k - 1], out[k - 1] + slope * (knots[k] - knots[k - 1]));
    return out;
}

// For each w2 row, psi is the end of the initial run of w1 nodes whose
// forward difference is <= tol_grad (the push-e1 region adjacent to the w2
// axis). Flat stretches further out, e.g. from the reflecting outer edge, are
// ignored. The raw values are then projected as above.
inline FreeBoundary extract_boundary(const ValueGrid& vg, const NetworkParams& p, double tol_grad) {
    if (!vg.converged) throw NumericError("NotConverged", "value grid has not converged");
    FreeBoundary fb;
    fb.max_slope = p.cone_slope();
    std::vector<double> raw(static_cast<std::size_t>(vg.n2) + 1);
    for (int j = 0; j <= vg.n2; ++j) {
        fb.w2_knots.push_back(vg.w2(j));
        int i = 0;
        while (i < vg.n1 && (vg.at(i + 1, j) - vg.at(i, j)) / vg.h1 <= tol_grad) ++i;
        raw[static_cast<std::size_t>(j)] = vg.w1(i);
    }
    fb.psi_values = project_boundary(fb.w2_knots, std::move(raw), fb.max_slope);
    return fb;
}

inline FreeBoundary extract_boundary(const SolveResult& s, const NetworkParams& p) {
    return extract_boundary(s.grid, p, s.spec.tol_grad);
}

// ---------------------------------------------------------------------------

struct HjbResidual {
    double max = 0.0;
    int i = -1, j = -1;
};

// Max over interior nodes of |min(dynamic residual, D1, D2)| where the
// dynamic residual is (e^{-gamma dt} E J + hhat dt - J)/dt, the discrete form
// of hhat + L J - gamma J, and D_k = (J(x + h e_k) - J(x))/h. All three are
// >= 0 at a solution and one of them vanishes.
inline HjbResidual hjb_residual(const ValueGrid& vg, const NetworkParams& p, const BrownianData& bd,
                                const CostFunction& cost = {}) {
    const Stencil st = build_stencil(bd, vg.h1, p.gamma());
    HjbResidual r;
    for (int j = 1; j < vg.n2; ++j) {
        for (int i = 1; i < vg.n1; ++i) {
            const double J = vg.at(i, j);
            const double c = cost ? cost(vg.w1(i), vg.w2(j)) : lp_value(p, {vg.w1(i), vg.w2(j)});
            const double dyn = (st.discount * detail::expected_next(vg, st, i, j) + c * st.dt - J) / st.dt;
            const double d1 = (vg.at(i + 1, j) - J) / vg.h1;
            const double d2 = (vg.at(i, j + 1) - J) / vg.h2;
            const double res = std::abs(std::min({dyn, d1, d2}));
            if (res > r.max) r = {res, i, j};
        }
    }
    return r;
}

// Invariant checks of a converged grid: nonnegativity, the crude sup bound,
// and coordinate monotonicity. Returns the worst monotonicity violation.
struct GridChecks {
    double min_value = 0.0;
    double max_value = 0.0;
    double value_bound = 0.0;
    double worst_decrease = 0.0;  // max over neighbours of J(x) - J(x + h e_k), >= 0 means violation size
};

inline GridChecks check_grid(const ValueGrid& vg, const NetworkParams& p, const CostFunction& cost = {}) {
    GridChecks c;
    c.min_value = *std::min_element(vg.values.begin(), vg.values.end());
    c.max_value = *std::max_element(vg.values.begin(), vg.values.end());
    c.value_bound = detail::max_cost_on_box(p, vg.n1 * vg.h1, cost) / p.gamma();
    double worst = -std::numeric_limits<double>::infinity();
    for (int j = 0; j <= vg.n2; ++j)
        for (int i = 0; i <= vg.n1; ++i) {
            if (i < vg.n1) worst = std::max(worst, vg.at(i, j) - vg.at(i + 1, j));
            if (j < vg.n2) worst = std::max(worst, vg.at(i, j) - vg.at(i, j + 1));
        }
    c.worst_decrease = worst;
    return c;
}

// Structural boundary checks: 0 <= psi <= slope*w2, monotone, Lipschitz.
struct BoundaryChecks {
    double max_below_zero = 0.0;    // max(-psi)
    double max_above_cone = 0.0;    // max(psi - slope*w2)
    double max_decrease = 0.0;      // max(psi_k - psi_{k+1})
    double max_slope_seen = 0.0;
};

inline BoundaryChecks check_boundary(const FreeBoundary& fb) {
    BoundaryChecks c;
    const auto& x = fb.w2_knots;
    const auto& y = fb.psi_values;
    for (std::size_t k = 0; k < x.size(); ++k) {
        c.max_below_zero = std::max(c.max_below_zero, -y[k]);
        c.max_above_cone = std::max(c.max_above_cone, y[k] - fb.max_slope * x[k]);
        if (k + 1 < x.size()) {
            c.max_decrease = std::max(c.max_decrease, y[k] - y[k + 1]);
            c.max_slope_seen = std::max(c.max_slope_seen, (y[k + 1] - y[k]) / (x[k + 1] - x[k]));
        }
    }
    return c;
}

// ---------------------------------------------------------------------------
// Text serialization: a `# key=value ...` metadata line, then CSV.

inline void write_value_grid(std::ostream& out, const ValueGrid& vg) {
    out << "# value_grid h1=" << format_double(vg.h1) << " h2=" << format_double(vg.h2) << " n1=" << vg.n1
        << " n2=" << vg.n2 << " converged=" << (vg.converged ? 1 : 0) << " sweeps=" << vg.sweeps
        << " last_update=" << format_double(vg.last_update) << '\n';
    out << "i,j,J,mask\n";
    for (int j = 0; j <= vg.n2; ++j)
        for (int i = 0; i <= vg.n1; ++i)
            out << i << ',' << j << ',' << format_double(vg.at(i, j)) << ',' << int(vg.mask(i, j)) << '\n';
}

namespace detail {
inline KvDocument parse_meta(const std::string& line, const std::string& tag) {
    std::istringstream in(line);
    std::string hash, name;
    in >> hash >> name;
    if (hash != "#" || name != tag) throw ConfigError("ParseError", "expected '# " + tag + "' header");
    KvDocument doc;
    std::string tok;
    while (in >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) throw ConfigError("ParseError", "bad header token '" + tok + "'");
        doc.set(tok.substr(0, eq), tok.substr(eq + 1));
    }
    return doc;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    return out;
}
}  // namespace detail

inline ValueGrid read_value_grid(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("ParseError", "empty value grid file");
    const auto meta = detail::parse_meta(line, "value_grid");
    ValueGrid vg(meta.number("h1"), meta.number("h2"), static_cast<int>(meta.number("n1")),
                 static_cast<int>(meta.number("n2")));
    vg.converged = meta.number("converged") != 0.0;
    vg.sweeps = static_cast<long>(meta.number("sweeps"));
    vg.last_update = meta.number("last_update");
    std::getline(in, line);  // column header
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = detail::split_csv(line);
        if (cells.size() != 4) throw ConfigError("ParseError", "value grid row needs 4 columns");
        const int i = std::stoi(cells[0]), j = std::stoi(cells[1]);
        if (i < 0 || i > vg.n1 || j < 0 || j > vg.n2) throw ConfigError("ParseError", "node out of range");
        vg.at(i, j) = parse_double(cells[2], "J");
        vg.action_mask[vg.index(i, j)] = static_cast<std::uint8_t>(std::stoi(cells[3]));
        ++rows;
    }
    if (rows != vg.values.size()) throw ConfigError("ParseError", "value grid has missing rows");
    return vg;
}

inline void write_free_boundary(std::ostream& out, const FreeBoundary& fb) {
    out << "# free_boundary max_slope=" << format_double(fb.max_slope) << " knots=" << fb.w2_knots.size()
        << '\n';
    out << "w2,psi\n";
    for (std::size_t k = 0; k < fb.w2_knots.size(); ++k)
        out << format_double(fb.w2_knots[k]) << ',' << format_double(fb.psi_values[k]) << '\n';
}

inline FreeBoundary read_free_boundary(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("ParseError", "empty free boundary file");
    const auto meta = detail::parse_meta(line, "free_boundary");
    FreeBoundary fb;
    fb.max_slope = meta.number("max_slope");
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = detail::split_csv(line);
        if (cells.size() != 2) throw ConfigError("ParseError", "free boundary row needs 2 columns");
        fb.w2_knots.push_back(parse_double(cells[0], "w2"));
        fb.psi_values.push_back(parse_double(cells[1], "psi"));
    }
    if (fb.w2_knots.size() != static_cast<std::size_t>(meta.number("knots")))
        throw ConfigError("ParseError", "free boundary knot count mismatch");
    for (std::size_t k = 1; k < fb.w2_knots.size(); ++k)
        if (!(fb.w2_knots[k] > fb.w2_knots[k - 1]))
            throw ConfigError("ParseError", "free boundary knots must increase");
    return fb;
}

inline FreeBoundary load_free_boundary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("FileError", "cannot open '" + path + "'");
    return read_free_boundary(in);
}

inline void save_free_boundary(const FreeBoundary& fb, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("FileError", "cannot write '" + path + "'");
    write_free_boundary(out, fb);
}

}  // namespace ccnet
