#pragma once

// Monte-Carlo simulation of the optimally controlled workload W* = reflection
// of the workload Brownian motion B in G = {w1 >= psi(w2)}, and estimation of
// J*(0) = E int_0^inf e^{-gamma t} hhat(W*(t)) dt.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "ccnet/errors.hpp"
#include "ccnet/free_boundary.hpp"
#include "ccnet/model_params.hpp"
#include "ccnet/parallel.hpp"
#include "ccnet/skorohod.hpp"

namespace ccnet {

struct McConfig {
    double dt = 0.005;
    double horizon = 12.0;
    std::size_t paths = 100000;
    std::uint64_t seed = 1;
    bool antithetic = true;
    // Sample the running minimum of each reflected input inside a step from
    // its Brownian bridge instead of monitoring only at grid points. Without
    // it the reflected Euler estimate carries an O(sqrt(dt)) bias.
    bool bridge = true;
    int threads = 1;

    std::size_t steps() const { return static_cast<std::size_t>(std::llround(horizon / dt)); }

    void validate() const {
        if (!(dt > 0.0)) throw ConfigError("InvalidMcConfig", "dt must be > 0");
        if (!(horizon > dt)) throw ConfigError("InvalidMcConfig", "horizon must exceed dt");
        if (paths < 2) throw ConfigError("InvalidMcConfig", "need at least 2 paths");
        if (antithetic && paths % 2 != 0)
            throw ConfigError("InvalidMcConfig", "antithetic sampling needs an even path count");
    }
};

// Default horizon 12/gamma, tail factor e^{-12}.
inline McConfig default_mc_config(double gamma) {
    McConfig cfg;
    cfg.horizon = 12.0 / gamma;
    return cfg;
}

struct CostEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t paths = 0;
    // e^{-gamma T} * (mean of hhat(W*(T))) / gamma: the part of the
    // infinite-horizon cost not covered by [0, T], reported separately.
    double tail_bound = 0.0;
};

namespace detail {

// B increments from standard normals z (2 per step): dB = drift dt + chol sqrt(dt) z.
inline void build_b_path(const BrownianData& bd, const Mat2& chol, double dt, std::span<const double> z,
                         double sign, std::span<double> b1, std::span<double> b2) {
    const double sq = std::sqrt(dt);
    b1[0] = b2[0] = 0.0;
    for (std::size_t k = 1; k < b1.size(); ++k) {
        const double z1 = sign * z[2 * (k - 1)], z2 = sign * z[2 * (k - 1) + 1];
        b1[k] = b1[k - 1] + bd.b_drift[0] * dt + sq * chol[0][0] * z1;
        b2[k] = b2[k - 1] + bd.b_drift[1] * dt + sq * (chol[1][0] * z1 + chol[1][1] * z2);
    }
}

inline void fill_normals(std::mt19937_64& rng, std::span<double> z) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& v : z) v = normal(rng);
}

inline void fill_uniforms(std::mt19937_64& rng, std::span<double> u) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (auto& v : u) v = 1.0 - unif(rng);  // (0, 1]
}

// Minimum of a Brownian bridge from a to b over a step with variance var_dt,
// by inversion with uniform u in (0, 1].
inline double bridge_min(double a, double b, double var_dt, double u) noexcept {
    const double d = b - a;
    return 0.5 * (a + b - std::sqrt(d * d - 2.0 * var_dt * std::log(u)));
}

// Sequential reflection in G, one grid point per call. With bridge sampling
// the running minima also see the within-step bridge minima of b2 and of
// b1 - psi(w2), the latter treating psi(w2) as frozen over the step.
template <class Boundary>
class GReflector {
public:
    GReflector(const Boundary& psi, double var1_dt, double var2_dt, bool bridge)
        : psi_(psi), v1_(var1_dt), v2_(var2_dt), bridge_(bridge) {}

    // u1, u2 are ignored at k = 0 and when bridging is off.
    void step(double b1, double b2, double u1, double u2) {
        if (started_ && bridge_) inf2_ = std::min(inf2_, bridge_min(prev_b2_, b2, v2_, u2));
        inf2_ = std::min(inf2_, b2);
        w2 = b2 - inf2_;
        const double edge = psi_(w2);
        const double f1 = b1 - edge;
        if (started_ && bridge_) inf1_ = std::min(inf1_, bridge_min(prev_f1_, f1, v1_, u1));
        inf1_ = std::min(inf1_, f1);
        w1 = f1 - inf1_ + edge;
        i1 = -inf1_;
        i2 = -inf2_;
        prev_b2_ = b2;
        prev_f1_ = f1;
        started_ = true;
    }

    double w1 = 0.0, w2 = 0.0, i1 = 0.0, i2 = 0.0;

private:
    const Boundary& psi_;
    double v1_, v2_;
    bool bridge_;
    bool started_ = false;
    double inf1_ = 0.0, inf2_ = 0.0, prev_b2_ = 0.0, prev_f1_ = 0.0;
};

inline std::vector<double> time_grid(std::size_t steps, double dt) {
    std::vector<double> t(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) t[k] = static_cast<double>(k) * dt;
    return t;
}

// Exact discounting against the piecewise-linear interpolant of f:
// per step f_k * a + f_{k+1} * b, scaled by e^{-gamma t_k}.
struct DiscountWeights {
    double a = 0.0, b = 0.0, step_factor = 1.0;
    DiscountWeights(double gamma, double dt) {
        const double e = std::exp(-gamma * dt);
        const double total = -std::expm1(-gamma * dt) / gamma;
        b = (1.0 - e * (1.0 + gamma * dt)) / (gamma * gamma * dt);
        a = total - b;
        step_factor = e;
    }
};

}  // namespace detail

// One path of B on the grid 0, dt, ..., steps*dt.
inline std::pair<DiscretePath, DiscretePath> sample_B(const BrownianData& bd, const McConfig& cfg,
                                                      std::mt19937_64& rng) {
    if (!(cfg.dt > 0.0) || !(cfg.horizon > cfg.dt)) throw ConfigError("InvalidMcConfig", "bad dt/horizon");
    const Mat2 chol = cholesky2(bd.b_cov);
    const std::size_t m = cfg.steps();
    std::vector<double> z(2 * m);
    detail::fill_normals(rng, z);
    DiscretePath b1{detail::time_grid(m, cfg.dt), std::vector<double>(m + 1)};
    DiscretePath b2{b1.times, std::vector<double>(m + 1)};
    detail::build_b_path(bd, chol, cfg.dt, z, 1.0, b1.values, b2.values);
    return {std::move(b1), std::move(b2)};
}

// One path of the 3-d netput X; B = L X follows from workload_map.
inline std::array<DiscretePath, 3> sample_X(const BrownianData& bd, const McConfig& cfg, std::mt19937_64& rng) {
    const Mat3 chol = cholesky3(bd.x_cov);
    const std::size_t m = cfg.steps();
    const double sq = std::sqrt(cfg.dt);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto t = detail::time_grid(m, cfg.dt);
    std::array<DiscretePath, 3> x{DiscretePath{t, std::vector<double>(m + 1)},
                                  DiscretePath{t, std::vector<double>(m + 1)},
                                  DiscretePath{t, std::vector<double>(m + 1)}};
    for (std::size_t k = 1; k <= m; ++k) {
        const double z[3] = {normal(rng), normal(rng), normal(rng)};
        for (int i = 0; i < 3; ++i) {
            double inc = bd.x_drift[i] * cfg.dt;
            for (int j = 0; j <= i; ++j) inc += sq * chol[i][j] * z[j];
            x[i].values[k] = x[i].values[k - 1] + inc;
        }
    }
    return x;
}

inline std::pair<DiscretePath, DiscretePath> workload_from_netput(const std::array<DiscretePath, 3>& x,
                                                                  const Vec3& mu) {
    const auto L = workload_map(mu);
    DiscretePath b1{x[0].times, std::vector<double>(x[0].size())};
    DiscretePath b2{x[0].times, std::vector<double>(x[0].size())};
    for (std::size_t k = 0; k < x[0].size(); ++k) {
        b1.values[k] = L[0][0] * x[0].values[k] + L[0][1] * x[1].values[k];
        b2.values[k] = L[1][1] * x[1].values[k] + L[1][2] * x[2].values[k];
    }
    return {std::move(b1), std::move(b2)};
}

// Per-path visitor: (path index, reflected paths).
using WstarVisitor = std::function<void(std::size_t, const ReflectedPaths&)>;

// Simulates W*, I* per path and hands each to `visit` (called concurrently
// when cfg.threads > 1). Antithetic pairs share negated normals.
inline void simulate_wstar(const FreeBoundary& fb, const BrownianData& bd, const McConfig& cfg,
                           const WstarVisitor& visit) {
    cfg.validate();
    const Mat2 chol = cholesky2(bd.b_cov);
    const std::size_t m = cfg.steps();
    const std::size_t per_unit = cfg.antithetic ? 2 : 1;
    const std::size_t units = cfg.paths / per_unit;
    const auto t = detail::time_grid(m, cfg.dt);
    const double v1 = bd.b_cov[0][0] * cfg.dt, v2 = bd.b_cov[1][1] * cfg.dt;
    parallel_for(units, cfg.threads, [&](std::size_t u) {
        auto rng = stream_rng(cfg.seed, u);
        std::vector<double> z(2 * m), unif(cfg.bridge ? 2 * m : 0);
        detail::fill_normals(rng, z);
        if (cfg.bridge) detail::fill_uniforms(rng, unif);
        std::vector<double> b1(m + 1), b2(m + 1);
        for (std::size_t s = 0; s < per_unit; ++s) {
            detail::build_b_path(bd, chol, cfg.dt, z, s == 0 ? 1.0 : -1.0, b1, b2);
            ReflectedPaths out{{t, std::vector<double>(m + 1)},
                               {t, std::vector<double>(m + 1)},
                               {t, std::vector<double>(m + 1)},
                               {t, std::vector<double>(m + 1)}};
            detail::GReflector<FreeBoundary> g(fb, v1, v2, cfg.bridge);
            for (std::size_t k = 0; k <= m; ++k) {
                const double u1 = k > 0 && cfg.bridge ? unif[2 * (k - 1)] : 1.0;
                const double u2 = k > 0 && cfg.bridge ? unif[2 * (k - 1) + 1] : 1.0;
                g.step(b1[k], b2[k], u1, u2);
                out.w1.values[k] = g.w1;
                out.w2.values[k] = g.w2;
                out.i1.values[k] = g.i1;
                out.i2.values[k] = g.i2;
            }
            visit(u * per_unit + s, out);
        }
    });
}

// Discounted cost of W* over [0, T]; `cost` overrides hhat when set.
inline CostEstimate estimate_jstar(const NetworkParams& p, const FreeBoundary& fb, const BrownianData& bd,
                                   const McConfig& cfg, const CostFunction& cost = {},
                                   std::vector<double>* per_path = nullptr) {
    cfg.validate();
    const Mat2 chol = cholesky2(bd.b_cov);
    const std::size_t m = cfg.steps();
    const std::size_t per_unit = cfg.antithetic ? 2 : 1;
    const std::size_t units = cfg.paths / per_unit;
    const double gamma = p.gamma();
    const detail::DiscountWeights wts(gamma, cfg.dt);
    const double v1 = bd.b_cov[0][0] * cfg.dt, v2 = bd.b_cov[1][1] * cfg.dt;
    auto hhat = [&](double w1, double w2) { return cost ? cost(w1, w2) : lp_value(p, {w1, w2}); };

    std::vector<double> path_cost(cfg.paths), terminal(cfg.paths);
    parallel_for(units, cfg.threads, [&](std::size_t u) {
        auto rng = stream_rng(cfg.seed, u);
        std::vector<double> z(2 * m), b1(m + 1), b2(m + 1), unif(cfg.bridge ? 2 * m : 0);
        detail::fill_normals(rng, z);
        if (cfg.bridge) detail::fill_uniforms(rng, unif);
        for (std::size_t s = 0; s < per_unit; ++s) {
            detail::build_b_path(bd, chol, cfg.dt, z, s == 0 ? 1.0 : -1.0, b1, b2);
            detail::GReflector<FreeBoundary> g(fb, v1, v2, cfg.bridge);
            double disc = 1.0, total = 0.0, prev = 0.0;
            for (std::size_t k = 0; k <= m; ++k) {
                const double u1 = k > 0 && cfg.bridge ? unif[2 * (k - 1)] : 1.0;
                const double u2 = k > 0 && cfg.bridge ? unif[2 * (k - 1) + 1] : 1.0;
                g.step(b1[k], b2[k], u1, u2);
                const double f = hhat(g.w1, g.w2);
                if (k > 0) {
                    total += disc * (wts.a * prev + wts.b * f);
                    disc *= wts.step_factor;
                }
                prev = f;
            }
            path_cost[u * per_unit + s] = total;
            terminal[u * per_unit + s] = prev;
        }
    });

    // Independent units are the antithetic pairs.
    double sum = 0.0, sumsq = 0.0, term = 0.0;
    for (std::size_t u = 0; u < units; ++u) {
        double v = 0.0;
        for (std::size_t s = 0; s < per_unit; ++s) v += path_cost[u * per_unit + s];
        v /= static_cast<double>(per_unit);
        sum += v;
        sumsq += v * v;
    }
    for (double v : terminal) term += v;
    const double n = static_cast<double>(units);
    CostEstimate est;
    est.paths = cfg.paths;
    est.mean = sum / n;
    const double var = std::max(sumsq / n - est.mean * est.mean, 0.0) * n / (n - 1.0);
    est.std_error = std::sqrt(var / n);
    est.tail_bound = std::exp(-gamma * static_cast<double>(m) * cfg.dt) * (term / static_cast<double>(cfg.paths)) / gamma;
    if (per_path) *per_path = std::move(path_cost);
    return est;
}

// ---------------------------------------------------------------------------
// Optimal BCP control Y* and queue lengths Q* from (W*, I*) and the netput X.

struct BcpPaths {
    std::array<DiscretePath, 3> y;
    std::array<DiscretePath, 3> q;
};

inline BcpPaths optimal_bcp_processes(const NetworkParams& p, const ReflectedPaths& wstar, const DiscretePath& x1,
                                      const DiscretePath& x3) {
    const auto& t = wstar.w1.times;
    for (const DiscretePath* d : {&wstar.w2, &wstar.i1, &wstar.i2, &x1, &x3})
        if (d->times != t) throw ConfigError("GridMismatch", "all paths must share the time grid");
    const auto& mu = p.mu();
    const std::size_t m = t.size();
    BcpPaths out;
    for (int i = 0; i < 3; ++i) {
        out.y[i] = {t, std::vector<double>(m)};
        out.q[i] = {t, std::vector<double>(m)};
    }
    for (std::size_t k = 0; k < m; ++k) {
        const double w1 = wstar.w1.values[k], w2 = wstar.w2.values[k];
        const double i1 = wstar.i1.values[k], i2 = wstar.i2.values[k];
        if (mu[2] * w2 < mu[1] * w1) {
            out.y[0].values[k] = -x3.values[k] / mu[1] + i1 - mu[2] / mu[1] * i2;
            out.y[1].values[k] = x3.values[k] / mu[1] + mu[2] / mu[1] * i2;
            out.y[2].values[k] = i2;
            out.q[0].values[k] = mu[0] / mu[1] * (mu[1] * w1 - mu[2] * w2);
            out.q[1].values[k] = mu[2] * w2;
            out.q[2].values[k] = 0.0;
        } else {
            out.y[0].values[k] = -x1.values[k] / mu[0];
            out.y[1].values[k] = x1.values[k] / mu[0] + i1;
            out.y[2].values[k] = i2;
            out.q[0].values[k] = 0.0;
            out.q[1].values[k] = mu[1] * w1;
            out.q[2].values[k] = mu[2] * w2 - mu[1] * w1;
        }
    }
    return out;
}

// Path-wise CSV of per-path costs followed by a summary row.
inline void write_cost_csv(std::ostream& out, const std::vector<double>& per_path, const CostEstimate& est) {
    out << "path,discounted_cost\n";
    for (std::size_t k = 0; k < per_path.size(); ++k) out << k << ',' << format_double(per_path[k]) << '\n';
    out << "summary_mean," << format_double(est.mean) << '\n';
    out << "summary_se," << format_double(est.std_error) << '\n';
    out << "summary_paths," << est.paths << '\n';
    out << "summary_tail_bound," << format_double(est.tail_bound) << '\n';
}

}  // namespace ccnet
