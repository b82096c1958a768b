#include <gtest/gtest.h>

#include <mutex>
#include <random>
#include <sstream>

#include "ccnet/free_boundary.hpp"
#include "ccnet/rbm_mc.hpp"

using namespace ccnet;

namespace {

BrownianData deterministic_bd(Vec2 drift) {
    BrownianData bd;
    bd.b_drift = drift;
    return bd;
}

const FreeBoundary& reference_boundary() {
    static const FreeBoundary fb = [] {
        const auto p = reference_params();
        const auto bd = brownian_data(p);
        GridSpec g;
        g.w_max = default_w_max(bd, p.gamma());
        g.h = g.w_max / 100;
        return extract_boundary(solve_value(p, bd, g), p);
    }();
    return fb;
}

McConfig small_cfg(std::size_t paths, double dt) {
    McConfig cfg = default_mc_config(1.0);
    cfg.paths = paths;
    cfg.dt = dt;
    cfg.seed = 17;
    return cfg;
}

double combined_se(const CostEstimate& a, const CostEstimate& b) {
    return std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
}

}  // namespace

TEST(SampleB, DeterministicDrift) {
    McConfig cfg;
    cfg.dt = 0.5;
    cfg.horizon = 1.0;
    std::mt19937_64 rng(1);
    const auto [b1, b2] = sample_B(deterministic_bd({1, -1}), cfg, rng);
    EXPECT_EQ(b1.values, (std::vector<double>{0, 0.5, 1}));
    EXPECT_EQ(b2.values, (std::vector<double>{0, -0.5, -1}));
    EXPECT_EQ(b1.times, (std::vector<double>{0, 0.5, 1}));
}

TEST(SampleB, MomentsAtHorizon) {
    BrownianData bd = brownian_data(reference_params());
    bd.b_drift = {0.3, -0.2};
    McConfig cfg;
    cfg.dt = 0.25;
    cfg.horizon = 1.0;
    std::mt19937_64 rng(2);
    const int N = 100000;
    double m1 = 0, m2 = 0, s11 = 0, s22 = 0, s12 = 0;
    for (int k = 0; k < N; ++k) {
        const auto [b1, b2] = sample_B(bd, cfg, rng);
        const double x = b1.values.back(), y = b2.values.back();
        m1 += x;
        m2 += y;
        s11 += x * x;
        s22 += y * y;
        s12 += x * y;
    }
    m1 /= N;
    m2 /= N;
    s11 = s11 / N - m1 * m1;
    s22 = s22 / N - m2 * m2;
    s12 = s12 / N - m1 * m2;
    EXPECT_NEAR(m1, 0.3, 4.0 * std::sqrt(bd.b_cov[0][0] / N));
    EXPECT_NEAR(m2, -0.2, 4.0 * std::sqrt(bd.b_cov[1][1] / N));
    // Var of a sample variance of a normal is 2 s^4 / N.
    EXPECT_NEAR(s11, bd.b_cov[0][0], 4.0 * bd.b_cov[0][0] * std::sqrt(2.0 / N));
    EXPECT_NEAR(s22, bd.b_cov[1][1], 4.0 * bd.b_cov[1][1] * std::sqrt(2.0 / N));
    EXPECT_NEAR(s12, bd.b_cov[0][1], 4.0 * std::sqrt((bd.b_cov[0][0] * bd.b_cov[1][1] + bd.b_cov[0][1] * bd.b_cov[0][1]) / N));
}

TEST(SampleX, MapsToB) {
    const auto p = reference_params();
    const auto bd = brownian_data(p);
    McConfig cfg;
    cfg.dt = 0.1;
    cfg.horizon = 1.0;
    std::mt19937_64 rng(3);
    const auto x = sample_X(bd, cfg, rng);
    const auto [b1, b2] = workload_from_netput(x, p.mu());
    for (std::size_t k = 0; k < b1.size(); ++k) {
        EXPECT_NEAR(b1.values[k], x[0].values[k] + 0.5 * x[1].values[k], 1e-14);
        EXPECT_NEAR(b2.values[k], x[1].values[k] + x[2].values[k], 1e-14);
    }
}

TEST(BridgeMin, NeverAboveEndpointsAndExactWithoutNoise) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-2.0, 2.0), v(1e-12, 1.0);
    for (int k = 0; k < 1000; ++k) {
        const double a = u(rng), b = u(rng);
        EXPECT_LE(detail::bridge_min(a, b, 0.1, v(rng)), std::min(a, b) + 1e-15);
        EXPECT_NEAR(detail::bridge_min(a, b, 0.0, v(rng)), std::min(a, b), 1e-15);
    }
}

TEST(BridgeMin, MatchesFinelySampledBridge) {
    // P(min < m) for a bridge from 0 to 0 with variance s: exp(-2 m^2 / s).
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double s = 1.0, m = -0.5;
    const int N = 200000;
    int hits = 0;
    for (int k = 0; k < N; ++k)
        if (detail::bridge_min(0.0, 0.0, s, 1.0 - unif(rng)) < m) ++hits;
    const double want = std::exp(-2.0 * m * m / s);
    EXPECT_NEAR(static_cast<double>(hits) / N, want, 4.0 * std::sqrt(want * (1 - want) / N));
}

TEST(SimulateWstar, ZeroNoiseZeroDrift) {
    McConfig cfg = small_cfg(4, 0.1);
    cfg.horizon = 1.0;
    simulate_wstar(reference_boundary(), deterministic_bd({0, 0}), cfg, [](std::size_t, const ReflectedPaths& r) {
        for (const auto* p : {&r.w1, &r.w2, &r.i1, &r.i2})
            for (double v : p->values) EXPECT_EQ(v, 0.0);
    });
}

TEST(SimulateWstar, NegativeDriftRamp) {
    McConfig cfg = small_cfg(2, 0.1);
    cfg.horizon = 1.0;
    for (bool bridge : {false, true}) {
        cfg.bridge = bridge;
        simulate_wstar(reference_boundary(), deterministic_bd({-1, -1}), cfg, [](std::size_t, const ReflectedPaths& r) {
            for (std::size_t k = 0; k < r.w1.size(); ++k) {
                EXPECT_NEAR(r.w1.values[k], 0.0, 1e-12);
                EXPECT_NEAR(r.w2.values[k], 0.0, 1e-12);
                EXPECT_NEAR(r.i1.values[k], r.w1.times[k], 1e-12);
                EXPECT_NEAR(r.i2.values[k], r.w1.times[k], 1e-12);
            }
        });
    }
}

TEST(SimulateWstar, ZeroBoundaryIsDecoupledReflection) {
    McConfig cfg = small_cfg(20, 0.05);
    cfg.horizon = 2.0;
    cfg.bridge = false;
    simulate_wstar(zero_boundary(0.5), brownian_data(reference_params()), cfg, [](std::size_t, const ReflectedPaths& r) {
        DiscretePath b1{r.w1.times, {}}, b2{r.w1.times, {}};
        for (std::size_t k = 0; k < r.w1.size(); ++k) {
            b1.values.push_back(r.w1.values[k] - r.i1.values[k]);
            b2.values.push_back(r.w2.values[k] - r.i2.values[k]);
        }
        const auto g1 = gamma(b1), g2 = gamma(b2);
        for (std::size_t k = 0; k < r.w1.size(); ++k) {
            EXPECT_NEAR(g1.values[k], r.w1.values[k], 1e-12);
            EXPECT_NEAR(g2.values[k], r.w2.values[k], 1e-12);
        }
    });
}

TEST(SimulateWstar, StaysInGWithMonotoneRegulators) {
    const auto& fb = reference_boundary();
    McConfig cfg = small_cfg(200, 0.02);
    cfg.horizon = 3.0;
    std::mutex mu;
    std::size_t seen = 0;
    simulate_wstar(fb, brownian_data(reference_params()), cfg, [&](std::size_t, const ReflectedPaths& r) {
        double min_gap = 0, min_w2 = 0, worst_i = 0;
        for (std::size_t k = 0; k < r.w1.size(); ++k) {
            min_gap = std::min(min_gap, r.w1.values[k] - fb(r.w2.values[k]));
            min_w2 = std::min(min_w2, r.w2.values[k]);
            if (k > 0)
                worst_i = std::min({worst_i, r.i1.values[k] - r.i1.values[k - 1], r.i2.values[k] - r.i2.values[k - 1]});
        }
        std::lock_guard lock(mu);
        ++seen;
        EXPECT_GE(min_gap, -1e-12);
        EXPECT_GE(min_w2, 0.0);
        EXPECT_GE(worst_i, 0.0);
        EXPECT_EQ(r.i1.values[0], 0.0);
        EXPECT_EQ(r.i2.values[0], 0.0);
    });
    EXPECT_EQ(seen, 200u);
}

TEST(EstimateJstar, UnitCostIsExactDiscountIntegral) {
    const auto p = reference_params();
    McConfig cfg = small_cfg(10, 0.01);
    const auto est = estimate_jstar(p, reference_boundary(), brownian_data(p), cfg, [](double, double) { return 1.0; });
    const double T = static_cast<double>(cfg.steps()) * cfg.dt;
    EXPECT_NEAR(est.mean, -std::expm1(-T), 1e-12);
    EXPECT_NEAR(est.std_error, 0.0, 1e-12);
    EXPECT_NEAR(est.tail_bound, std::exp(-T), 1e-15);
}

TEST(EstimateJstar, ZeroNoiseNegativeDrift) {
    const auto p = reference_params();
    McConfig cfg = small_cfg(4, 0.05);
    const auto est = estimate_jstar(p, reference_boundary(), deterministic_bd({-1, -1}), cfg);
    EXPECT_NEAR(est.mean, 0.0, 1e-12);
}

TEST(EstimateJstar, IndependentOfThreadCount) {
    const auto p = reference_params();
    McConfig cfg = small_cfg(400, 0.05);
    std::vector<double> a, b;
    const auto e1 = estimate_jstar(p, reference_boundary(), brownian_data(p), cfg, {}, &a);
    cfg.threads = 3;
    const auto e3 = estimate_jstar(p, reference_boundary(), brownian_data(p), cfg, {}, &b);
    EXPECT_EQ(e1.mean, e3.mean);
    EXPECT_EQ(e1.std_error, e3.std_error);
    EXPECT_EQ(a, b);
}

TEST(EstimateJstar, ReferenceBaseline) {
    // Baseline from 10^5 bridged paths at dt = 0.01: 1.591, consistent with
    // the grid solver's refinement limit.
    const auto p = reference_params();
    const auto est = estimate_jstar(p, reference_boundary(), brownian_data(p), small_cfg(20000, 0.02));
    EXPECT_NEAR(est.mean, 1.591, 4.0 * est.std_error + 0.005);
    EXPECT_LT(est.tail_bound, 1e-3);
}

TEST(EstimateJstar, OtherAdmissibleBoundariesCostMore) {
    const auto p = reference_params();
    const auto bd = brownian_data(p);
    const auto cfg = small_cfg(20000, 0.02);
    const auto opt = estimate_jstar(p, reference_boundary(), bd, cfg);
    const auto zero = estimate_jstar(p, zero_boundary(p.cone_slope()), bd, cfg);
    const auto cone = estimate_jstar(p, cone_boundary(p.cone_slope()), bd, cfg);
    EXPECT_LE(opt.mean, zero.mean + 2.0 * combined_se(opt, zero));
    EXPECT_LE(opt.mean, cone.mean + 2.0 * combined_se(opt, cone));
}

TEST(EstimateJstar, WeakOrderHalvingDt) {
    const auto p = reference_params();
    const auto bd = brownian_data(p);
    const auto coarse = estimate_jstar(p, reference_boundary(), bd, small_cfg(100000, 0.01));
    const auto fine = estimate_jstar(p, reference_boundary(), bd, small_cfg(100000, 0.005));
    EXPECT_LT(std::abs(coarse.mean - fine.mean), combined_se(coarse, fine))
        << "coarse " << coarse.mean << " fine " << fine.mean;
}

TEST(McConfig, Validation) {
    McConfig c;
    c.dt = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = McConfig{};
    c.horizon = c.dt / 2;
    EXPECT_THROW(c.validate(), ConfigError);
    c = McConfig{};
    c.paths = 1;
    EXPECT_THROW(c.validate(), ConfigError);
    c = McConfig{};
    c.paths = 3;
    EXPECT_THROW(c.validate(), ConfigError);
    c.antithetic = false;
    EXPECT_NO_THROW(c.validate());
}

TEST(BcpProcesses, Examples) {
    const auto p = reference_params();
    const std::vector<double> t{0, 1};
    auto constant = [&](double v) { return DiscretePath{t, {v, v}}; };
    const DiscretePath zero = constant(0);
    ReflectedPaths w{constant(0), constant(0), zero, zero};
    auto out = optimal_bcp_processes(p, w, zero, zero);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(out.q[i].values, (std::vector<double>{0, 0}));

    w.w1 = constant(1);
    w.w2 = constant(1);
    out = optimal_bcp_processes(p, w, zero, zero);
    EXPECT_EQ(out.q[0].values[1], 0.5);
    EXPECT_EQ(out.q[1].values[1], 1.0);
    EXPECT_EQ(out.q[2].values[1], 0.0);

    w.w1 = constant(0.25);
    out = optimal_bcp_processes(p, w, zero, zero);
    EXPECT_EQ(out.q[0].values[1], 0.0);
    EXPECT_EQ(out.q[1].values[1], 0.5);
    EXPECT_EQ(out.q[2].values[1], 0.5);

    DiscretePath other{{0, 2}, {0, 0}};
    EXPECT_THROW(optimal_bcp_processes(p, w, other, zero), ConfigError);
}

TEST(BcpProcesses, QueueLengthsMatchLpOptimizer) {
    const auto p = reference_params();
    McConfig cfg = small_cfg(50, 0.02);
    cfg.horizon = 2.0;
    std::mutex mu;
    simulate_wstar(reference_boundary(), brownian_data(p), cfg, [&](std::size_t, const ReflectedPaths& r) {
        const DiscretePath zero{r.w1.times, std::vector<double>(r.w1.size(), 0.0)};
        const auto out = optimal_bcp_processes(p, r, zero, zero);
        std::lock_guard lock(mu);
        for (std::size_t k = 0; k < r.w1.size(); ++k) {
            const Vec3 q = lp_optimizer(p, {r.w1.values[k], r.w2.values[k]});
            for (int i = 0; i < 3; ++i) {
                EXPECT_NEAR(out.q[i].values[k], q[i], 1e-12);
                EXPECT_GE(out.q[i].values[k], 0.0);
            }
        }
    });
}

TEST(CostCsv, SummaryRows) {
    CostEstimate est{1.5, 0.1, 2, 0.001};
    std::ostringstream s;
    write_cost_csv(s, {1.4, 1.6}, est);
    EXPECT_EQ(s.str(), "path,discounted_cost\n0,1.4\n1,1.6\nsummary_mean,1.5\nsummary_se,0.1\nsummary_paths,2\n"
                       "summary_tail_bound,0.001\n");
}
