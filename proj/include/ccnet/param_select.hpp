#pragma once

// Large-deviation machinery for renewal counts and the explicit threshold
// constants of the scheduling policy.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ccnet/distributions.hpp"
#include "ccnet/errors.hpp"
#include "ccnet/kv_config.hpp"
#include "ccnet/model_params.hpp"

namespace ccnet {

// Rate function of eta = u / nu for a unit-mean u: Lambda(l) = log E e^{l eta}.
struct RateFunction {
    UnitDistribution dist;
    double nu = 1.0;

    RateFunction() = default;
    RateFunction(UnitDistribution d, double rate) : dist(d), nu(rate) {
        if (!(rate > 0.0)) throw ConfigError("InvalidRate", "rate must be > 0");
    }

    // Lambda is finite for l < domain_radius().
    double domain_radius() const noexcept { return dist.radius() * nu; }
    double Lambda(double l) const noexcept { return dist.log_mgf(l / nu); }
    double Lambda_prime(double l) const noexcept { return dist.log_mgf_derivative(l / nu) / nu; }
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Lambda*(x) = sup_l (l x - Lambda(l)). The supremum is located by bisection
// on Lambda'(l) = x inside a bracket grown towards the domain edge; for x
// outside the closure of Lambda's range the transform is +infinity.
inline double legendre(const RateFunction& rf, double x) {
    if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError("OutOfDomain", "legendre needs finite x > 0");
    const auto& d = rf.dist;
    const double y = rf.nu * x;  // unit-scale argument
    if (d.family() == Family::Deterministic) return y == 1.0 ? 0.0 : kInfinity;
    if (y <= d.support_min() || y >= d.support_max()) return kInfinity;
    if (y == 1.0) return 0.0;

    // Unit scale: s = l / nu, Lambda*(x) = s y - log E e^{s u}.
    auto deriv = [&](double s) { return d.log_mgf_derivative(s); };
    double lo = 0.0, hi = 0.0;
    if (y < 1.0) {
        lo = -1.0;
        while (deriv(lo) > y) {
            hi = lo;
            lo *= 2.0;
            if (lo < -1e300) throw NumericError("OutOfDomain", "no bracket for legendre");
        }
    } else {
        const double r = d.radius();
        if (std::isfinite(r)) {
            double gap = r / 2.0;
            hi = r - gap;
            while (deriv(hi) < y) {
                lo = hi;
                gap /= 2.0;
                hi = r - gap;
                if (gap < r * 1e-300) throw NumericError("OutOfDomain", "no bracket for legendre");
            }
        } else {
            hi = 1.0;
            while (deriv(hi) < y) {
                lo = hi;
                hi *= 2.0;
                if (hi > 1e300) throw NumericError("OutOfDomain", "no bracket for legendre");
            }
        }
    }
    for (int it = 0; it < 400 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        (deriv(mid) < y ? lo : hi) = mid;
    }
    const double s = 0.5 * (lo + hi);
    return std::max(0.0, s * y - d.log_mgf(s));
}

struct Thetas {
    double theta1 = 0.0;
    double theta2 = 0.0;
};

// Theta1 = Lambda*((1/nu) / (1 + eps/(3 nu))), Theta2 = Lambda*((1/nu)(1 + eps/(2 nu))),
// without the eps range check.
inline Thetas thetas_unchecked(const RateFunction& rf, double eps) {
    const double nu = rf.nu;
    return {legendre(rf, (1.0 / nu) / (1.0 + eps / (3.0 * nu))), legendre(rf, (1.0 / nu) * (1.0 + eps / (2.0 * nu)))};
}

inline Thetas thetas(const RateFunction& rf, double eps) {
    if (!(eps > 0.0)) throw ConfigError("EpsTooLarge", "eps must be > 0");
    if (!(eps < rf.nu / 2.0)) throw ConfigError("EpsTooLarge", "eps must be < nu/2");
    return thetas_unchecked(rf, eps);
}

struct LdpBounds {
    double upper = 0.0;        // bound on P(N(t) > (nu_n + eps) t)
    double upper_loose = 0.0;  // the weaker exp(-(nu t - 1) Theta1)
    double lower = 0.0;        // bound on P(N(t) < (nu_n - eps) t)
};

// Renewal count N(t) of gaps (nu/nu_n) u_i / nu. p0 must lie in (0, radius).
// eps is not capped at nu/2 here: the bounds are also applied with eps = 1.
inline LdpBounds ldp_bounds(const RateFunction& rf, double nu_n, double eps, double t, double p0) {
    const double nu = rf.nu;
    if (!(eps > 0.0)) throw ConfigError("OutOfDomain", "eps must be > 0");
    if (!(t >= 2.0 / eps)) throw ConfigError("TooSmallT", "need t >= 2/eps");
    const Thetas th = thetas_unchecked(rf, eps);
    if (!(std::abs(nu_n - nu) < eps) || !(nu_n <= 1.5 * nu))
        throw ConfigError("RateTooFar", "nu_n is not within the eps window of nu");
    if (!(p0 > 0.0 && p0 < rf.domain_radius())) throw ConfigError("OutOfDomain", "p0 outside the MGF domain");
    LdpBounds b;
    b.upper = std::exp(-((nu_n + eps) * t - 1.0) * th.theta1);
    b.upper_loose = std::exp(-(nu * t - 1.0) * th.theta1);
    b.lower = std::exp(-(nu_n - eps) * t * th.theta2) + std::exp(-p0 * eps * t / (2.0 * nu)) * std::exp(rf.Lambda(p0));
    return b;
}

// ---------------------------------------------------------------------------
// Threshold constants.

struct ThresholdOverrides {
    double eps = 0.0;          // <= 0: (mu1 - lambda1)/8
    double eps1 = 0.0;         // <= 0: half of min{1, (mu2-mu3)/8, mu2/2, mu3/2}
    double p0 = 0.0;           // <= 0: half the smallest stream radius
    double lbar_factor = 1.01; // lbar = factor * max{1, 3/gamma4}
};

struct ThresholdConstants {
    double eps = 0.0, eps1 = 0.0, p0 = 0.0;
    double rate_inf = 0.0;  // inf_n mu1^n / (2 mu2^n (lambda1^n + eps)) over the schedule
    double theta4 = 0.0, c = 0.0, gamma4 = 0.0, lbar = 0.0;
    double d = 0.0, K = 0.0, theta = 0.0;
    std::vector<double> n_schedule;
    std::vector<std::pair<std::string, std::string>> notes;
};

namespace detail {

// Radius of the MGF domain of u/nu; an unbounded domain counts as nu.
inline double stream_radius(const UnitDistribution& d, double nu) {
    return std::isfinite(d.radius()) ? d.radius() * nu : nu;
}

struct Term {
    double value;
    std::string label;
};

inline const Term& argmin(const std::vector<Term>& terms) {
    return *std::min_element(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.value < b.value; });
}

}  // namespace detail

inline ThresholdConstants select_thresholds(const NetworkParams& p, const PrimitiveDistributions& prim,
                                            std::vector<double> n_schedule = {100, 400, 1600, 6400},
                                            const ThresholdOverrides& ov = {}) {
    const auto& lam = p.lambda();
    const auto& mu = p.mu();
    if (!(mu[1] > mu[2])) throw ConfigError("DegenerateRates", "need mu2 > mu3");
    if (classify_regime(p) != Regime::CaseIIB)
        throw ConfigError("WrongRegime", std::string("thresholds need Case IIB, got ") + to_string(classify_regime(p)));
    if (n_schedule.empty()) throw ConfigError("InvalidSchedule", "empty n schedule");

    ThresholdConstants out;
    out.n_schedule = n_schedule;
    auto note = [&](const std::string& k, const std::string& v) { out.notes.emplace_back(k, v); };

    out.eps = ov.eps > 0.0 ? ov.eps : (mu[0] - lam[0]) / 8.0;
    if (!(out.eps > 0.0 && out.eps < (mu[0] - lam[0]) / 4.0))
        throw ConfigError("InvalidEps", "eps must lie in (0, (mu1 - lambda1)/4)");
    const double eps1_cap = std::min({1.0, (mu[1] - mu[2]) / 8.0, mu[1] / 2.0, mu[2] / 2.0});
    out.eps1 = ov.eps1 > 0.0 ? ov.eps1 : eps1_cap / 2.0;
    if (!(out.eps1 > 0.0 && out.eps1 < eps1_cap)) throw ConfigError("InvalidEps", "eps1 outside its interval");

    const RateFunction a1(prim.arrival[0], lam[0]), a2(prim.arrival[1], lam[1]);
    const RateFunction s1(prim.service[0], mu[0]), s2(prim.service[1], mu[1]), s3(prim.service[2], mu[2]);

    double radius = kInfinity;
    for (const RateFunction* rf : {&a1, &a2, &s1, &s2, &s3}) radius = std::min(radius, detail::stream_radius(rf->dist, rf->nu));
    out.p0 = ov.p0 > 0.0 ? ov.p0 : radius / 2.0;
    if (!(out.p0 < radius)) throw ConfigError("OutOfDomain", "p0 must lie inside every MGF domain");
    note("p0", "half of the smallest MGF-domain radius over the five streams");

    out.rate_inf = kInfinity;
    for (double n : n_schedule) {
        const auto r = prelimit_rates(p, n);
        out.rate_inf = std::min(out.rate_inf, r.mu[0] / (2.0 * r.mu[1] * (r.lambda[0] + out.eps)));
    }
    note("rate_inf", "infimum over n in [" + format_double(n_schedule.front()) + ", " + format_double(n_schedule.back()) +
                         "] (" + std::to_string(n_schedule.size()) + " values)");

    const std::vector<detail::Term> t4{
        {lam[0] * thetas_unchecked(a1, out.eps).theta1, "lambda1*Theta1[a1](lambda1,eps)"},
        {mu[0] * thetas_unchecked(s1, out.eps).theta2, "mu1*Theta2[s1](mu1,eps)"},
        {out.p0 * out.eps / (2.0 * mu[0]), "p0*eps/(2 mu1)"}};
    const auto& m4 = detail::argmin(t4);
    out.theta4 = out.rate_inf * m4.value;
    note("theta4", "binding term " + m4.label);
    out.c = 1.0 + 4.0 / out.theta4;

    out.K = 32.0 * mu[1] + 4.0 * mu[1] * (mu[1] - mu[2]) / mu[2];
    out.d = 2.0 * out.c * out.K / (mu[1] - mu[2]);
    out.theta = std::min(0.5, (mu[1] - mu[2]) / (32.0 * out.c * mu[2]));

    // Each service Theta enters with its own rate mu_i and eps1; arrival
    // Thetas use stream 2 at lambda2 and eps1.
    const double e1 = out.eps1, K = out.K, d = out.d, th = out.theta, p0 = out.p0;
    const Thetas ta2 = thetas_unchecked(a2, e1);
    std::vector<detail::Term> t;
    t.push_back({d * lam[1] * ta2.theta1 / K, "d*lambda2*Theta1[a2](lambda2,eps1)/K"});
    t.push_back({lam[1] * ta2.theta1 / (4.0 * mu[2]), "lambda2*Theta1[a2](lambda2,eps1)/(4 mu3)"});
    t.push_back({(lam[1] - 2.0 * e1) * ta2.theta2 / (4.0 * mu[2]), "(lambda2-2eps1)*Theta2[a2](lambda2,eps1)/(4 mu3)"});
    t.push_back({p0 * e1 / (8.0 * mu[2] * lam[1]), "p0*eps1/(8 mu3 lambda2)"});
    for (int i : {1, 2}) {
        const RateFunction& si = i == 1 ? s2 : s3;
        const Thetas ts = thetas_unchecked(si, e1);
        const std::string tag = "[s" + std::to_string(i + 1) + "](mu" + std::to_string(i + 1) + ",eps1)";
        const std::string m = "mu" + std::to_string(i + 1);
        t.push_back({d * (th + 1.0) * (mu[i] - 2.0 * e1) * ts.theta2 / K, "d*(theta+1)*(" + m + "-2eps1)*Theta2" + tag + "/K"});
        t.push_back({d * th * mu[i] * ts.theta1 / K, "d*theta*" + m + "*Theta1" + tag + "/K"});
        t.push_back({d * p0 * (th + 1.0) * e1 / (2.0 * mu[i] * K), "d*p0*(theta+1)*eps1/(2 " + m + " K)"});
        t.push_back({mu[i] * ts.theta1 / (4.0 * mu[2]), m + "*Theta1" + tag + "/(4 mu3)"});
        t.push_back({(mu[i] - 2.0 * e1) * ts.theta2 / (4.0 * mu[2]), "(" + m + "-2eps1)*Theta2" + tag + "/(4 mu3)"});
        t.push_back({p0 * e1 / (8.0 * mu[2] * mu[i]), "p0*eps1/(8 mu3 " + m + ")"});
    }
    const auto& mg = detail::argmin(t);
    out.gamma4 = mg.value;
    note("gamma4", "binding term " + mg.label);
    note("gamma4_mapping", "service Thetas use (mu_i, eps1) for i = 2,3; arrival Thetas use (lambda2, eps1)");
    out.lbar = ov.lbar_factor * std::max(1.0, 3.0 / out.gamma4);
    note("lbar", format_double(ov.lbar_factor) + " * max{1, 3/gamma4}");

    for (double v : {out.theta4, out.c, out.gamma4, out.lbar, out.d, out.K, out.theta, out.eps1})
        if (!(v > 0.0) || !std::isfinite(v)) throw NumericError("DegenerateConstants", "a threshold constant is not finite and positive");
    return out;
}

inline KvDocument thresholds_to_kv(const ThresholdConstants& tc) {
    KvDocument doc;
    doc.set("eps", tc.eps);
    doc.set("eps1", tc.eps1);
    doc.set("p0", tc.p0);
    doc.set("rate_inf", tc.rate_inf);
    doc.set("theta4", tc.theta4);
    doc.set("c", tc.c);
    doc.set("gamma4", tc.gamma4);
    doc.set("lbar", tc.lbar);
    doc.set("d", tc.d);
    doc.set("K", tc.K);
    doc.set("theta", tc.theta);
    std::string sched;
    for (double n : tc.n_schedule) sched += (sched.empty() ? "" : ",") + format_double(n);
    doc.set("n_schedule", sched);
    for (const auto& [k, v] : tc.notes) doc.set("note." + k, v);
    return doc;
}

}  // namespace ccnet
