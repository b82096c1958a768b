#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <string>

#include "ccnet/errors.hpp"
#include "ccnet/kv_config.hpp"

namespace ccnet {

using Vec2 = std::array<double, 2>;
using Vec3 = std::array<double, 3>;
using Mat2 = std::array<Vec2, 2>;
using Mat3 = std::array<Vec3, 3>;

// Rates, costs, discount and diffusion data of the criss-cross network.
// Classes 1 and 2 arrive to server 1; class 2 output becomes class 3 at server 2.
class NetworkParams {
public:
    struct Fields {
        Vec2 lambda{};            // arrival rates
        Vec3 mu{};                // service rates
        Vec3 cost{};              // holding cost per job per unit time
        double gamma = 1.0;       // discount rate
        Vec3 drift_offsets{};     // b1, b2, b3
        Vec2 interarrival_scv{1.0, 1.0};
        Vec3 service_scv{1.0, 1.0, 1.0};
    };

    explicit NetworkParams(const Fields& f) : f_(f) {
        auto positive = [](double v, const char* name) {
            if (!(std::isfinite(v) && v > 0.0))
                throw ConfigError("InvalidParameter", std::string(name) + " must be finite and > 0");
        };
        positive(f.lambda[0], "lambda1");
        positive(f.lambda[1], "lambda2");
        positive(f.mu[0], "mu1");
        positive(f.mu[1], "mu2");
        positive(f.mu[2], "mu3");
        positive(f.cost[0], "c1");
        positive(f.cost[1], "c2");
        positive(f.cost[2], "c3");
        positive(f.gamma, "gamma");
        for (double b : f.drift_offsets)
            if (!std::isfinite(b)) throw ConfigError("InvalidParameter", "drift offsets must be finite");
        for (double s : f.interarrival_scv)
            if (!(std::isfinite(s) && s >= 0.0)) throw ConfigError("InvalidParameter", "scv must be >= 0");
        for (double s : f.service_scv)
            if (!(std::isfinite(s) && s >= 0.0)) throw ConfigError("InvalidParameter", "scv must be >= 0");
    }

    const Vec2& lambda() const noexcept { return f_.lambda; }
    const Vec3& mu() const noexcept { return f_.mu; }
    const Vec3& cost() const noexcept { return f_.cost; }
    double gamma() const noexcept { return f_.gamma; }
    const Vec3& drift_offsets() const noexcept { return f_.drift_offsets; }
    const Vec2& interarrival_scv() const noexcept { return f_.interarrival_scv; }
    const Vec3& service_scv() const noexcept { return f_.service_scv; }
    const Fields& fields() const noexcept { return f_; }

    // Slope bound of the free boundary, mu3/mu2.
    double cone_slope() const noexcept { return f_.mu[2] / f_.mu[1]; }

private:
    Fields f_;
};

inline constexpr double kHeavyTrafficTol = 1e-12;

// Throws HeavyTrafficViolation naming the first identity that fails.
inline void validate_heavy_traffic(const NetworkParams& p) {
    const auto& l = p.lambda();
    const auto& m = p.mu();
    double r1 = l[0] / m[0] + l[1] / m[1] - 1.0;
    if (std::abs(r1) > kHeavyTrafficTol)
        throw HeavyTrafficViolation("lambda1/mu1 + lambda2/mu2 = 1", std::abs(r1));
    double r2 = l[1] / m[2] - 1.0;
    if (std::abs(r2) > kHeavyTrafficTol) throw HeavyTrafficViolation("lambda2/mu3 = 1", std::abs(r2));
}

// Cost regimes. Ties follow the strict/non-strict placement of the defining
// inequalities: Case I is `c1 mu1 - c2 mu2 + c3 mu2 <= 0`; within Case II,
// IIB needs `c2 mu2 - c3 mu2 < 0` and `c2 mu2 - c1 mu1 >= 0`, and so on.
enum class Regime { CaseI, CaseIIA, CaseIIB, CaseIIC, CaseIID };

inline const char* to_string(Regime r) {
    switch (r) {
        case Regime::CaseI: return "CaseI";
        case Regime::CaseIIA: return "CaseIIA";
        case Regime::CaseIIB: return "CaseIIB";
        case Regime::CaseIIC: return "CaseIIC";
        case Regime::CaseIID: return "CaseIID";
    }
    return "?";
}

inline Regime classify_regime(const Vec3& mu, const Vec3& c) {
    if (c[0] * mu[0] - c[1] * mu[1] + c[2] * mu[1] <= 0.0) return Regime::CaseI;
    const double a = c[1] * mu[1] - c[2] * mu[1];
    const double b = c[1] * mu[1] - c[0] * mu[0];
    if (a >= 0.0) return b >= 0.0 ? Regime::CaseIIA : Regime::CaseIIC;
    return b >= 0.0 ? Regime::CaseIIB : Regime::CaseIID;
}

inline Regime classify_regime(const NetworkParams& p) { return classify_regime(p.mu(), p.cost()); }

// ---------------------------------------------------------------------------
// Static LP: minimize c.q subject to q1/mu1 + q2/mu2 = w1, (q2 + q3)/mu3 = w2,
// q >= 0. The feasible set is the segment q2 = s in [0, min(mu2 w1, mu3 w2)];
// the cost is affine in s with slope (c2 mu2 - c1 mu1 - c3 mu2)/mu2, negative
// exactly in Case II, where the optimum sits at s = min(mu2 w1, mu3 w2).

inline void check_workload(const Vec2& w) {
    if (!(w[0] >= 0.0 && w[1] >= 0.0))
        throw ConfigError("NegativeWorkload", "workload components must be >= 0");
}

inline Vec3 lp_optimizer(const Vec3& mu, const Vec3& c, const Vec2& w) {
    check_workload(w);
    if (classify_regime(mu, c) == Regime::CaseI)
        return {mu[0] * w[0], 0.0, mu[2] * w[1]};
    if (mu[2] * w[1] <= mu[1] * w[0])
        return {mu[0] / mu[1] * (mu[1] * w[0] - mu[2] * w[1]), mu[2] * w[1], 0.0};
    return {0.0, mu[1] * w[0], mu[2] * w[1] - mu[1] * w[0]};
}

inline double lp_value(const Vec3& mu, const Vec3& c, const Vec2& w) {
    check_workload(w);
    if (classify_regime(mu, c) == Regime::CaseI)
        return c[0] * mu[0] * w[0] + c[2] * mu[2] * w[1];
    if (mu[2] * w[1] <= mu[1] * w[0])
        return c[0] * mu[0] * w[0] + mu[2] / mu[1] * (c[1] * mu[1] - c[0] * mu[0]) * w[1];
    return (c[1] * mu[1] - c[2] * mu[1]) * w[0] + c[2] * mu[2] * w[1];
}

inline Vec3 lp_optimizer(const NetworkParams& p, const Vec2& w) { return lp_optimizer(p.mu(), p.cost(), w); }
inline double lp_value(const NetworkParams& p, const Vec2& w) { return lp_value(p.mu(), p.cost(), w); }

// ---------------------------------------------------------------------------
// Diffusion data. X is the 3-d netput Brownian motion; B = L X with
// B1 = X1/mu1 + X2/mu2 and B2 = (X2 + X3)/mu3.

struct BrownianData {
    Vec3 x_drift{};
    Mat3 x_cov{};
    Vec2 b_drift{};
    Mat2 b_cov{};
};

inline std::array<Vec3, 2> workload_map(const Vec3& mu) {
    return {{{1.0 / mu[0], 1.0 / mu[1], 0.0}, {0.0, 1.0 / mu[2], 1.0 / mu[2]}}};
}

inline BrownianData brownian_data(const NetworkParams& p) {
    const auto& l = p.lambda();
    const auto& m = p.mu();
    const auto& b = p.drift_offsets();
    const auto& sa = p.interarrival_scv();
    const auto& ss = p.service_scv();

    BrownianData bd;
    bd.x_drift = {m[0] * b[0], m[1] * b[1], m[2] * b[2] - m[1] * b[1]};
    // Class-2 service variability enters X2 and X3 through S2.
    bd.x_cov[0] = {sa[0] * l[0] + ss[0] * l[0], 0.0, 0.0};
    bd.x_cov[1] = {0.0, sa[1] * l[1] + ss[1] * l[1], -ss[1] * l[1]};
    bd.x_cov[2] = {0.0, -ss[1] * l[1], ss[1] * l[1] + ss[2] * m[2]};

    const auto L = workload_map(m);
    for (int i = 0; i < 2; ++i) {
        double d = 0.0;
        for (int k = 0; k < 3; ++k) d += L[i][k] * bd.x_drift[k];
        bd.b_drift[i] = d;
        for (int j = 0; j < 2; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k)
                for (int q = 0; q < 3; ++q) s += L[i][k] * bd.x_cov[k][q] * L[j][q];
            bd.b_cov[i][j] = s;
        }
    }
    bd.b_cov[1][0] = bd.b_cov[0][1];
    return bd;
}

// Lower-triangular factor of a PSD 2x2 matrix; zero pivots are allowed.
inline Mat2 cholesky2(const Mat2& a) {
    constexpr double tol = 1e-14;
    const double scale = std::max({1.0, std::abs(a[0][0]), std::abs(a[1][1])});
    if (std::abs(a[0][1] - a[1][0]) > tol * scale)
        throw NumericError("NonPsdCovariance", "covariance not symmetric");
    if (a[0][0] < -tol * scale) throw NumericError("NonPsdCovariance", "negative variance");
    Mat2 l{};
    l[0][0] = std::sqrt(std::max(a[0][0], 0.0));
    if (l[0][0] > 0.0) {
        l[1][0] = a[1][0] / l[0][0];
    } else if (std::abs(a[1][0]) > tol * scale) {
        throw NumericError("NonPsdCovariance", "zero variance with nonzero covariance");
    }
    const double rem = a[1][1] - l[1][0] * l[1][0];
    if (rem < -tol * scale) throw NumericError("NonPsdCovariance", "covariance not PSD");
    l[1][1] = std::sqrt(std::max(rem, 0.0));
    return l;
}

// Same for 3x3 (used when the netput X itself is simulated).
inline Mat3 cholesky3(const Mat3& a) {
    constexpr double tol = 1e-12;
    Mat3 l{};
    for (int j = 0; j < 3; ++j) {
        double d = a[j][j];
        for (int k = 0; k < j; ++k) d -= l[j][k] * l[j][k];
        if (d < -tol) throw NumericError("NonPsdCovariance", "covariance not PSD");
        l[j][j] = std::sqrt(std::max(d, 0.0));
        for (int i = j + 1; i < 3; ++i) {
            double s = a[i][j];
            for (int k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
            if (l[j][j] > 0.0) {
                l[i][j] = s / l[j][j];
            } else if (std::abs(s) > tol) {
                throw NumericError("NonPsdCovariance", "covariance not PSD");
            }
        }
    }
    return l;
}

// ---------------------------------------------------------------------------
// Config file I/O.

inline NetworkParams params_from_kv(const KvDocument& doc) {
    NetworkParams::Fields f;
    f.lambda = {doc.number("lambda1"), doc.number("lambda2")};
    f.mu = {doc.number("mu1"), doc.number("mu2"), doc.number("mu3")};
    f.cost = {doc.number("c1"), doc.number("c2"), doc.number("c3")};
    f.gamma = doc.number("gamma");
    f.drift_offsets = {doc.number("b1"), doc.number("b2"), doc.number("b3")};
    f.interarrival_scv = {doc.number("scv_a1"), doc.number("scv_a2")};
    f.service_scv = {doc.number("scv_s1"), doc.number("scv_s2"), doc.number("scv_s3")};
    NetworkParams p(f);
    validate_heavy_traffic(p);
    return p;
}

inline KvDocument params_to_kv(const NetworkParams& p) {
    KvDocument doc;
    doc.set("lambda1", p.lambda()[0]);
    doc.set("lambda2", p.lambda()[1]);
    doc.set("mu1", p.mu()[0]);
    doc.set("mu2", p.mu()[1]);
    doc.set("mu3", p.mu()[2]);
    doc.set("c1", p.cost()[0]);
    doc.set("c2", p.cost()[1]);
    doc.set("c3", p.cost()[2]);
    doc.set("gamma", p.gamma());
    doc.set("b1", p.drift_offsets()[0]);
    doc.set("b2", p.drift_offsets()[1]);
    doc.set("b3", p.drift_offsets()[2]);
    doc.set("scv_a1", p.interarrival_scv()[0]);
    doc.set("scv_a2", p.interarrival_scv()[1]);
    doc.set("scv_s1", p.service_scv()[0]);
    doc.set("scv_s2", p.service_scv()[1]);
    doc.set("scv_s3", p.service_scv()[2]);
    return doc;
}

inline void write_kv(std::ostream& out, const KvDocument& doc) {
    for (const auto& [k, v] : doc.entries()) out << k << " = " << v << '\n';
}

inline NetworkParams load_params(const std::string& path) { return params_from_kv(KvDocument::load(path)); }

inline void save_params(const NetworkParams& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("FileError", "cannot write '" + path + "'");
    write_kv(out, params_to_kv(p));
}

// ---------------------------------------------------------------------------
// Rates of the n-th network. Default schedule: mu1, mu2 fixed,
// lambda_i^n = lambda_i + mu_i b_i / sqrt(n), and mu3^n = lambda2^n / (1 + b3/sqrt(n)),
// so sqrt(n)(lambda_i^n/mu_i^n - lambda_i/mu_i) = b_i and
// sqrt(n)(lambda2^n/mu3^n - 1) = b3 hold exactly for every n.

struct PrelimitRates {
    Vec2 lambda{};
    Vec3 mu{};
    bool operator==(const PrelimitRates&) const = default;
};

inline PrelimitRates prelimit_rates(const NetworkParams& p, double n) {
    if (!(n >= 1.0)) throw ConfigError("InvalidN", "n must be >= 1");
    const double r = std::sqrt(n);
    const auto& b = p.drift_offsets();
    PrelimitRates out;
    out.mu = p.mu();
    for (int i = 0; i < 2; ++i) out.lambda[i] = p.lambda()[i] + p.mu()[i] * b[i] / r;
    const double denom = 1.0 + b[2] / r;
    if (!(out.lambda[0] > 0.0 && out.lambda[1] > 0.0 && denom > 0.0))
        throw ConfigError("InvalidN", "drift offsets make a rate non-positive at n = " + format_double(n));
    out.mu[2] = out.lambda[1] / denom;
    return out;
}

// The reference Case IIB instance used throughout the tests and docs.
inline NetworkParams reference_params() {
    NetworkParams::Fields f;
    f.lambda = {0.5, 1.0};
    f.mu = {1.0, 2.0, 1.0};
    f.cost = {1.0, 1.0, 2.0};
    f.gamma = 1.0;
    return NetworkParams(f);
}

}  // namespace ccnet
