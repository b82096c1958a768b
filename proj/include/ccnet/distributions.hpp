#pragma once

// Unit-mean primitive distributions for interarrival and service times, with
// the closed-form log-MGF and its derivative used by the large-deviation code.

#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <string_view>

#include "ccnet/errors.hpp"
#include "ccnet/kv_config.hpp"
#include "ccnet/model_params.hpp"

namespace ccnet {

enum class Family { Exponential, Erlang, Uniform, Deterministic };

class UnitDistribution {
public:
    UnitDistribution() = default;

    static UnitDistribution exponential() { return UnitDistribution(Family::Exponential, 1, 0.0, 0.0); }
    static UnitDistribution erlang(int k) {
        if (k < 1) throw ConfigError("InvalidDistribution", "erlang shape must be >= 1");
        return UnitDistribution(Family::Erlang, k, 0.0, 0.0);
    }
    // Uniform on [a, b] with a > 0 and mean (a + b)/2 = 1.
    static UnitDistribution uniform(double a, double b) {
        if (!(a > 0.0) || !(b > a)) throw ConfigError("InvalidDistribution", "uniform needs 0 < a < b");
        if (std::abs(0.5 * (a + b) - 1.0) > 1e-12) throw ConfigError("InvalidDistribution", "uniform must have mean 1");
        return UnitDistribution(Family::Uniform, 1, a, b);
    }
    static UnitDistribution deterministic() { return UnitDistribution(Family::Deterministic, 1, 1.0, 1.0); }

    // "exponential", "erlang:k", "uniform:a:b", "deterministic".
    static UnitDistribution parse(std::string_view text) {
        auto next = [&](std::string_view& rest) {
            const auto pos = rest.find(':');
            std::string_view head = rest.substr(0, pos);
            rest = pos == std::string_view::npos ? std::string_view{} : rest.substr(pos + 1);
            return head;
        };
        std::string_view rest = text;
        const auto name = next(rest);
        if (name == "exponential" && rest.empty()) return exponential();
        if (name == "deterministic" && rest.empty()) return deterministic();
        if (name == "erlang") {
            const double k = parse_double(next(rest), "erlang shape");
            if (!rest.empty() || k != std::floor(k)) throw ConfigError("InvalidDistribution", std::string(text));
            return erlang(static_cast<int>(k));
        }
        if (name == "uniform") {
            const double a = parse_double(next(rest), "uniform lower");
            const double b = parse_double(next(rest), "uniform upper");
            if (!rest.empty()) throw ConfigError("InvalidDistribution", std::string(text));
            return uniform(a, b);
        }
        throw ConfigError("InvalidDistribution", "unknown distribution '" + std::string(text) + "'");
    }

    // Family matching a squared coefficient of variation: 1 exponential,
    // 0 deterministic, 1/k Erlang(k), otherwise a centred uniform when
    // scv < 1/3.
    static UnitDistribution from_scv(double scv) {
        if (scv == 1.0) return exponential();
        if (scv == 0.0) return deterministic();
        if (scv > 0.0 && scv < 1.0) {
            const double k = std::round(1.0 / scv);
            if (std::abs(k * scv - 1.0) < 1e-12) return erlang(static_cast<int>(k));
        }
        if (scv > 0.0 && scv < 1.0 / 3.0) {
            const double half = std::sqrt(3.0 * scv);
            return uniform(1.0 - half, 1.0 + half);
        }
        throw ConfigError("InvalidDistribution", "no offered family has scv " + format_double(scv));
    }

    Family family() const noexcept { return family_; }
    int shape() const noexcept { return k_; }

    std::string to_string() const {
        switch (family_) {
            case Family::Exponential: return "exponential";
            case Family::Erlang: return "erlang:" + std::to_string(k_);
            case Family::Uniform: return "uniform:" + format_double(a_) + ":" + format_double(b_);
            case Family::Deterministic: return "deterministic";
        }
        return {};
    }

    double scv() const noexcept {
        switch (family_) {
            case Family::Exponential: return 1.0;
            case Family::Erlang: return 1.0 / k_;
            case Family::Uniform: return (b_ - a_) * (b_ - a_) / 12.0;
            case Family::Deterministic: return 0.0;
        }
        return 0.0;
    }

    template <class Rng>
    double sample(Rng& rng) const {
        switch (family_) {
            case Family::Exponential: return std::exponential_distribution<double>(1.0)(rng);
            case Family::Erlang: return std::gamma_distribution<double>(k_, 1.0 / k_)(rng);
            case Family::Uniform: return std::uniform_real_distribution<double>(a_, b_)(rng);
            case Family::Deterministic: return 1.0;
        }
        return 1.0;
    }

    // Log-MGF is finite for s < radius().
    double radius() const noexcept {
        switch (family_) {
            case Family::Exponential: return 1.0;
            case Family::Erlang: return k_;
            default: return std::numeric_limits<double>::infinity();
        }
    }

    // log E e^{s u}; +inf outside the domain.
    double log_mgf(double s) const noexcept {
        switch (family_) {
            case Family::Exponential:
            case Family::Erlang:
                return s < k_ ? -k_ * std::log1p(-s / k_) : std::numeric_limits<double>::infinity();
            case Family::Uniform: {
                const double d = b_ - a_;
                const double x = s * d;
                if (std::abs(x) < 1e-8) return s + s * s * d * d / 24.0;
                // log((e^{sb} - e^{sa}) / (s d)), arranged to avoid overflow.
                if (x > 0.0) return s * b_ + std::log(-std::expm1(-x) / x);
                return s * a_ + std::log(std::expm1(x) / x);
            }
            case Family::Deterministic: return s;
        }
        return 0.0;
    }

    // d/ds log E e^{s u}, increasing in s.
    double log_mgf_derivative(double s) const noexcept {
        switch (family_) {
            case Family::Exponential:
            case Family::Erlang: return 1.0 / (1.0 - s / k_);
            case Family::Uniform: {
                const double d = b_ - a_;
                const double x = s * d;
                if (std::abs(x) < 1e-6) return a_ + d / 2.0 + s * d * d / 12.0;
                return a_ + d / (-std::expm1(-x)) - 1.0 / s;
            }
            case Family::Deterministic: return 1.0;
        }
        return 1.0;
    }

    // Range of the derivative: essential inf and sup of the support.
    double support_min() const noexcept { return family_ == Family::Uniform || family_ == Family::Deterministic ? a_ : 0.0; }
    double support_max() const noexcept {
        return family_ == Family::Uniform || family_ == Family::Deterministic ? b_ : std::numeric_limits<double>::infinity();
    }

    bool operator==(const UnitDistribution&) const = default;

private:
    UnitDistribution(Family f, int k, double a, double b) : family_(f), k_(k), a_(a), b_(b) {}

    Family family_ = Family::Exponential;
    int k_ = 1;
    double a_ = 0.0, b_ = 0.0;
};

// One distribution per stream: interarrivals u1, u2 and services v1, v2, v3.
struct PrimitiveDistributions {
    std::array<UnitDistribution, 2> arrival{};
    std::array<UnitDistribution, 3> service{};

    static PrimitiveDistributions all(const UnitDistribution& d) {
        return {{d, d}, {d, d, d}};
    }

    // Throws unless each family's SCV matches the parameter file.
    void check_against(const NetworkParams& p) const {
        for (int k = 0; k < 2; ++k)
            if (std::abs(arrival[k].scv() - p.interarrival_scv()[k]) > 1e-12)
                throw ConfigError("ScvMismatch", "dist_a" + std::to_string(k + 1) + " disagrees with scv_a" + std::to_string(k + 1));
        for (int j = 0; j < 3; ++j)
            if (std::abs(service[j].scv() - p.service_scv()[j]) > 1e-12)
                throw ConfigError("ScvMismatch", "dist_s" + std::to_string(j + 1) + " disagrees with scv_s" + std::to_string(j + 1));
    }
};

inline const std::array<const char*, 2> kArrivalDistKeys{"dist_a1", "dist_a2"};
inline const std::array<const char*, 3> kServiceDistKeys{"dist_s1", "dist_s2", "dist_s3"};

// Reads dist_* keys; a missing key falls back to the family matching the
// stream's SCV. The result is checked against the SCVs of p.
inline PrimitiveDistributions primitives_from_kv(const KvDocument& doc, const NetworkParams& p) {
    PrimitiveDistributions prim;
    for (int k = 0; k < 2; ++k)
        prim.arrival[k] = doc.has(kArrivalDistKeys[k]) ? UnitDistribution::parse(doc.get(kArrivalDistKeys[k]))
                                                       : UnitDistribution::from_scv(p.interarrival_scv()[k]);
    for (int j = 0; j < 3; ++j)
        prim.service[j] = doc.has(kServiceDistKeys[j]) ? UnitDistribution::parse(doc.get(kServiceDistKeys[j]))
                                                       : UnitDistribution::from_scv(p.service_scv()[j]);
    prim.check_against(p);
    return prim;
}

inline void primitives_to_kv(const PrimitiveDistributions& prim, KvDocument& doc) {
    for (int k = 0; k < 2; ++k) doc.set(kArrivalDistKeys[k], prim.arrival[k].to_string());
    for (int j = 0; j < 3; ++j) doc.set(kServiceDistKeys[j], prim.service[j].to_string());
}

}  // namespace ccnet
