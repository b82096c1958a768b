#pragma once

// Discrete-event simulation of the n-th criss-cross network under the
// threshold policy with free-boundary idling, plus the scaled cost and the
// diagnostic statistics of the policy's safety-stock events.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "ccnet/distributions.hpp"
#include "ccnet/errors.hpp"
#include "ccnet/free_boundary.hpp"
#include "ccnet/kv_config.hpp"
#include "ccnet/model_params.hpp"
#include "ccnet/parallel.hpp"

namespace ccnet {

// c > 1, l0 > 1, g0 > 0; d scales the idleness diagnostic level D^n.
struct PolicyThresholds {
    double c = 2.0;
    double l0 = 2.0;
    double g0 = 1.0;
    double d = 1.0;

    void validate() const {
        if (!(c > 1.0)) throw ConfigError("InvalidThresholds", "c must be > 1");
        if (!(l0 > 1.0)) throw ConfigError("InvalidThresholds", "l0 must be > 1");
        if (!(g0 > 0.0)) throw ConfigError("InvalidThresholds", "g0 must be > 0");
        if (!(d > 0.0)) throw ConfigError("InvalidThresholds", "d must be > 0");
    }
};

// Levels of the n-th network: L = floor(l0 log n), C = floor(c l0 log n), D = d l0 log n.
struct PolicyLevels {
    std::int64_t L = 0;
    std::int64_t C = 0;
    double D = 0.0;
    double g0 = 0.0;
};

inline PolicyLevels policy_levels(const PolicyThresholds& th, double n) {
    th.validate();
    const double ln = std::log(n);
    return {static_cast<std::int64_t>(std::floor(th.l0 * ln)), static_cast<std::int64_t>(std::floor(th.c * th.l0 * ln)),
            th.d * th.l0 * ln, th.g0};
}

// Guard for the policy to be well posed: C - L - 1 >= 1 and (mu1/mu2)(C - L + 2) >= 1.
inline bool levels_admissible(const PolicyLevels& lv, const PrelimitRates& r) {
    return lv.C - lv.L - 1 >= 1 && r.mu[0] / r.mu[1] * static_cast<double>(lv.C - lv.L + 2) >= 1.0;
}

// Per-n rates: the default schedule of prelimit_rates unless overridden for that n.
struct RateSchedule {
    std::map<std::int64_t, PrelimitRates> overrides;

    PrelimitRates at(const NetworkParams& p, std::int64_t n) const {
        if (auto it = overrides.find(n); it != overrides.end()) return it->second;
        return prelimit_rates(p, static_cast<double>(n));
    }
};

inline void validate_rates(const PrelimitRates& r) {
    for (double l : r.lambda)
        if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("InvalidRates", "arrival rates must be >= 0");
    for (double m : r.mu)
        if (!(m > 0.0) || !std::isfinite(m)) throw ConfigError("InvalidRates", "service rates must be > 0");
}

// Smallest n >= 2 at which the level guard holds (searched up to n_max).
inline std::int64_t n_bar(const PolicyThresholds& th, const NetworkParams& p, const RateSchedule& rs = {},
                          std::int64_t n_max = 1000000) {
    for (std::int64_t n = 2; n <= n_max; ++n)
        if (levels_admissible(policy_levels(th, static_cast<double>(n)), rs.at(p, n))) return n;
    throw ConfigError("InvalidN", "level guard fails for every n up to " + std::to_string(n_max));
}

enum class Action { Serve1, Serve2, IdleServer1 };

// Which line of the decision tree produced the action. A is the branch
// Q3 - (mu2/mu1) Q1 < L, B its complement.
enum class Branch {
    ASafety1,   // A: Q3 >= C-1 or Q2 = 0, class 1 served
    AServe2,    // A: Q3 < C-1 and Q2 > 0
    AEmpty,     // A: class 1 prescribed but buffer 1 empty
    BServe1,    // B: Q1 >= (mu1/mu2)(C-L+2), or Q2 = 0 and Q1 > 0
    BServe2,    // B: free-boundary test passes
    BIdle,      // B: free-boundary test fails; the designated idling line
    BEmpty,     // B: Q1 = Q2 = 0, not covered by the tree; nothing to serve
    Priority,   // strict class-1 priority variant
};

inline const char* to_string(Action a) {
    switch (a) {
        case Action::Serve1: return "serve1";
        case Action::Serve2: return "serve2";
        case Action::IdleServer1: return "idle1";
    }
    return "?";
}

inline const char* to_string(Branch b) {
    switch (b) {
        case Branch::ASafety1: return "A1";
        case Branch::AServe2: return "A2";
        case Branch::AEmpty: return "A0";
        case Branch::BServe1: return "B1";
        case Branch::BServe2: return "B2";
        case Branch::BIdle: return "B3";
        case Branch::BEmpty: return "B0";
        case Branch::Priority: return "P";
    }
    return "?";
}

struct Decision {
    Action action = Action::IdleServer1;
    Branch branch = Branch::BEmpty;
    bool operator==(const Decision&) const = default;
};

using Queues = std::array<std::int64_t, 3>;

// Workload (Q1/mu1 + Q2/mu2, (Q2 + Q3)/mu3) at the n-th rates.
inline Vec2 workload(const Queues& q, const PrelimitRates& r) {
    return {static_cast<double>(q[0]) / r.mu[0] + static_cast<double>(q[1]) / r.mu[1],
            static_cast<double>(q[1] + q[2]) / r.mu[2]};
}

inline bool in_branch_A(const Queues& q, const PolicyLevels& lv, const PrelimitRates& r) {
    return static_cast<double>(q[2]) - r.mu[1] / r.mu[0] * static_cast<double>(q[0]) < static_cast<double>(lv.L);
}

// Server 1 decision of the threshold policy at post-event queue lengths.
inline Decision decide_server1(const Queues& q, const PolicyLevels& lv, const FreeBoundary& fb, double n,
                               const PrelimitRates& r) {
    if (in_branch_A(q, lv, r)) {
        if (q[2] >= lv.C - 1 || q[1] == 0)
            return q[0] > 0 ? Decision{Action::Serve1, Branch::ASafety1} : Decision{Action::IdleServer1, Branch::AEmpty};
        return {Action::Serve2, Branch::AServe2};
    }
    const double q1_level = r.mu[0] / r.mu[1] * static_cast<double>(lv.C - lv.L + 2);
    if (static_cast<double>(q[0]) >= q1_level || (q[1] == 0 && q[0] > 0)) return {Action::Serve1, Branch::BServe1};
    if (q[1] == 0) return {Action::IdleServer1, Branch::BEmpty};
    const Vec2 w = workload(q, r);
    const double sn = std::sqrt(n);
    if (w[0] - sn * psi_eval(fb, w[1] / sn) >= lv.g0) return {Action::Serve2, Branch::BServe2};
    return {Action::IdleServer1, Branch::BIdle};
}

// Policies compared by the sanity harness. ZeroBoundary is the threshold policy
// with psi = 0; NoIdling serves class 2 where the threshold policy would idle.
enum class PolicyVariant { Threshold, ZeroBoundary, NoIdling, StrictPriority };

inline const char* to_string(PolicyVariant v) {
    switch (v) {
        case PolicyVariant::Threshold: return "threshold";
        case PolicyVariant::ZeroBoundary: return "zero_boundary";
        case PolicyVariant::NoIdling: return "no_idling";
        case PolicyVariant::StrictPriority: return "strict_priority";
    }
    return "?";
}

inline PolicyVariant parse_variant(const std::string& s) {
    for (auto v : {PolicyVariant::Threshold, PolicyVariant::ZeroBoundary, PolicyVariant::NoIdling, PolicyVariant::StrictPriority})
        if (s == to_string(v)) return v;
    throw ConfigError("InvalidVariant", "unknown policy variant '" + s + "'");
}

inline Decision decide_variant(PolicyVariant v, const Queues& q, const PolicyLevels& lv, const FreeBoundary& fb,
                               double n, const PrelimitRates& r) {
    switch (v) {
        case PolicyVariant::StrictPriority:
            if (q[0] > 0) return {Action::Serve1, Branch::Priority};
            if (q[1] > 0) return {Action::Serve2, Branch::Priority};
            return {Action::IdleServer1, Branch::Priority};
        case PolicyVariant::NoIdling: {
            Decision d = decide_server1(q, lv, fb, n, r);
            if (d.branch == Branch::BIdle) d.action = Action::Serve2;
            return d;
        }
        default: return decide_server1(q, lv, fb, n, r);
    }
}

// ---------------------------------------------------------------------------
// Event loop.

enum class EventType { Start, Arrival1, Arrival2, Complete1, Complete2, Complete3, Preempt, Horizon };

inline const char* to_string(EventType e) {
    switch (e) {
        case EventType::Start: return "start";
        case EventType::Arrival1: return "arrival1";
        case EventType::Arrival2: return "arrival2";
        case EventType::Complete1: return "complete1";
        case EventType::Complete2: return "complete2";
        case EventType::Complete3: return "complete3";
        case EventType::Preempt: return "preempt";
        case EventType::Horizon: return "horizon";
    }
    return "?";
}

// Post-event snapshot. The state holds on [time, next record's time).
struct EventRecord {
    double time = 0.0;
    EventType event = EventType::Start;
    Queues q{};
    Decision decision{};
    std::array<double, 3> busy{};  // T1, T2, T3
    std::array<double, 2> idle{};  // I1, I2
    bool operator==(const EventRecord&) const = default;
};

struct Counters {
    std::array<std::int64_t, 2> arrivals{};
    std::array<std::int64_t, 3> services{};
};

struct DiagnosticReport {
    double sup_q3_A = 0.0;      // sup Q3hat 1_A
    double sup_q1_Ac = 0.0;     // sup Q1hat 1_{A^c}
    double idle_integral = 0.0; // int 1{Q2hat >= D/sqrt n} dI2hat
    double min_G_gap = 0.0;     // min (W1hat - psi(W2hat))
};

struct RunConfig {
    double n = 100;
    double horizon = 10.0;  // scaled time
    std::uint64_t seed = 1;
    std::uint64_t replication = 0;
    PolicyVariant variant = PolicyVariant::Threshold;
    bool record_history = false;
};

struct RunResult {
    double jhat = 0.0;
    DiagnosticReport diag;
    Counters counters;
    Queues final_q{};
    std::array<double, 3> busy{};
    std::array<double, 2> idle{};
    std::size_t events = 0;
    std::vector<EventRecord> history;
};

namespace detail {

// Streaming form of the diagnostics; fed the state holding on each interval.
class DiagnosticAccumulator {
public:
    DiagnosticAccumulator(const PolicyLevels& lv, const PrelimitRates& r, const FreeBoundary& fb, double n)
        : lv_(lv), r_(r), fb_(fb), sn_(std::sqrt(n)) {}

    // State q observed at an epoch; idle2 is the increment of I2 (unscaled)
    // over the interval on which q holds.
    void observe(const Queues& q) {
        if (in_branch_A(q, lv_, r_))
            rep_.sup_q3_A = std::max(rep_.sup_q3_A, static_cast<double>(q[2]) / sn_);
        else
            rep_.sup_q1_Ac = std::max(rep_.sup_q1_Ac, static_cast<double>(q[0]) / sn_);
        const Vec2 w = workload(q, r_);
        const double gap = w[0] / sn_ - psi_eval(fb_, w[1] / sn_);
        rep_.min_G_gap = std::min(rep_.min_G_gap, gap);
    }
    void interval(const Queues& q, double idle2) {
        if (idle2 > 0.0 && static_cast<double>(q[1]) >= lv_.D) rep_.idle_integral += idle2 / sn_;
    }
    const DiagnosticReport& report() const { return rep_; }

private:
    PolicyLevels lv_;
    PrelimitRates r_;
    const FreeBoundary& fb_;
    double sn_;
    DiagnosticReport rep_;
};

}  // namespace detail

// One replication from the empty state over scaled time [0, horizon], i.e.
// unscaled [0, n horizon]. Returns the discounted scaled cost
//   int_0^horizon e^{-gamma t} c.Q(nt)/sqrt(n) dt,
// integrated exactly between events.
inline RunResult run_network(const NetworkParams& p, const PolicyThresholds& th, const FreeBoundary& fb,
                             const PrimitiveDistributions& prim, const RunConfig& cfg, const RateSchedule& rs = {}) {
    const double n = cfg.n;
    if (!(n >= 2.0) || n != std::floor(n)) throw ConfigError("InvalidN", "n must be an integer >= 2");
    if (!(cfg.horizon > 0.0)) throw ConfigError("InvalidHorizon", "horizon must be > 0");
    const PrelimitRates r = rs.at(p, static_cast<std::int64_t>(n));
    validate_rates(r);
    const PolicyLevels lv = policy_levels(th, n);
    if (!levels_admissible(lv, r))
        throw ConfigError("InvalidN", "n = " + format_double(n) + " is below the level guard");

    const FreeBoundary zero = zero_boundary(fb.max_slope, 1.0);
    const FreeBoundary& psi = cfg.variant == PolicyVariant::ZeroBoundary ? zero : fb;

    auto rng = stream_rng(cfg.seed, cfg.replication, 0x6e6574);
    constexpr double inf = std::numeric_limits<double>::infinity();
    const double t_end = n * cfg.horizon;
    const double gamma = p.gamma();
    const auto& cost = p.cost();
    const double sn = std::sqrt(n);

    RunResult res;
    Queues q{0, 0, 0};
    std::array<double, 2> next_arrival{inf, inf};
    for (int k = 0; k < 2; ++k)
        if (r.lambda[k] > 0.0) next_arrival[k] = prim.arrival[k].sample(rng) / r.lambda[k];
    // Remaining service of the partially served job of each class; < 0 when none.
    std::array<double, 3> residual{-1.0, -1.0, -1.0};
    std::array<double, 3> busy{};
    std::array<double, 2> idle{};
    double t = 0.0, disc = 1.0, jhat = 0.0;

    detail::DiagnosticAccumulator diag(lv, r, psi, n);
    Decision dec = decide_variant(cfg.variant, q, lv, psi, n, r);

    auto record = [&](EventType e) {
        ++res.events;
        if (cfg.record_history) res.history.push_back({t, e, q, dec, busy, idle});
    };
    auto start_service = [&](int j) {
        if (residual[j] < 0.0) residual[j] = prim.service[j].sample(rng) / r.mu[j];
    };
    // Class served at server 1 under the decision, or -1.
    auto served1 = [&]() -> int {
        if (dec.action == Action::Serve1 && q[0] > 0) return 0;
        if (dec.action == Action::Serve2 && q[1] > 0) return 1;
        return -1;
    };

    diag.observe(q);
    record(EventType::Start);
    int s1 = served1();
    if (s1 >= 0) start_service(s1);

    while (true) {
        const bool s2 = q[2] > 0;
        if (s2) start_service(2);
        // Candidates in tie-break order: arrival 1, arrival 2, server 1, server 2.
        const std::array<double, 4> cand{next_arrival[0], next_arrival[1], s1 >= 0 ? t + residual[s1] : inf,
                                         s2 ? t + residual[2] : inf};
        const int which = static_cast<int>(std::min_element(cand.begin(), cand.end()) - cand.begin());
        const double t_next = cand[which];
        const bool stop = t_next >= t_end;
        const double t1 = stop ? t_end : t_next;
        const double dt = t1 - t;

        // Exact discounted integral of the constant cost rate on [t, t1].
        const double rate = cost[0] * q[0] + cost[1] * q[1] + cost[2] * q[2];
        const double seg = disc * -std::expm1(-gamma * dt / n);
        jhat += rate * seg / (gamma * sn);
        disc *= std::exp(-gamma * dt / n);

        if (s1 >= 0) {
            busy[s1] += dt;
            residual[s1] -= dt;
        } else {
            idle[0] += dt;
        }
        if (s2) {
            busy[2] += dt;
            residual[2] -= dt;
        } else {
            idle[1] += dt;
        }
        diag.interval(q, s2 ? 0.0 : dt);
        t = t1;
        if (stop) {
            record(EventType::Horizon);
            break;
        }

        // One event per iteration; simultaneous events follow in later
        // iterations with dt = 0, in the candidate order above.
        EventType ev;
        if (which == 0) {
            ev = EventType::Arrival1;
            ++q[0];
            ++res.counters.arrivals[0];
            next_arrival[0] = t + prim.arrival[0].sample(rng) / r.lambda[0];
        } else if (which == 1) {
            ev = EventType::Arrival2;
            ++q[1];
            ++res.counters.arrivals[1];
            next_arrival[1] = t + prim.arrival[1].sample(rng) / r.lambda[1];
        } else if (which == 2) {
            residual[s1] = -1.0;
            if (s1 == 0) {
                ev = EventType::Complete1;
                --q[0];
                ++res.counters.services[0];
            } else {
                ev = EventType::Complete2;
                --q[1];
                ++q[2];
                ++res.counters.services[1];
            }
        } else {
            ev = EventType::Complete3;
            residual[2] = -1.0;
            --q[2];
            ++res.counters.services[2];
        }

        const int before = s1;
        dec = decide_variant(cfg.variant, q, lv, psi, n, r);
        s1 = served1();
        diag.observe(q);
        record(ev);
        // A class whose partially served job loses the server keeps its residual.
        if (before >= 0 && before != s1 && residual[before] > 0.0) record(EventType::Preempt);
        if (s1 >= 0) start_service(s1);
    }

    res.jhat = jhat;
    res.diag = diag.report();
    res.final_q = q;
    res.busy = busy;
    res.idle = idle;
    return res;
}

// Diagnostics recomputed from a recorded history.
inline DiagnosticReport diagnostics(const std::vector<EventRecord>& history, const PolicyThresholds& th, double n,
                                    const PrelimitRates& r, const FreeBoundary& fb) {
    if (history.empty()) return {};
    detail::DiagnosticAccumulator acc(policy_levels(th, n), r, fb, n);
    for (std::size_t k = 0; k < history.size(); ++k) {
        if (history[k].event != EventType::Horizon) acc.observe(history[k].q);
        if (k + 1 < history.size()) acc.interval(history[k].q, history[k + 1].idle[1] - history[k].idle[1]);
    }
    return acc.report();
}

struct ScaledPoint {
    double t = 0.0;
    Vec3 q{};
    Vec2 w{};
    Vec2 i{};
};

// Qhat = Q/sqrt(n), What = W/sqrt(n), Ihat = I/sqrt(n) at scaled time t/n.
inline std::vector<ScaledPoint> scaled_processes(const std::vector<EventRecord>& history, double n,
                                                 const PrelimitRates& r) {
    const double sn = std::sqrt(n);
    std::vector<ScaledPoint> out;
    out.reserve(history.size());
    for (const auto& e : history) {
        ScaledPoint s;
        s.t = e.time / n;
        for (int i = 0; i < 3; ++i) s.q[i] = static_cast<double>(e.q[i]) / sn;
        const Vec2 w = workload(e.q, r);
        s.w = {w[0] / sn, w[1] / sn};
        s.i = {e.idle[0] / sn, e.idle[1] / sn};
        out.push_back(s);
    }
    return out;
}

inline void write_event_log(std::ostream& out, const std::vector<EventRecord>& history) {
    out << "time,event,q1,q2,q3,action,branch\n";
    for (const auto& e : history)
        out << format_double(e.time) << ',' << to_string(e.event) << ',' << e.q[0] << ',' << e.q[1] << ',' << e.q[2]
            << ',' << to_string(e.decision.action) << ',' << to_string(e.decision.branch) << '\n';
}

// ---------------------------------------------------------------------------
// Replications.

struct ReplicationRow {
    double n = 0.0;
    std::uint64_t rep = 0;
    double jhat = 0.0;
    DiagnosticReport diag;
};

inline std::vector<ReplicationRow> simulate_replications(const NetworkParams& p, const PolicyThresholds& th,
                                                         const FreeBoundary& fb, const PrimitiveDistributions& prim,
                                                         double n, std::size_t reps, double horizon, std::uint64_t seed,
                                                         int threads, PolicyVariant variant = PolicyVariant::Threshold,
                                                         const RateSchedule& rs = {}) {
    if (reps < 1) throw ConfigError("InvalidReps", "need at least one replication");
    std::vector<ReplicationRow> rows(reps);
    parallel_for(reps, threads, [&](std::size_t k) {
        RunConfig cfg;
        cfg.n = n;
        cfg.horizon = horizon;
        cfg.seed = seed;
        cfg.replication = k;
        cfg.variant = variant;
        const RunResult rr = run_network(p, th, fb, prim, cfg, rs);
        rows[k] = {n, k, rr.jhat, rr.diag};
    });
    return rows;
}

inline void write_replications_header(std::ostream& out) {
    out << "n,rep,jhat,sup_diag1,sup_diag2,idle_integral,min_G_gap\n";
}

inline void write_replication_rows(std::ostream& out, const std::vector<ReplicationRow>& rows) {
    for (const auto& r : rows)
        out << format_double(r.n) << ',' << r.rep << ',' << format_double(r.jhat) << ',' << format_double(r.diag.sup_q3_A)
            << ',' << format_double(r.diag.sup_q1_Ac) << ',' << format_double(r.diag.idle_integral) << ','
            << format_double(r.diag.min_G_gap) << '\n';
}

// Default scaled horizon: e^{-gamma T} = e^{-10}.
inline double default_network_horizon(double gamma) { return 10.0 / gamma; }

}  // namespace ccnet
