#pragma once

// End-to-end pipeline: boundary -> J*(0) -> network sweep over n -> report.
// Every intermediate artifact lands in the output directory; the boundary is
// cached under a content hash of the inputs that determine it.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ccnet/distributions.hpp"
#include "ccnet/errors.hpp"
#include "ccnet/free_boundary.hpp"
#include "ccnet/kv_config.hpp"
#include "ccnet/model_params.hpp"
#include "ccnet/network_sim.hpp"
#include "ccnet/param_select.hpp"
#include "ccnet/rbm_mc.hpp"

namespace ccnet {

namespace fs = std::filesystem;

inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char ch : data) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xf];
    return s;
}

inline std::vector<double> parse_number_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(parse_double(item, what));
    if (out.empty()) throw ConfigError("ParseError", what + " is empty");
    return out;
}

// Keys `rates.<n> = lambda1,lambda2,mu1,mu2,mu3` override the default schedule.
inline RateSchedule rate_schedule_from_kv(const KvDocument& doc) {
    RateSchedule rs;
    for (const auto& [k, v] : doc.entries()) {
        if (k.rfind("rates.", 0) != 0) continue;
        const double n = parse_double(k.substr(6), "rate override n");
        const auto r = parse_number_list(v, k);
        if (r.size() != 5) throw ConfigError("ParseError", k + " needs 5 rates");
        PrelimitRates pr{{r[0], r[1]}, {r[2], r[3], r[4]}};
        validate_rates(pr);
        rs.overrides[static_cast<std::int64_t>(n)] = pr;
    }
    return rs;
}

// `thresholds = auto` (default) selects (c, l0 = lbar, d) by param_select;
// otherwise policy_c, policy_l0 and policy_d are read. g0 is policy_g0 (default 1).
inline PolicyThresholds thresholds_from_kv(const KvDocument& doc, const NetworkParams& p,
                                           const PrimitiveDistributions& prim, const std::vector<double>& schedule) {
    PolicyThresholds th;
    th.g0 = doc.number_or("policy_g0", 1.0);
    if (doc.string_or("thresholds", "auto") == "auto") {
        const auto tc = select_thresholds(p, prim, schedule);
        th.c = tc.c;
        th.l0 = tc.lbar;
        th.d = tc.d;
    } else {
        th.c = doc.number("policy_c");
        th.l0 = doc.number("policy_l0");
        th.d = doc.number_or("policy_d", 1.0);
    }
    th.validate();
    return th;
}

struct ExperimentPlan {
    KvDocument params_doc;      // model parameters and distribution keys
    GridSpec grid;              // h resolved from grid_n when not given
    int grid_n = 100;
    McConfig mc;
    std::vector<double> n_schedule{100, 400, 1600, 6400};
    std::size_t reps = 200;
    double net_horizon = 0.0;   // <= 0: default_network_horizon
    KvDocument threshold_doc;   // thresholds / policy_* keys
    std::string out_dir = "out";
    std::string boundary_file;  // optional precomputed boundary
    bool no_solve = false;
    std::uint64_t seed = 1;
    int threads = 1;

    void validate() const {
        if (n_schedule.empty()) throw ConfigError("InvalidPlan", "empty n schedule");
        for (std::size_t k = 1; k < n_schedule.size(); ++k)
            if (!(n_schedule[k] > n_schedule[k - 1])) throw ConfigError("InvalidPlan", "n schedule must increase strictly");
        if (reps < 2) throw ConfigError("InvalidPlan", "need at least 2 replications");
        if (!boundary_file.empty() && !no_solve && !fs::exists(boundary_file))
            throw ConfigError("InvalidPlan", "boundary file '" + boundary_file + "' does not exist");
        mc.validate();
    }
};

// Plan keys (all optional except the model): params = <file> or inline
// model keys, grid_n, grid_h, wmax, mc_paths, mc_dt, mc_horizon, mc_bridge,
// n_schedule, reps, net_horizon, thresholds, policy_*, boundary, seed, threads.
inline ExperimentPlan plan_from_kv(const KvDocument& doc, const fs::path& base = {}) {
    ExperimentPlan plan;
    if (doc.has("params")) {
        fs::path pf = doc.get("params");
        if (pf.is_relative()) pf = base / pf;
        if (!fs::exists(pf)) throw ConfigError("InvalidPlan", "params file '" + pf.string() + "' does not exist");
        plan.params_doc = KvDocument::load(pf.string());
    } else {
        plan.params_doc = doc;
    }
    plan.grid_n = static_cast<int>(doc.number_or("grid_n", 100));
    plan.grid.h = doc.number_or("grid_h", 0.0);
    plan.grid.w_max = doc.number_or("wmax", 0.0);
    const double gamma = params_from_kv(plan.params_doc).gamma();
    plan.mc = default_mc_config(gamma);
    plan.mc.dt = doc.number_or("mc_dt", 0.01);
    plan.mc.paths = static_cast<std::size_t>(doc.number_or("mc_paths", 100000));
    plan.mc.horizon = doc.number_or("mc_horizon", plan.mc.horizon);
    plan.mc.bridge = doc.string_or("mc_bridge", "true") == "true";
    if (doc.has("n_schedule")) plan.n_schedule = parse_number_list(doc.get("n_schedule"), "n_schedule");
    plan.reps = static_cast<std::size_t>(doc.number_or("reps", 200));
    plan.net_horizon = doc.number_or("net_horizon", 0.0);
    for (const auto& [k, v] : doc.entries())
        if (k == "thresholds" || k.rfind("policy_", 0) == 0 || k.rfind("rates.", 0) == 0) plan.threshold_doc.set(k, v);
    if (doc.has("boundary")) {
        fs::path bf = doc.get("boundary");
        if (bf.is_relative()) bf = base / bf;
        plan.boundary_file = bf.string();
    }
    plan.seed = static_cast<std::uint64_t>(doc.number_or("seed", 1));
    plan.threads = static_cast<int>(doc.number_or("threads", 1));
    plan.mc.seed = plan.seed;
    plan.mc.threads = plan.threads;
    return plan;
}

inline ExperimentPlan load_plan(const std::string& path) {
    if (!fs::exists(path)) throw ConfigError("FileError", "plan file '" + path + "' does not exist");
    return plan_from_kv(KvDocument::load(path), fs::path(path).parent_path());
}

struct ReportRow {
    double n = 0.0;
    std::size_t reps = 0;
    double mean = 0.0, se = 0.0;
    double gap = 0.0, rel_gap = 0.0;
    double sup_q3_A = 0.0, sup_q1_Ac = 0.0, idle_integral = 0.0, min_G_gap = 0.0;
};

struct ConvergenceReport {
    double jstar = 0.0, jstar_se = 0.0;
    double j_grid = 0.0;  // value at the origin from the grid solve (0 if not solved)
    std::vector<ReportRow> rows;
    double runtime_seconds = 0.0;
    bool boundary_cached = false;
};

struct MeanSe {
    double mean = 0.0, se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += x;
    const double m = s / n;
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return {m, v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0};
}

// Runs fn, rethrowing any failure as StageError(stage); config errors are
// flagged so the CLI can still map them to exit code 2.
template <class Fn>
auto run_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const ConfigError& e) {
        throw StageError(stage, e.what(), true);
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

namespace detail {

inline std::string plan_boundary_key(const ExperimentPlan& plan, const GridSpec& g) {
    std::ostringstream s;
    write_kv(s, params_to_kv(params_from_kv(plan.params_doc)));
    s << "h=" << format_double(g.h) << " wmax=" << format_double(g.w_max) << " tol_vi=" << format_double(g.tol_vi)
      << " tol_act=" << format_double(g.tol_act) << " tol_grad=" << format_double(g.tol_grad);
    return hex64(fnv1a(s.str()));
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("FileError", "cannot write '" + path.string() + "'");
    out << text;
}

inline std::string plot_script() {
    return "# Gap |mean Jhat^n - J*(0)| against n on log axes. Usage: python3 plot_gap.py\n"
           "import csv\n"
           "import matplotlib\n"
           "matplotlib.use('Agg')\n"
           "import matplotlib.pyplot as plt\n"
           "\n"
           "rows = list(csv.DictReader(open('report.csv')))\n"
           "n = [float(r['n']) for r in rows]\n"
           "gap = [abs(float(r['gap'])) for r in rows]\n"
           "se = [float(r['se_jhat']) for r in rows]\n"
           "plt.errorbar(n, gap, yerr=se, marker='o', capsize=3)\n"
           "plt.xscale('log')\n"
           "plt.yscale('log')\n"
           "plt.xlabel('n')\n"
           "plt.ylabel('|mean Jhat^n - J*(0)|')\n"
           "plt.grid(True, which='both', alpha=0.3)\n"
           "plt.savefig('gap.png', dpi=150, bbox_inches='tight')\n";
}

}  // namespace detail

struct BoundaryStage {
    FreeBoundary fb;
    double j_grid = 0.0;
    bool cached = false;
};

// Case I needs no solve: hhat is increasing in both coordinates and the
// optimal workload is the normally reflected one, psi = 0.
inline BoundaryStage boundary_stage(const ExperimentPlan& plan, const NetworkParams& p, const fs::path& out) {
    return run_stage("solve-fb", [&] {
        BoundaryStage st;
        if (plan.no_solve || !plan.boundary_file.empty()) {
            if (plan.boundary_file.empty() || !fs::exists(plan.boundary_file))
                throw NumericError("MissingBoundary", "no boundary file available and solving is disabled");
            st.fb = load_free_boundary(plan.boundary_file);
            st.cached = true;
            return st;
        }
        const BrownianData bd = brownian_data(p);
        if (classify_regime(p) == Regime::CaseI) {
            st.fb = zero_boundary(p.cone_slope(), 1.0);
            return st;
        }
        GridSpec g = plan.grid;
        if (g.w_max <= 0.0) g.w_max = default_w_max(bd, p.gamma());
        if (g.h <= 0.0) g.h = g.w_max / plan.grid_n;
        const fs::path cache = out / "cache";
        fs::create_directories(cache);
        const std::string key = detail::plan_boundary_key(plan, g);
        const fs::path fb_path = cache / ("boundary_" + key + ".csv");
        const fs::path meta_path = cache / ("boundary_" + key + ".kv");
        if (fs::exists(fb_path) && fs::exists(meta_path)) {
            st.fb = load_free_boundary(fb_path.string());
            st.j_grid = KvDocument::load(meta_path.string()).number("j_grid");
            st.cached = true;
            return st;
        }
        const SolveResult sr = solve_value(p, bd, g);
        st.fb = extract_boundary(sr, p);
        st.j_grid = sr.grid.at(0, 0);
        save_free_boundary(st.fb, fb_path.string());
        KvDocument meta;
        meta.set("j_grid", st.j_grid);
        meta.set("h", sr.spec.h);
        meta.set("w_max", sr.spec.w_max);
        meta.set("sweeps", static_cast<double>(sr.grid.sweeps));
        std::ofstream mo(meta_path);
        write_kv(mo, meta);
        return st;
    });
}

inline void write_report_csv(std::ostream& out, const ConvergenceReport& rep) {
    out << "n,reps,mean_jhat,se_jhat,jstar,se_jstar,gap,rel_gap,sup_q3_A,sup_q1_Ac,idle_integral,min_G_gap\n";
    for (const auto& r : rep.rows)
        out << format_double(r.n) << ',' << r.reps << ',' << format_double(r.mean) << ',' << format_double(r.se) << ','
            << format_double(rep.jstar) << ',' << format_double(rep.jstar_se) << ',' << format_double(r.gap) << ','
            << format_double(r.rel_gap) << ',' << format_double(r.sup_q3_A) << ',' << format_double(r.sup_q1_Ac) << ','
            << format_double(r.idle_integral) << ',' << format_double(r.min_G_gap) << '\n';
}

inline ReportRow summarize(double n, const std::vector<ReplicationRow>& rows, double jstar) {
    ReportRow r;
    r.n = n;
    r.reps = rows.size();
    std::vector<double> j;
    for (const auto& x : rows) {
        j.push_back(x.jhat);
        r.sup_q3_A += x.diag.sup_q3_A;
        r.sup_q1_Ac += x.diag.sup_q1_Ac;
        r.idle_integral += x.diag.idle_integral;
        r.min_G_gap += x.diag.min_G_gap;
    }
    const double k = static_cast<double>(rows.size());
    r.sup_q3_A /= k;
    r.sup_q1_Ac /= k;
    r.idle_integral /= k;
    r.min_G_gap /= k;
    const MeanSe ms = mean_se(j);
    r.mean = ms.mean;
    r.se = ms.se;
    r.gap = r.mean - jstar;
    r.rel_gap = r.gap / jstar;
    return r;
}

struct Pipeline {
    NetworkParams p;
    PrimitiveDistributions prim;
    BoundaryStage boundary;
    CostEstimate jstar;
    PolicyThresholds th;
    RateSchedule rates;
};

// Stages shared by run_experiment and compare_policies.
inline Pipeline prepare(const ExperimentPlan& plan, const fs::path& out) {
    plan.validate();
    const NetworkParams p = params_from_kv(plan.params_doc);
    const PrimitiveDistributions prim = primitives_from_kv(plan.params_doc, p);
    fs::create_directories(out);
    Pipeline pl{p, prim, boundary_stage(plan, p, out), {}, {}, {}};
    pl.jstar = run_stage("estimate-jstar", [&] {
        const fs::path path = out / "jstar.csv";
        const CostEstimate est = estimate_jstar(p, pl.boundary.fb, brownian_data(p), plan.mc);
        std::ofstream o(path, std::ios::binary);
        o << "mean,se,paths,tail_bound\n"
          << format_double(est.mean) << ',' << format_double(est.std_error) << ',' << est.paths << ','
          << format_double(est.tail_bound) << '\n';
        return est;
    });
    pl.th = run_stage("select-params", [&] { return thresholds_from_kv(plan.threshold_doc, p, prim, plan.n_schedule); });
    pl.rates = rate_schedule_from_kv(plan.threshold_doc);
    return pl;
}

inline std::vector<ReplicationRow> network_stage(const ExperimentPlan& plan, const Pipeline& pl, double n,
                                                 PolicyVariant v) {
    return run_stage("simulate-network", [&] {
        const double horizon = plan.net_horizon > 0.0 ? plan.net_horizon : default_network_horizon(pl.p.gamma());
        return simulate_replications(pl.p, pl.th, pl.boundary.fb, pl.prim, n, plan.reps, horizon, plan.seed,
                                     plan.threads, v, pl.rates);
    });
}

// Writes jstar.csv, reps_n<n>.csv per n, report.csv, plot_gap.py and the
// non-deterministic run_meta.kv into plan.out_dir.
inline ConvergenceReport run_experiment(const ExperimentPlan& plan) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path out = plan.out_dir;
    const Pipeline pl = prepare(plan, out);

    ConvergenceReport rep;
    rep.jstar = pl.jstar.mean;
    rep.jstar_se = pl.jstar.std_error;
    rep.j_grid = pl.boundary.j_grid;
    rep.boundary_cached = pl.boundary.cached;
    for (double n : plan.n_schedule) {
        const auto rows = network_stage(plan, pl, n, PolicyVariant::Threshold);
        run_stage("report", [&] {
            std::ofstream o(out / ("reps_n" + format_double(n) + ".csv"), std::ios::binary);
            write_replications_header(o);
            write_replication_rows(o, rows);
        });
        rep.rows.push_back(summarize(n, rows, rep.jstar));
    }
    run_stage("report", [&] {
        std::ofstream o(out / "report.csv", std::ios::binary);
        write_report_csv(o, rep);
        detail::write_text(out / "plot_gap.py", detail::plot_script());
    });
    rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    run_stage("report", [&] {
        KvDocument meta;
        meta.set("runtime_seconds", rep.runtime_seconds);
        meta.set("boundary_cached", rep.boundary_cached ? "true" : "false");
        std::ofstream o(out / "run_meta.kv");
        write_kv(o, meta);
    });
    return rep;
}

struct CompareRow {
    PolicyVariant variant = PolicyVariant::Threshold;
    double n = 0.0;
    double mean = 0.0, se = 0.0;
};

// Same pipeline for each variant with matched seeds; writes compare.csv.
inline std::vector<CompareRow> compare_policies(const ExperimentPlan& plan, const std::vector<PolicyVariant>& variants) {
    if (variants.empty()) throw ConfigError("InvalidPlan", "no policy variants given");
    const fs::path out = plan.out_dir;
    const Pipeline pl = prepare(plan, out);
    std::vector<CompareRow> table;
    for (double n : plan.n_schedule) {
        for (PolicyVariant v : variants) {
            const auto rows = network_stage(plan, pl, n, v);
            std::vector<double> j;
            for (const auto& r : rows) j.push_back(r.jhat);
            const MeanSe ms = mean_se(j);
            table.push_back({v, n, ms.mean, ms.se});
        }
    }
    run_stage("report", [&] {
        std::ofstream o(out / "compare.csv", std::ios::binary);
        o << "variant,n,mean_jhat,se_jhat,jstar,se_jstar\n";
        for (const auto& r : table)
            o << to_string(r.variant) << ',' << format_double(r.n) << ',' << format_double(r.mean) << ','
              << format_double(r.se) << ',' << format_double(pl.jstar.mean) << ',' << format_double(pl.jstar.std_error)
              << '\n';
    });
    return table;
}

}  // namespace ccnet
