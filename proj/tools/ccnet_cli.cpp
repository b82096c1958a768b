// ccnet: command-line front end for the criss-cross network pipeline.
// Exit codes: 0 success, 2 configuration error, 3 stage failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "ccnet/ccnet.hpp"

namespace fs = std::filesystem;
using namespace ccnet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct Globals {
    std::string config;
    std::uint64_t seed = 1;
    std::string out;
    int threads = 1;
    bool seed_given() const { return seed_opt && seed_opt->count() > 0; }
    bool threads_given() const { return threads_opt && threads_opt->count() > 0; }
    bool out_given() const { return out_opt && out_opt->count() > 0; }
    CLI::Option* seed_opt = nullptr;
    CLI::Option* threads_opt = nullptr;
    CLI::Option* out_opt = nullptr;
};

void require(const std::string& value, const std::string& flag) {
    if (value.empty()) throw ConfigError("MissingOption", flag + " is required");
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("FileError", "cannot write '" + path.string() + "'");
    return out;
}

struct SolveOpts {
    double h = 0.0;
    double wmax = 0.0;
    int grid_n = 100;
};

int cmd_solve_fb(const Globals& g, const SolveOpts& o) {
    require(g.config, "--config");
    require(g.out, "--out");
    const NetworkParams p = load_params(g.config);
    const BrownianData bd = brownian_data(p);
    GridSpec spec;
    spec.w_max = o.wmax > 0.0 ? o.wmax : default_w_max(bd, p.gamma());
    spec.h = o.h > 0.0 ? o.h : spec.w_max / o.grid_n;
    const SolveResult sr = run_stage("solve-fb", [&] { return solve_value(p, bd, spec); });
    const FreeBoundary fb = run_stage("extract-boundary", [&] { return extract_boundary(sr, p); });
    const HjbResidual res = hjb_residual(sr.grid, p, bd);
    const fs::path out = g.out;
    fs::create_directories(out);
    {
        auto f = open_out(out / "value_grid.csv");
        write_value_grid(f, sr.grid);
    }
    {
        auto f = open_out(out / "free_boundary.csv");
        write_free_boundary(f, fb);
    }
    KvDocument s;
    s.set("regime", to_string(classify_regime(p)));
    s.set("h", sr.spec.h);
    s.set("w_max", sr.spec.w_max);
    s.set("sweeps", static_cast<double>(sr.grid.sweeps));
    s.set("j_origin", sr.grid.at(0, 0));
    s.set("hjb_residual", res.max);
    auto f = open_out(out / "summary.kv");
    write_kv(f, s);
    std::cout << "J(0,0) = " << format_double(sr.grid.at(0, 0)) << "  sweeps = " << sr.grid.sweeps
              << "  hjb residual = " << format_double(res.max) << '\n';
    return kExitOk;
}

struct BcpOpts {
    std::string fb;
    std::size_t paths = 100000;
    double dt = 0.01;
    double horizon = 0.0;
    bool no_bridge = false;
};

int cmd_simulate_bcp(const Globals& g, const BcpOpts& o) {
    require(g.config, "--config");
    require(o.fb, "--fb");
    require(g.out, "--out");
    const NetworkParams p = load_params(g.config);
    const FreeBoundary fb = load_free_boundary(o.fb);
    McConfig cfg = default_mc_config(p.gamma());
    cfg.paths = o.paths;
    cfg.dt = o.dt;
    if (o.horizon > 0.0) cfg.horizon = o.horizon;
    cfg.seed = g.seed;
    cfg.threads = g.threads;
    cfg.bridge = !o.no_bridge;
    cfg.validate();
    std::vector<double> per_path;
    const CostEstimate est =
        run_stage("simulate-bcp", [&] { return estimate_jstar(p, fb, brownian_data(p), cfg, {}, &per_path); });
    auto f = open_out(g.out);
    write_cost_csv(f, per_path, est);
    std::cout << "J*(0) = " << format_double(est.mean) << " +- " << format_double(est.std_error)
              << "  tail bound = " << format_double(est.tail_bound) << '\n';
    return kExitOk;
}

struct NetOpts {
    std::string fb;
    double n = 100;
    std::size_t reps = 200;
    double horizon = 0.0;
    std::string variant = "threshold";
    long event_log = -1;
};

int cmd_simulate_network(const Globals& g, const NetOpts& o) {
    require(g.config, "--config");
    require(o.fb, "--fb");
    require(g.out, "--out");
    const KvDocument doc = KvDocument::load(g.config);
    const NetworkParams p = params_from_kv(doc);
    const PrimitiveDistributions prim = primitives_from_kv(doc, p);
    const FreeBoundary fb = load_free_boundary(o.fb);
    const PolicyVariant v = parse_variant(o.variant);
    const PolicyThresholds th =
        run_stage("select-params", [&] { return thresholds_from_kv(doc, p, prim, {o.n}); });
    const RateSchedule rs = rate_schedule_from_kv(doc);
    const double horizon = o.horizon > 0.0 ? o.horizon : default_network_horizon(p.gamma());
    const auto rows = run_stage(
        "simulate-network", [&] { return simulate_replications(p, th, fb, prim, o.n, o.reps, horizon, g.seed, g.threads, v, rs); });
    const fs::path out = g.out;
    fs::create_directories(out);
    {
        auto f = open_out(out / "replications.csv");
        write_replications_header(f);
        write_replication_rows(f, rows);
    }
    if (o.event_log >= 0) {
        RunConfig rc;
        rc.n = o.n;
        rc.horizon = horizon;
        rc.seed = g.seed;
        rc.replication = static_cast<std::uint64_t>(o.event_log);
        rc.variant = v;
        rc.record_history = true;
        const RunResult rr = run_network(p, th, fb, prim, rc, rs);
        auto f = open_out(out / ("events_rep" + std::to_string(o.event_log) + ".csv"));
        write_event_log(f, rr.history);
    }
    std::vector<double> j;
    for (const auto& r : rows) j.push_back(r.jhat);
    const MeanSe ms = mean_se(j);
    std::cout << "n = " << format_double(o.n) << "  mean Jhat = " << format_double(ms.mean) << " +- "
              << format_double(ms.se) << '\n';
    return kExitOk;
}

int cmd_select_params(const Globals& g, const std::string& schedule) {
    require(g.config, "--config");
    require(g.out, "--out");
    const KvDocument doc = KvDocument::load(g.config);
    const NetworkParams p = params_from_kv(doc);
    const PrimitiveDistributions prim = primitives_from_kv(doc, p);
    const auto sched = parse_number_list(schedule, "--n-schedule");
    const ThresholdConstants tc = select_thresholds(p, prim, sched);
    auto f = open_out(g.out);
    write_kv(f, thresholds_to_kv(tc));
    std::cout << "c = " << format_double(tc.c) << "  lbar = " << format_double(tc.lbar) << '\n';
    return kExitOk;
}

ExperimentPlan plan_for(const Globals& g, bool no_solve) {
    require(g.config, "--config");
    ExperimentPlan plan = load_plan(g.config);
    if (g.out_given()) plan.out_dir = g.out;
    if (g.seed_given()) plan.seed = plan.mc.seed = g.seed;
    if (g.threads_given()) plan.threads = plan.mc.threads = g.threads;
    plan.no_solve = no_solve;
    return plan;
}

int cmd_experiment(const Globals& g, bool no_solve) {
    const ExperimentPlan plan = plan_for(g, no_solve);
    const ConvergenceReport rep = run_experiment(plan);
    std::cout << "J*(0) = " << format_double(rep.jstar) << " +- " << format_double(rep.jstar_se) << '\n';
    for (const auto& r : rep.rows)
        std::cout << "n = " << format_double(r.n) << "  mean Jhat = " << format_double(r.mean) << " +- "
                  << format_double(r.se) << "  rel gap = " << format_double(r.rel_gap) << '\n';
    return kExitOk;
}

int cmd_compare(const Globals& g, bool no_solve, const std::vector<std::string>& names) {
    const ExperimentPlan plan = plan_for(g, no_solve);
    std::vector<PolicyVariant> variants;
    for (const auto& s : names) variants.push_back(parse_variant(s));
    const auto table = compare_policies(plan, variants);
    for (const auto& r : table)
        std::cout << to_string(r.variant) << "  n = " << format_double(r.n) << "  mean Jhat = " << format_double(r.mean)
                  << " +- " << format_double(r.se) << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Criss-cross network: free boundary, limiting cost and threshold-policy simulation"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "Parameter or plan file");
    g.seed_opt = app.add_option("--seed", g.seed, "Master random seed");
    g.out_opt = app.add_option("--out", g.out, "Output file or directory");
    g.threads_opt = app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);

    SolveOpts so;
    auto* solve = app.add_subcommand("solve-fb", "Solve the workload control problem and extract the free boundary");
    // `--h` is the grid spacing here, so help is long-form only.
    solve->set_help_flag("--help", "Print this help message and exit");
    solve->add_option("--h", so.h, "Grid spacing");
    solve->add_option("--wmax", so.wmax, "Grid extent");
    solve->add_option("--grid-n", so.grid_n, "Cells per axis when --h is not given")->check(CLI::PositiveNumber);

    BcpOpts bo;
    auto* bcp = app.add_subcommand("simulate-bcp", "Monte-Carlo estimate of the limiting cost");
    bcp->add_option("--fb", bo.fb, "Free boundary file");
    bcp->add_option("--paths", bo.paths, "Number of paths");
    bcp->add_option("--dt", bo.dt, "Time step");
    bcp->add_option("--horizon", bo.horizon, "Horizon (default 12/gamma)");
    bcp->add_flag("--no-bridge", bo.no_bridge, "Monitor the reflection at grid points only");

    NetOpts no;
    auto* net = app.add_subcommand("simulate-network", "Simulate the n-th network under the threshold policy");
    net->add_option("--fb", no.fb, "Free boundary file");
    net->add_option("--n", no.n, "Scaling parameter n");
    net->add_option("--reps", no.reps, "Replications");
    net->add_option("--horizon", no.horizon, "Scaled horizon (default 10/gamma)");
    net->add_option("--variant", no.variant, "threshold | zero_boundary | no_idling | strict_priority");
    net->add_option("--event-log", no.event_log, "Also dump the event log of this replication");

    std::string schedule = "100,400,1600,6400";
    auto* sel = app.add_subcommand("select-params", "Evaluate the threshold constants");
    sel->add_option("--n-schedule", schedule, "Comma-separated n values");

    bool no_solve = false;
    auto* exp = app.add_subcommand("experiment", "Run the full convergence experiment from a plan file");
    exp->add_flag("--no-solve", no_solve, "Use the plan's boundary file instead of solving");

    std::vector<std::string> variants{"threshold", "zero_boundary"};
    bool cmp_no_solve = false;
    auto* cmp = app.add_subcommand("compare", "Compare policy variants at matched seeds");
    cmp->add_option("--variants", variants, "Policy variants")->delimiter(',');
    cmp->add_flag("--no-solve", cmp_no_solve, "Use the plan's boundary file instead of solving");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*solve) return cmd_solve_fb(g, so);
        if (*bcp) return cmd_simulate_bcp(g, bo);
        if (*net) return cmd_simulate_network(g, no);
        if (*sel) return cmd_select_params(g, schedule);
        if (*exp) return cmd_experiment(g, no_solve);
        if (*cmp) return cmd_compare(g, cmp_no_solve, variants);
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.config_cause() ? kExitConfig : kExitStage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitStage;
    }
    return kExitConfig;
}
