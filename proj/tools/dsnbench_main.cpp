#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dsnbench/analytics.hpp"
#include "dsnbench/error.hpp"
#include "dsnbench/harness.hpp"
#include "dsnbench/model.hpp"
#include "dsnbench/topology.hpp"
#include "dsnbench/trace.hpp"

namespace {

using namespace dsnbench;

constexpr double kCrossCheckTolerance = 0.05; // quadrature vs the algebraic closed form

std::vector<double> parse_sweep(const std::string& sweep) {
    std::vector<double> hs;
    std::stringstream ss(sweep);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        hs.push_back(std::stod(item));
        if (!(hs.back() > 0)) throw Error("sweep values must be positive");
    }
    if (hs.empty()) throw Error("empty sweep");
    return hs;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path + "'");
    return out;
}

void print_warnings(const std::vector<std::string>& warnings) {
    std::size_t shown = 0;
    for (const auto& w : warnings) {
        if (shown++ == 20) {
            std::cerr << "warning: ... " << warnings.size() - 20 << " more\n";
            break;
        }
        std::cerr << "warning: " << w << '\n';
    }
}

double default_window_start(const std::vector<TraceEvent>& trace) {
    double t = 0;
    bool first = true;
    for (const auto& ev : trace) {
        if (first || ev.t < t) t = ev.t;
        first = false;
    }
    return first ? 0.0 : std::floor(t);
}

/// Zero-delay edges exist in real traces; the power-law fit cannot take them.
std::vector<double> positive_delays(const TraceStats& stats) {
    std::vector<double> out;
    out.reserve(stats.intrinsic_delays.size());
    for (double v : stats.intrinsic_delays)
        if (v > 0) out.push_back(v);
    return out;
}

FittedModel fit_model_from_trace(const std::vector<TraceEvent>& trace,
                                 int bins_per_decade) {
    std::vector<std::string> warnings;
    ForwardForest forest = build_forward_forest(trace, &warnings);
    print_warnings(warnings);
    TraceStats stats = extract_stats(forest);
    auto delays = positive_delays(stats);
    PowerLawFit p = fit_power_law(delays, bins_per_decade);
    ExpFit e = fit_exponential(stats.chain_lengths);
    FittedModel model;
    model.a = p.a;
    model.b = p.b;
    model.i_min = p.i_min;
    model.i_max = p.i_max;
    model.Z_i = p.Z_i;
    model.c = e.c;
    model.d = e.d;
    model.Z_l = e.Z_l;
    model.mean_L = stats.mean_L;
    model.validate();
    return model;
}

int cmd_synth_topology(const std::string& out, std::size_t users, double mean,
                       std::uint64_t seed) {
    Topology topo = synth_topology(users, mean, seed);
    save_topology(out, topo);
    std::size_t edges = 0;
    for (const auto& [uid, refs] : topo.followees) edges += refs.size();
    std::printf("topology: %zu users, %zu follow edges -> %s\n", topo.users.size(),
                edges, out.c_str());
    return 0;
}

int cmd_synth_trace(const std::string& model_path, const std::string& topology_path,
                    const std::string& out, std::size_t roots, double t0, double dur,
                    std::uint64_t seed) {
    FittedModel model = load_model(model_path);
    Topology topo = load_topology(topology_path);
    auto trace = synth_trace(model, roots, t0, t0 + dur, topo, seed);
    save_trace(out, trace);
    std::printf("trace: %zu roots, %zu events -> %s\n", roots, trace.size(),
                out.c_str());
    return 0;
}

int cmd_run(const std::string& trace_path, const std::string& topology_path,
            const std::string& out, SimOptions opt, bool window_start_set,
            double window_start, double window_dur) {
    std::vector<std::string> warnings;
    std::vector<TraceEvent> trace;
    if (!trace_path.empty()) trace = load_trace(trace_path, &warnings);
    Topology topo = load_topology(topology_path);
    opt.window_t0 = window_start_set ? window_start : default_window_start(trace);
    opt.window_t1 = opt.window_t0 + window_dur;
    const auto started = std::chrono::steady_clock::now();
    SimLog log = run_simulation(trace, topo, opt, &warnings);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
            .count();
    print_warnings(warnings);
    save_simlog(out, log);
    std::printf(
        "run: %llu bots, %zu message records (%llu unfired), %.2f s wall -> %s\n",
        static_cast<unsigned long long>(log.meta.bots), log.messages.size(),
        static_cast<unsigned long long>(log.meta.unfired), wall, out.c_str());
    return 0;
}

int cmd_fit(const std::string& trace_path, int bins, const std::string& out) {
    std::vector<std::string> warnings;
    auto trace = load_trace(trace_path, &warnings);
    print_warnings(warnings);
    FittedModel model = fit_model_from_trace(trace, bins);
    if (!out.empty()) save_model(out, model);
    std::printf("a=%.6g b=%.6g i_min=%.6g i_max=%.6g c=%.6g d=%.6g mean_L=%.6g\n",
                model.a, model.b, model.i_min, model.i_max, model.c, model.d,
                model.mean_L);
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& sweep,
                const std::string& out) {
    FittedModel model = load_model(model_path);
    auto hs = parse_sweep(sweep);
    std::ostringstream csv;
    csv << "h,segment_quadrature_s,segment_closed_form_s,predicted_efd_s,"
           "zero_efd_fraction,cross_check_flag\n";
    bool any_flag = false;
    for (double h : hs) {
        const double q = efd_segment_expectation(h, model, EfdMethod::quadrature);
        const double cf = efd_segment_expectation(h, model, EfdMethod::closed_form);
        const bool flag = q > 0 && std::abs(cf - q) / q > kCrossCheckTolerance;
        any_flag = any_flag || flag;
        char line[256];
        std::snprintf(line, sizeof(line), "%.9g,%.9g,%.9g,%.9g,%.9g,%d\n", h, q, cf,
                      model.mean_L * q, zero_efd_fraction(h, model), flag ? 1 : 0);
        csv << line;
    }
    if (out.empty()) {
        std::cout << csv.str();
    } else {
        open_out(out) << csv.str();
        std::printf("predict: %zu rows -> %s\n", hs.size(), out.c_str());
    }
    if (any_flag)
        std::cerr << "warning: closed form deviates from quadrature beyond "
                  << kCrossCheckTolerance * 100
                  << "% on some rows; quadrature is the reference\n";
    return 0;
}

int cmd_analyze(const std::vector<std::string>& simlog_paths,
                const std::string& trace_path, const std::string& model_path,
                const std::string& out_prefix) {
    std::vector<SimLog> logs;
    for (const auto& p : simlog_paths) logs.push_back(load_simlog(p));

    FittedModel model;
    bool have_model = false;
    if (!model_path.empty()) {
        model = load_model(model_path);
        have_model = true;
    }

    if (!trace_path.empty()) {
        std::vector<std::string> warnings;
        auto trace = load_trace(trace_path, &warnings);
        ForwardForest forest = build_forward_forest(trace, &warnings);
        print_warnings(warnings);
        std::vector<EfdReport> reports;
        for (const auto& log : logs)
            reports.push_back(empirical_efd(log, forest, have_model ? &model : nullptr));
        {
            auto out = open_out(out_prefix + ".efd.csv");
            write_efd_report_csv(out, reports);
        }
        for (const auto& rep : reports) {
            char name[64];
            std::snprintf(name, sizeof(name), ".cdf.h%g.csv", rep.h);
            auto out = open_out(out_prefix + name);
            write_cdf_csv(out, rep);
        }
        for (const auto& rep : reports)
            std::printf("h=%g: %zu forwards, mean EFD %.3f s, zero fraction %.4f\n",
                        rep.h, rep.n_forwards, rep.empirical_mean, rep.fraction_zero);
    }

    std::size_t distinct = 0;
    {
        std::vector<double> hs;
        for (const auto& log : logs) hs.push_back(log.meta.h);
        std::sort(hs.begin(), hs.end());
        distinct = static_cast<std::size_t>(std::unique(hs.begin(), hs.end()) -
                                            hs.begin());
    }
    if (distinct >= 3) {
        ResourceReport rr = resource_fit(logs);
        {
            auto out = open_out(out_prefix + ".resource.csv");
            write_resource_csv(out, rr);
        }
        write_resource_text(std::cout, rr);
        auto out = open_out(out_prefix + ".resource.txt");
        write_resource_text(out, rr);
    }
    std::printf("analyze: %zu simlog(s) -> %s.*\n", logs.size(), out_prefix.c_str());
    return 0;
}

int cmd_compare(const std::vector<std::string>& simlog_paths,
                const std::string& trace_path, const std::string& model_path,
                double threshold, const std::string& out_prefix) {
    FittedModel model = load_model(model_path);
    std::vector<std::string> warnings;
    auto trace = load_trace(trace_path, &warnings);
    ForwardForest forest = build_forward_forest(trace, &warnings);
    print_warnings(warnings);

    std::vector<EfdReport> reports;
    for (const auto& p : simlog_paths)
        reports.push_back(empirical_efd(load_simlog(p), forest, &model));
    ComparisonTable table = compare_report(reports, model, threshold);
    if (!out_prefix.empty()) {
        auto out = open_out(out_prefix + ".compare.csv");
        write_comparison_csv(out, table);
    }
    write_comparison_text(std::cout, table);
    bool any_flagged = false;
    for (const auto& row : table.rows) any_flagged = any_flagged || row.flagged;
    return any_flagged ? 2 : 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dsnbench: pull-polling DSN trace replay and model validation"};
    app.require_subcommand(1);

    auto* st = app.add_subcommand("synth-topology", "generate a random follow graph");
    std::size_t st_users = 1000;
    double st_mean = 20;
    std::uint64_t st_seed = 1;
    std::string st_out;
    st->add_option("--users", st_users, "number of users (>= 2)");
    st->add_option("--mean-followees", st_mean, "mean out-degree");
    st->add_option("--seed", st_seed, "rng seed");
    st->add_option("--out", st_out, "output topology file")->required();

    auto* sx = app.add_subcommand("synth-trace",
                                  "generate update/forward activity from a model");
    std::string sx_model, sx_topology, sx_out;
    std::size_t sx_roots = 1000;
    double sx_start = 0, sx_dur = 86400;
    std::uint64_t sx_seed = 1;
    sx->add_option("--model", sx_model, "fitted model json")->required();
    sx->add_option("--topology", sx_topology, "topology file")->required();
    sx->add_option("--roots", sx_roots, "number of root updates");
    sx->add_option("--window-start", sx_start, "window start (epoch seconds)");
    sx->add_option("--window-dur", sx_dur, "window length (seconds)");
    sx->add_option("--seed", sx_seed, "rng seed");
    sx->add_option("--out", sx_out, "output trace file")->required();

    auto* rn = app.add_subcommand("run", "replay a trace through the DSN");
    rn->set_help_flag("--help", "print help"); // frees -h; the gap flag is --h
    std::string rn_trace, rn_topology, rn_out, rn_mode = "virtual";
    SimOptions rn_opt;
    double rn_start = 0, rn_dur = 86400;
    bool rn_start_set = false;
    rn->add_option("--trace", rn_trace, "trace file (omit for an idle network)");
    rn->add_option("--topology", rn_topology, "topology file")->required();
    rn->add_option("--h", rn_opt.h, "query gap in seconds")->required();
    rn->add_option("--seed", rn_opt.seed, "rng seed");
    rn->add_option("--mode", rn_mode, "virtual|real")
        ->check(CLI::IsMember({"virtual", "real"}));
    rn->add_option("--accel", rn_opt.accel, "real mode time compression factor");
    rn->add_option("--window-start", rn_start,
                   "window start; default: floor of earliest trace event")
        ->each([&rn_start_set](const std::string&) { rn_start_set = true; });
    rn->add_option("--window-dur", rn_dur, "window length in seconds");
    rn->add_option("--feed-limit", rn_opt.feed_entry_limit, "feed entry limit");
    rn->add_option("--drain-grace", rn_opt.drain_grace,
                   "extra polling horizon past the window");
    rn->add_option("--workers", rn_opt.workers, "real mode worker threads");
    rn->add_option("--port", rn_opt.port_base,
                   "real mode feed server port (default: DSNBENCH_PORT_BASE or 18080)");
    rn->add_option("--out", rn_out, "output simlog")->required();

    auto* ft = app.add_subcommand("fit", "fit delay/length distributions to a trace");
    std::string ft_trace, ft_out;
    int ft_bins = 30;
    ft->add_option("--trace", ft_trace, "trace file")->required();
    ft->add_option("--bins", ft_bins, "histogram bins per decade");
    ft->add_option("--out", ft_out, "output model json");

    auto* pd = app.add_subcommand("predict", "closed-form EFD prediction over h");
    std::string pd_model, pd_sweep = "300", pd_out;
    pd->add_option("--model", pd_model, "fitted model json")->required();
    pd->add_option("--sweep", pd_sweep, "comma-separated h values in seconds");
    pd->add_option("--out", pd_out, "output csv (stdout when omitted)");

    auto* an = app.add_subcommand("analyze", "empirical EFD and resource reports");
    std::vector<std::string> an_simlogs;
    std::string an_trace, an_model, an_out = "report";
    an->add_option("--simlog", an_simlogs, "simlog file(s)")->required();
    an->add_option("--trace", an_trace, "trace the runs replayed (enables EFD report)");
    an->add_option("--model", an_model, "fitted model json (adds analytical columns)");
    an->add_option("--out", an_out, "output file prefix");

    auto* cp = app.add_subcommand("compare", "model vs simulation comparison table");
    std::vector<std::string> cp_simlogs;
    std::string cp_trace, cp_model, cp_out;
    double cp_threshold = 0.15;
    cp->add_option("--simlog", cp_simlogs, "simlog file(s)")->required();
    cp->add_option("--trace", cp_trace, "trace the runs replayed")->required();
    cp->add_option("--model", cp_model, "fitted model json")->required();
    cp->add_option("--threshold", cp_threshold, "relative gap flag threshold");
    cp->add_option("--out", cp_out, "output file prefix");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (st->parsed()) return cmd_synth_topology(st_out, st_users, st_mean, st_seed);
        if (sx->parsed())
            return cmd_synth_trace(sx_model, sx_topology, sx_out, sx_roots, sx_start,
                                   sx_dur, sx_seed);
        if (rn->parsed()) {
            rn_opt.mode =
                rn_mode == "real" ? SimMode::real_sockets : SimMode::virtual_clock;
            if (const char* env = std::getenv("DSNBENCH_PORT_BASE");
                env && rn->get_option("--port")->count() == 0)
                rn_opt.port_base = std::atoi(env);
            return cmd_run(rn_trace, rn_topology, rn_out, rn_opt, rn_start_set,
                           rn_start, rn_dur);
        }
        if (ft->parsed()) return cmd_fit(ft_trace, ft_bins, ft_out);
        if (pd->parsed()) return cmd_predict(pd_model, pd_sweep, pd_out);
        if (an->parsed()) return cmd_analyze(an_simlogs, an_trace, an_model, an_out);
        if (cp->parsed())
            return cmd_compare(cp_simlogs, cp_trace, cp_model, cp_threshold, cp_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
