#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "dsnbench/analytics.hpp"
#include "dsnbench/error.hpp"
#include "dsnbench/harness.hpp"
#include "dsnbench/rng.hpp"
#include "dsnbench/trace.hpp"

using namespace dsnbench;

namespace {

Topology two_user_topology() {
    // follower polls author over a pull link
    Topology topo;
    topo.users = {{"author", "author"}, {"follower", "follower"}};
    topo.followees["follower"] = {{"author", LinkKind::pull}};
    return topo;
}

std::string simlog_bytes(const SimLog& log) {
    std::ostringstream out;
    write_simlog(out, log);
    return out.str();
}

} // namespace

TEST_CASE("behavior_forward_time implements both rules") {
    CHECK(behavior_forward_time(100, 150) == 150);
    CHECK(behavior_forward_time(200, 150) == 200);
    CHECK(behavior_forward_time(150, 150) == 150); // boundary: rule 1

    Rng rng(11);
    for (int i = 0; i < 10000; ++i) {
        const double seen = rng.uniform(0, 1e6);
        const double scheduled = rng.uniform(0, 1e6);
        const double out = behavior_forward_time(seen, scheduled);
        if (seen <= scheduled) CHECK(out == scheduled);
        else CHECK(out == seen);
        CHECK(out >= scheduled);
        CHECK(out >= std::min(seen, scheduled));
    }
}

TEST_CASE("bot phases are uniform and reproducible") {
    BotConfig c1 = make_bot_config("u42", 300, 100, 7);
    BotConfig c2 = make_bot_config("u42", 300, 100, 7);
    CHECK(c1.phase == c2.phase);
    CHECK(c1.phase >= 0);
    CHECK(c1.phase < 300);
    CHECK(make_bot_config("u42", 1, 100, 7).phase < 1.0);

    // 10^4 bots, 10 bins: binomial(10^4, 0.1) stays within 1000 +- 150
    std::map<int, int> bins;
    for (int i = 0; i < 10000; ++i) {
        BotConfig c = make_bot_config("u" + std::to_string(i), 300, 100, 99);
        ++bins[static_cast<int>(c.phase / 30.0)];
    }
    REQUIRE(bins.size() == 10);
    for (const auto& [bin, count] : bins) {
        CHECK(count > 850);
        CHECK(count < 1150);
    }
}

TEST_CASE("bot_init validates and schedules the first poll") {
    Topology topo = two_user_topology();
    BotConfig cfg = make_bot_config("follower", 300, 100, 1);
    BotState state = bot_init(cfg, topo, 1000);
    CHECK(state.next_poll == doctest::Approx(1000 + cfg.phase));
    CHECK(state.seen.empty());

    BotConfig missing = make_bot_config("stranger", 300, 100, 1);
    CHECK_THROWS_AS(bot_init(missing, topo, 0), Error);
    BotConfig bad = cfg;
    bad.phase = 400;
    CHECK_THROWS_AS(bot_init(bad, topo, 0), Error);
}

TEST_CASE("virtual runs are byte-identical and polls continue without content") {
    Topology topo = synth_topology(50, 5, 21);
    SimOptions opt;
    opt.h = 300;
    opt.seed = 17;
    opt.window_t0 = 0;
    opt.window_t1 = 7200;
    SimLog a = run_simulation({}, topo, opt);
    SimLog b = run_simulation({}, topo, opt);
    CHECK(simlog_bytes(a) == simlog_bytes(b));
    CHECK(a.messages.empty());
    std::uint64_t polls = 0;
    for (const auto& [uid, c] : a.bots) polls += c.polls_completed;
    CHECK(polls > 0);

    SimOptions other = opt;
    other.seed = 18;
    CHECK(simlog_bytes(run_simulation({}, topo, other)) != simlog_bytes(a));
}

TEST_CASE("queries follow the closed-form poll count") {
    Topology topo = synth_topology(40, 6, 33);
    SimOptions opt;
    opt.h = 250;
    opt.seed = 5;
    opt.window_t0 = 0;
    opt.window_t1 = 36000;
    SimLog log = run_simulation({}, topo, opt);
    const double duration = log.meta.duration();
    for (const auto& [uid, c] : log.bots) {
        const auto n_followees = topo.followees_of(uid).size();
        std::size_t pull = 0;
        for (const auto& ref : topo.followees_of(uid))
            if (ref.kind == LinkKind::pull) ++pull;
        const double phase = make_bot_config(uid, opt.h, 100, opt.seed).phase;
        const auto expected_polls =
            static_cast<std::uint64_t>(std::floor((duration - phase) / opt.h)) + 1;
        CHECK(c.polls_completed == expected_polls);
        CHECK(c.queries_issued == pull * expected_polls);
        (void)n_followees;
    }
}

TEST_CASE("doubling the gap halves the query rate") {
    FittedModel m;
    m.a = -1.03;
    m.b = 4.5;
    m.i_min = 1;
    m.i_max = 30265;
    m.Z_i = normalize_Z_i(m.a, m.b, m.i_min, m.i_max);
    m.c = -0.7;
    m.d = 4.2;
    m.Z_l = normalize_Z_l(m.c, m.d);
    m.mean_L = 1.14;
    Topology topo = synth_topology(30, 4, 61);
    auto trace = synth_trace(m, 40, 0, 86400, topo, 62);
    std::vector<SimLog> logs;
    for (double h : {150.0, 300.0, 600.0}) {
        SimOptions opt;
        opt.h = h;
        opt.seed = 63;
        opt.window_t0 = 0;
        opt.window_t1 = 86400;
        logs.push_back(run_simulation(trace, topo, opt));
    }
    ResourceReport rr = resource_fit(logs);
    REQUIRE(rr.rows.size() == 3);
    CHECK(rr.rows[1].query_rate ==
          doctest::Approx(rr.rows[0].query_rate / 2).epsilon(0.01));
    CHECK(rr.rows[2].query_rate ==
          doctest::Approx(rr.rows[1].query_rate / 2).epsilon(0.01));
    CHECK(rr.max_residual_query < 0.01);
    // stored messages are trace-driven, not gap-driven
    CHECK(rr.rows[0].stored_mean == doctest::Approx(rr.rows[2].stored_mean));
    CHECK(std::abs(rr.memory_slope) < 1e-6 * rr.memory_constant + 1e-9);
    CHECK(rr.beta_query > 0);
}

TEST_CASE("replay honors the behavior rules") {
    Topology topo = two_user_topology();
    const double t0 = 0, root_t = 1000;

    SUBCASE("early sight waits for the trace time") {
        // follower polls every 50 s, forward scheduled 400 s after the root:
        // the parent is seen well before, so the forward posts exactly on time
        std::vector<TraceEvent> trace{
            {TraceKind::update, "m0", std::nullopt, "author", "author", root_t, "hi"},
            {TraceKind::forward, "f0", "m0", "follower", "follower", root_t + 400,
             "RT @author hi"},
        };
        SimOptions opt;
        opt.h = 50;
        opt.seed = 3;
        opt.window_t0 = t0;
        opt.window_t1 = 4000;
        SimLog log = run_simulation(trace, topo, opt);
        REQUIRE(log.messages.size() == 2);
        CHECK(log.messages[1].mid == "f0");
        CHECK(log.messages[1].t_posted == doctest::Approx(root_t + 400));
        CHECK(log.meta.unfired == 0);
    }

    SUBCASE("late sight forwards immediately") {
        // polling far slower than the scheduled lag: the forward fires at
        // first sight, which is the poll right after the root post
        std::vector<TraceEvent> trace{
            {TraceKind::update, "m0", std::nullopt, "author", "author", root_t, "hi"},
            {TraceKind::forward, "f0", "m0", "follower", "follower", root_t + 1,
             "RT @author hi"},
        };
        SimOptions opt;
        opt.h = 600;
        opt.seed = 3;
        opt.window_t0 = t0;
        opt.window_t1 = 4000;
        SimLog log = run_simulation(trace, topo, opt);
        REQUIRE(log.messages.size() == 2);
        const double phase = make_bot_config("follower", opt.h, 100, opt.seed).phase;
        // first poll grid point at or after the root post
        const double k = std::ceil((root_t - phase) / opt.h);
        const double first_sight = phase + k * opt.h;
        CHECK(log.messages[1].t_posted == doctest::Approx(first_sight));
        const double efd = log.messages[1].t_posted - log.messages[1].t_trace;
        CHECK(efd >= 0);
        CHECK(efd < opt.h); // parent posted on time, so one gap bounds it
    }
}

TEST_CASE("seen-set dedup: one bot never forwards the same mid twice") {
    Topology topo = two_user_topology();
    std::vector<TraceEvent> trace{
        {TraceKind::update, "m0", std::nullopt, "author", "author", 100, "hi"},
        {TraceKind::forward, "f0", "m0", "follower", "follower", 150, "RT @author hi"},
    };
    SimOptions opt;
    opt.h = 30;
    opt.seed = 9;
    opt.window_t0 = 0;
    opt.window_t1 = 2000;
    SimLog log = run_simulation(trace, topo, opt);
    std::size_t f0_records = 0;
    for (const auto& rec : log.messages)
        if (rec.mid == "f0") ++f0_records;
    CHECK(f0_records == 1);
}

TEST_CASE("per-edge EFD is bounded by h plus the parent's EFD") {
    FittedModel m;
    m.a = -1.03;
    m.b = 4.5;
    m.i_min = 1;
    m.i_max = 30265;
    m.Z_i = normalize_Z_i(m.a, m.b, m.i_min, m.i_max);
    m.c = -0.7;
    m.d = 4.2;
    m.Z_l = normalize_Z_l(m.c, m.d);
    m.mean_L = 1.14;
    Topology topo = synth_topology(120, 10, 55);
    auto trace = synth_trace(m, 300, 0, 43200, topo, 56);
    SimOptions opt;
    opt.h = 300;
    opt.seed = 57;
    opt.window_t0 = 0;
    opt.window_t1 = 43200;
    SimLog log = run_simulation(trace, topo, opt);

    std::map<std::string, double> efd_of; // mid -> posted lateness
    for (const auto& rec : log.messages)
        efd_of[rec.mid] = rec.t_posted - rec.t_trace;
    std::map<std::string, std::string> parent_of;
    for (const auto& ev : trace)
        if (ev.parent_mid) parent_of[ev.mid] = *ev.parent_mid;

    std::size_t forwards = 0;
    for (const auto& rec : log.messages) {
        CHECK(rec.t_posted >= rec.t_trace); // EFD >= 0, zero violations
        if (rec.kind != TraceKind::forward) continue;
        ++forwards;
        const double parent_efd = efd_of.at(parent_of.at(rec.mid));
        CHECK(rec.t_posted - rec.t_trace < opt.h + parent_efd + 1e-6);
    }
    CHECK(forwards == log.meta.forwards);
    CHECK(log.meta.unfired == 0);
}

TEST_CASE("simlog files round trip") {
    Topology topo = two_user_topology();
    std::vector<TraceEvent> trace{
        {TraceKind::update, "m0", std::nullopt, "author", "author", 50, "hi"},
        {TraceKind::forward, "f0", "m0", "follower", "follower", 99, "RT @author hi"},
    };
    SimOptions opt;
    opt.h = 20;
    opt.seed = 2;
    opt.window_t0 = 0;
    opt.window_t1 = 400;
    SimLog log = run_simulation(trace, topo, opt);
    std::istringstream in(simlog_bytes(log));
    SimLog back = read_simlog(in);
    CHECK(simlog_bytes(back) == simlog_bytes(log));
    CHECK(back.meta.h == log.meta.h);
    CHECK(back.messages.size() == log.messages.size());
    CHECK(back.bots.size() == log.bots.size());
}

TEST_CASE("trace/topology mismatch") {
    Topology topo = two_user_topology();
    std::vector<TraceEvent> bad_root{
        {TraceKind::update, "m0", std::nullopt, "stranger", "stranger", 50, "hi"}};
    SimOptions opt;
    opt.h = 20;
    opt.window_t1 = 100;
    CHECK_THROWS_AS(run_simulation(bad_root, topo, opt), Error);

    // forwards by unknown users are dropped with a warning, not fatal
    std::vector<TraceEvent> bad_fwd{
        {TraceKind::update, "m0", std::nullopt, "author", "author", 50, "hi"},
        {TraceKind::forward, "f0", "m0", "stranger", "stranger", 99, "RT"}};
    std::vector<std::string> warnings;
    SimLog log = run_simulation(bad_fwd, topo, opt, &warnings);
    CHECK(log.meta.unfired == 1);
    CHECK(!warnings.empty());
    CHECK(log.messages.size() == 1);
}

TEST_CASE("empirical EFD from a tiny run is non-negative and covered") {
    Topology topo = two_user_topology();
    std::vector<TraceEvent> trace{
        {TraceKind::update, "m0", std::nullopt, "author", "author", 100, "hi"},
        {TraceKind::forward, "f0", "m0", "follower", "follower", 130, "RT @author hi"},
    };
    SimOptions opt;
    opt.h = 45;
    opt.seed = 8;
    opt.window_t0 = 0;
    opt.window_t1 = 600;
    SimLog log = run_simulation(trace, topo, opt);
    auto forest = build_forward_forest(trace);
    auto rep = empirical_efd(log, forest);
    CHECK(rep.n_forwards == 1);
    CHECK(rep.empirical_mean >= 0);
}
