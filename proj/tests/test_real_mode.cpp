#include <doctest.h>

#include "dsnbench/analytics.hpp"
#include "dsnbench/error.hpp"
#include "dsnbench/harness.hpp"
#include "dsnbench/trace.hpp"

using namespace dsnbench;

// A short end-to-end run over actual sockets: a few bots polling the feed
// server on localhost with compressed time. Covers wiring, not statistics.
TEST_CASE("real mode replays a small trace over HTTP") {
    Topology topo;
    for (int i = 0; i < 5; ++i)
        topo.users.push_back({"u" + std::to_string(i), "user" + std::to_string(i)});
    // a short follow chain: u1 reads u0, u2 reads u1, ...
    for (int i = 1; i < 5; ++i)
        topo.followees["u" + std::to_string(i)] = {
            {"u" + std::to_string(i - 1), LinkKind::pull}};

    std::vector<TraceEvent> trace{
        {TraceKind::update, "m0", std::nullopt, "u0", "user0", 10, "hello"},
        {TraceKind::forward, "f1", "m0", "u1", "user1", 40, "RT @user0 hello"},
        {TraceKind::forward, "f2", "f1", "u2", "user2", 70, "RT @user1 RT @user0 hello"},
    };

    SimOptions opt;
    opt.mode = SimMode::real_sockets;
    opt.h = 30;
    opt.seed = 12;
    opt.accel = 60; // 300 virtual seconds in ~5 wall seconds
    opt.window_t0 = 0;
    opt.window_t1 = 300;
    opt.drain_grace = 600;
    opt.workers = 4;
    opt.port_base = 18123;

    SimLog log;
    bool ran = false;
    for (int port = 18123; port < 18133 && !ran; ++port) {
        opt.port_base = port;
        try {
            log = run_simulation(trace, topo, opt);
            ran = true;
        } catch (const Error& e) {
            if (std::string(e.what()).find("bind") == std::string::npos) throw;
        }
    }
    REQUIRE(ran);

    CHECK(log.meta.mode == "real");
    CHECK(log.meta.accel == 60);
    REQUIRE(log.messages.size() == 3);
    for (const auto& rec : log.messages) {
        CHECK(rec.t_posted >= rec.t_trace - 1e-9); // reported in trace timescale
        // one poll gap of slack plus scheduling jitter, scaled back
        CHECK(rec.t_posted < rec.t_trace + 3 * opt.h + 2 * opt.accel);
    }
    std::uint64_t issued = 0, served = 0, bytes = 0;
    for (const auto& [uid, c] : log.bots) {
        issued += c.queries_issued;
        served += c.queries_served;
        bytes += c.bytes_served;
    }
    CHECK(issued > 0);
    CHECK(served > 0);
    CHECK(served <= issued); // some polls race shutdown; never the reverse
    CHECK(bytes > 0);

    auto forest = build_forward_forest(trace);
    auto rep = empirical_efd(log, forest);
    CHECK(rep.n_forwards == 2);
    CHECK(rep.empirical_mean >= 0);
}
