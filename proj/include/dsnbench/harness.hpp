#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_set>
#include <vector>

#include "dsnbench/topology.hpp"
#include "dsnbench/trace.hpp"

namespace dsnbench {

/// Per-node polling configuration. phase is the uniformly random initial
/// sleep in [0, query_gap) that desynchronizes the bots.
struct BotConfig {
    std::string uid;
    double query_gap = 300;
    double phase = 0;
    std::size_t feed_entry_limit = 100;
};

/// Derives the phase for (uid, seed); stable under topology reordering.
BotConfig make_bot_config(const std::string& uid, double query_gap,
                          std::size_t feed_entry_limit, std::uint64_t seed);

struct ResourceCounters {
    std::uint64_t queries_issued = 0;
    std::uint64_t queries_served = 0;
    std::uint64_t bytes_served = 0;
    std::uint64_t messages_stored = 0;
    std::uint64_t polls_completed = 0;
};

/// Scratch state of one bot between polls.
struct BotState {
    BotConfig config;
    double next_poll = 0;
    std::unordered_set<std::uint64_t> seen;
    ResourceCounters counters;
};

/// Validates the uid against the topology and schedules the first poll at
/// run_start + phase.
BotState bot_init(const BotConfig& config, const Topology& topology,
                  double run_start);

/// The data-driven forwarding rule: wait out the intrinsic delay when the
/// message arrived early, otherwise forward immediately on sight.
double behavior_forward_time(double t_seen, double t_mf);

enum class SimMode { virtual_clock, real_sockets };

struct SimOptions {
    double h = 300;
    std::uint64_t seed = 0;
    SimMode mode = SimMode::virtual_clock;
    double accel = 1; // real mode: trace seconds per wall second
    double window_t0 = 0;
    double window_t1 = 86400;
    std::size_t feed_entry_limit = 100;
    /// Polling continues past the window while replay work is pending, up to
    /// this many seconds; edges still unfired then are reported, not fatal.
    double drain_grace = 86400;
    int workers = 8;       // real mode worker pool
    int port_base = 18080; // real mode feed server port
};

struct MsgRecord {
    std::string mid;
    std::string uid;
    TraceKind kind = TraceKind::update;
    double t_trace = 0;
    double t_posted = 0;
};

struct RunMeta {
    double h = 0;
    std::uint64_t seed = 0;
    double accel = 1;
    std::string mode = "virtual";
    double t0 = 0;
    double t1 = 0;
    double t_end = 0;
    std::uint64_t bots = 0;
    std::uint64_t roots = 0;
    std::uint64_t forwards = 0;
    std::uint64_t unfired = 0;

    double duration() const { return t_end - t0; }
};

struct SimLog {
    RunMeta meta;
    std::vector<MsgRecord> messages;
    std::vector<std::pair<std::string, ResourceCounters>> bots; // uid-sorted
};

/// Replays the trace through a pull-polling DSN over the topology.
/// Virtual mode runs a deterministic discrete-event loop (byte-identical
/// SimLogs for identical inputs; accel ignored); real mode multiplexes bots
/// onto a worker pool polling an HTTP feed server, with timestamps divided by
/// accel on the wire and reported back in trace timescale.
SimLog run_simulation(const std::vector<TraceEvent>& trace, const Topology& topology,
                      const SimOptions& options,
                      std::vector<std::string>* warnings = nullptr);

/// "# key value" metadata, then "MSG ..." and "BOT ..." records.
void write_simlog(std::ostream& out, const SimLog& log);
SimLog read_simlog(std::istream& in);
SimLog load_simlog(const std::string& path);
void save_simlog(const std::string& path, const SimLog& log);

namespace detail {
/// Shared between the virtual and real engines.
struct ReplayPlan;
SimLog run_simulation_real(const std::vector<TraceEvent>& trace,
                           const Topology& topology, const SimOptions& options,
                           std::vector<std::string>* warnings);
} // namespace detail

} // namespace dsnbench
