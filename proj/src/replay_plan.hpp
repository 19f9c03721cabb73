#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "dsnbench/topology.hpp"
#include "dsnbench/trace.hpp"

namespace dsnbench::detail {

struct PlanEdge {
    std::string child_mid;
    int forwarder = -1; // bot index
    double t_child = 0;
    bool fired = false;
};

/// Static replay plan shared by the virtual and real engines: bots sorted by
/// uid (index order doubles as the deterministic tie-break order), pull
/// adjacency as index lists, root posts, and forward edges keyed by the
/// parent mid they fire on.
struct ReplayPlan {
    std::vector<std::string> uids;
    std::vector<std::string> unames;
    std::vector<std::vector<int>> followees;
    std::unordered_map<std::string, int> bot_index;

    struct RootPost {
        int bot = -1;
        std::string mid;
        double t = 0;
        std::string text;
    };
    std::vector<RootPost> roots;
    std::unordered_map<std::string, std::vector<PlanEdge>> edges_by_parent;
    std::uint64_t fireable_edges = 0;
    std::uint64_t dropped_edges = 0;
    double latest_trace_t = 0;
};

/// Validates users, drops unreplayable forwards with a warning, and errors on
/// roots by users absent from the topology.
ReplayPlan build_replay_plan(const std::vector<TraceEvent>& trace,
                             const Topology& topology,
                             std::vector<std::string>* warnings);

} // namespace dsnbench::detail
