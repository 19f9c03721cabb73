#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dsnbench/model.hpp"
#include "dsnbench/topology.hpp"

namespace dsnbench {

enum class TraceKind { update, forward };

std::string_view to_string(TraceKind k);

/// One replayable action: an original status update or a forward of an
/// earlier message.
struct TraceEvent {
    TraceKind kind = TraceKind::update;
    std::string mid;
    std::optional<std::string> parent_mid; // required iff kind == forward
    std::string uid;
    std::string uname;
    double t = 0;
    std::string text;

    friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

/// Tab-separated, one event per line:
///   kind  mid  parent_mid("-" when absent)  uid  uname  t  text(escaped)
/// Malformed lines raise; forwards referencing a mid absent from the whole
/// file are dropped with a warning (crawled traces are noisy).
std::vector<TraceEvent> parse_trace(std::istream& in,
                                    std::vector<std::string>* warnings = nullptr);
void write_trace(std::ostream& out, const std::vector<TraceEvent>& events);
std::vector<TraceEvent> load_trace(const std::string& path,
                                   std::vector<std::string>* warnings = nullptr);
void save_trace(const std::string& path, const std::vector<TraceEvent>& events);

/// Keeps roots with t in [t0, t1] plus every forward of a kept message;
/// forward chains rooted outside the window are dropped entirely.
std::vector<TraceEvent> filter_window(const std::vector<TraceEvent>& events, double t0,
                                      double t1);

struct ForestNode {
    std::string mid;
    std::string uid;
    double t = 0;
    int parent = -1; // -1 for roots
    std::vector<int> children;
};

/// Forwarding trees reconstructed from a trace: updates are roots, each
/// forward hangs under its parent. Edges violating child.t >= parent.t are
/// dropped (with their subtrees) and reported as warnings.
struct ForwardForest {
    std::vector<ForestNode> nodes;
    std::vector<int> roots;

    std::size_t edge_count() const { return nodes.size() - roots.size(); }
};

ForwardForest build_forward_forest(const std::vector<TraceEvent>& events,
                                   std::vector<std::string>* warnings = nullptr);

/// Per-edge intrinsic delays, root-to-leaf chain lengths (edge counts, paths
/// with at least one edge), and their direct average.
struct TraceStats {
    std::vector<double> intrinsic_delays;
    std::vector<int> chain_lengths;
    double mean_L = 0;
};

TraceStats extract_stats(const ForwardForest& forest);

/// Synthesizes a replayable trace from the fitted model: n_roots updates
/// uniform in [t0, t1] by random users; per root one forwarding chain whose
/// length follows the discrete exponential law and whose per-segment delays
/// follow the truncated power law. Each forwarder is a random pull-follower
/// of the previous author (random non-author user when there is none).
/// Deterministic given seed.
std::vector<TraceEvent> synth_trace(const FittedModel& model, std::size_t n_roots,
                                    double t0, double t1, const Topology& topology,
                                    std::uint64_t seed);

} // namespace dsnbench
