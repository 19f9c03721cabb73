#include "dsnbench/trace.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include "dsnbench/error.hpp"
#include "dsnbench/kernels.hpp"
#include "dsnbench/message.hpp"
#include "dsnbench/rng.hpp"

namespace dsnbench {

std::string_view to_string(TraceKind k) {
    return k == TraceKind::update ? "update" : "forward";
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (pos <= line.size()) {
        auto tab = line.find('\t', pos);
        fields.push_back(
            line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
        if (tab == std::string::npos) break;
        pos = tab + 1;
    }
    return fields;
}

void warn(std::vector<std::string>* warnings, std::string msg) {
    if (warnings) warnings->push_back(std::move(msg));
}

std::string format_t(double t) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", t);
    std::string s(buf);
    // trim trailing zeros but keep at least one fractional digit
    auto dot = s.find('.');
    auto last = s.find_last_not_of('0');
    s.erase(std::max(last, dot + 1) + 1);
    return s;
}

} // namespace

std::vector<TraceEvent> parse_trace(std::istream& in,
                                    std::vector<std::string>* warnings) {
    std::vector<TraceEvent> events;
    std::unordered_set<std::string> known_mids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_tabs(line);
        if (fields.size() != 7)
            throw Error("trace line " + std::to_string(lineno) + ": expected 7 fields, got " +
                        std::to_string(fields.size()));
        TraceEvent ev;
        if (fields[0] == "update") {
            ev.kind = TraceKind::update;
        } else if (fields[0] == "forward") {
            ev.kind = TraceKind::forward;
        } else {
            throw Error("trace line " + std::to_string(lineno) + ": unknown kind '" +
                        fields[0] + "'");
        }
        ev.mid = fields[1];
        if (ev.mid.empty())
            throw Error("trace line " + std::to_string(lineno) + ": empty mid");
        if (fields[2] != "-") ev.parent_mid = fields[2];
        if (ev.kind == TraceKind::forward && !ev.parent_mid)
            throw Error("trace line " + std::to_string(lineno) +
                        ": forward without parent_mid");
        if (ev.kind == TraceKind::update && ev.parent_mid)
            throw Error("trace line " + std::to_string(lineno) +
                        ": update with parent_mid");
        ev.uid = fields[3];
        ev.uname = fields[4];
        try {
            std::size_t used = 0;
            ev.t = std::stod(fields[5], &used);
            if (used != fields[5].size()) throw Error("");
        } catch (...) {
            throw Error("trace line " + std::to_string(lineno) + ": bad time '" +
                        fields[5] + "'");
        }
        if (!(ev.t >= 0))
            throw Error("trace line " + std::to_string(lineno) + ": negative time");
        ev.text = unescape_field(fields[6]);
        known_mids.insert(ev.mid);
        events.push_back(std::move(ev));
    }
    // dangling parents are judged after full ingestion: traces may reference
    // forward targets recorded later in the file
    std::vector<TraceEvent> kept;
    kept.reserve(events.size());
    for (auto& ev : events) {
        if (ev.kind == TraceKind::forward && !known_mids.count(*ev.parent_mid)) {
            warn(warnings, "dropped forward '" + ev.mid + "': unknown parent '" +
                               *ev.parent_mid + "'");
            continue;
        }
        kept.push_back(std::move(ev));
    }
    return kept;
}

void write_trace(std::ostream& out, const std::vector<TraceEvent>& events) {
    for (const auto& ev : events) {
        out << to_string(ev.kind) << '\t' << ev.mid << '\t'
            << (ev.parent_mid ? *ev.parent_mid : "-") << '\t' << ev.uid << '\t'
            << ev.uname << '\t' << format_t(ev.t) << '\t' << escape_field(ev.text)
            << '\n';
    }
}

std::vector<TraceEvent> load_trace(const std::string& path,
                                   std::vector<std::string>* warnings) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open trace file '" + path + "'");
    return parse_trace(in, warnings);
}

void save_trace(const std::string& path, const std::vector<TraceEvent>& events) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write trace file '" + path + "'");
    write_trace(out, events);
}

std::vector<TraceEvent> filter_window(const std::vector<TraceEvent>& events, double t0,
                                      double t1) {
    if (!(t0 <= t1)) throw Error("filter_window: t0 must be <= t1");
    // root of each mid: updates root themselves, forwards inherit
    std::unordered_map<std::string, const TraceEvent*> by_mid;
    for (const auto& ev : events) by_mid[ev.mid] = &ev;
    std::unordered_map<std::string, int> root_kept; // -1 unknown, 0 no, 1 yes
    auto kept_root = [&](const TraceEvent& ev) {
        // walk to the root, memoizing on the way back
        std::vector<const TraceEvent*> path;
        const TraceEvent* cur = &ev;
        int verdict = -1;
        for (;;) {
            auto memo = root_kept.find(cur->mid);
            if (memo != root_kept.end()) {
                verdict = memo->second;
                break;
            }
            path.push_back(cur);
            if (cur->kind == TraceKind::update) {
                verdict = (cur->t >= t0 && cur->t <= t1) ? 1 : 0;
                break;
            }
            auto parent = by_mid.find(*cur->parent_mid);
            if (parent == by_mid.end()) {
                verdict = 0;
                break;
            }
            cur = parent->second;
        }
        for (const TraceEvent* p : path) root_kept[p->mid] = verdict;
        return verdict == 1;
    };
    std::vector<TraceEvent> kept;
    for (const auto& ev : events)
        if (kept_root(ev)) kept.push_back(ev);
    return kept;
}

ForwardForest build_forward_forest(const std::vector<TraceEvent>& events,
                                   std::vector<std::string>* warnings) {
    ForwardForest forest;
    forest.nodes.reserve(events.size());
    std::unordered_map<std::string, int> index_of;

    for (const auto& ev : events) {
        if (ev.kind != TraceKind::update) continue;
        if (index_of.count(ev.mid)) {
            warn(warnings, "duplicate mid '" + ev.mid + "' ignored");
            continue;
        }
        int idx = static_cast<int>(forest.nodes.size());
        forest.nodes.push_back({ev.mid, ev.uid, ev.t, -1, {}});
        index_of[ev.mid] = idx;
        forest.roots.push_back(idx);
    }
    // forwards may appear in any order relative to their parents; attach
    // iteratively until no progress
    std::vector<const TraceEvent*> pending;
    for (const auto& ev : events)
        if (ev.kind == TraceKind::forward) pending.push_back(&ev);
    bool progressed = true;
    while (progressed && !pending.empty()) {
        progressed = false;
        std::vector<const TraceEvent*> next;
        for (const TraceEvent* ev : pending) {
            auto it = index_of.find(*ev->parent_mid);
            if (it == index_of.end()) {
                next.push_back(ev);
                continue;
            }
            progressed = true;
            if (index_of.count(ev->mid)) {
                warn(warnings, "duplicate mid '" + ev->mid + "' ignored");
                continue;
            }
            const ForestNode& parent = forest.nodes[it->second];
            if (ev->t < parent.t) {
                warn(warnings, "dropped edge '" + parent.mid + "' -> '" + ev->mid +
                                   "': child earlier than parent");
                continue;
            }
            int idx = static_cast<int>(forest.nodes.size());
            forest.nodes.push_back({ev->mid, ev->uid, ev->t, it->second, {}});
            forest.nodes[it->second].children.push_back(idx);
            index_of[ev->mid] = idx;
        }
        pending.swap(next);
    }
    for (const TraceEvent* ev : pending)
        warn(warnings,
             "dropped forward '" + ev->mid + "': parent not in any retained tree");
    return forest;
}

TraceStats extract_stats(const ForwardForest& forest) {
    TraceStats stats;
    stats.intrinsic_delays.reserve(forest.edge_count());
    for (std::size_t i = 0; i < forest.nodes.size(); ++i) {
        const ForestNode& n = forest.nodes[i];
        if (n.parent >= 0)
            stats.intrinsic_delays.push_back(n.t - forest.nodes[n.parent].t);
        if (!n.children.empty()) continue;
        // leaf: depth = edges back to the root
        int depth = 0;
        int cur = static_cast<int>(i);
        while (forest.nodes[cur].parent >= 0) {
            ++depth;
            cur = forest.nodes[cur].parent;
        }
        if (depth >= 1) stats.chain_lengths.push_back(depth);
    }
    if (!stats.chain_lengths.empty()) {
        double sum = 0;
        for (int l : stats.chain_lengths) sum += l;
        stats.mean_L = sum / static_cast<double>(stats.chain_lengths.size());
    }
    return stats;
}

std::vector<TraceEvent> synth_trace(const FittedModel& model, std::size_t n_roots,
                                    double t0, double t1, const Topology& topology,
                                    std::uint64_t seed) {
    model.validate();
    if (!(t0 <= t1)) throw Error("synth_trace: t0 must be <= t1");
    if (topology.users.empty()) throw Error("synth_trace: empty topology");

    const auto followers = topology.pull_followers();
    const std::size_t n_users = topology.users.size();
    std::unordered_map<std::string, const TopologyUser*> user_by_uid;
    for (const auto& u : topology.users) user_by_uid[u.uid] = &u;

    Rng rng(substream(seed, "synth_trace"));
    std::vector<TraceEvent> events;
    std::uint64_t next_mid = 1;
    auto fresh_mid = [&] {
        char buf[24];
        std::snprintf(buf, sizeof(buf), "m%08llu",
                      static_cast<unsigned long long>(next_mid++));
        return std::string(buf);
    };

    for (std::size_t r = 0; r < n_roots; ++r) {
        const TopologyUser& author = topology.users[rng.below(n_users)];
        TraceEvent root;
        root.kind = TraceKind::update;
        root.mid = fresh_mid();
        root.uid = author.uid;
        root.uname = author.uname;
        root.t = t0 + rng.uniform01() * (t1 - t0);
        root.text = "status " + root.mid;
        events.push_back(root);

        const int chain_len = kernels::chain_length_icdf(rng.uniform01(), model.c);
        const TraceEvent* prev = &events.back();
        std::string prev_mid = prev->mid;
        std::string prev_uid = prev->uid;
        std::string prev_uname = prev->uname;
        std::string prev_text = prev->text;
        double prev_t = prev->t;
        for (int k = 0; k < chain_len; ++k) {
            const double delay =
                kernels::power_law_icdf(rng.uniform01(), model.a, model.i_min, model.i_max);
            const TopologyUser* forwarder = nullptr;
            auto f = followers.find(prev_uid);
            if (f != followers.end() && !f->second.empty()) {
                forwarder = user_by_uid.at(f->second[rng.below(f->second.size())]);
            } else {
                // nobody follows the author; fall back to any other user
                do {
                    forwarder = &topology.users[rng.below(n_users)];
                } while (forwarder->uid == prev_uid && n_users > 1);
            }
            TraceEvent fwd;
            fwd.kind = TraceKind::forward;
            fwd.mid = fresh_mid();
            fwd.parent_mid = prev_mid;
            fwd.uid = forwarder->uid;
            fwd.uname = forwarder->uname;
            fwd.t = prev_t + delay;
            fwd.text = compose_forward_text(prev_uname, prev_text);
            prev_mid = fwd.mid;
            prev_uid = fwd.uid;
            prev_uname = fwd.uname;
            prev_text = fwd.text;
            prev_t = fwd.t;
            events.push_back(std::move(fwd));
        }
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const TraceEvent& x, const TraceEvent& y) {
                         if (x.t != y.t) return x.t < y.t;
                         return x.mid < y.mid;
                     });
    return events;
}

} // namespace dsnbench
