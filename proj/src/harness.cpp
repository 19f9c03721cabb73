#include "dsnbench/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <queue>
#include <sstream>
#include <unordered_map>

#include "dsnbench/error.hpp"
#include "dsnbench/feed_wire.hpp"
#include "dsnbench/message.hpp"
#include "dsnbench/rng.hpp"
#include "replay_plan.hpp"

namespace dsnbench {

BotConfig make_bot_config(const std::string& uid, double query_gap,
                          std::size_t feed_entry_limit, std::uint64_t seed) {
    if (!(query_gap > 0)) throw Error("bot config: query_gap must be positive");
    BotConfig cfg;
    cfg.uid = uid;
    cfg.query_gap = query_gap;
    Rng rng(substream(seed, uid));
    cfg.phase = rng.uniform01() * query_gap;
    cfg.feed_entry_limit = feed_entry_limit;
    return cfg;
}

BotState bot_init(const BotConfig& config, const Topology& topology,
                  double run_start) {
    if (!(config.query_gap > 0)) throw Error("bot_init: query_gap must be positive");
    if (!(config.phase >= 0 && config.phase < config.query_gap))
        throw Error("bot_init: phase out of [0, query_gap)");
    if (!topology.has_user(config.uid))
        throw Error("bot_init: uid '" + config.uid + "' not in topology");
    BotState state;
    state.config = config;
    state.next_poll = run_start + config.phase;
    return state;
}

double behavior_forward_time(double t_seen, double t_mf) {
    return t_seen <= t_mf ? t_mf : t_seen;
}

namespace detail {

ReplayPlan build_replay_plan(const std::vector<TraceEvent>& trace,
                             const Topology& topology,
                             std::vector<std::string>* warnings) {
    topology.validate();
    ReplayPlan plan;
    plan.uids.reserve(topology.users.size());
    std::unordered_map<std::string, std::string> uname_of;
    for (const auto& u : topology.users) {
        plan.uids.push_back(u.uid);
        uname_of[u.uid] = u.uname;
    }
    std::sort(plan.uids.begin(), plan.uids.end());
    plan.unames.reserve(plan.uids.size());
    for (std::size_t i = 0; i < plan.uids.size(); ++i) {
        plan.bot_index[plan.uids[i]] = static_cast<int>(i);
        plan.unames.push_back(uname_of[plan.uids[i]]);
    }
    plan.followees.assign(plan.uids.size(), {});
    std::vector<std::unordered_set<int>> followee_sets(plan.uids.size());
    for (const auto& u : topology.users) {
        int b = plan.bot_index.at(u.uid);
        for (const auto& ref : topology.followees_of(u.uid)) {
            if (ref.kind != LinkKind::pull) {
                if (warnings)
                    warnings->push_back("push link " + u.uid + " -> " + ref.uid +
                                        " ignored: the harness polls pull links only");
                continue;
            }
            int f = plan.bot_index.at(ref.uid);
            plan.followees[b].push_back(f);
            followee_sets[b].insert(f);
        }
        std::sort(plan.followees[b].begin(), plan.followees[b].end());
    }

    // events by mid, for parent lookups
    std::unordered_map<std::string, const TraceEvent*> by_mid;
    for (const auto& ev : trace) by_mid[ev.mid] = &ev;

    // an event is replayable iff its user exists and (for forwards) its
    // parent is replayable and the forwarder pull-follows the parent author
    std::unordered_map<std::string, int> replayable; // mid -> 0/1
    auto is_replayable = [&](const TraceEvent& ev, auto&& self) -> bool {
        auto memo = replayable.find(ev.mid);
        if (memo != replayable.end()) return memo->second == 1;
        bool ok = plan.bot_index.count(ev.uid) != 0;
        if (ok && ev.kind == TraceKind::forward) {
            auto parent = by_mid.find(*ev.parent_mid);
            ok = parent != by_mid.end() && self(*parent->second, self);
            if (ok) {
                int f = plan.bot_index.at(ev.uid);
                int author = plan.bot_index.at(parent->second->uid);
                ok = followee_sets[f].count(author) != 0;
            }
        }
        replayable[ev.mid] = ok ? 1 : 0;
        return ok;
    };

    for (const auto& ev : trace) {
        plan.latest_trace_t = std::max(plan.latest_trace_t, ev.t);
        if (ev.kind == TraceKind::update) {
            auto it = plan.bot_index.find(ev.uid);
            if (it == plan.bot_index.end())
                throw Error("trace/topology mismatch: root '" + ev.mid +
                            "' by unknown user '" + ev.uid + "'");
            plan.roots.push_back({it->second, ev.mid, ev.t, ev.text});
            continue;
        }
        if (!is_replayable(ev, is_replayable)) {
            ++plan.dropped_edges;
            if (warnings)
                warnings->push_back("forward '" + ev.mid +
                                    "' cannot replay (missing user, dropped parent, "
                                    "or no follow link); dropped");
            continue;
        }
        PlanEdge edge;
        edge.child_mid = ev.mid;
        edge.forwarder = plan.bot_index.at(ev.uid);
        edge.t_child = ev.t;
        plan.edges_by_parent[*ev.parent_mid].push_back(std::move(edge));
        ++plan.fireable_edges;
    }
    return plan;
}

} // namespace detail

namespace {

using detail::ReplayPlan;

enum EventKind : int { kPostUpdate = 0, kPostForward = 1, kPoll = 2 };

struct PendingForward {
    Message parent;
    double t_child_trace = 0;
};

struct Event {
    double t = 0;
    int kind = kPoll;
    int bot = -1;
    std::string mid; // posted mid; empty for polls
    int payload = -1;

    bool operator>(const Event& other) const {
        if (t != other.t) return t > other.t;
        if (kind != other.kind) return kind > other.kind;
        if (bot != other.bot) return bot > other.bot;
        return mid > other.mid;
    }
};

struct FeedEntry {
    Message msg;
    std::uint64_t digest = 0;
};

struct VirtualBot {
    double phase = 0;
    std::uint64_t next_k = 0;
    std::vector<std::uint64_t> last_seen_version; // aligned with plan followees
    std::unordered_set<std::uint64_t> seen;
    ResourceCounters counters;
    std::vector<FeedEntry> feed; // newest last
    std::uint64_t feed_version = 0;
    std::size_t feed_bytes = 0;
};

std::size_t rendered_feed_bytes(const VirtualBot& bot, const std::string& uid,
                                std::size_t limit) {
    std::vector<Message> msgs;
    msgs.reserve(bot.feed.size());
    for (const auto& e : bot.feed) msgs.push_back(e.msg);
    return feed_render(msgs, uid, limit).size();
}

SimLog run_virtual(const std::vector<TraceEvent>& trace, const Topology& topology,
                   const SimOptions& opt, std::vector<std::string>* warnings) {
    ReplayPlan plan = detail::build_replay_plan(trace, topology, warnings);
    const double t0 = opt.window_t0;
    const double t1 = opt.window_t1;
    if (!(t0 <= t1)) throw Error("run_simulation: window_t0 must be <= window_t1");
    const double poll_cap = std::max(t1, plan.latest_trace_t) + opt.drain_grace;

    const std::size_t n = plan.uids.size();
    std::vector<VirtualBot> bots(n);
    std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue;

    for (std::size_t b = 0; b < n; ++b) {
        BotConfig cfg = make_bot_config(plan.uids[b], opt.h, opt.feed_entry_limit,
                                        opt.seed);
        bots[b].phase = cfg.phase;
        bots[b].last_seen_version.assign(plan.followees[b].size(), 0);
        bots[b].feed_bytes = rendered_feed_bytes(bots[b], plan.uids[b],
                                                 opt.feed_entry_limit);
        queue.push(Event{t0 + cfg.phase, kPoll, static_cast<int>(b), {}, -1});
        bots[b].next_k = 1;
    }

    for (const auto& root : plan.roots)
        queue.push(Event{root.t, kPostUpdate, root.bot, root.mid, -1});
    std::unordered_map<std::string, const ReplayPlan::RootPost*> root_by_mid;
    for (const auto& root : plan.roots) root_by_mid[root.mid] = &root;

    std::vector<PendingForward> pending;
    SimLog log;
    log.meta.h = opt.h;
    log.meta.seed = opt.seed;
    log.meta.accel = 1;
    log.meta.mode = "virtual";
    log.meta.t0 = t0;
    log.meta.t1 = t1;
    log.meta.bots = n;
    log.meta.roots = plan.roots.size();
    log.meta.forwards = plan.fireable_edges;

    const std::uint64_t expected_records = plan.roots.size() + plan.fireable_edges;
    std::uint64_t posted_records = 0;
    double last_post_t = t0;

    auto post_message = [&](int b, Message msg, TraceKind kind, double t_trace,
                            double now) {
        VirtualBot& bot = bots[b];
        FeedEntry entry{std::move(msg), 0};
        entry.digest = message_digest64(entry.msg);
        bot.feed.push_back(std::move(entry));
        if (bot.feed.size() > opt.feed_entry_limit)
            bot.feed.erase(bot.feed.begin());
        ++bot.feed_version;
        bot.feed_bytes = rendered_feed_bytes(bot, plan.uids[b], opt.feed_entry_limit);
        ++bot.counters.messages_stored;
        log.messages.push_back(
            {bot.feed.back().msg.id.native_id, plan.uids[b], kind, t_trace, now});
        ++posted_records;
        last_post_t = std::max(last_post_t, now);
    };

    auto handle_new_message = [&](int b, const Message& msg, double now) {
        auto edges = plan.edges_by_parent.find(msg.id.native_id);
        if (edges == plan.edges_by_parent.end()) return;
        for (auto& edge : edges->second) {
            if (edge.fired || edge.forwarder != b) continue;
            edge.fired = true;
            const double due = behavior_forward_time(now, edge.t_child);
            pending.push_back({msg, edge.t_child});
            queue.push(Event{due, kPostForward, b, edge.child_mid,
                             static_cast<int>(pending.size() - 1)});
        }
    };

    while (!queue.empty()) {
        Event ev = queue.top();
        queue.pop();
        switch (ev.kind) {
        case kPostUpdate: {
            const auto& root = *root_by_mid.at(ev.mid);
            Message m;
            m.id.platform = "feed";
            m.id.channel_id = plan.uids[ev.bot];
            m.id.native_id = root.mid;
            m.userid = plan.uids[ev.bot];
            m.username = plan.unames[ev.bot];
            m.text = root.text;
            m.time_ms = ms_from_seconds(ev.t);
            m.optional_fields["trace_mid"] = root.mid;
            post_message(ev.bot, std::move(m), TraceKind::update, root.t, ev.t);
            break;
        }
        case kPostForward: {
            const PendingForward& pf = pending[static_cast<std::size_t>(ev.payload)];
            Message m;
            m.id.platform = "feed";
            m.id.channel_id = plan.uids[ev.bot];
            m.id.native_id = ev.mid;
            m.userid = plan.uids[ev.bot];
            m.username = plan.unames[ev.bot];
            m.text = compose_forward_text(pf.parent.username, pf.parent.text);
            m.time_ms = ms_from_seconds(ev.t);
            m.optional_fields["trace_mid"] = ev.mid;
            m.optional_fields["forward_of"] = messageid_to_uri(pf.parent.id);
            post_message(ev.bot, std::move(m), TraceKind::forward, pf.t_child_trace,
                         ev.t);
            break;
        }
        case kPoll: {
            const bool in_window = ev.t <= t1;
            const bool draining = posted_records < expected_records && ev.t <= poll_cap;
            if (!in_window && !draining) break; // bot retires, no reschedule
            VirtualBot& bot = bots[ev.bot];
            const auto& followees = plan.followees[ev.bot];
            for (std::size_t fi = 0; fi < followees.size(); ++fi) {
                const int f = followees[fi];
                VirtualBot& owner = bots[f];
                ++bot.counters.queries_issued;
                ++owner.counters.queries_served;
                owner.counters.bytes_served += owner.feed_bytes;
                if (bot.last_seen_version[fi] == owner.feed_version) continue;
                for (const auto& entry : owner.feed)
                    if (bot.seen.insert(entry.digest).second)
                        handle_new_message(ev.bot, entry.msg, ev.t);
                bot.last_seen_version[fi] = owner.feed_version;
            }
            ++bot.counters.polls_completed;
            queue.push(Event{t0 + bot.phase + static_cast<double>(bot.next_k) * opt.h,
                             kPoll, ev.bot, {}, -1});
            ++bot.next_k;
            break;
        }
        }
    }

    log.meta.t_end = std::max(t1, last_post_t);
    log.meta.unfired = plan.dropped_edges + (expected_records - posted_records);
    if (posted_records < expected_records && warnings)
        warnings->push_back(std::to_string(expected_records - posted_records) +
                            " forward edge(s) never became visible before the poll "
                            "horizon");
    log.bots.reserve(n);
    for (std::size_t b = 0; b < n; ++b)
        log.bots.emplace_back(plan.uids[b], bots[b].counters);
    return log;
}

} // namespace

SimLog run_simulation(const std::vector<TraceEvent>& trace, const Topology& topology,
                      const SimOptions& options, std::vector<std::string>* warnings) {
    if (!(options.h > 0)) throw Error("run_simulation: h must be positive");
    if (!(options.accel >= 1)) throw Error("run_simulation: accel must be >= 1");
    if (options.feed_entry_limit == 0)
        throw Error("run_simulation: feed_entry_limit must be >= 1");
    if (options.mode == SimMode::virtual_clock)
        return run_virtual(trace, topology, options, warnings);
    return detail::run_simulation_real(trace, topology, options, warnings);
}

namespace {

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

} // namespace

void write_simlog(std::ostream& out, const SimLog& log) {
    out << "# dsnbench-simlog v1\n";
    out << "# h " << fmt6(log.meta.h) << '\n';
    out << "# seed " << log.meta.seed << '\n';
    out << "# accel " << fmt6(log.meta.accel) << '\n';
    out << "# mode " << log.meta.mode << '\n';
    out << "# t0 " << fmt6(log.meta.t0) << '\n';
    out << "# t1 " << fmt6(log.meta.t1) << '\n';
    out << "# t_end " << fmt6(log.meta.t_end) << '\n';
    out << "# bots " << log.meta.bots << '\n';
    out << "# roots " << log.meta.roots << '\n';
    out << "# forwards " << log.meta.forwards << '\n';
    out << "# unfired " << log.meta.unfired << '\n';
    for (const auto& m : log.messages)
        out << "MSG\t" << m.mid << '\t' << m.uid << '\t' << to_string(m.kind) << '\t'
            << fmt6(m.t_trace) << '\t' << fmt6(m.t_posted) << '\n';
    for (const auto& [uid, c] : log.bots)
        out << "BOT\t" << uid << '\t' << c.queries_issued << '\t' << c.queries_served
            << '\t' << c.bytes_served << '\t' << c.polls_completed << '\t'
            << c.messages_stored << '\n';
}

SimLog read_simlog(std::istream& in) {
    SimLog log;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream meta(line.substr(1));
            std::string key;
            meta >> key;
            if (key == "h") meta >> log.meta.h;
            else if (key == "seed") meta >> log.meta.seed;
            else if (key == "accel") meta >> log.meta.accel;
            else if (key == "mode") meta >> log.meta.mode;
            else if (key == "t0") meta >> log.meta.t0;
            else if (key == "t1") meta >> log.meta.t1;
            else if (key == "t_end") meta >> log.meta.t_end;
            else if (key == "bots") meta >> log.meta.bots;
            else if (key == "roots") meta >> log.meta.roots;
            else if (key == "forwards") meta >> log.meta.forwards;
            else if (key == "unfired") meta >> log.meta.unfired;
            continue;
        }
        std::istringstream rec(line);
        std::string tag;
        rec >> tag;
        if (tag == "MSG") {
            MsgRecord m;
            std::string kind;
            rec >> m.mid >> m.uid >> kind >> m.t_trace >> m.t_posted;
            if (!rec || (kind != "update" && kind != "forward"))
                throw Error("simlog line " + std::to_string(lineno) + ": bad MSG record");
            m.kind = kind == "update" ? TraceKind::update : TraceKind::forward;
            log.messages.push_back(std::move(m));
        } else if (tag == "BOT") {
            std::string uid;
            ResourceCounters c;
            rec >> uid >> c.queries_issued >> c.queries_served >> c.bytes_served >>
                c.polls_completed >> c.messages_stored;
            if (!rec)
                throw Error("simlog line " + std::to_string(lineno) + ": bad BOT record");
            log.bots.emplace_back(std::move(uid), c);
        } else {
            throw Error("simlog line " + std::to_string(lineno) + ": unknown record '" +
                        tag + "'");
        }
    }
    return log;
}

SimLog load_simlog(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open simlog '" + path + "'");
    return read_simlog(in);
}

void save_simlog(const std::string& path, const SimLog& log) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write simlog '" + path + "'");
    write_simlog(out, log);
}

} // namespace dsnbench
