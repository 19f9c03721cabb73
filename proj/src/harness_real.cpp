#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <queue>
#include <thread>
#include <tuple>
#include <unordered_map>

#include <httplib.h>

#include "dsnbench/error.hpp"
#include "dsnbench/feed_wire.hpp"
#include "dsnbench/harness.hpp"
#include "dsnbench/message.hpp"
#include "dsnbench/rng.hpp"
#include "replay_plan.hpp"

namespace dsnbench::detail {

namespace {

using Clock = std::chrono::steady_clock;

/// Wall-time task queue shared by the worker pool. Tasks run no earlier than
/// their due point; ties run in submission order.
class TaskQueue {
public:
    void push(Clock::time_point due, std::function<void()> fn) {
        std::lock_guard lock(mu_);
        tasks_.push(Task{due, seq_++, std::move(fn)});
        cv_.notify_one();
    }

    void shutdown() {
        std::lock_guard lock(mu_);
        done_ = true;
        cv_.notify_all();
    }

    /// Blocks until a task is due or shutdown; empty function on shutdown.
    std::function<void()> pop() {
        std::unique_lock lock(mu_);
        for (;;) {
            if (done_) return {};
            if (tasks_.empty()) {
                cv_.wait(lock);
                continue;
            }
            if (tasks_.top().due <= Clock::now()) {
                auto fn = std::move(tasks_.top().fn);
                tasks_.pop();
                return fn;
            }
            cv_.wait_until(lock, tasks_.top().due);
        }
    }

private:
    struct Task {
        Clock::time_point due;
        std::uint64_t seq;
        mutable std::function<void()> fn;
        bool operator<(const Task& other) const {
            if (due != other.due) return due > other.due; // min-heap
            return seq > other.seq;
        }
    };
    std::mutex mu_;
    std::condition_variable cv_;
    std::priority_queue<Task> tasks_;
    std::uint64_t seq_ = 0;
    bool done_ = false;
};

struct RealBot {
    std::mutex mu; // guards feed, seen and the bot-side counters
    std::vector<Message> feed;
    std::unordered_set<std::uint64_t> seen;
    std::uint64_t next_k = 1;
    double phase = 0;
    std::uint64_t queries_issued = 0;
    std::uint64_t polls_completed = 0;
    std::uint64_t messages_stored = 0;
    // served side is updated by the HTTP handler threads
    std::atomic<std::uint64_t> queries_served{0};
    std::atomic<std::uint64_t> bytes_served{0};
};

} // namespace

SimLog run_simulation_real(const std::vector<TraceEvent>& trace,
                           const Topology& topology, const SimOptions& opt,
                           std::vector<std::string>* warnings) {
    ReplayPlan plan = build_replay_plan(trace, topology, warnings);
    const double t0 = opt.window_t0;
    const double t1 = opt.window_t1;
    if (!(t0 <= t1)) throw Error("run_simulation: window_t0 must be <= window_t1");
    const double poll_cap = std::max(t1, plan.latest_trace_t) + opt.drain_grace;
    const std::size_t n = plan.uids.size();

    // rendered snapshots served over HTTP; swapped whole so a reader never
    // observes a partially rendered feed
    std::mutex snap_mu;
    std::unordered_map<std::string, std::shared_ptr<const std::string>> snapshots;
    std::vector<RealBot> bots(n);

    httplib::Server server;
    server.Get(R"(/([^/]+)\.atom)",
               [&](const httplib::Request& req, httplib::Response& res) {
                   const std::string uid = req.matches[1];
                   std::shared_ptr<const std::string> body;
                   {
                       std::lock_guard lock(snap_mu);
                       auto it = snapshots.find(uid);
                       if (it != snapshots.end()) body = it->second;
                   }
                   if (!body) {
                       res.status = 404;
                       return;
                   }
                   auto it = plan.bot_index.find(uid);
                   if (it != plan.bot_index.end()) {
                       bots[it->second].queries_served.fetch_add(
                           1, std::memory_order_relaxed);
                       bots[it->second].bytes_served.fetch_add(
                           body->size(), std::memory_order_relaxed);
                   }
                   res.set_content(*body, "application/atom+xml");
               });

    const int port = opt.port_base;
    if (!server.bind_to_port("127.0.0.1", port))
        throw Error("real mode: cannot bind feed server to port " +
                    std::to_string(port));
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    const Clock::time_point wall_start = Clock::now();
    auto wall_of = [&](double t) {
        return wall_start + std::chrono::duration_cast<Clock::duration>(
                                std::chrono::duration<double>((t - t0) / opt.accel));
    };
    auto virt_now = [&] {
        return t0 + std::chrono::duration<double>(Clock::now() - wall_start).count() *
                        opt.accel;
    };

    for (std::size_t b = 0; b < n; ++b) {
        bots[b].phase =
            make_bot_config(plan.uids[b], opt.h, opt.feed_entry_limit, opt.seed).phase;
        std::lock_guard lock(snap_mu);
        snapshots[plan.uids[b]] = std::make_shared<const std::string>(
            feed_render({}, plan.uids[b], opt.feed_entry_limit));
    }

    TaskQueue tasks;
    std::mutex log_mu;
    std::vector<MsgRecord> records;
    const std::uint64_t expected_records = plan.roots.size() + plan.fireable_edges;
    std::atomic<std::uint64_t> posted_records{0};
    std::mutex plan_mu; // guards edge fired flags

    auto publish = [&](int b, Message msg, TraceKind kind, double t_trace) {
        RealBot& bot = bots[b];
        const double now = virt_now();
        const std::string mid = msg.id.native_id;
        msg.time_ms = ms_from_seconds(now);
        std::string rendered;
        {
            std::lock_guard lock(bot.mu);
            bot.feed.push_back(std::move(msg));
            std::stable_sort(bot.feed.begin(), bot.feed.end(), feed_order_before);
            if (bot.feed.size() > opt.feed_entry_limit)
                bot.feed.resize(opt.feed_entry_limit);
            rendered = feed_render(bot.feed, plan.uids[b], opt.feed_entry_limit);
            ++bot.messages_stored;
        }
        {
            std::lock_guard lock(snap_mu);
            snapshots[plan.uids[b]] =
                std::make_shared<const std::string>(std::move(rendered));
        }
        {
            std::lock_guard lock(log_mu);
            records.push_back({mid, plan.uids[b], kind, t_trace, now});
        }
        posted_records.fetch_add(1);
    };

    std::function<void(int)> do_poll;
    auto schedule_poll = [&](int b) {
        RealBot& bot = bots[b];
        double next;
        {
            std::lock_guard lock(bot.mu);
            next = t0 + bot.phase + static_cast<double>(bot.next_k) * opt.h;
            ++bot.next_k;
        }
        tasks.push(wall_of(next), [&do_poll, b] { do_poll(b); });
    };

    auto on_new_message = [&](int b, const Message& msg, double now) {
        std::vector<std::pair<std::string, double>> to_fire; // child mid, t_child
        {
            std::lock_guard lock(plan_mu);
            auto edges = plan.edges_by_parent.find(msg.id.native_id);
            if (edges == plan.edges_by_parent.end()) return;
            for (auto& edge : edges->second) {
                if (edge.fired || edge.forwarder != b) continue;
                edge.fired = true;
                to_fire.emplace_back(edge.child_mid, edge.t_child);
            }
        }
        for (auto& [child_mid, t_child] : to_fire) {
            const double due = behavior_forward_time(now, t_child);
            tasks.push(wall_of(due), [&, b, parent = msg, child_mid = child_mid,
                                      t_child]() {
                Message m;
                m.id.platform = "feed";
                m.id.channel_id = plan.uids[b];
                m.id.native_id = child_mid;
                m.userid = plan.uids[b];
                m.username = plan.unames[b];
                m.text = compose_forward_text(parent.username, parent.text);
                m.optional_fields["trace_mid"] = child_mid;
                m.optional_fields["forward_of"] = messageid_to_uri(parent.id);
                publish(b, std::move(m), TraceKind::forward, t_child);
            });
        }
    };

    do_poll = [&](int b) {
        RealBot& bot = bots[b];
        const double entered = virt_now();
        const bool in_window = entered <= t1;
        const bool draining =
            posted_records.load() < expected_records && entered <= poll_cap;
        if (!in_window && !draining) return; // bot retires
        for (int f : plan.followees[b]) {
            {
                std::lock_guard lock(bot.mu);
                ++bot.queries_issued;
            }
            httplib::Client client("127.0.0.1", port);
            client.set_connection_timeout(5, 0);
            client.set_read_timeout(5, 0);
            auto res = client.Get("/" + plan.uids[f] + ".atom");
            if (!res || res->status != 200) continue; // unreachable: skip, poll on
            std::vector<Message> msgs;
            try {
                msgs = feed_parse(res->body);
            } catch (const std::exception&) {
                continue;
            }
            std::vector<Message> fresh;
            {
                std::lock_guard lock(bot.mu);
                for (auto& m : msgs)
                    if (bot.seen.insert(message_digest64(m)).second)
                        fresh.push_back(std::move(m));
            }
            for (const auto& m : fresh) on_new_message(b, m, virt_now());
        }
        {
            std::lock_guard lock(bot.mu);
            ++bot.polls_completed;
        }
        schedule_poll(b);
    };

    for (std::size_t b = 0; b < n; ++b)
        tasks.push(wall_of(t0 + bots[b].phase),
                   [&do_poll, b] { do_poll(static_cast<int>(b)); });

    for (const auto& root : plan.roots) {
        tasks.push(wall_of(root.t), [&, &root = root] {
            Message m;
            m.id.platform = "feed";
            m.id.channel_id = plan.uids[root.bot];
            m.id.native_id = root.mid;
            m.userid = plan.uids[root.bot];
            m.username = plan.unames[root.bot];
            m.text = root.text;
            m.optional_fields["trace_mid"] = root.mid;
            publish(root.bot, std::move(m), TraceKind::update, root.t);
        });
    }

    const int n_workers = std::max(1, opt.workers);
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w)
        workers.emplace_back([&] {
            for (;;) {
                auto fn = tasks.pop();
                if (!fn) return;
                fn();
            }
        });

    // run until the window has elapsed and replay work has drained
    for (;;) {
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        const double now = virt_now();
        const bool replay_done = posted_records.load() >= expected_records;
        if (now > t1 && (replay_done || now > poll_cap)) break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(200)); // in-flight rounds
    tasks.shutdown();
    for (auto& w : workers) w.join();
    server.stop();
    server_thread.join();

    SimLog log;
    log.meta.h = opt.h;
    log.meta.seed = opt.seed;
    log.meta.accel = opt.accel;
    log.meta.mode = "real";
    log.meta.t0 = t0;
    log.meta.t1 = t1;
    log.meta.bots = n;
    log.meta.roots = plan.roots.size();
    log.meta.forwards = plan.fireable_edges;
    log.meta.unfired = plan.dropped_edges + (expected_records - posted_records.load());
    double last_post = t0;
    for (const auto& r : records) last_post = std::max(last_post, r.t_posted);
    log.meta.t_end = std::max(t1, last_post);
    log.messages = std::move(records);
    std::stable_sort(log.messages.begin(), log.messages.end(),
                     [](const MsgRecord& x, const MsgRecord& y) {
                         if (x.t_posted != y.t_posted) return x.t_posted < y.t_posted;
                         return x.mid < y.mid;
                     });
    log.bots.reserve(n);
    for (std::size_t b = 0; b < n; ++b) {
        ResourceCounters c;
        c.queries_issued = bots[b].queries_issued;
        c.queries_served = bots[b].queries_served.load();
        c.bytes_served = bots[b].bytes_served.load();
        c.messages_stored = bots[b].messages_stored;
        c.polls_completed = bots[b].polls_completed;
        log.bots.emplace_back(plan.uids[b], c);
    }
    return log;
}

} // namespace dsnbench::detail
