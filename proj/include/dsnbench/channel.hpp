#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dsnbench/feed_wire.hpp"
#include "dsnbench/message.hpp"

namespace dsnbench {

enum class ChannelKind { feed_pull, inbox_push, local_store };

std::string_view platform_tag(ChannelKind kind);

enum class LinkKind { pull, push };

/// One followee/follower link. For a pull channel the endpoint is where we
/// fetch that user's feed (file path or http URI); for a push channel it is
/// the inbox file we deliver into.
struct Subscription {
    std::string userid;
    std::string endpoint;
    LinkKind kind = LinkKind::pull;
};

struct ChannelConfig {
    std::string channel_id;
    ChannelKind platform = ChannelKind::feed_pull;
    std::string self_userid;
    std::string self_username;
    std::string endpoint; // own feed file, own inbox file, or store file
    std::vector<Subscription> subscriptions;
    WriteModel write_model;
    std::size_t feed_entry_limit = 100;
};

struct ChannelCounters {
    std::uint64_t queries_issued = 0;
    std::uint64_t fetch_failures = 0;
};

struct FetchFailure {
    std::string userid;
    std::string endpoint;
    std::string error;
};

/// Merged, time-descending view with digest-level dedup.
struct Timeline {
    std::vector<Message> messages;
    double fetched_at = 0;
};

/// One configured read/write endpoint. Writes are confined to the owner;
/// rendered feeds are replaced atomically so concurrent readers always see a
/// complete snapshot.
class Channel {
public:
    /// Validates the endpoint and subscriptions; loads any existing own feed.
    /// Never performs interactive flows.
    static Channel open(ChannelConfig config);

    /// Posts a new message carrying the channel's own identity.
    /// feed_pull re-renders the owned feed (evicting past feed_entry_limit);
    /// inbox_push delivers a copy into every push subscriber's inbox;
    /// local_store appends to the store file.
    Message update(std::string_view text, double now);

    /// Newest `count` messages across all reachable subscriptions (pull) or
    /// the own inbox/store, deduplicated by digest. Per-subscription failures
    /// are recorded and skipped.
    Timeline home_timeline(std::size_t count, double now);

    /// FBSR reply: threads on the target's root, lands in the author's inbox
    /// (push) or this channel's per-thread comment feed (pull/store), and
    /// never enters the replier's own timeline feed.
    Message reply(const MessageID& target, std::string_view text, double now);

    /// URT forward: composes "RT @user text" and posts it via update. The
    /// original id is kept under optional field "forward_of".
    Message forward(const Message& orig, const std::optional<std::string>& comment,
                    double now);

    /// Replies accumulated locally for one thread root.
    std::vector<Message> read_thread(std::string_view thread_root) const;

    FeedDocument own_feed() const;

    /// A closed channel rejects reads and writes until reopened via open().
    void close() { open_ = false; }
    bool is_open() const { return open_; }

    const ChannelConfig& config() const { return cfg_; }
    const ChannelCounters& counters() const { return counters_; }
    const std::vector<FetchFailure>& last_failures() const { return last_failures_; }

private:
    explicit Channel(ChannelConfig cfg) : cfg_(std::move(cfg)) {}

    Message post(std::string_view text, double now,
                 std::map<std::string, std::string> optional_fields);
    std::string next_native_id();
    std::string comment_feed_path(std::string_view thread_root) const;

    ChannelConfig cfg_;
    ChannelCounters counters_;
    std::vector<FetchFailure> last_failures_;
    std::vector<Message> own_entries_; // feed_pull working set
    std::uint64_t next_seq_ = 1;
    bool open_ = true;
};

/// Container aggregating channels behind one timeline/update surface.
class Pocket {
public:
    /// Rejects duplicate channel ids.
    Channel& add(Channel channel);

    /// Merge of every channel's home timeline, deduplicated by digest.
    Timeline pocket_timeline(std::size_t count, double now);

    Channel* find(std::string_view channel_id);
    std::size_t size() const { return channels_.size(); }
    std::vector<std::unique_ptr<Channel>>& channels() { return channels_; }
    const std::vector<FetchFailure>& last_failures() const { return last_failures_; }

private:
    std::vector<std::unique_ptr<Channel>> channels_;
    std::vector<FetchFailure> last_failures_;
};

/// Fetches raw bytes from a subscription endpoint: filesystem path or
/// http(s) URI. Missing own feeds read as empty documents elsewhere; here a
/// missing file is an error the caller records as a fetch failure.
std::string fetch_endpoint(const std::string& endpoint);

/// Merge + digest-dedup + newest-first truncation shared by the timeline ops.
std::vector<Message> merge_timeline(std::vector<Message> messages, std::size_t count);

bool looks_like_uri(std::string_view endpoint);
void validate_endpoint(const std::string& endpoint, bool must_be_writable_path);

} // namespace dsnbench
