#include "dsnbench/channel.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <httplib.h>

#include "dsnbench/error.hpp"

namespace fs = std::filesystem;

namespace dsnbench {

std::string_view platform_tag(ChannelKind kind) {
    switch (kind) {
    case ChannelKind::feed_pull: return "feed";
    case ChannelKind::inbox_push: return "inbox";
    case ChannelKind::local_store: return "store";
    }
    return "feed";
}

bool looks_like_uri(std::string_view endpoint) {
    return endpoint.find("://") != std::string_view::npos;
}

namespace {

struct UriParts {
    std::string host;
    int port = 80;
    std::string path;
    bool https = false;
};

UriParts parse_http_uri(const std::string& uri) {
    UriParts parts;
    std::string_view rest = uri;
    if (rest.substr(0, 7) == "http://") {
        rest = rest.substr(7);
    } else if (rest.substr(0, 8) == "https://") {
        parts.https = true;
        rest = rest.substr(8);
    } else {
        throw Error("unsupported URI scheme: '" + uri + "'");
    }
    auto slash = rest.find('/');
    std::string_view authority = rest.substr(0, slash);
    parts.path = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
    auto colon = authority.find(':');
    if (colon == std::string_view::npos) {
        parts.host = std::string(authority);
        parts.port = parts.https ? 443 : 80;
    } else {
        parts.host = std::string(authority.substr(0, colon));
        std::string_view portsv = authority.substr(colon + 1);
        int port = 0;
        for (char c : portsv) {
            if (c < '0' || c > '9') throw Error("bad port in URI: '" + uri + "'");
            port = port * 10 + (c - '0');
        }
        if (port <= 0 || port > 65535) throw Error("bad port in URI: '" + uri + "'");
        parts.port = port;
    }
    if (parts.host.empty()) throw Error("URI without host: '" + uri + "'");
    return parts;
}

void write_file_atomic(const std::string& path, std::string_view bytes) {
    fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("short write to '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw Error("cannot replace '" + path + "': " + ec.message());
}

void append_line(const std::string& path, std::string_view line) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw Error("cannot append to '" + path + "'");
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.put('\n');
    if (!out) throw Error("short write to '" + path + "'");
}

std::vector<Message> read_message_lines(const std::string& path) {
    std::vector<Message> out;
    std::ifstream in(path, std::ios::binary);
    if (!in) return out; // never-written store reads as empty
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(parse_message(line));
    }
    return out;
}

bool has_whitespace(std::string_view s) {
    return s.find_first_of(" \t\n\r") != std::string_view::npos;
}

} // namespace

void validate_endpoint(const std::string& endpoint, bool must_be_writable_path) {
    if (endpoint.empty()) throw Error("endpoint-unreachable: empty endpoint");
    if (looks_like_uri(endpoint)) {
        if (must_be_writable_path)
            throw Error("endpoint-unreachable: own endpoint must be a file path, got '" +
                        endpoint + "'");
        try {
            parse_http_uri(endpoint);
        } catch (const Error& e) {
            throw Error(std::string("endpoint-unreachable: ") + e.what());
        }
        return;
    }
    fs::path p(endpoint);
    if (must_be_writable_path) {
        fs::path dir = p.parent_path();
        if (!dir.empty()) {
            std::error_code ec;
            fs::create_directories(dir, ec);
            if (ec)
                throw Error("endpoint-unreachable: cannot create '" + dir.string() +
                            "': " + ec.message());
        }
    }
}

std::string fetch_endpoint(const std::string& endpoint) {
    if (looks_like_uri(endpoint)) {
        UriParts parts = parse_http_uri(endpoint);
        if (parts.https) throw Error("https endpoints are not served in this toolkit");
        httplib::Client client(parts.host, parts.port);
        client.set_connection_timeout(5, 0);
        client.set_read_timeout(5, 0);
        auto res = client.Get(parts.path);
        if (!res) throw Error("fetch failed: '" + endpoint + "'");
        if (res->status != 200)
            throw Error("fetch failed: '" + endpoint + "' status " +
                        std::to_string(res->status));
        return res->body;
    }
    std::ifstream in(endpoint, std::ios::binary);
    if (!in) throw Error("fetch failed: cannot open '" + endpoint + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<Message> merge_timeline(std::vector<Message> messages, std::size_t count) {
    std::stable_sort(messages.begin(), messages.end(), feed_order_before);
    std::vector<Message> out;
    out.reserve(std::min(count, messages.size()));
    std::unordered_set<std::uint64_t> seen;
    for (auto& m : messages) {
        if (out.size() >= count) break;
        if (seen.insert(message_digest64(m)).second) out.push_back(std::move(m));
    }
    return out;
}

Channel Channel::open(ChannelConfig config) {
    if (config.channel_id.empty()) throw Error("channel_open: empty channel_id");
    if (config.channel_id.find(':') != std::string::npos)
        throw Error("channel_open: channel_id must not contain ':'");
    if (config.self_userid.empty()) throw Error("channel_open: empty self_userid");
    if (config.self_username.empty() || has_whitespace(config.self_username))
        throw Error("channel_open: self_username must be non-empty and whitespace-free");
    if (config.feed_entry_limit == 0)
        throw Error("channel_open: feed_entry_limit must be >= 1");
    validate_endpoint(config.endpoint, /*must_be_writable_path=*/true);
    for (const auto& sub : config.subscriptions) {
        if (sub.userid.empty()) throw Error("channel_open: subscription without userid");
        validate_endpoint(sub.endpoint,
                          /*must_be_writable_path=*/sub.kind == LinkKind::push);
    }

    Channel ch(std::move(config));
    if (ch.cfg_.platform == ChannelKind::feed_pull) {
        std::error_code ec;
        if (fs::exists(ch.cfg_.endpoint, ec)) {
            ch.own_entries_ = feed_parse(fetch_endpoint(ch.cfg_.endpoint));
            std::reverse(ch.own_entries_.begin(), ch.own_entries_.end()); // oldest first
            // continue the native id sequence past what is already published
            const std::string prefix = ch.cfg_.channel_id + "-";
            for (const auto& m : ch.own_entries_) {
                if (m.id.native_id.rfind(prefix, 0) != 0) continue;
                std::uint64_t seq = 0;
                bool numeric = true;
                for (char c : m.id.native_id.substr(prefix.size())) {
                    if (c < '0' || c > '9') { numeric = false; break; }
                    seq = seq * 10 + static_cast<std::uint64_t>(c - '0');
                }
                if (numeric) ch.next_seq_ = std::max(ch.next_seq_, seq + 1);
            }
        }
    }
    return ch;
}

std::string Channel::next_native_id() {
    return cfg_.channel_id + "-" + std::to_string(next_seq_++);
}

std::string Channel::comment_feed_path(std::string_view thread_root) const {
    return cfg_.endpoint + ".comments." + std::string(thread_root);
}

Message Channel::post(std::string_view text, double now,
                      std::map<std::string, std::string> optional_fields) {
    if (!open_) throw Error("channel-closed: '" + cfg_.channel_id + "'");
    Message m;
    m.id.platform = std::string(platform_tag(cfg_.platform));
    m.id.channel_id = cfg_.channel_id;
    m.id.native_id = next_native_id();
    m.userid = cfg_.self_userid;
    m.username = cfg_.self_username;
    m.text = std::string(text);
    m.time_ms = ms_from_seconds(now);
    m.optional_fields = std::move(optional_fields);

    switch (cfg_.platform) {
    case ChannelKind::feed_pull: {
        own_entries_.push_back(m);
        if (own_entries_.size() > cfg_.feed_entry_limit) {
            std::stable_sort(own_entries_.begin(), own_entries_.end(), feed_order_before);
            own_entries_.resize(cfg_.feed_entry_limit);
        }
        write_file_atomic(cfg_.endpoint,
                          feed_render(own_entries_, cfg_.self_userid, cfg_.feed_entry_limit));
        break;
    }
    case ChannelKind::inbox_push: {
        const std::string line = serialize_message(m);
        for (const auto& sub : cfg_.subscriptions)
            if (sub.kind == LinkKind::push) append_line(sub.endpoint, line);
        break;
    }
    case ChannelKind::local_store:
        append_line(cfg_.endpoint, serialize_message(m));
        break;
    }
    return m;
}

Message Channel::update(std::string_view text, double now) {
    return post(text, now, {});
}

Timeline Channel::home_timeline(std::size_t count, double now) {
    if (!open_) throw Error("channel-closed: '" + cfg_.channel_id + "'");
    if (count == 0) throw Error("home_timeline: count must be positive");
    last_failures_.clear();
    std::vector<Message> gathered;
    switch (cfg_.platform) {
    case ChannelKind::feed_pull:
        for (const auto& sub : cfg_.subscriptions) {
            if (sub.kind != LinkKind::pull) continue;
            ++counters_.queries_issued;
            try {
                auto msgs = feed_parse(fetch_endpoint(sub.endpoint));
                gathered.insert(gathered.end(), std::make_move_iterator(msgs.begin()),
                                std::make_move_iterator(msgs.end()));
            } catch (const std::exception& e) {
                ++counters_.fetch_failures;
                last_failures_.push_back({sub.userid, sub.endpoint, e.what()});
            }
        }
        break;
    case ChannelKind::inbox_push:
    case ChannelKind::local_store:
        gathered = read_message_lines(cfg_.endpoint);
        break;
    }
    Timeline tl;
    tl.messages = merge_timeline(std::move(gathered), count);
    tl.fetched_at = now;
    return tl;
}

Message Channel::reply(const MessageID& target, std::string_view text, double now) {
    if (!open_) throw Error("channel-closed: '" + cfg_.channel_id + "'");
    if (target.native_id.empty()) throw Error("reply: unknown target thread");
    const std::string root = target.thread_id ? *target.thread_id : target.native_id;

    Message m;
    m.id.platform = std::string(platform_tag(cfg_.platform));
    m.id.channel_id = cfg_.channel_id;
    m.id.native_id = next_native_id();
    m.id.thread_id = root;
    m.userid = cfg_.self_userid;
    m.username = cfg_.self_username;
    m.text = std::string(text);
    m.time_ms = ms_from_seconds(now);

    if (cfg_.platform == ChannelKind::inbox_push) {
        // deliver into the author's inbox; the author must be a known peer
        const Subscription* author = nullptr;
        for (const auto& sub : cfg_.subscriptions)
            if (sub.userid == target.channel_id && sub.kind == LinkKind::push)
                author = &sub;
        if (!author)
            throw Error("reply: unknown target thread (no inbox for '" +
                        target.channel_id + "')");
        append_line(author->endpoint, serialize_message(m));
    } else {
        // per-thread comment feed next to the owned feed; the timeline feed
        // is left untouched
        const std::string path = comment_feed_path(root);
        std::vector<Message> thread;
        std::error_code ec;
        if (fs::exists(path, ec)) thread = feed_parse(fetch_endpoint(path));
        thread.push_back(m);
        write_file_atomic(path, feed_render(thread, cfg_.self_userid,
                                            std::max<std::size_t>(cfg_.feed_entry_limit,
                                                                  thread.size())));
    }
    return m;
}

Message Channel::forward(const Message& orig, const std::optional<std::string>& comment,
                         double now) {
    std::map<std::string, std::string> extra;
    extra["forward_of"] = messageid_to_uri(orig.id);
    return post(compose_forward_text(orig.username, orig.text, comment), now,
                std::move(extra));
}

std::vector<Message> Channel::read_thread(std::string_view thread_root) const {
    const std::string path = comment_feed_path(thread_root);
    std::error_code ec;
    if (!fs::exists(path, ec)) return {};
    auto msgs = feed_parse(fetch_endpoint(path));
    for (auto& m : msgs) m.id.thread_id = std::string(thread_root);
    return msgs;
}

FeedDocument Channel::own_feed() const {
    FeedDocument doc;
    doc.owner_userid = cfg_.self_userid;
    std::error_code ec;
    if (cfg_.platform == ChannelKind::feed_pull && fs::exists(cfg_.endpoint, ec)) {
        std::string bytes = fetch_endpoint(cfg_.endpoint);
        doc.byte_size = bytes.size();
        doc.entries = feed_parse(bytes);
    }
    return doc;
}

Channel& Pocket::add(Channel channel) {
    for (const auto& existing : channels_)
        if (existing->config().channel_id == channel.config().channel_id)
            throw Error("duplicate channel_id '" + channel.config().channel_id + "'");
    channels_.push_back(std::make_unique<Channel>(std::move(channel)));
    return *channels_.back();
}

Timeline Pocket::pocket_timeline(std::size_t count, double now) {
    if (count == 0) throw Error("pocket_timeline: count must be positive");
    last_failures_.clear();
    std::vector<Message> gathered;
    for (auto& ch : channels_) {
        Timeline tl = ch->home_timeline(count, now);
        gathered.insert(gathered.end(), std::make_move_iterator(tl.messages.begin()),
                        std::make_move_iterator(tl.messages.end()));
        const auto& fails = ch->last_failures();
        last_failures_.insert(last_failures_.end(), fails.begin(), fails.end());
    }
    Timeline tl;
    tl.messages = merge_timeline(std::move(gathered), count);
    tl.fetched_at = now;
    return tl;
}

Channel* Pocket::find(std::string_view channel_id) {
    for (auto& ch : channels_)
        if (ch->config().channel_id == channel_id) return ch.get();
    return nullptr;
}

} // namespace dsnbench
