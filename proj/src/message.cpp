#include "dsnbench/message.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>

#include "dsnbench/error.hpp"
#include "dsnbench/rng.hpp"

namespace dsnbench {

std::string_view to_string(AttachmentKind k) {
    switch (k) {
    case AttachmentKind::link: return "link";
    case AttachmentKind::image: return "image";
    case AttachmentKind::video: return "video";
    case AttachmentKind::blob: return "blob";
    }
    return "link";
}

std::optional<AttachmentKind> attachment_kind_from(std::string_view s) {
    if (s == "link") return AttachmentKind::link;
    if (s == "image") return AttachmentKind::image;
    if (s == "video") return AttachmentKind::video;
    if (s == "blob") return AttachmentKind::blob;
    return std::nullopt;
}

std::string messageid_to_uri(const MessageID& id) {
    return id.platform + ":" + id.channel_id + ":" + id.native_id;
}

std::optional<MessageID> messageid_from_uri(std::string_view uri) {
    auto p1 = uri.find(':');
    if (p1 == std::string_view::npos) return std::nullopt;
    auto p2 = uri.find(':', p1 + 1);
    if (p2 == std::string_view::npos) return std::nullopt;
    MessageID id;
    id.platform = std::string(uri.substr(0, p1));
    id.channel_id = std::string(uri.substr(p1 + 1, p2 - p1 - 1));
    id.native_id = std::string(uri.substr(p2 + 1));
    return id;
}

std::int64_t ms_from_seconds(double seconds) {
    if (!std::isfinite(seconds)) throw Error("time is not finite");
    return static_cast<std::int64_t>(std::llround(seconds * 1000.0));
}

std::string format_seconds_ms(std::int64_t time_ms) {
    char buf[32];
    std::int64_t sign = time_ms < 0 ? -1 : 1;
    std::int64_t mag = time_ms * sign;
    std::snprintf(buf, sizeof(buf), "%s%lld.%03lld", sign < 0 ? "-" : "",
                  static_cast<long long>(mag / 1000),
                  static_cast<long long>(mag % 1000));
    return buf;
}

namespace {

std::atomic<std::uint64_t> g_local_seq{1};

std::int64_t parse_seconds_ms(std::string_view s, std::string_view what) {
    try {
        size_t used = 0;
        double v = std::stod(std::string(s), &used);
        if (used != s.size()) throw Error("");
        return ms_from_seconds(v);
    } catch (...) {
        throw Error("bad " + std::string(what) + " value: '" + std::string(s) + "'");
    }
}

} // namespace

Message make_message(std::string_view userid, std::string_view username,
                     std::string_view text, double time_seconds,
                     std::vector<Attachment> attachments) {
    if (userid.empty()) throw Error("make_message: empty userid");
    if (username.empty()) throw Error("make_message: empty username");
    if (!(time_seconds >= 0.0)) throw Error("make_message: negative time");
    Message m;
    m.id.native_id = "local-" + std::to_string(g_local_seq.fetch_add(1));
    m.userid = std::string(userid);
    m.username = std::string(username);
    m.text = std::string(text);
    m.time_ms = ms_from_seconds(time_seconds);
    m.attachments = std::move(attachments);
    return m;
}

std::string compose_forward_text(std::string_view orig_username,
                                 std::string_view orig_text,
                                 const std::optional<std::string>& comment) {
    std::string out;
    out.reserve(orig_username.size() + orig_text.size() + 16 +
                (comment ? comment->size() + 1 : 0));
    if (comment) {
        out += *comment;
        out += ' ';
    }
    out += "RT @";
    out += orig_username;
    out += ' ';
    out += orig_text;
    return out;
}

std::optional<ForwardParts> parse_forward_text(std::string_view text) {
    static constexpr std::string_view kLead = "RT @";
    static constexpr std::string_view kMid = " RT @";
    std::string comment;
    std::string_view rest;
    if (text.substr(0, kLead.size()) == kLead) {
        rest = text.substr(kLead.size());
    } else {
        auto pos = text.find(kMid);
        if (pos == std::string_view::npos) return std::nullopt;
        comment = std::string(text.substr(0, pos));
        rest = text.substr(pos + kMid.size());
    }
    std::size_t ws = 0;
    while (ws < rest.size() && rest[ws] != ' ' && rest[ws] != '\t' && rest[ws] != '\n')
        ++ws;
    if (ws == 0) return std::nullopt; // empty username
    ForwardParts parts;
    parts.comment = std::move(comment);
    parts.orig_username = std::string(rest.substr(0, ws));
    // exactly one separator is consumed; anything beyond belongs to the text
    parts.orig_text = ws < rest.size() ? std::string(rest.substr(ws + 1)) : std::string();
    return parts;
}

std::uint64_t message_digest64(const Message& m) {
    std::uint64_t h = 14695981039346656037ULL;
    auto mix = [&h](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        h ^= 0x1f; // field separator
        h *= 1099511628211ULL;
    };
    mix(m.userid);
    mix(m.text);
    mix(format_seconds_ms(m.time_ms));
    return h;
}

std::string message_digest(const Message& m) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(message_digest64(m)));
    return buf;
}

std::string escape_field(std::string_view v) {
    std::string out;
    out.reserve(v.size());
    for (char c : v) {
        switch (c) {
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default: out += c;
        }
    }
    return out;
}

std::string unescape_field(std::string_view v) {
    std::string out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] != '\\' || i + 1 == v.size()) {
            out += v[i];
            continue;
        }
        switch (v[++i]) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case '\\': out += '\\'; break;
        default: out += v[i];
        }
    }
    return out;
}

namespace {

void append_kv(std::string& line, std::string_view key, std::string_view value) {
    if (!line.empty()) line += '\t';
    line += key;
    line += '=';
    line += escape_field(value);
}

} // namespace

std::string serialize_message(const Message& m) {
    std::string line;
    append_kv(line, "id.platform", m.id.platform);
    append_kv(line, "id.channel", m.id.channel_id);
    append_kv(line, "id.native", m.id.native_id);
    if (m.id.thread_id) append_kv(line, "id.thread", *m.id.thread_id);
    append_kv(line, "userid", m.userid);
    append_kv(line, "username", m.username);
    append_kv(line, "text", m.text);
    append_kv(line, "time", format_seconds_ms(m.time_ms));
    std::string atts;
    for (const auto& a : m.attachments) {
        if (!atts.empty()) atts += ',';
        atts += to_string(a.kind);
        atts += ':';
        atts += a.uri_or_data;
    }
    append_kv(line, "attachments", atts);
    for (const auto& [k, v] : m.optional_fields)
        append_kv(line, "optional." + k, v);
    return line;
}

Message parse_message(std::string_view line) {
    Message m;
    bool saw_userid = false, saw_username = false, saw_text = false, saw_time = false,
         saw_atts = false;
    std::size_t pos = 0;
    while (pos <= line.size()) {
        auto tab = line.find('\t', pos);
        std::string_view field = line.substr(pos, tab == std::string_view::npos
                                                      ? std::string_view::npos
                                                      : tab - pos);
        pos = tab == std::string_view::npos ? line.size() + 1 : tab + 1;
        if (field.empty()) continue;
        auto eq = field.find('=');
        if (eq == std::string_view::npos)
            throw Error("message record field without '=': '" + std::string(field) + "'");
        std::string_view key = field.substr(0, eq);
        std::string value = unescape_field(field.substr(eq + 1));
        if (key == "id.platform") {
            m.id.platform = std::move(value);
        } else if (key == "id.channel") {
            m.id.channel_id = std::move(value);
        } else if (key == "id.native") {
            m.id.native_id = std::move(value);
        } else if (key == "id.thread") {
            m.id.thread_id = std::move(value);
        } else if (key == "userid") {
            m.userid = std::move(value);
            saw_userid = true;
        } else if (key == "username") {
            m.username = std::move(value);
            saw_username = true;
        } else if (key == "text") {
            m.text = std::move(value);
            saw_text = true;
        } else if (key == "time") {
            m.time_ms = parse_seconds_ms(value, "time");
            saw_time = true;
        } else if (key == "attachments") {
            saw_atts = true;
            std::string_view v = value;
            while (!v.empty()) {
                auto comma = v.find(',');
                std::string_view item = v.substr(0, comma);
                v = comma == std::string_view::npos ? std::string_view{}
                                                    : v.substr(comma + 1);
                auto colon = item.find(':');
                if (colon == std::string_view::npos)
                    throw Error("attachment without kind: '" + std::string(item) + "'");
                auto kind = attachment_kind_from(item.substr(0, colon));
                if (!kind)
                    throw Error("unknown attachment kind: '" +
                                std::string(item.substr(0, colon)) + "'");
                m.attachments.push_back(
                    Attachment{*kind, std::string(item.substr(colon + 1))});
            }
        } else if (key.substr(0, 9) == "optional.") {
            m.optional_fields[std::string(key.substr(9))] = std::move(value);
        } else {
            throw Error("unknown message record key: '" + std::string(key) + "'");
        }
    }
    if (!(saw_userid && saw_username && saw_text && saw_time && saw_atts))
        throw Error("message record missing mandatory fields");
    return m;
}

} // namespace dsnbench
