#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dsnbench {

enum class AttachmentKind { link, image, video, blob };

std::string_view to_string(AttachmentKind k);
std::optional<AttachmentKind> attachment_kind_from(std::string_view s);

struct Attachment {
    AttachmentKind kind = AttachmentKind::link;
    std::string uri_or_data;

    friend bool operator==(const Attachment&, const Attachment&) = default;
};

/// Identifies one message across heterogeneous channels. The
/// (platform, channel_id, native_id) triple is the cross-platform key;
/// thread_id, when present, is the native id of the reply-thread root.
struct MessageID {
    std::string platform;
    std::string channel_id;
    std::string native_id;
    std::optional<std::string> thread_id;

    friend bool operator==(const MessageID&, const MessageID&) = default;
};

/// Compact "platform:channel:native" form used in log fields.
std::string messageid_to_uri(const MessageID& id);
std::optional<MessageID> messageid_from_uri(std::string_view uri);

enum class ReplyStyle { TSR, FBSR };
enum class ForwardStyle { URT, ORT, none };

/// How a channel realizes reply/forward. The toolkit's channels all use the
/// (FBSR, URT) combination.
struct WriteModel {
    ReplyStyle reply_style = ReplyStyle::FBSR;
    ForwardStyle forward_style = ForwardStyle::URT;
};

/// The common message object. The five mandatory fields (userid, username,
/// text, time, attachments) are always present; time is kept at millisecond
/// resolution. Immutable by convention once handed to a channel.
struct Message {
    MessageID id;
    std::string userid;
    std::string username;
    std::string text;
    std::int64_t time_ms = 0;
    std::vector<Attachment> attachments;
    std::map<std::string, std::string> optional_fields;
    std::string raw;

    double time_seconds() const { return static_cast<double>(time_ms) / 1000.0; }

    friend bool operator==(const Message&, const Message&) = default;
};

std::int64_t ms_from_seconds(double seconds);

/// Decimal seconds with exactly three fractional digits ("100.000").
std::string format_seconds_ms(std::int64_t time_ms);

/// Builds a Message with empty platform/channel and a fresh process-local
/// native id; channels replace the id with their own scheme when posting.
/// Rejects empty userid/username and negative time.
Message make_message(std::string_view userid, std::string_view username,
                     std::string_view text, double time_seconds,
                     std::vector<Attachment> attachments = {});

/// "{comment} RT @{username} {text}", comment and its trailing space omitted
/// when absent. The user-invented-retweet convention all forwards use.
std::string compose_forward_text(std::string_view orig_username,
                                 std::string_view orig_text,
                                 const std::optional<std::string>& comment = std::nullopt);

struct ForwardParts {
    std::string comment;
    std::string orig_username;
    std::string orig_text;

    friend bool operator==(const ForwardParts&, const ForwardParts&) = default;
};

/// Inverse of compose_forward_text. Splits at the first " RT @" (or a
/// leading "RT @"); the quoted username ends at the first whitespace.
/// Returns nullopt when no marker is present.
std::optional<ForwardParts> parse_forward_text(std::string_view text);

/// Dedup identity over (userid, text, time). Platform, raw blob and optional
/// fields do not participate, so the same logical message reached over two
/// channels collapses to one digest.
std::uint64_t message_digest64(const Message& m);
std::string message_digest(const Message& m);

/// Canonical one-line key/value record. Values backslash-escape newline, tab
/// and backslash. Round-trips all mandatory and optional fields bit-exactly.
std::string serialize_message(const Message& m);
Message parse_message(std::string_view line);

/// Escaping used by the flat record formats (message lines, trace files).
std::string escape_field(std::string_view v);
std::string unescape_field(std::string_view v);

} // namespace dsnbench
