#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dsnbench/message.hpp"

namespace dsnbench {

/// A rendered feed: the owner's newest entries plus the size of the rendered
/// document actually served on the wire.
struct FeedDocument {
    std::string owner_userid;
    std::vector<Message> entries; // time-descending, ties by native_id ascending
    std::size_t byte_size = 0;

    friend bool operator==(const FeedDocument&, const FeedDocument&) = default;
};

/// Renders the newest `limit` messages as the Atom-subset document. Output is
/// a pure function of the input bytes: same messages, same bytes.
std::string feed_render(const std::vector<Message>& messages,
                        std::string_view owner_userid, std::size_t limit);

/// Parses a document produced by feed_render. Unknown elements and attributes
/// are skipped; structural damage raises ParseError with the byte offset.
std::vector<Message> feed_parse(std::string_view bytes);

FeedDocument feed_document(const std::vector<Message>& messages,
                           std::string_view owner_userid, std::size_t limit);

/// RFC3339 UTC with millisecond precision: "2013-08-01T00:00:00.000Z".
std::string rfc3339_utc_ms(std::int64_t time_ms);
std::int64_t parse_rfc3339_ms(std::string_view s);

std::string xml_escape(std::string_view text);

/// Stable feed order: newest first, ties broken by native_id ascending.
bool feed_order_before(const Message& a, const Message& b);

} // namespace dsnbench
