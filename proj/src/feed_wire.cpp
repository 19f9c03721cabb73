#include "dsnbench/feed_wire.hpp"

#include <algorithm>
#include <cstdio>

#include "dsnbench/error.hpp"

namespace dsnbench {

namespace {

// civil <-> days since 1970-01-01 (Gregorian, proleptic)
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y += m <= 2;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

} // namespace

std::string rfc3339_utc_ms(std::int64_t time_ms) {
    std::int64_t days = floor_div(time_ms, 86400000);
    std::int64_t rem = time_ms - days * 86400000;
    std::int64_t y;
    unsigned mo, d;
    civil_from_days(days, y, mo, d);
    unsigned h = static_cast<unsigned>(rem / 3600000);
    unsigned mi = static_cast<unsigned>(rem / 60000 % 60);
    unsigned s = static_cast<unsigned>(rem / 1000 % 60);
    unsigned ms = static_cast<unsigned>(rem % 1000);
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02u:%02u:%02u.%03uZ",
                  static_cast<long long>(y), mo, d, h, mi, s, ms);
    return buf;
}

std::int64_t parse_rfc3339_ms(std::string_view s) {
    auto bad = [&] { throw Error("bad RFC3339 timestamp: '" + std::string(s) + "'"); };
    auto digits = [&](std::size_t pos, std::size_t n) -> std::int64_t {
        std::int64_t v = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (pos + i >= s.size() || s[pos + i] < '0' || s[pos + i] > '9') bad();
            v = v * 10 + (s[pos + i] - '0');
        }
        return v;
    };
    if (s.size() < 20) bad();
    std::int64_t y = digits(0, 4);
    if (s[4] != '-') bad();
    std::int64_t mo = digits(5, 2);
    if (s[7] != '-') bad();
    std::int64_t d = digits(8, 2);
    if (s[10] != 'T' && s[10] != 't') bad();
    std::int64_t h = digits(11, 2);
    if (s[13] != ':') bad();
    std::int64_t mi = digits(14, 2);
    if (s[16] != ':') bad();
    std::int64_t sec = digits(17, 2);
    std::size_t pos = 19;
    std::int64_t ms = 0;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        std::size_t start = pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
        if (pos == start) bad();
        for (std::size_t i = 0; i < 3; ++i)
            ms = ms * 10 + (start + i < pos ? s[start + i] - '0' : 0);
    }
    if (pos >= s.size() || (s[pos] != 'Z' && s[pos] != 'z') || pos + 1 != s.size()) bad();
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || sec > 60) bad();
    return (days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * 86400 +
            h * 3600 + mi * 60 + sec) *
               1000 +
           ms;
}

std::string xml_escape(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

bool feed_order_before(const Message& a, const Message& b) {
    if (a.time_ms != b.time_ms) return a.time_ms > b.time_ms;
    return a.id.native_id < b.id.native_id;
}

std::string feed_render(const std::vector<Message>& messages,
                        std::string_view owner_userid, std::size_t limit) {
    if (limit == 0) throw Error("feed_render: limit must be positive");
    std::vector<const Message*> order;
    order.reserve(messages.size());
    for (const auto& m : messages) order.push_back(&m);
    std::stable_sort(order.begin(), order.end(),
                     [](const Message* a, const Message* b) { return feed_order_before(*a, *b); });
    if (order.size() > limit) order.resize(limit);

    std::string out;
    out.reserve(256 + order.size() * 256);
    out += "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n";
    out += "<feed xmlns=\"http://www.w3.org/2005/Atom\">\n";
    out += "<title>";
    out += xml_escape(owner_userid);
    out += "</title>\n";
    for (const Message* m : order) {
        out += "<entry>\n";
        out += "<id>urn:dsnbench:";
        out += xml_escape(m->id.platform);
        out += ':';
        out += xml_escape(m->id.channel_id);
        out += ':';
        out += xml_escape(m->id.native_id);
        out += "</id>\n";
        out += "<author><name>";
        out += xml_escape(m->username);
        out += "</name><uri>urn:uid:";
        out += xml_escape(m->userid);
        out += "</uri></author>\n";
        out += "<published>";
        out += rfc3339_utc_ms(m->time_ms);
        out += "</published>\n";
        out += "<content type=\"text\">";
        out += xml_escape(m->text);
        out += "</content>\n";
        for (const auto& a : m->attachments) {
            out += "<link rel=\"enclosure\" type=\"";
            out += to_string(a.kind);
            out += "\" href=\"";
            out += xml_escape(a.uri_or_data);
            out += "\"/>\n";
        }
        out += "</entry>\n";
    }
    out += "</feed>\n";
    return out;
}

FeedDocument feed_document(const std::vector<Message>& messages,
                           std::string_view owner_userid, std::size_t limit) {
    FeedDocument doc;
    doc.owner_userid = std::string(owner_userid);
    std::string bytes = feed_render(messages, owner_userid, limit);
    doc.byte_size = bytes.size();
    doc.entries = feed_parse(bytes);
    return doc;
}

namespace {

struct Attr {
    std::string name;
    std::string value;
};

struct Tag {
    std::string name;
    std::vector<Attr> attrs;
    bool closing = false;
    bool self_closing = false;

    const std::string* attr(std::string_view n) const {
        for (const auto& a : attrs)
            if (a.name == n) return &a.value;
        return nullptr;
    }
};

struct Xml {
    std::string_view s;
    std::size_t pos = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError("feed: " + msg, pos);
    }

    bool eof() const { return pos >= s.size(); }
    char peek() const { return pos < s.size() ? s[pos] : '\0'; }

    bool starts(std::string_view lit) const {
        return s.substr(pos, lit.size()) == lit;
    }

    void skip_misc() {
        for (;;) {
            while (!eof() && (s[pos] == ' ' || s[pos] == '\t' || s[pos] == '\n' ||
                              s[pos] == '\r'))
                ++pos;
            if (starts("<!--")) {
                auto end = s.find("-->", pos + 4);
                if (end == std::string_view::npos) fail("unterminated comment");
                pos = end + 3;
                continue;
            }
            if (starts("<?")) {
                auto end = s.find("?>", pos + 2);
                if (end == std::string_view::npos) fail("unterminated processing instruction");
                pos = end + 2;
                continue;
            }
            return;
        }
    }

    static bool name_char(char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
               (c >= '0' && c <= '9') || c == '_' || c == '-' || c == ':' || c == '.';
    }

    std::string read_name() {
        std::size_t start = pos;
        while (!eof() && name_char(s[pos])) ++pos;
        if (pos == start) fail("expected name");
        return std::string(s.substr(start, pos - start));
    }

    std::string decode_entities(std::string_view raw) {
        std::string out;
        out.reserve(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (raw[i] != '&') {
                out += raw[i];
                continue;
            }
            auto semi = raw.find(';', i + 1);
            if (semi == std::string_view::npos || semi - i > 12) {
                out += '&';
                continue;
            }
            std::string_view ent = raw.substr(i + 1, semi - i - 1);
            if (ent == "amp") out += '&';
            else if (ent == "lt") out += '<';
            else if (ent == "gt") out += '>';
            else if (ent == "quot") out += '"';
            else if (ent == "apos") out += '\'';
            else if (!ent.empty() && ent[0] == '#') {
                long code = 0;
                bool ok = true;
                if (ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X')) {
                    for (std::size_t k = 2; k < ent.size(); ++k) {
                        char c = ent[k];
                        int d = c >= '0' && c <= '9'   ? c - '0'
                                : c >= 'a' && c <= 'f' ? c - 'a' + 10
                                : c >= 'A' && c <= 'F' ? c - 'A' + 10
                                                       : -1;
                        if (d < 0) { ok = false; break; }
                        code = code * 16 + d;
                    }
                    ok = ok && ent.size() > 2;
                } else {
                    for (std::size_t k = 1; k < ent.size(); ++k) {
                        if (ent[k] < '0' || ent[k] > '9') { ok = false; break; }
                        code = code * 10 + (ent[k] - '0');
                    }
                    ok = ok && ent.size() > 1;
                }
                if (!ok || code < 0 || code > 0x10ffff) {
                    out += '&';
                    continue;
                }
                // UTF-8 encode
                unsigned cp = static_cast<unsigned>(code);
                if (cp < 0x80) out += static_cast<char>(cp);
                else if (cp < 0x800) {
                    out += static_cast<char>(0xc0 | (cp >> 6));
                    out += static_cast<char>(0x80 | (cp & 0x3f));
                } else if (cp < 0x10000) {
                    out += static_cast<char>(0xe0 | (cp >> 12));
                    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
                    out += static_cast<char>(0x80 | (cp & 0x3f));
                } else {
                    out += static_cast<char>(0xf0 | (cp >> 18));
                    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3f));
                    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
                    out += static_cast<char>(0x80 | (cp & 0x3f));
                }
            } else {
                out += '&';
                continue;
            }
            i = semi;
        }
        return out;
    }

    Tag read_tag() {
        skip_misc();
        if (eof() || s[pos] != '<') fail("expected tag");
        ++pos;
        Tag tag;
        if (peek() == '/') {
            ++pos;
            tag.closing = true;
            tag.name = read_name();
            skip_misc();
            if (peek() != '>') fail("expected '>' after closing tag");
            ++pos;
            return tag;
        }
        tag.name = read_name();
        for (;;) {
            while (!eof() && (s[pos] == ' ' || s[pos] == '\t' || s[pos] == '\n' ||
                              s[pos] == '\r'))
                ++pos;
            if (eof()) fail("unterminated tag");
            if (s[pos] == '>') {
                ++pos;
                return tag;
            }
            if (s[pos] == '/') {
                ++pos;
                if (peek() != '>') fail("expected '/>'");
                ++pos;
                tag.self_closing = true;
                return tag;
            }
            Attr a;
            a.name = read_name();
            skip_misc();
            if (peek() != '=') fail("expected '=' in attribute");
            ++pos;
            skip_misc();
            char quote = peek();
            if (quote != '"' && quote != '\'') fail("expected quoted attribute value");
            ++pos;
            std::size_t start = pos;
            while (!eof() && s[pos] != quote) ++pos;
            if (eof()) fail("unterminated attribute value");
            a.value = decode_entities(s.substr(start, pos - start));
            ++pos;
            tag.attrs.push_back(std::move(a));
        }
    }

    /// Text content up to the next '<'.
    std::string read_text() {
        std::size_t start = pos;
        while (!eof() && s[pos] != '<') ++pos;
        if (eof()) fail("unterminated element content");
        return decode_entities(s.substr(start, pos - start));
    }

    /// Consumes the content and close tag of an already-opened element,
    /// recursing past any children. Used to skip what we do not understand.
    void skip_element(const Tag& open) {
        if (open.self_closing) return;
        for (;;) {
            while (!eof() && s[pos] != '<') ++pos;
            if (eof()) fail("unterminated element '" + open.name + "'");
            if (starts("<![CDATA[")) {
                auto end = s.find("]]>", pos + 9);
                if (end == std::string_view::npos) fail("unterminated CDATA");
                pos = end + 3;
                continue;
            }
            if (starts("<!--")) {
                auto end = s.find("-->", pos + 4);
                if (end == std::string_view::npos) fail("unterminated comment");
                pos = end + 3;
                continue;
            }
            Tag t = read_tag();
            if (t.closing) {
                if (t.name != open.name)
                    fail("mismatched close tag '" + t.name + "' for '" + open.name + "'");
                return;
            }
            skip_element(t);
        }
    }

    /// Reads "text</name>" for a leaf element.
    std::string read_leaf(const Tag& open) {
        if (open.self_closing) return {};
        std::string text = read_text();
        Tag t = read_tag();
        if (!t.closing || t.name != open.name)
            fail("expected close tag for '" + open.name + "'");
        return text;
    }
};

void parse_entry_id(const std::string& text, Message& m) {
    static constexpr std::string_view kPrefix = "urn:dsnbench:";
    if (text.substr(0, kPrefix.size()) == kPrefix) {
        if (auto id = messageid_from_uri(text.substr(kPrefix.size()))) {
            id->thread_id = m.id.thread_id;
            m.id = *id;
            return;
        }
    }
    m.id.native_id = text; // foreign id scheme; keep it identifiable
}

Message parse_entry(Xml& xml, const Tag&) {
    Message m;
    for (;;) {
        xml.skip_misc();
        Tag t = xml.read_tag();
        if (t.closing) {
            if (t.name != "entry") xml.fail("mismatched close tag in entry");
            return m;
        }
        if (t.name == "id") {
            parse_entry_id(xml.read_leaf(t), m);
        } else if (t.name == "author") {
            if (!t.self_closing) {
                for (;;) {
                    xml.skip_misc();
                    Tag c = xml.read_tag();
                    if (c.closing) {
                        if (c.name != "author") xml.fail("mismatched close tag in author");
                        break;
                    }
                    if (c.name == "name") {
                        m.username = xml.read_leaf(c);
                    } else if (c.name == "uri") {
                        std::string uri = xml.read_leaf(c);
                        static constexpr std::string_view kUid = "urn:uid:";
                        m.userid = uri.substr(0, kUid.size()) == kUid
                                       ? uri.substr(kUid.size())
                                       : uri;
                    } else {
                        xml.skip_element(c);
                    }
                }
            }
        } else if (t.name == "published") {
            m.time_ms = parse_rfc3339_ms(xml.read_leaf(t));
        } else if (t.name == "content") {
            m.text = xml.read_leaf(t);
        } else if (t.name == "link") {
            const std::string* rel = t.attr("rel");
            if (rel && *rel == "enclosure") {
                Attachment a;
                if (const std::string* type = t.attr("type"))
                    if (auto kind = attachment_kind_from(*type)) a.kind = *kind;
                if (const std::string* href = t.attr("href")) a.uri_or_data = *href;
                m.attachments.push_back(std::move(a));
            }
            if (!t.self_closing) xml.skip_element(t);
        } else {
            xml.skip_element(t);
        }
    }
}

} // namespace

std::vector<Message> feed_parse(std::string_view bytes) {
    Xml xml{bytes};
    xml.skip_misc();
    Tag feed = xml.read_tag();
    if (feed.closing || feed.name != "feed") xml.fail("expected <feed> root");
    std::vector<Message> out;
    if (feed.self_closing) return out;
    for (;;) {
        xml.skip_misc();
        Tag t = xml.read_tag();
        if (t.closing) {
            if (t.name != "feed") xml.fail("mismatched close tag for feed");
            return out;
        }
        if (t.name == "entry") {
            if (!t.self_closing) out.push_back(parse_entry(xml, t));
        } else {
            xml.skip_element(t);
        }
    }
}

} // namespace dsnbench
