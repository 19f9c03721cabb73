#include <doctest.h>

#include "dsnbench/error.hpp"
#include "dsnbench/message.hpp"
#include "test_util.hpp"

using namespace dsnbench;

TEST_CASE("make_message passes fields through") {
    Message m = make_message("u1", "alice", "hi", 100, {});
    CHECK(m.userid == "u1");
    CHECK(m.username == "alice");
    CHECK(m.text == "hi");
    CHECK(m.time_ms == 100000);
    CHECK(m.attachments.empty());
    CHECK(m.optional_fields.empty());
    CHECK(m.raw.empty());
    CHECK_FALSE(m.id.native_id.empty());
}

TEST_CASE("make_message rejects bad input") {
    CHECK_THROWS_AS(make_message("u1", "alice", "hi", -5, {}), Error);
    CHECK_THROWS_AS(make_message("", "alice", "hi", 1, {}), Error);
    CHECK_THROWS_AS(make_message("u1", "", "hi", 1, {}), Error);
}

TEST_CASE("make_message carries attachments") {
    Message m = make_message("u2", "bob", "x", 0,
                             {{AttachmentKind::link, "http://a/b"}});
    REQUIRE(m.attachments.size() == 1);
    CHECK(m.attachments[0].kind == AttachmentKind::link);
    CHECK(m.attachments[0].uri_or_data == "http://a/b");
    CHECK(m.time_ms == 0);
}

TEST_CASE("compose_forward_text") {
    CHECK(compose_forward_text("alice", "hello") == "RT @alice hello");
    CHECK(compose_forward_text("alice", "hello", "nice") == "nice RT @alice hello");
    CHECK(compose_forward_text("a", "") == "RT @a ");
}

TEST_CASE("parse_forward_text") {
    auto p = parse_forward_text("RT @alice hello");
    REQUIRE(p.has_value());
    CHECK(*p == ForwardParts{"", "alice", "hello"});

    p = parse_forward_text("nice RT @alice hello");
    REQUIRE(p.has_value());
    CHECK(*p == ForwardParts{"nice", "alice", "hello"});

    CHECK_FALSE(parse_forward_text("no marker here").has_value());
    CHECK_FALSE(parse_forward_text("RT @").has_value()); // empty username

    // nested forwards: the first marker wins, the rest stays in the text
    p = parse_forward_text("RT @b go RT @a hello");
    REQUIRE(p.has_value());
    CHECK(*p == ForwardParts{"", "b", "go RT @a hello"});
}

TEST_CASE("forward text round-trips") {
    Rng rng(2024);
    for (int i = 0; i < 1000; ++i) {
        const std::string user = testutil::random_word(rng, 10);
        const std::string text = testutil::random_text(rng, 40);
        std::optional<std::string> comment;
        if (rng.below(2)) {
            std::string c;
            do {
                c = testutil::random_text(rng, 20);
            } while (c.find("RT @") != std::string::npos);
            comment = c;
        }
        auto parts = parse_forward_text(compose_forward_text(user, text, comment));
        REQUIRE(parts.has_value());
        CHECK(parts->orig_username == user);
        CHECK(parts->orig_text == text);
        CHECK(parts->comment == (comment ? *comment : ""));
    }
}

TEST_CASE("message_digest ignores raw and platform") {
    Message a = make_message("u1", "alice", "hi", 100, {});
    Message b = a;
    b.raw = "completely different raw payload";
    b.id.platform = "other";
    b.optional_fields["like_count"] = "5";
    CHECK(message_digest(a) == message_digest(b));

    Message c = a;
    c.text = "hi!";
    CHECK(message_digest(a) != message_digest(c));
}

TEST_CASE("message_digest is pure") {
    Message m = make_message("u1", "alice", "some text", 123.456, {});
    const std::string first = message_digest(m);
    for (int i = 0; i < 1000; ++i) CHECK(message_digest(m) == first);
}

TEST_CASE("serialization round-trips random messages") {
    Rng rng(77);
    for (int i = 0; i < 1000; ++i) {
        Message m = testutil::random_message(rng);
        Message back = parse_message(serialize_message(m));
        CHECK(back.id == m.id);
        CHECK(back.userid == m.userid);
        CHECK(back.username == m.username);
        CHECK(back.text == m.text);
        CHECK(back.time_ms == m.time_ms);
        CHECK(back.attachments == m.attachments);
        CHECK(back.optional_fields == m.optional_fields);
    }
}

TEST_CASE("serialization escapes separators") {
    Message m = make_message("u1", "alice", "line1\nline2\tcol\\slash", 3.5, {});
    const std::string line = serialize_message(m);
    CHECK(line.find('\n') == std::string::npos);
    Message back = parse_message(line);
    CHECK(back.text == m.text);
    CHECK(back.time_ms == 3500);
}

TEST_CASE("parse_message rejects incomplete records") {
    CHECK_THROWS_AS(parse_message("userid=u1\ttext=x"), Error);
    CHECK_THROWS_AS(parse_message("garbage without equals"), Error);
}

TEST_CASE("messageid uri form") {
    MessageID id{"feed", "u1", "m42", std::nullopt};
    auto back = messageid_from_uri(messageid_to_uri(id));
    REQUIRE(back.has_value());
    CHECK(back->platform == "feed");
    CHECK(back->channel_id == "u1");
    CHECK(back->native_id == "m42");
    CHECK_FALSE(messageid_from_uri("nocolons").has_value());
}
