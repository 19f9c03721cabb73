#include <doctest.h>

#include <fstream>
#include <set>

#include "dsnbench/channel.hpp"
#include "dsnbench/error.hpp"
#include "dsnbench/feed_wire.hpp"
#include "test_util.hpp"

using namespace dsnbench;
using testutil::TempDir;

namespace {

ChannelConfig feed_config(const TempDir& dir, const std::string& uid,
                          std::vector<Subscription> subs = {},
                          std::size_t limit = 100) {
    ChannelConfig cfg;
    cfg.channel_id = uid;
    cfg.platform = ChannelKind::feed_pull;
    cfg.self_userid = uid;
    cfg.self_username = "name_" + uid;
    cfg.endpoint = dir.file(uid + ".atom");
    cfg.subscriptions = std::move(subs);
    cfg.feed_entry_limit = limit;
    return cfg;
}

} // namespace

TEST_CASE("rfc3339 round trip") {
    CHECK(rfc3339_utc_ms(1375315200000) == "2013-08-01T00:00:00.000Z");
    CHECK(parse_rfc3339_ms("2013-08-01T00:00:00.000Z") == 1375315200000);
    Rng rng(5);
    for (int i = 0; i < 500; ++i) {
        const std::int64_t ms = static_cast<std::int64_t>(rng.below(4'000'000'000'000ull));
        CHECK(parse_rfc3339_ms(rfc3339_utc_ms(ms)) == ms);
    }
    CHECK_THROWS_AS(parse_rfc3339_ms("2013-08-01 00:00:00Z"), Error);
}

TEST_CASE("feed_render is deterministic and truncates") {
    std::vector<Message> msgs;
    for (int i = 0; i < 5; ++i) {
        Message m = make_message("u1", "alice", "msg " + std::to_string(i), 100 + i, {});
        m.id = {"feed", "u1", "m" + std::to_string(i), std::nullopt};
        msgs.push_back(m);
    }
    const std::string a = feed_render(msgs, "u1", 3);
    const std::string b = feed_render(msgs, "u1", 3);
    CHECK(a == b);
    auto entries = feed_parse(a);
    REQUIRE(entries.size() == 3);
    CHECK(entries[0].id.native_id == "m4"); // newest first
    CHECK(entries[2].id.native_id == "m2");
}

TEST_CASE("empty feed renders fixed header bytes") {
    const std::string bytes = feed_render({}, "owner", 10);
    CHECK(bytes ==
          "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n"
          "<feed xmlns=\"http://www.w3.org/2005/Atom\">\n"
          "<title>owner</title>\n"
          "</feed>\n");
    CHECK(feed_parse(bytes).empty());
}

TEST_CASE("feed round-trips random messages preserving order") {
    Rng rng(99);
    for (int iter = 0; iter < 1000; ++iter) {
        std::vector<Message> msgs;
        const std::size_t n = rng.below(6);
        for (std::size_t i = 0; i < n; ++i) {
            Message m = testutil::random_message(rng);
            m.id.native_id = "m" + std::to_string(i); // unique within the feed
            msgs.push_back(m);
        }
        auto parsed = feed_parse(feed_render(msgs, "owner", 50));
        std::stable_sort(msgs.begin(), msgs.end(), feed_order_before);
        REQUIRE(parsed.size() == msgs.size());
        for (std::size_t i = 0; i < msgs.size(); ++i) {
            CHECK(parsed[i].id.platform == msgs[i].id.platform);
            CHECK(parsed[i].id.channel_id == msgs[i].id.channel_id);
            CHECK(parsed[i].id.native_id == msgs[i].id.native_id);
            CHECK(parsed[i].userid == msgs[i].userid);
            CHECK(parsed[i].username == msgs[i].username);
            CHECK(parsed[i].text == msgs[i].text);
            CHECK(parsed[i].time_ms == msgs[i].time_ms);
            CHECK(parsed[i].attachments == msgs[i].attachments);
        }
    }
}

TEST_CASE("feed_parse reports byte offsets on damage") {
    Message m = make_message("u1", "alice", "hello", 5, {});
    m.id = {"feed", "u1", "m1", std::nullopt};
    const std::string good = feed_render({m}, "u1", 10);
    const std::string truncated = good.substr(0, good.size() / 2);
    CHECK_THROWS_AS(feed_parse(truncated), ParseError);
    try {
        feed_parse(truncated);
    } catch (const ParseError& e) {
        CHECK(e.byte_offset() <= truncated.size());
        CHECK(e.byte_offset() > 0);
    }
    CHECK_THROWS_AS(feed_parse("<?xml version=\"1.0\"?><notafeed/>"), ParseError);
}

TEST_CASE("feed_parse skips unknown elements") {
    Message m = make_message("u1", "alice", "hello", 5, {});
    m.id = {"feed", "u1", "m1", std::nullopt};
    std::string bytes = feed_render({m}, "u1", 10);
    const std::string extra =
        "<updated>2013-08-01T00:00:00Z</updated><x:custom a=\"1\"><inner/>text</x:custom>\n";
    const auto pos = bytes.find("</entry>");
    REQUIRE(pos != std::string::npos);
    bytes.insert(pos, extra);
    auto entries = feed_parse(bytes);
    REQUIRE(entries.size() == 1);
    CHECK(entries[0].text == "hello");
    CHECK(entries[0].userid == "u1");
}

TEST_CASE("channel_open validates") {
    TempDir dir("chopen");
    CHECK_NOTHROW(Channel::open(feed_config(dir, "u1")));

    ChannelConfig bad = feed_config(dir, "u2");
    bad.subscriptions.push_back({"u9", "notascheme://x", LinkKind::pull});
    CHECK_THROWS_AS(Channel::open(bad), Error);

    ChannelConfig ws = feed_config(dir, "u3");
    ws.self_username = "has space";
    CHECK_THROWS_AS(Channel::open(ws), Error);

    ChannelConfig zero = feed_config(dir, "u4");
    zero.feed_entry_limit = 0;
    CHECK_THROWS_AS(Channel::open(zero), Error);

    Pocket pocket;
    pocket.add(Channel::open(feed_config(dir, "p1")));
    CHECK_THROWS_AS(pocket.add(Channel::open(feed_config(dir, "p1"))), Error);
}

TEST_CASE("a closed channel rejects reads and writes") {
    TempDir dir("closed");
    Channel ch = Channel::open(feed_config(dir, "u1"));
    ch.update("before", 1);
    ch.close();
    CHECK_FALSE(ch.is_open());
    CHECK_THROWS_AS(ch.update("after", 2), Error);
    CHECK_THROWS_AS(ch.home_timeline(5, 2), Error);
    CHECK_THROWS_AS(ch.forward(make_message("x", "y", "z", 1), std::nullopt, 2), Error);
}

TEST_CASE("update renders the owned feed and evicts") {
    TempDir dir("update");
    Channel ch = Channel::open(feed_config(dir, "u1", {}, 2));
    ch.update("first", 10);
    CHECK(ch.own_feed().entries.size() == 1);
    ch.update("second", 20);
    ch.update("third", 30);
    auto feed = ch.own_feed();
    REQUIRE(feed.entries.size() == 2);
    CHECK(feed.entries[0].text == "third");
    CHECK(feed.entries[1].text == "second");
    CHECK(feed.byte_size > 0);
}

TEST_CASE("push update delivers to every push subscriber") {
    TempDir dir("push");
    ChannelConfig cfg;
    cfg.channel_id = "author";
    cfg.platform = ChannelKind::inbox_push;
    cfg.self_userid = "author";
    cfg.self_username = "author";
    cfg.endpoint = dir.file("author.inbox");
    for (int i = 1; i <= 3; ++i)
        cfg.subscriptions.push_back(
            {"f" + std::to_string(i), dir.file("f" + std::to_string(i) + ".inbox"),
             LinkKind::push});
    Channel ch = Channel::open(cfg);
    ch.update("hello", 42);
    for (int i = 1; i <= 3; ++i) {
        std::ifstream in(dir.file("f" + std::to_string(i) + ".inbox"));
        std::string line;
        REQUIRE(std::getline(in, line));
        Message m = parse_message(line);
        CHECK(m.text == "hello");
        CHECK(m.userid == "author");
        CHECK_FALSE(std::getline(in, line));
    }
}

TEST_CASE("home_timeline merges, truncates, and degrades") {
    TempDir dir("timeline");
    Channel a = Channel::open(feed_config(dir, "a"));
    Channel b = Channel::open(feed_config(dir, "b"));
    for (int i = 0; i < 3; ++i) a.update("a" + std::to_string(i), 10 + i);
    for (int i = 0; i < 2; ++i) b.update("b" + std::to_string(i), 100 + i);

    Channel reader = Channel::open(feed_config(
        dir, "r",
        {{"a", dir.file("a.atom"), LinkKind::pull},
         {"b", dir.file("b.atom"), LinkKind::pull}}));
    Timeline tl = reader.home_timeline(10, 200);
    REQUIRE(tl.messages.size() == 5);
    CHECK(tl.messages[0].text == "b1"); // newest across both feeds
    for (std::size_t i = 1; i < tl.messages.size(); ++i)
        CHECK(tl.messages[i - 1].time_ms >= tl.messages[i].time_ms);

    Timeline one = reader.home_timeline(1, 200);
    REQUIRE(one.messages.size() == 1);
    CHECK(one.messages[0].text == "b1");

    Channel degraded = Channel::open(feed_config(
        dir, "r2",
        {{"a", dir.file("a.atom"), LinkKind::pull},
         {"gone", dir.file("missing.atom"), LinkKind::pull}}));
    Timeline partial = degraded.home_timeline(10, 200);
    CHECK(partial.messages.size() == 3);
    REQUIRE(degraded.last_failures().size() == 1);
    CHECK(degraded.last_failures()[0].userid == "gone");
    CHECK(degraded.counters().queries_issued == 2);
    CHECK(degraded.counters().fetch_failures == 1);
}

TEST_CASE("read-your-write over a pull link") {
    TempDir dir("ryw");
    Channel author = Channel::open(feed_config(dir, "w"));
    Message posted = author.update("fresh news", 50);
    Channel follower = Channel::open(
        feed_config(dir, "f", {{"w", dir.file("w.atom"), LinkKind::pull}}));
    Timeline tl = follower.home_timeline(10, 60);
    REQUIRE(tl.messages.size() == 1);
    CHECK(message_digest(tl.messages[0]) == message_digest(posted));
}

TEST_CASE("reply threads FBSR style and stays out of the own feed") {
    TempDir dir("reply");
    Channel author = Channel::open(feed_config(dir, "a"));
    Message root = author.update("root post", 10);

    Channel replier = Channel::open(feed_config(dir, "r"));
    replier.update("own status", 11);
    const auto feed_before = replier.own_feed();

    Message reply1 = replier.reply(root.id, "nice post", 20);
    REQUIRE(reply1.id.thread_id.has_value());
    CHECK(*reply1.id.thread_id == root.id.native_id);

    // replying to a reply threads on the same root
    Message reply2 = replier.reply(reply1.id, "thanks", 30);
    REQUIRE(reply2.id.thread_id.has_value());
    CHECK(*reply2.id.thread_id == root.id.native_id);

    CHECK(replier.own_feed().entries == feed_before.entries);
    auto thread = replier.read_thread(root.id.native_id);
    REQUIRE(thread.size() == 2);
    CHECK(thread[0].text == "thanks"); // newest first
    CHECK(thread[1].text == "nice post");

    CHECK_THROWS_AS(replier.reply(MessageID{}, "x", 40), Error);
}

TEST_CASE("push reply lands in the author inbox") {
    TempDir dir("pushreply");
    ChannelConfig cfg;
    cfg.channel_id = "replier";
    cfg.platform = ChannelKind::inbox_push;
    cfg.self_userid = "replier";
    cfg.self_username = "replier";
    cfg.endpoint = dir.file("replier.inbox");
    cfg.subscriptions.push_back({"author", dir.file("author.inbox"), LinkKind::push});
    Channel ch = Channel::open(cfg);

    MessageID target{"inbox", "author", "m7", std::nullopt};
    Message reply = ch.reply(target, "hi there", 5);
    CHECK(*reply.id.thread_id == "m7");
    std::ifstream in(dir.file("author.inbox"));
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(parse_message(line).text == "hi there");

    MessageID unknown{"inbox", "stranger", "m9", std::nullopt};
    CHECK_THROWS_AS(ch.reply(unknown, "x", 6), Error);
}

TEST_CASE("forward composes URT text and lands in the own feed") {
    TempDir dir("forward");
    Channel alice = Channel::open(feed_config(dir, "alice"));
    Message orig = alice.update("hello", 10);
    // the author's display name is its username
    orig.username = "alice";

    Channel bob = Channel::open(feed_config(dir, "bob"));
    Message fwd = bob.forward(orig, std::nullopt, 20);
    CHECK(fwd.text == "RT @alice hello");
    CHECK(fwd.optional_fields.at("forward_of") == messageid_to_uri(orig.id));
    auto feed = bob.own_feed();
    REQUIRE(feed.entries.size() == 1);
    CHECK(feed.entries[0].text == "RT @alice hello");

    Channel carol = Channel::open(feed_config(dir, "carol"));
    fwd.username = "bob";
    Message fwd2 = carol.forward(fwd, std::nullopt, 30);
    CHECK(fwd2.text == "RT @bob RT @alice hello");
}

TEST_CASE("pocket merges and dedups by digest") {
    TempDir dir("pocket");
    Channel a = Channel::open(feed_config(dir, "a"));
    a.update("shared", 10);
    a.update("only-a", 20);
    Channel b = Channel::open(feed_config(dir, "b"));
    b.update("only-b", 30);

    Pocket pocket;
    // two reader channels that both subscribe to feed a: the shared message
    // must appear once
    pocket.add(Channel::open(
        feed_config(dir, "r1", {{"a", dir.file("a.atom"), LinkKind::pull}})));
    pocket.add(Channel::open(feed_config(
        dir, "r2",
        {{"a", dir.file("a.atom"), LinkKind::pull},
         {"b", dir.file("b.atom"), LinkKind::pull}})));
    Timeline tl = pocket.pocket_timeline(10, 100);
    REQUIRE(tl.messages.size() == 3);
    std::multiset<std::string> texts;
    for (const auto& m : tl.messages) texts.insert(m.text);
    CHECK(texts == std::multiset<std::string>{"only-a", "only-b", "shared"});

    Pocket empty;
    CHECK(empty.pocket_timeline(10, 0).messages.empty());
}

TEST_CASE("pull and push deliver the same message sets") {
    TempDir dir("equiv");
    Rng rng(31337);
    for (int iter = 0; iter < 100; ++iter) {
        const std::string tag = std::to_string(iter);
        const int n_updates = 1 + static_cast<int>(rng.below(12));
        const std::size_t limit = 1 + rng.below(150);
        const int n_followers = 1 + static_cast<int>(rng.below(3));

        ChannelConfig pull_author = feed_config(dir, "pa" + tag, {}, limit);
        Channel pa = Channel::open(pull_author);
        std::vector<Channel> pull_followers;
        for (int f = 0; f < n_followers; ++f)
            pull_followers.push_back(Channel::open(feed_config(
                dir, "pf" + tag + "_" + std::to_string(f),
                {{"pa" + tag, dir.file("pa" + tag + ".atom"), LinkKind::pull}},
                limit)));

        ChannelConfig push_author;
        push_author.channel_id = "qa" + tag;
        push_author.platform = ChannelKind::inbox_push;
        push_author.self_userid = "pa" + tag; // same logical author identity
        push_author.self_username = "name_pa" + tag;
        push_author.endpoint = dir.file("qa" + tag + ".inbox");
        std::vector<Channel> push_followers;
        for (int f = 0; f < n_followers; ++f) {
            const std::string uid = "qf" + tag + "_" + std::to_string(f);
            push_author.subscriptions.push_back(
                {uid, dir.file(uid + ".inbox"), LinkKind::push});
            ChannelConfig fcfg;
            fcfg.channel_id = uid;
            fcfg.platform = ChannelKind::inbox_push;
            fcfg.self_userid = uid;
            fcfg.self_username = uid;
            fcfg.endpoint = dir.file(uid + ".inbox");
            push_followers.push_back(Channel::open(fcfg));
        }
        Channel qa = Channel::open(push_author);

        std::vector<std::set<std::string>> pull_seen(n_followers),
            push_seen(n_followers);
        double now = 1000.0 * (iter + 1);
        for (int u = 0; u < n_updates; ++u) {
            now += 1.0 + static_cast<double>(rng.below(50));
            const std::string text = "t" + tag + " " + testutil::random_text(rng, 20);
            pa.update(text, now);
            qa.update(text, now);
            // every follower polls after every update
            for (int f = 0; f < n_followers; ++f) {
                for (const auto& m :
                     pull_followers[f].home_timeline(1000, now).messages)
                    pull_seen[f].insert(message_digest(m));
                for (const auto& m :
                     push_followers[f].home_timeline(1000, now).messages)
                    push_seen[f].insert(message_digest(m));
            }
        }
        for (int f = 0; f < n_followers; ++f) CHECK(pull_seen[f] == push_seen[f]);
    }
}
