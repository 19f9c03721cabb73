#include "dsnbench/topology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "dsnbench/error.hpp"
#include "dsnbench/rng.hpp"

namespace dsnbench {

void Topology::validate() const {
    std::unordered_set<std::string> known;
    known.reserve(users.size());
    for (const auto& u : users) {
        if (u.uid.empty()) throw Error("topology: empty uid");
        if (!known.insert(u.uid).second)
            throw Error("topology: duplicate uid '" + u.uid + "'");
    }
    for (const auto& [uid, refs] : followees) {
        if (!known.count(uid))
            throw Error("topology: adjacency for unknown uid '" + uid + "'");
        for (const auto& ref : refs) {
            if (ref.uid == uid) throw Error("topology: self-loop at '" + uid + "'");
            if (!known.count(ref.uid))
                throw Error("topology: '" + uid + "' follows unknown uid '" + ref.uid +
                            "'");
        }
    }
}

bool Topology::has_user(const std::string& uid) const {
    for (const auto& u : users)
        if (u.uid == uid) return true;
    return false;
}

const std::vector<FolloweeRef>& Topology::followees_of(const std::string& uid) const {
    static const std::vector<FolloweeRef> kEmpty;
    auto it = followees.find(uid);
    return it == followees.end() ? kEmpty : it->second;
}

std::unordered_map<std::string, std::vector<std::string>> Topology::pull_followers()
    const {
    std::unordered_map<std::string, std::vector<std::string>> inverse;
    for (const auto& u : users) {
        auto it = followees.find(u.uid);
        if (it == followees.end()) continue;
        for (const auto& ref : it->second)
            if (ref.kind == LinkKind::pull) inverse[ref.uid].push_back(u.uid);
    }
    // deterministic follower order regardless of map iteration
    for (auto& [uid, list] : inverse) std::sort(list.begin(), list.end());
    return inverse;
}

Topology parse_topology(std::istream& in) {
    Topology topo;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            auto tab = line.find('\t', pos);
            fields.push_back(line.substr(
                pos, tab == std::string::npos ? std::string::npos : tab - pos));
            if (tab == std::string::npos) break;
            pos = tab + 1;
        }
        if (fields.size() < 2)
            throw Error("topology line " + std::to_string(lineno) +
                        ": need uid and uname");
        TopologyUser user{fields[0], fields[1]};
        std::vector<FolloweeRef> refs;
        if (fields.size() >= 3 && !fields[2].empty()) {
            std::string_view rest = fields[2];
            while (!rest.empty()) {
                auto comma = rest.find(',');
                std::string_view item = rest.substr(0, comma);
                rest = comma == std::string_view::npos ? std::string_view{}
                                                       : rest.substr(comma + 1);
                if (item.empty()) continue;
                FolloweeRef ref;
                auto colon = item.rfind(':');
                if (colon != std::string_view::npos) {
                    std::string_view kind = item.substr(colon + 1);
                    if (kind == "pull") {
                        ref.kind = LinkKind::pull;
                    } else if (kind == "push") {
                        ref.kind = LinkKind::push;
                    } else {
                        throw Error("topology line " + std::to_string(lineno) +
                                    ": unknown link kind '" + std::string(kind) + "'");
                    }
                    item = item.substr(0, colon);
                }
                ref.uid = std::string(item);
                refs.push_back(std::move(ref));
            }
        }
        topo.users.push_back(std::move(user));
        if (!refs.empty()) topo.followees[topo.users.back().uid] = std::move(refs);
    }
    topo.validate();
    return topo;
}

void write_topology(std::ostream& out, const Topology& topo) {
    for (const auto& u : topo.users) {
        out << u.uid << '\t' << u.uname << '\t';
        auto it = topo.followees.find(u.uid);
        if (it != topo.followees.end()) {
            bool first = true;
            for (const auto& ref : it->second) {
                if (!first) out << ',';
                first = false;
                out << ref.uid;
                if (ref.kind == LinkKind::push) out << ":push";
            }
        }
        out << '\n';
    }
}

Topology load_topology(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open topology file '" + path + "'");
    return parse_topology(in);
}

void save_topology(const std::string& path, const Topology& topo) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write topology file '" + path + "'");
    write_topology(out, topo);
}

namespace {

/// Knuth's product method; fine for the modest means used here.
std::size_t poisson_draw(Rng& rng, double mean) {
    const double limit = std::exp(-mean);
    std::size_t k = 0;
    double p = 1.0;
    do {
        ++k;
        p *= rng.uniform01();
    } while (p > limit);
    return k - 1;
}

std::string uid_name(std::size_t i) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "u%06zu", i);
    return buf;
}

} // namespace

Topology synth_topology(std::size_t n_users, double mean_followees,
                        std::uint64_t seed) {
    if (n_users < 2) throw Error("synth_topology: need at least 2 users");
    if (!(mean_followees >= 0))
        throw Error("synth_topology: mean_followees must be >= 0");
    Topology topo;
    topo.users.reserve(n_users);
    for (std::size_t i = 0; i < n_users; ++i)
        topo.users.push_back({uid_name(i + 1), "user" + std::to_string(i + 1)});

    Rng rng(substream(seed, "topology"));
    for (std::size_t i = 0; i < n_users; ++i) {
        std::size_t degree =
            std::min(poisson_draw(rng, mean_followees), n_users - 1);
        if (degree == 0) continue;
        std::unordered_set<std::size_t> picked;
        std::vector<FolloweeRef> refs;
        refs.reserve(degree);
        while (picked.size() < degree) {
            std::size_t target = static_cast<std::size_t>(rng.below(n_users));
            if (target == i || !picked.insert(target).second) continue;
            refs.push_back({topo.users[target].uid, LinkKind::pull});
        }
        topo.followees[topo.users[i].uid] = std::move(refs);
    }
    topo.validate();
    return topo;
}

} // namespace dsnbench
