#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "dsnbench/channel.hpp"

namespace dsnbench {

struct TopologyUser {
    std::string uid;
    std::string uname;
};

struct FolloweeRef {
    std::string uid;
    LinkKind kind = LinkKind::pull;
};

/// Follower/followee graph; an edge u -> v means u reads v. No self-loops,
/// every adjacency target must be a declared user.
struct Topology {
    std::vector<TopologyUser> users;
    std::unordered_map<std::string, std::vector<FolloweeRef>> followees;

    void validate() const;
    bool has_user(const std::string& uid) const;
    const std::vector<FolloweeRef>& followees_of(const std::string& uid) const;

    /// uid -> users who follow uid over a pull link.
    std::unordered_map<std::string, std::vector<std::string>> pull_followers() const;
};

/// One record per line: uid, uname, comma-separated followee uids with an
/// optional ":pull"/":push" suffix (default pull). Tab-separated fields.
Topology parse_topology(std::istream& in);
void write_topology(std::ostream& out, const Topology& topo);
Topology load_topology(const std::string& path);
void save_topology(const std::string& path, const Topology& topo);

/// Random directed graph: out-degrees Poisson-distributed around
/// mean_followees, targets uniform, no self-loops or duplicate edges.
Topology synth_topology(std::size_t n_users, double mean_followees,
                        std::uint64_t seed);

} // namespace dsnbench
