#pragma once

// Ground-truth network defence simulation: topology, red kill chain,
// green user sampling and blue action effects.

#include <acd/common.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace acd::sim {

enum class Subnet : std::uint8_t { User, Enterprise, Operational };
enum class HostKind : std::uint8_t { User, Enterprise, Defender, OpServer, OpHost };
enum class Scenario : std::uint8_t { Cage2Original, Modified9u6e };
enum class RedMode : std::uint8_t { Meander, BLine };

// Ordered: red only climbs, except through Remove/Restore.
enum class RedLevel : std::uint8_t { None, Scanned, UserAccess, Privileged };

// What blue believes after its last Analyse/Remove/Restore on a host.
enum class KnownLevel : std::uint8_t { Unknown, None, UserAccess, Privileged };

struct HostId {
    HostKind kind = HostKind::User;
    std::uint8_t index = 0;

    constexpr Subnet subnet() const {
        switch (kind) {
        case HostKind::User: return Subnet::User;
        case HostKind::Enterprise:
        case HostKind::Defender: return Subnet::Enterprise;
        default: return Subnet::Operational;
        }
    }
    constexpr bool is_foothold() const { return kind == HostKind::User && index == 0; }
    friend constexpr bool operator==(HostId, HostId) = default;
};

inline constexpr HostId kFoothold{HostKind::User, 0};
inline constexpr HostId kOpServer{HostKind::OpServer, 0};

inline std::string host_name(HostId h) {
    switch (h.kind) {
    case HostKind::User: return "User" + std::to_string(h.index);
    case HostKind::Enterprise: return "Enterprise" + std::to_string(h.index);
    case HostKind::Defender: return "Defender";
    case HostKind::OpServer: return "OpServer" + std::to_string(h.index);
    case HostKind::OpHost: return "OpHost" + std::to_string(h.index);
    }
    return "?";
}

inline std::optional<HostId> parse_host(std::string_view name) {
    if (name == "Defender") return HostId{HostKind::Defender, 0};
    auto with_prefix = [&](std::string_view prefix, HostKind kind) -> std::optional<HostId> {
        if (!name.starts_with(prefix) || name.size() == prefix.size()) return std::nullopt;
        int idx = 0;
        for (char c : name.substr(prefix.size())) {
            if (c < '0' || c > '9') return std::nullopt;
            idx = idx * 10 + (c - '0');
            if (idx > 255) return std::nullopt;
        }
        return HostId{kind, static_cast<std::uint8_t>(idx)};
    };
    if (auto h = with_prefix("User", HostKind::User)) return h;
    if (auto h = with_prefix("Enterprise", HostKind::Enterprise)) return h;
    if (auto h = with_prefix("Ent", HostKind::Enterprise)) return h;
    if (auto h = with_prefix("OpServer", HostKind::OpServer)) return h;
    if (auto h = with_prefix("OpHost", HostKind::OpHost)) return h;
    return std::nullopt;
}

inline std::string_view scenario_name(Scenario s) {
    return s == Scenario::Cage2Original ? "Cage2Original" : "Modified9u6e";
}

/// Accepts the enum names plus the CAGE scenario file names they stand for.
inline Scenario parse_scenario(std::string_view name) {
    if (name == "Cage2Original" || name == "Scenario2" || name == "Scenario2.yaml") {
        return Scenario::Cage2Original;
    }
    if (name == "Modified9u6e" || name == "Scenario2-9userhosts-6enthosts" ||
        name == "Scenario2-9userhosts-6enthosts.yaml") {
        return Scenario::Modified9u6e;
    }
    throw ConfigError("unknown scenario '" + std::string(name) + "'");
}

inline RedMode parse_red_mode(std::string_view name) {
    if (name == "meander" || name == "Meander") return RedMode::Meander;
    if (name == "b-line" || name == "bline" || name == "BLine") return RedMode::BLine;
    throw ConfigError("unknown red agent type '" + std::string(name) + "'");
}

struct HostState {
    HostId id;
    RedLevel red = RedLevel::None;
    int ports_open = 0;
    int baseline_ports = 0;
    KnownLevel known_level = KnownLevel::Unknown;
    bool scan_flag = false;
    bool exploit_flag = false;
    bool restored_this_step = false;
};

struct SimConfig {
    Scenario scenario = Scenario::Modified9u6e;
    RedMode red_mode = RedMode::Meander;
    int baseline_ports = 4;
    int max_ports = 12;
    // Empty means the scenario default (all defendable user hosts plus
    // the enterprise servers).
    std::vector<HostId> green_subgroup;
};

struct NetworkState {
    SimConfig config;
    std::vector<HostState> hosts;   // hosts[0] is the foothold, then defendable hosts
    std::vector<bool> red_known;    // parallel to hosts
    int bline_stage = 0;
    int t = 0;
    Rng rng;

    std::size_t index_of(HostId id) const {
        for (std::size_t i = 0; i < hosts.size(); ++i) {
            if (hosts[i].id == id) return i;
        }
        return hosts.size();
    }
    const HostState* find(HostId id) const {
        auto i = index_of(id);
        return i < hosts.size() ? &hosts[i] : nullptr;
    }
    HostState* find(HostId id) {
        auto i = index_of(id);
        return i < hosts.size() ? &hosts[i] : nullptr;
    }
    std::size_t num_defendable() const { return hosts.size() - 1; }
    const HostState& defendable(std::size_t i) const { return hosts[i + 1]; }
};

enum class RedActionType : std::uint8_t { Sleep, Discover, Scan, Exploit, Escalate, Impact };

struct RedOutcome {
    RedActionType action = RedActionType::Sleep;
    HostId target{};          // Scan/Exploit/Escalate
    Subnet subnet{};          // Discover
    bool impact_fired = false;
};

struct GreenOutcome {
    HostId sampled_host{};
    int ports_accessed = 0;
};

enum class BlueActionType : std::uint8_t { Sleep, Analyse, Remove, Restore, StartService };
inline constexpr std::size_t kBlueHostActionTypes = 4;

struct BlueAction {
    BlueActionType type = BlueActionType::Sleep;
    HostId host{};
};

/// Defendable hosts in observation/action order.
inline std::vector<HostId> defendable_roster(Scenario scenario) {
    const int users = scenario == Scenario::Modified9u6e ? 9 : 4;
    const int ents = scenario == Scenario::Modified9u6e ? 6 : 3;
    std::vector<HostId> roster;
    for (int i = 1; i <= users; ++i) roster.push_back({HostKind::User, static_cast<std::uint8_t>(i)});
    for (int i = 0; i < ents; ++i) roster.push_back({HostKind::Enterprise, static_cast<std::uint8_t>(i)});
    roster.push_back({HostKind::Defender, 0});
    roster.push_back(kOpServer);
    for (int i = 0; i < 3; ++i) roster.push_back({HostKind::OpHost, static_cast<std::uint8_t>(i)});
    return roster;
}

inline std::vector<HostId> default_green_subgroup(Scenario scenario) {
    std::vector<HostId> out;
    for (HostId h : defendable_roster(scenario)) {
        if (h.kind == HostKind::User || h.kind == HostKind::Enterprise) out.push_back(h);
    }
    return out;
}

/// Enterprise hosts with a route to the operational server.
inline std::vector<HostId> opserver_gateways(Scenario scenario) {
    if (scenario == Scenario::Modified9u6e) {
        return {{HostKind::Enterprise, 2}, {HostKind::Enterprise, 5}};
    }
    return {{HostKind::Enterprise, 2}};
}

inline NetworkState build_topology(const SimConfig& config, std::uint64_t rng_seed) {
    if (config.baseline_ports < 0 || config.max_ports < config.baseline_ports) {
        throw ConfigError("require 0 <= baseline_ports <= max_ports");
    }
    NetworkState s;
    s.config = config;
    s.rng = make_rng(rng_seed, 0x5157);
    auto add = [&](HostId id) {
        HostState h;
        h.id = id;
        h.ports_open = config.baseline_ports;
        h.baseline_ports = config.baseline_ports;
        s.hosts.push_back(h);
    };
    add(kFoothold);
    for (HostId h : defendable_roster(config.scenario)) add(h);
    s.hosts[0].red = RedLevel::Privileged;
    s.red_known.assign(s.hosts.size(), false);
    s.red_known[0] = true;
    if (s.config.green_subgroup.empty()) {
        s.config.green_subgroup = default_green_subgroup(config.scenario);
    }
    for (HostId h : s.config.green_subgroup) {
        if (h.is_foothold() || s.index_of(h) == s.hosts.size()) {
            throw ConfigError("green subgroup host '" + host_name(h) + "' is not a defendable host");
        }
    }
    return s;
}

/// Clears the per-step flags; called once at the start of every environment step.
inline void begin_step(NetworkState& s) {
    for (auto& h : s.hosts) {
        h.scan_flag = false;
        h.exploit_flag = false;
        h.restored_this_step = false;
    }
}

namespace detail {

inline bool holds_at_least(const NetworkState& s, HostId id, RedLevel level) {
    const HostState* h = s.find(id);
    return h != nullptr && h->red >= level;
}

inline bool any_user_access_on_user_net(const NetworkState& s) {
    return std::any_of(s.hosts.begin(), s.hosts.end(), [](const HostState& h) {
        return h.id.subnet() == Subnet::User && h.red >= RedLevel::UserAccess;
    });
}

// Whether red can open a new foothold on (scan/exploit) the given host.
inline bool reachable(const NetworkState& s, HostId id) {
    switch (id.kind) {
    case HostKind::User: return true;
    case HostKind::Enterprise:
    case HostKind::Defender: return any_user_access_on_user_net(s);
    case HostKind::OpServer:
        for (HostId g : opserver_gateways(s.config.scenario)) {
            if (holds_at_least(s, g, RedLevel::Privileged)) return true;
        }
        return false;
    case HostKind::OpHost: return holds_at_least(s, kOpServer, RedLevel::UserAccess);
    }
    return false;
}

inline bool discover_legal(const NetworkState& s, Subnet net) {
    for (std::size_t i = 0; i < s.hosts.size(); ++i) {
        if (s.hosts[i].id.subnet() == net && !s.red_known[i] && reachable(s, s.hosts[i].id)) return true;
    }
    return false;
}

inline void apply_red(NetworkState& s, RedOutcome& out) {
    switch (out.action) {
    case RedActionType::Sleep: break;
    case RedActionType::Discover:
        for (std::size_t i = 0; i < s.hosts.size(); ++i) {
            if (s.hosts[i].id.subnet() == out.subnet && reachable(s, s.hosts[i].id)) s.red_known[i] = true;
        }
        break;
    case RedActionType::Scan: {
        auto i = s.index_of(out.target);
        s.red_known[i] = true;
        s.hosts[i].red = RedLevel::Scanned;
        s.hosts[i].scan_flag = true;
        break;
    }
    case RedActionType::Exploit: {
        auto& h = *s.find(out.target);
        h.red = RedLevel::UserAccess;
        h.exploit_flag = true;
        break;
    }
    case RedActionType::Escalate: s.find(out.target)->red = RedLevel::Privileged; break;
    case RedActionType::Impact: out.impact_fired = true; break;
    }
}

}  // namespace detail

/// Every move the meander agent may take from this state, in a fixed order.
inline std::vector<RedOutcome> legal_red_moves(const NetworkState& s) {
    std::vector<RedOutcome> moves;
    for (Subnet net : {Subnet::User, Subnet::Enterprise, Subnet::Operational}) {
        if (detail::discover_legal(s, net)) {
            RedOutcome m;
            m.action = RedActionType::Discover;
            m.subnet = net;
            moves.push_back(m);
        }
    }
    for (std::size_t i = 1; i < s.hosts.size(); ++i) {
        const HostState& h = s.hosts[i];
        RedOutcome m;
        m.target = h.id;
        if (h.red == RedLevel::None && s.red_known[i] && detail::reachable(s, h.id)) {
            m.action = RedActionType::Scan;
        } else if (h.red == RedLevel::Scanned && detail::reachable(s, h.id)) {
            m.action = RedActionType::Exploit;
        } else if (h.red == RedLevel::UserAccess) {
            m.action = RedActionType::Escalate;
        } else {
            continue;
        }
        moves.push_back(m);
    }
    if (detail::holds_at_least(s, kOpServer, RedLevel::Privileged)) {
        RedOutcome m;
        m.action = RedActionType::Impact;
        m.target = kOpServer;
        moves.push_back(m);
    }
    return moves;
}

/// The b-line script as a function of the current state, so a Restore sends
/// red back to the deepest stage it still holds. Stages:
/// 0-2 scan/exploit/escalate Enterprise2, 3-5 the same on OpServer0, 6 impact.
inline RedOutcome bline_next(const NetworkState& s, int* stage = nullptr) {
    const HostId ent2{HostKind::Enterprise, 2};
    RedOutcome m;
    auto pick = [&](int st, RedActionType a, HostId target) {
        if (stage) *stage = st;
        m.action = a;
        m.target = target;
        return m;
    };
    const RedLevel op = s.find(kOpServer)->red;
    if (op == RedLevel::Privileged) return pick(6, RedActionType::Impact, kOpServer);
    if (op == RedLevel::UserAccess) return pick(5, RedActionType::Escalate, kOpServer);
    if (detail::reachable(s, kOpServer)) {
        return op == RedLevel::Scanned ? pick(4, RedActionType::Exploit, kOpServer)
                                       : pick(3, RedActionType::Scan, kOpServer);
    }
    switch (s.find(ent2)->red) {
    case RedLevel::None: return pick(0, RedActionType::Scan, ent2);
    case RedLevel::Scanned: return pick(1, RedActionType::Exploit, ent2);
    default: return pick(2, RedActionType::Escalate, ent2);
    }
}

inline RedOutcome red_step(NetworkState& s) {
    RedOutcome out;
    if (s.config.red_mode == RedMode::BLine) {
        out = bline_next(s, &s.bline_stage);
    } else {
        auto moves = legal_red_moves(s);
        if (!moves.empty()) out = moves[uniform_index(s.rng, moves.size())];
    }
    detail::apply_red(s, out);
    return out;
}

inline KnownLevel observe_level(RedLevel r) {
    switch (r) {
    case RedLevel::UserAccess: return KnownLevel::UserAccess;
    case RedLevel::Privileged: return KnownLevel::Privileged;
    default: return KnownLevel::None;
    }
}

inline void blue_apply(NetworkState& s, const BlueAction& a) {
    if (a.type == BlueActionType::Sleep) return;
    HostState* h = s.find(a.host);
    if (h == nullptr || a.host.is_foothold()) {
        throw InvalidActionError("blue action targets non-defendable host '" + host_name(a.host) + "'");
    }
    switch (a.type) {
    case BlueActionType::Analyse: h->known_level = observe_level(h->red); break;
    case BlueActionType::Remove:
        // A privileged session survives Remove; only a re-image clears it.
        if (h->red == RedLevel::UserAccess) h->red = RedLevel::None;
        h->known_level = observe_level(h->red);
        break;
    case BlueActionType::Restore:
        h->red = RedLevel::None;
        h->ports_open = h->baseline_ports;
        h->known_level = KnownLevel::None;
        h->restored_this_step = true;
        break;
    case BlueActionType::StartService: h->ports_open = std::min(h->ports_open + 1, s.config.max_ports); break;
    case BlueActionType::Sleep: break;
    }
}

inline GreenOutcome green_step(NetworkState& s) {
    const auto& group = s.config.green_subgroup;
    if (group.empty()) throw ConfigError("green subgroup is empty");
    GreenOutcome out;
    out.sampled_host = group[uniform_index(s.rng, group.size())];
    const HostState& h = *s.find(out.sampled_host);
    out.ports_accessed = h.restored_this_step ? 0 : h.ports_open;
    return out;
}

}  // namespace acd::sim
