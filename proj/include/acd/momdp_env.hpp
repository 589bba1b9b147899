#pragma once

// Vector-reward episodic wrapper around the simulation: observation
// encoding, the discrete blue action space, reward components and the
// Game A/B/C objective assembly.

#include <acd/common.hpp>
#include <acd/simnet.hpp>

#include <concepts>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace acd {

using Observation = std::vector<double>;
using VectorReward = std::vector<double>;

enum class Game : std::uint8_t { A, B, C };

inline std::size_t num_objectives(Game g) { return g == Game::A ? 1 : 2; }

inline std::string_view game_name(Game g) {
    switch (g) {
    case Game::A: return "A";
    case Game::B: return "B";
    default: return "C";
    }
}

inline Game parse_game(std::string_view s) {
    if (s == "A" || s == "a") return Game::A;
    if (s == "B" || s == "b") return Game::B;
    if (s == "C" || s == "c") return Game::C;
    throw ConfigError("unknown game '" + std::string(s) + "'");
}

struct GameSpec {
    Game game = Game::C;
    double gamma = 0.99;
    int episode_length = 512;
};

struct RewardComponents {
    double red_access = 0.0;    // 1: privileged red presence
    double red_impact = 0.0;    // 2: impact on the operational server
    double restore_cost = 0.0;  // 3: blue re-imaged a host
    double green_ports = 0.0;   // 4: ports the sampled green user reached
};

/// Components 1-3 summed. The bracketing is fixed so Game A, the sum of
/// Game B and Game C objective 0 are bit-identical.
inline double security_total(const RewardComponents& c) { return c.red_access + (c.red_impact + c.restore_cost); }

inline VectorReward assemble_objectives(const RewardComponents& c, Game game) {
    switch (game) {
    case Game::A: return {security_total(c)};
    case Game::B: return {c.red_access, c.red_impact + c.restore_cost};
    case Game::C: return {security_total(c), c.green_ports};
    }
    return {};
}

inline double red_access_penalty(const sim::NetworkState& s) {
    int low = 0;   // user hosts and operational hosts
    int high = 0;  // enterprise servers and the operational server
    for (std::size_t i = 1; i < s.hosts.size(); ++i) {
        const auto& h = s.hosts[i];
        if (h.red != sim::RedLevel::Privileged) continue;
        switch (h.id.kind) {
        case sim::HostKind::User:
        case sim::HostKind::OpHost: ++low; break;
        default: ++high; break;
        }
    }
    return -(0.1 * low + 1.0 * high);
}

inline constexpr std::size_t kHostFeatures = 7;

inline void encode_host(const sim::HostState& h, int max_ports, double* out) {
    out[0] = h.scan_flag ? 1.0 : 0.0;
    out[1] = h.exploit_flag ? 1.0 : 0.0;
    for (int k = 0; k < 4; ++k) out[2 + k] = static_cast<int>(h.known_level) == k ? 1.0 : 0.0;
    out[6] = static_cast<double>(h.ports_open) / static_cast<double>(max_ports);
}

inline Observation encode_observation(const sim::NetworkState& s) {
    Observation obs(s.num_defendable() * kHostFeatures);
    for (std::size_t i = 0; i < s.num_defendable(); ++i) {
        encode_host(s.defendable(i), s.config.max_ports, obs.data() + i * kHostFeatures);
    }
    return obs;
}

/// Action 0 is Sleep; action 1 + type * n + host applies host action
/// `type` (Analyse, Remove, Restore, StartService) to defendable host `host`.
inline sim::BlueAction decode_action(std::size_t index, const std::vector<sim::HostId>& roster) {
    const std::size_t n = roster.size();
    if (index == 0) return {};
    if (index > sim::kBlueHostActionTypes * n) {
        throw InvalidActionError("action index " + std::to_string(index) + " out of range");
    }
    const std::size_t k = index - 1;
    sim::BlueAction a;
    a.type = static_cast<sim::BlueActionType>(1 + k / n);
    a.host = roster[k % n];
    return a;
}

inline std::size_t encode_action(const sim::BlueAction& a, const std::vector<sim::HostId>& roster) {
    if (a.type == sim::BlueActionType::Sleep) return 0;
    for (std::size_t i = 0; i < roster.size(); ++i) {
        if (roster[i] == a.host) return 1 + (static_cast<std::size_t>(a.type) - 1) * roster.size() + i;
    }
    throw InvalidActionError("host '" + sim::host_name(a.host) + "' is not defendable");
}

struct EnvConfig {
    sim::SimConfig sim;
    GameSpec game;
};

struct StepResult {
    Observation observation;
    VectorReward reward;
    bool done = false;
    RewardComponents components;
};

/// Anything the trainers can run on.
template <class E>
concept VectorEnv = requires(E e, const E ce, std::uint64_t seed, std::size_t a) {
    { ce.observation_size() } -> std::convertible_to<std::size_t>;
    { ce.num_actions() } -> std::convertible_to<std::size_t>;
    { ce.num_objectives() } -> std::convertible_to<std::size_t>;
    { e.reset(seed) } -> std::convertible_to<Observation>;
    { e.step(a).observation } -> std::convertible_to<Observation>;
    { e.step(a).reward } -> std::convertible_to<VectorReward>;
    { e.step(a).done } -> std::convertible_to<bool>;
};

template <class R>
concept HasComponents = requires(const R r) {
    { r.components } -> std::convertible_to<RewardComponents>;
};

class CyberDefenceEnv {
  public:
    explicit CyberDefenceEnv(EnvConfig cfg)
        : cfg_(std::move(cfg)), roster_(sim::defendable_roster(cfg_.sim.scenario)),
          state_(sim::build_topology(cfg_.sim, 0)) {
        if (cfg_.game.episode_length < 1) throw ConfigError("episode_length must be >= 1");
    }

    std::size_t observation_size() const { return roster_.size() * kHostFeatures; }
    std::size_t num_actions() const { return 1 + sim::kBlueHostActionTypes * roster_.size(); }
    std::size_t num_objectives() const { return acd::num_objectives(cfg_.game.game); }
    const EnvConfig& config() const { return cfg_; }
    const std::vector<sim::HostId>& roster() const { return roster_; }
    const sim::NetworkState& state() const { return state_; }
    bool done() const { return done_; }

    Observation reset(std::uint64_t seed) {
        state_ = sim::build_topology(cfg_.sim, seed);
        sim::begin_step(state_);
        done_ = false;
        return encode_observation(state_);
    }

    StepResult step(std::size_t action_index) {
        if (done_) throw UsageError("step() called after the episode finished; call reset()");
        const sim::BlueAction blue = decode_action(action_index, roster_);
        sim::begin_step(state_);
        sim::blue_apply(state_, blue);
        last_red_ = sim::red_step(state_);
        last_green_ = sim::green_step(state_);
        ++state_.t;

        StepResult r;
        r.components.red_access = red_access_penalty(state_);
        r.components.red_impact = last_red_.impact_fired ? -10.0 : 0.0;
        r.components.restore_cost = blue.type == sim::BlueActionType::Restore ? -1.0 : 0.0;
        r.components.green_ports = static_cast<double>(last_green_.ports_accessed);
        r.reward = assemble_objectives(r.components, cfg_.game.game);
        r.done = done_ = state_.t >= cfg_.game.episode_length;
        r.observation = encode_observation(state_);
        return r;
    }

    const sim::RedOutcome& last_red() const { return last_red_; }
    const sim::GreenOutcome& last_green() const { return last_green_; }

  private:
    EnvConfig cfg_;
    std::vector<sim::HostId> roster_;
    sim::NetworkState state_;
    sim::RedOutcome last_red_;
    sim::GreenOutcome last_green_;
    bool done_ = true;
};

static_assert(VectorEnv<CyberDefenceEnv>);

}  // namespace acd
