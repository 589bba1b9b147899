#pragma once

// Pareto Conditioned Network trainer: a replay buffer of whole episodes
// ranked by non-dominance and crowding, command (desired return + horizon)
// selection, supervised action imitation, and prompted acting.

#include <acd/checkpoint.hpp>
#include <acd/common.hpp>
#include <acd/evalharness.hpp>
#include <acd/momdp_env.hpp>
#include <acd/nn.hpp>
#include <acd/pareto.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace acd::pcn {

struct PcnConfig {
    long total_timesteps = 500000;  // 1e7 in the full-scale runs
    std::size_t batch_size = 256;
    std::size_t max_buffer_size = 50;
    std::size_t num_er_episodes = 20;
    std::size_t num_step_episodes = 10;
    std::size_t num_model_updates = 50;
    double learning_rate = 1e-3;
    double gamma = 1.0;
    std::size_t hidden_dim = 64;
    double noise = 0.1;
    std::vector<double> scaling_factor{1.0, 1.0, 0.1};
    std::vector<double> ref_point{-6000.0, 0.0};
    std::vector<double> max_return{0.0, 10000.0};
    std::size_t num_points_pf = 100;
    std::size_t max_steps = 512;
    std::uint64_t seed = 0;
    long eval_freq = 50000;
    std::uint64_t eval_seed = 777;
    // Optional imported front, used as the first evaluation target list.
    std::vector<pareto::ParetoPoint> warm_start;

    void validate(std::size_t n_obj) const {
        if (scaling_factor.size() != n_obj + 1) {
            throw ConfigError("scaling_factor needs " + std::to_string(n_obj + 1) + " entries (one per objective plus horizon)");
        }
        if (batch_size < 1 || max_buffer_size < 1 || num_model_updates < 1) {
            throw ConfigError("batch_size, max_buffer_size and num_model_updates must be >= 1");
        }
        if (total_timesteps < 1) throw ConfigError("total_timesteps must be >= 1");
        if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
    }
};

inline json to_json(const PcnConfig& c) {
    json warm = json::array();
    for (const auto& p : c.warm_start) warm.push_back(p.f);
    return {{"total_timesteps", c.total_timesteps}, {"batch_size", c.batch_size},
            {"max_buffer_size", c.max_buffer_size}, {"num_er_episodes", c.num_er_episodes},
            {"num_step_episodes", c.num_step_episodes}, {"num_model_updates", c.num_model_updates},
            {"learning_rate", c.learning_rate}, {"gamma", c.gamma},
            {"hidden_dim", c.hidden_dim}, {"noise", c.noise},
            {"scaling_factor", c.scaling_factor}, {"ref_point", c.ref_point},
            {"max_return", c.max_return}, {"num_points_pf", c.num_points_pf},
            {"max_steps", c.max_steps}, {"seed", c.seed},
            {"eval_freq", c.eval_freq}, {"eval_seed", c.eval_seed},
            {"known_pareto_front", warm}};
}

struct EpisodeRecord {
    std::vector<Observation> observations;
    std::vector<std::size_t> actions;
    std::vector<VectorReward> rewards;
    std::vector<double> total_return;

    std::size_t length() const { return actions.size(); }

    void push(Observation obs, std::size_t action, VectorReward reward) {
        if (total_return.empty()) total_return.assign(reward.size(), 0.0);
        for (std::size_t i = 0; i < reward.size(); ++i) total_return[i] += reward[i];
        observations.push_back(std::move(obs));
        actions.push_back(action);
        rewards.push_back(std::move(reward));
    }
};

struct Command {
    std::vector<double> desired_return;
    int desired_horizon = 1;
};

/// Episodes kept for supervised training. Capacity is enforced on insert.
class EpisodeBuffer {
  public:
    struct Entry {
        EpisodeRecord episode;
        std::uint64_t serial = 0;  // insertion order, for oldest-first ties
    };

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const Entry& operator[](std::size_t i) const { return entries_[i]; }
    const std::vector<Entry>& entries() const { return entries_; }

    std::vector<std::vector<double>> returns() const {
        std::vector<std::vector<double>> out;
        for (const auto& e : entries_) out.push_back(e.episode.total_return);
        return out;
    }

    /// Indices of episodes whose return no other buffered return dominates.
    std::vector<std::size_t> nondominated() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            bool dominated = false;
            for (std::size_t j = 0; j < entries_.size() && !dominated; ++j) {
                dominated = j != i && pareto::dominates(entries_[j].episode.total_return, entries_[i].episode.total_return);
            }
            if (!dominated) out.push_back(i);
        }
        return out;
    }

    /// Appends, then evicts while over capacity: dominated episodes go
    /// before non-dominated ones; within a tier the lowest crowding
    /// distance goes first, ties oldest first.
    void insert(EpisodeRecord ep, std::size_t max_size) {
        entries_.push_back({std::move(ep), next_serial_++});
        while (entries_.size() > max_size) entries_.erase(entries_.begin() + static_cast<long>(eviction_index()));
    }

    std::size_t eviction_index() const {
        const auto nd = nondominated();
        std::vector<bool> is_nd(entries_.size(), false);
        for (auto i : nd) is_nd[i] = true;
        std::vector<std::size_t> tier;
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (!is_nd[i]) tier.push_back(i);
        }
        if (tier.empty()) tier = nd;
        std::vector<std::vector<double>> f;
        for (auto i : tier) f.push_back(entries_[i].episode.total_return);
        const auto crowd = pareto::crowding_distances(std::span<const std::vector<double>>(f));
        std::size_t best = 0;
        for (std::size_t k = 1; k < tier.size(); ++k) {
            const bool lower = crowd[k] < crowd[best];
            const bool tie_older = crowd[k] == crowd[best] && entries_[tier[k]].serial < entries_[tier[best]].serial;
            if (lower || tie_older) best = k;
        }
        return tier[best];
    }

  private:
    std::vector<Entry> entries_;
    std::uint64_t next_serial_ = 0;
};

inline void buffer_insert(EpisodeBuffer& buffer, EpisodeRecord ep, const PcnConfig& cfg) {
    buffer.insert(std::move(ep), cfg.max_buffer_size);
}

/// noise x (population std of each objective over the buffer's returns).
inline std::vector<double> command_noise_std(const EpisodeBuffer& buffer, const PcnConfig& cfg) {
    std::vector<double> mean, sd;
    mean_std(buffer.returns(), mean, sd);
    for (double& s : sd) s *= cfg.noise;
    return sd;
}

inline Command select_command(const EpisodeBuffer& buffer, Rng& rng, const PcnConfig& cfg) {
    if (buffer.empty()) throw UsageError("select_command on an empty buffer");
    const auto nd = buffer.nondominated();
    const auto& ep = buffer[nd[uniform_index(rng, nd.size())]].episode;
    Command c;
    c.desired_return = ep.total_return;
    const std::size_t obj = uniform_index(rng, c.desired_return.size());
    const double sd = command_noise_std(buffer, cfg)[obj];
    if (sd > 0.0) c.desired_return[obj] += std::normal_distribution<double>(0.0, sd)(rng);
    c.desired_horizon = std::max(1, static_cast<int>(ep.length()) - 2);
    return c;
}

/// Network input: observation, then desired return and horizon scaled by
/// scaling_factor.
inline std::vector<double> conditioned_input(std::span<const double> obs, std::span<const double> desired_return,
                                             double horizon, std::span<const double> scaling) {
    std::vector<double> x(obs.begin(), obs.end());
    for (std::size_t i = 0; i < desired_return.size(); ++i) x.push_back(desired_return[i] * scaling[i]);
    x.push_back(horizon * scaling[desired_return.size()]);
    return x;
}

/// Mean cross-entropy between the policy and the actions actually taken.
class CrossEntropyLoss {
  public:
    CrossEntropyLoss(std::vector<std::vector<double>> inputs, std::vector<std::size_t> targets)
        : inputs_(std::move(inputs)), targets_(std::move(targets)) {}

    std::size_t size() const { return inputs_.size(); }
    std::span<const double> input(std::size_t i) const { return inputs_[i]; }

    double evaluate(std::size_t i, std::span<const double> logits, std::span<const double>, std::span<double> dlogits,
                    std::span<double>) {
        const double inv_n = 1.0 / static_cast<double>(inputs_.size());
        const double lse = nn::log_sum_exp(logits);
        for (std::size_t k = 0; k < logits.size(); ++k) {
            dlogits[k] += (std::exp(logits[k] - lse) - (k == targets_[i] ? 1.0 : 0.0)) * inv_n;
        }
        const double nll = (lse - logits[targets_[i]]) * inv_n;
        total_ += nll;
        return nll;
    }

    std::vector<std::pair<std::string, double>> terms() const { return {{"cross_entropy", total_}}; }

  private:
    std::vector<std::vector<double>> inputs_;
    std::vector<std::size_t> targets_;
    double total_ = 0.0;
};

/// Return-to-go from step t (discounted by gamma; undiscounted at gamma = 1).
inline std::vector<std::vector<double>> returns_to_go(const EpisodeRecord& ep, double gamma) {
    const std::size_t n = ep.length();
    std::vector<std::vector<double>> out(n);
    std::vector<double> acc(ep.total_return.size(), 0.0);
    for (std::size_t t = n; t-- > 0;) {
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = ep.rewards[t][i] + gamma * acc[i];
        out[t] = acc;
    }
    return out;
}

/// Samples batch_size transitions (episode uniform, then step uniform).
inline CrossEntropyLoss sample_batch(const EpisodeBuffer& buffer, Rng& rng, const PcnConfig& cfg) {
    std::vector<std::vector<double>> inputs;
    std::vector<std::size_t> targets;
    for (std::size_t k = 0; k < cfg.batch_size; ++k) {
        const auto& ep = buffer[uniform_index(rng, buffer.size())].episode;
        const std::size_t t = uniform_index(rng, ep.length());
        // Recomputing return-to-go per sample keeps the buffer free of caches.
        std::vector<double> rtg(ep.total_return.size(), 0.0);
        double g = 1.0;
        for (std::size_t s = t; s < ep.length(); ++s) {
            for (std::size_t i = 0; i < rtg.size(); ++i) rtg[i] += g * ep.rewards[s][i];
            g *= cfg.gamma;
        }
        inputs.push_back(conditioned_input(ep.observations[t], rtg, static_cast<double>(ep.length() - t),
                                           cfg.scaling_factor));
        targets.push_back(ep.actions[t]);
    }
    return CrossEntropyLoss(std::move(inputs), std::move(targets));
}

/// One supervised step; returns the batch's mean cross-entropy.
inline double pcn_update(const nn::Mlp& net, nn::Params& params, nn::OptState& opt, const EpisodeBuffer& buffer,
                         Rng& rng, const PcnConfig& cfg) {
    if (buffer.empty()) throw UsageError("pcn_update on an empty buffer");
    auto loss = sample_batch(buffer, rng, cfg);
    std::vector<double> grad(params.size());
    const double value = net.loss_and_grad(params, loss, grad);
    nn::opt_step(params, grad, opt);
    return value;
}

enum class ActMode { Sample, Greedy };

inline std::size_t pcn_act(const nn::Mlp& net, std::span<const double> params, std::span<const double> obs,
                           const Command& cmd, std::span<const double> scaling, ActMode mode, Rng& rng) {
    const auto x = conditioned_input(obs, cmd.desired_return, cmd.desired_horizon, scaling);
    const auto out = net.forward(params, x);
    return mode == ActMode::Greedy ? nn::argmax(out.logits) : nn::sample_categorical(out.logits, rng);
}

/// Command bookkeeping after an environment step.
inline void advance_command(Command& cmd, std::span<const double> reward) {
    for (std::size_t i = 0; i < cmd.desired_return.size(); ++i) cmd.desired_return[i] -= reward[i];
    cmd.desired_horizon = std::max(1, cmd.desired_horizon - 1);
}

/// A prompted PCN policy for the evaluation harness.
class PcnAgent final : public Agent {
  public:
    PcnAgent(nn::NetSpec spec, nn::Params params, std::vector<double> scaling, Command target,
             ActMode mode = ActMode::Greedy, std::string tag = "pcn")
        : net_(std::move(spec)), params_(std::move(params)), scaling_(std::move(scaling)), target_(std::move(target)),
          current_(target_), mode_(mode), tag_(std::move(tag)) {}

    static PcnAgent from_checkpoint(const PolicyCheckpoint& c, Command target, ActMode mode = ActMode::Greedy) {
        if (c.trainer != "pcn") throw ConfigError("checkpoint is not a PCN policy");
        return PcnAgent(c.spec, c.params, c.scaling_factor, std::move(target), mode);
    }

    void begin_episode() override { current_ = target_; }
    std::size_t act(std::span<const double> obs, Rng& rng) override {
        return pcn_act(net_, params_, obs, current_, scaling_, mode_, rng);
    }
    void observe(std::span<const double> reward) override { advance_command(current_, reward); }
    std::string tag() const override { return tag_; }
    json describe() const override {
        return {{"kind", "pcn"},
                {"tag", tag_},
                {"target_return", target_.desired_return},
                {"target_horizon", target_.desired_horizon},
                {"remaining_return", current_.desired_return},
                {"remaining_horizon", current_.desired_horizon}};
    }

    /// New prompt; takes effect on the next act().
    void set_target(Command c) {
        target_ = c;
        current_ = std::move(c);
    }
    const Command& current() const { return current_; }
    std::size_t n_obj() const { return scaling_.size() - 1; }

  private:
    nn::Mlp net_;
    nn::Params params_;
    std::vector<double> scaling_;
    Command target_;
    Command current_;
    ActMode mode_;
    std::string tag_;
};

inline nn::NetSpec pcn_spec(std::size_t obs_dim, std::size_t num_actions, std::size_t n_obj, std::size_t hidden) {
    nn::NetSpec s;
    s.input_dim = obs_dim + n_obj + 1;
    s.hidden = {hidden, hidden};
    s.policy_out = num_actions;
    s.value_heads = 0;
    return s;
}

template <VectorEnv Env>
EpisodeRecord run_episode(Env& env, std::uint64_t env_seed, Agent& agent, Rng& rng, std::size_t max_steps) {
    EpisodeRecord ep;
    Observation obs = env.reset(env_seed);
    agent.begin_episode();
    for (std::size_t t = 0; t < max_steps; ++t) {
        const std::size_t a = agent.act(obs, rng);
        auto r = env.step(a);
        agent.observe(r.reward);
        ep.push(std::move(obs), a, r.reward);
        obs = std::move(r.observation);
        if (r.done) break;
    }
    return ep;
}

struct PointEval {
    Command target;
    std::vector<double> mean;
    std::vector<double> std;
    std::size_t n_episodes = 0;
};

/// Greedy prompted episodes per target; per-objective mean/std of the
/// undiscounted returns achieved.
template <class Factory>
std::vector<PointEval> evaluate_points(const PolicyCheckpoint& ck, const std::vector<Command>& targets,
                                       std::size_t episodes_per_target, Factory&& make_env, std::uint64_t seed) {
    if (targets.empty()) throw UsageError("evaluate_points needs at least one target");
    auto env = make_env();
    std::vector<PointEval> out;
    for (std::size_t k = 0; k < targets.size(); ++k) {
        PcnAgent agent = PcnAgent::from_checkpoint(ck, targets[k], ActMode::Greedy);
        const EvalSummary s = evaluate(agent, env, episodes_per_target, mix_seed(seed, k), 1.0);
        out.push_back({targets[k], s.mean, s.std, s.n_episodes});
    }
    return out;
}

inline void write_point_evals(std::ostream& os, const std::vector<PointEval>& evals) {
    const std::size_t m = evals.empty() ? 2 : evals.front().target.desired_return.size();
    for (std::size_t j = 0; j < m; ++j) os << "target_obj" << j << ',';
    os << "target_horizon";
    for (std::size_t j = 0; j < m; ++j) os << ",obj" << j << "_mean,obj" << j << "_std";
    os << ",n_episodes\n";
    for (const auto& e : evals) {
        for (double x : e.target.desired_return) os << fmt6(x) << ',';
        os << e.target.desired_horizon;
        for (std::size_t j = 0; j < m; ++j) os << ',' << fmt6(e.mean[j]) << ',' << fmt6(e.std[j]);
        os << ',' << e.n_episodes << '\n';
    }
}

inline json command_json(const Command& c) {
    return {{"return", c.desired_return}, {"horizon", c.desired_horizon}};
}

inline Command command_from_json(const json& j) {
    Command c;
    c.desired_return = j.at("return").get<std::vector<double>>();
    c.desired_horizon = j.at("horizon").get<int>();
    if (c.desired_horizon < 1) throw ConfigError("command horizon must be >= 1");
    return c;
}

struct FrontSnapshot {
    long global_step = 0;
    std::vector<Command> targets;          // every prompt evaluated
    std::vector<Command> prompts;          // prompt behind each front point
    std::vector<pareto::ParetoPoint> front;  // pruned achieved returns
};

struct PcnTrainResult {
    PolicyCheckpoint checkpoint;
    std::vector<json> front_log;
    FrontSnapshot final_front;
    EpisodeBuffer buffer;
};

/// Prompts from the buffer's non-dominated episodes: their returns and
/// lengths, identical returns collapsed, at most num_points_pf.
inline std::vector<Command> buffer_targets(const EpisodeBuffer& buffer, const PcnConfig& cfg) {
    std::vector<Command> out;
    for (auto i : buffer.nondominated()) {
        const auto& ep = buffer[i].episode;
        const bool seen = std::any_of(out.begin(), out.end(),
                                      [&](const Command& c) { return c.desired_return == ep.total_return; });
        if (!seen) out.push_back({ep.total_return, std::max(1, static_cast<int>(ep.length()))});
        if (out.size() >= cfg.num_points_pf) break;
    }
    return out;
}

namespace detail {

template <VectorEnv Env>
FrontSnapshot snapshot(const nn::Mlp& net, const nn::Params& params, Env& env, const std::vector<Command>& targets,
                       const PcnConfig& cfg, long global_step, std::uint64_t eval_round) {
    FrontSnapshot snap;
    snap.global_step = global_step;
    snap.targets = targets;
    std::vector<pareto::ParetoPoint> achieved;
    for (std::size_t k = 0; k < targets.size(); ++k) {
        PcnAgent agent(net.spec(), params, cfg.scaling_factor, targets[k], ActMode::Greedy);
        Rng rng = make_rng(cfg.eval_seed, eval_round * 100003 + k);
        const auto ep = run_episode(env, mix_seed(cfg.eval_seed, eval_round * 100003 + k), agent, rng, cfg.max_steps);
        achieved.push_back({ep.total_return, std::to_string(k)});
    }
    for (auto& p : pareto::pareto_prune(achieved).points) {
        snap.prompts.push_back(targets[std::stoul(p.tag)]);
        snap.front.push_back(std::move(p));
    }
    return snap;
}

inline json snapshot_json(const FrontSnapshot& s, double loss, const PcnConfig& cfg) {
    json front = json::array();
    for (const auto& p : s.front) front.push_back(p.f);
    json targets = json::array();
    for (const auto& c : s.targets) targets.push_back(command_json(c));
    json j = {{"global_step", s.global_step}, {"front", front}, {"loss", loss}, {"targets", targets}};
    if (!s.front.empty() && s.front.front().f.size() == 2 && cfg.ref_point.size() == 2) {
        j["hypervolume"] = pareto::hypervolume_2d(std::span<const pareto::ParetoPoint>(s.front), cfg.ref_point);
    }
    return j;
}

}  // namespace detail

template <class Factory>
PcnTrainResult train_pcn(const PcnConfig& cfg, Factory&& make_env,
                         const std::function<void(const json&)>& on_snapshot = {}) {
    using Env = std::decay_t<decltype(make_env())>;
    static_assert(VectorEnv<Env>);
    Env env = make_env();
    Env eval_env = make_env();
    const std::size_t n_obj = env.num_objectives();
    cfg.validate(n_obj);

    nn::Mlp net(pcn_spec(env.observation_size(), env.num_actions(), n_obj, cfg.hidden_dim));
    PcnTrainResult result;
    auto& ck = result.checkpoint;
    ck.trainer = "pcn";
    ck.spec = net.spec();
    ck.n_obj = n_obj;
    ck.seed = cfg.seed;
    ck.scaling_factor = cfg.scaling_factor;
    ck.config_hash = config_hash(to_json(cfg));
    ck.params = net.init(cfg.seed);
    nn::OptState opt = nn::OptState::for_params(net.num_params(), cfg.learning_rate, 0.0);

    Rng rng = make_rng(cfg.seed, 11);
    std::uint64_t episode_counter = 0;
    long global_step = 0;
    auto next_env_seed = [&] { return mix_seed(cfg.seed, 1000003 + episode_counter++); };

    RandomAgent explorer(env.num_actions());
    for (std::size_t k = 0; k < cfg.num_er_episodes; ++k) {
        auto ep = run_episode(env, next_env_seed(), explorer, rng, cfg.max_steps);
        global_step += static_cast<long>(ep.length());
        buffer_insert(result.buffer, std::move(ep), cfg);
    }

    long next_eval = cfg.eval_freq > 0 ? cfg.eval_freq : std::numeric_limits<long>::max();
    std::uint64_t eval_round = 0;
    double last_loss = 0.0;
    bool first_snapshot = true;
    auto take_snapshot = [&] {
        auto targets = buffer_targets(result.buffer, cfg);
        if (first_snapshot) {
            for (const auto& p : cfg.warm_start) {
                targets.insert(targets.begin(), Command{p.f, static_cast<int>(cfg.max_steps)});
            }
            first_snapshot = false;
        }
        if (targets.empty()) return;
        try {
            result.final_front = detail::snapshot(net, ck.params, eval_env, targets, cfg, global_step, eval_round++);
        } catch (const std::exception&) {
            return;  // a failed evaluation skips the log point
        }
        json line = detail::snapshot_json(result.final_front, last_loss, cfg);
        if (on_snapshot) on_snapshot(line);
        result.front_log.push_back(std::move(line));
    };

    bool logged_at_end = false;
    while (global_step < cfg.total_timesteps) {
        double loss_sum = 0.0;
        for (std::size_t u = 0; u < cfg.num_model_updates; ++u) {
            loss_sum += pcn_update(net, ck.params, opt, result.buffer, rng, cfg);
        }
        last_loss = loss_sum / static_cast<double>(cfg.num_model_updates);
        for (std::size_t k = 0; k < cfg.num_step_episodes; ++k) {
            PcnAgent actor(net.spec(), ck.params, cfg.scaling_factor, select_command(result.buffer, rng, cfg),
                           ActMode::Sample);
            auto ep = run_episode(env, next_env_seed(), actor, rng, cfg.max_steps);
            global_step += static_cast<long>(ep.length());
            buffer_insert(result.buffer, std::move(ep), cfg);
        }
        logged_at_end = false;
        if (global_step >= next_eval) {
            take_snapshot();
            logged_at_end = true;
            while (next_eval <= global_step) next_eval += cfg.eval_freq;
        }
    }
    if (!logged_at_end) take_snapshot();

    json prompts = json::array();
    for (const auto& c : result.final_front.prompts) prompts.push_back(command_json(c));
    ck.extra = {{"targets", prompts}, {"global_step", global_step}};
    return result;
}

}  // namespace acd::pcn
