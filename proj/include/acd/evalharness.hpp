#pragma once

// Policy evaluation, step-by-step rollouts with mid-episode policy
// switching, and the CSV/JSONL exports.

#include <acd/checkpoint.hpp>
#include <acd/common.hpp>
#include <acd/momdp_env.hpp>
#include <acd/nn.hpp>
#include <acd/pareto.hpp>

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace acd {

/// A policy as seen by the harness. Stateful agents (PCN) keep their command
/// between act() and observe().
class Agent {
  public:
    virtual ~Agent() = default;
    virtual void begin_episode() {}
    virtual std::size_t act(std::span<const double> obs, Rng& rng) = 0;
    virtual void observe(std::span<const double> /*reward*/) {}
    virtual std::string tag() const = 0;
    virtual json describe() const { return {{"tag", tag()}}; }
};

class MoppoAgent final : public Agent {
  public:
    MoppoAgent(nn::NetSpec spec, nn::Params params, std::vector<double> weights, std::string tag, bool greedy = false)
        : net_(std::move(spec)), params_(std::move(params)), weights_(std::move(weights)), tag_(std::move(tag)),
          greedy_(greedy) {}

    static MoppoAgent from_checkpoint(const PolicyCheckpoint& c, bool greedy = false, std::string tag = {}) {
        if (c.trainer != "moppo") throw ConfigError("checkpoint is not a MOPPO policy");
        if (tag.empty()) tag = "w=" + weights_label(c.weights);
        return MoppoAgent(c.spec, c.params, c.weights, std::move(tag), greedy);
    }

    std::size_t act(std::span<const double> obs, Rng& rng) override {
        net_.forward(params_, obs, ws_);
        return greedy_ ? nn::argmax(ws_.logits) : nn::sample_categorical(ws_.logits, rng);
    }
    std::string tag() const override { return tag_; }
    json describe() const override {
        return {{"kind", "moppo"}, {"tag", tag_}, {"weights", weights_}, {"greedy", greedy_}};
    }
    const std::vector<double>& weights() const { return weights_; }
    void set_greedy(bool g) { greedy_ = g; }

    static std::string weights_label(const std::vector<double>& w) {
        std::string s = "[";
        for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + fmt6(w[i]);
        return s + "]";
    }

  private:
    nn::Mlp net_;
    nn::Params params_;
    std::vector<double> weights_;
    std::string tag_;
    bool greedy_;
    nn::Workspace ws_;
};

/// Uniform random actions; used to seed replay buffers and as a baseline.
class RandomAgent final : public Agent {
  public:
    explicit RandomAgent(std::size_t num_actions) : n_(num_actions) {}
    std::size_t act(std::span<const double>, Rng& rng) override { return uniform_index(rng, n_); }
    std::string tag() const override { return "random"; }

  private:
    std::size_t n_;
};

// Per-episode seeding shared by evaluate(), switch_rollout() and the
// steering server so all three replay identically.
inline std::uint64_t episode_env_seed(std::uint64_t seed, std::uint64_t episode) {
    return mix_seed(seed, 2 * episode);
}
inline Rng episode_action_rng(std::uint64_t seed, std::uint64_t episode) {
    return make_rng(mix_seed(seed, 2 * episode + 1), 0xac7);
}

struct RolloutStep {
    int t = 0;  // 0-based step index
    std::size_t action = 0;
    VectorReward reward;
    std::optional<RewardComponents> components;
    std::vector<double> cum_return;
    bool done = false;
    std::string policy;
};

struct RolloutRecord {
    std::vector<RolloutStep> steps;

    std::vector<std::string> policy_timeline() const {
        std::vector<std::string> out;
        for (const auto& s : steps) out.push_back(s.policy);
        return out;
    }
};

/// Drives a single episode one step at a time.
template <VectorEnv Env>
class EpisodeRunner {
  public:
    EpisodeRunner(Env& env, std::uint64_t seed, std::uint64_t episode = 0)
        : env_(env), rng_(episode_action_rng(seed, episode)) {
        obs_ = env_.reset(episode_env_seed(seed, episode));
        cum_.assign(env_.num_objectives(), 0.0);
    }

    bool done() const { return done_; }
    int t() const { return static_cast<int>(record_.steps.size()); }
    const Observation& observation() const { return obs_; }
    const std::vector<double>& cum_return() const { return cum_; }
    const RolloutRecord& record() const { return record_; }
    RolloutRecord& record() { return record_; }

    const RolloutStep& step(Agent& agent) {
        if (done_) throw UsageError("episode already finished");
        if (&agent != last_agent_) {
            agent.begin_episode();
            last_agent_ = &agent;
        }
        RolloutStep rec;
        rec.t = t();
        rec.action = agent.act(obs_, rng_);
        auto r = env_.step(rec.action);
        agent.observe(r.reward);
        for (std::size_t i = 0; i < cum_.size(); ++i) cum_[i] += r.reward[i];
        if constexpr (HasComponents<decltype(r)>) rec.components = r.components;
        rec.reward = std::move(r.reward);
        rec.cum_return = cum_;
        rec.done = done_ = r.done;
        rec.policy = agent.tag();
        obs_ = std::move(r.observation);
        record_.steps.push_back(std::move(rec));
        return record_.steps.back();
    }

  private:
    Env& env_;
    Rng rng_;
    Observation obs_;
    std::vector<double> cum_;
    RolloutRecord record_;
    Agent* last_agent_ = nullptr;
    bool done_ = false;
};

struct EvalSummary {
    std::vector<double> mean;  // undiscounted episode returns
    std::vector<double> std;
    std::vector<double> discounted_mean;
    std::vector<double> discounted_std;
    std::size_t n_episodes = 0;
    std::string tag;
};

/// Population mean and standard deviation per column.
inline void mean_std(const std::vector<std::vector<double>>& rows, std::vector<double>& mean, std::vector<double>& sd) {
    const std::size_t m = rows.empty() ? 0 : rows.front().size();
    mean.assign(m, 0.0);
    sd.assign(m, 0.0);
    if (rows.empty()) return;
    for (const auto& r : rows) {
        for (std::size_t j = 0; j < m; ++j) mean[j] += r[j];
    }
    for (double& x : mean) x /= static_cast<double>(rows.size());
    for (const auto& r : rows) {
        for (std::size_t j = 0; j < m; ++j) sd[j] += (r[j] - mean[j]) * (r[j] - mean[j]);
    }
    for (double& x : sd) x = std::sqrt(x / static_cast<double>(rows.size()));
}

template <VectorEnv Env>
EvalSummary evaluate(Agent& agent, Env& env, std::size_t n_episodes, std::uint64_t seed, double gamma) {
    if (n_episodes < 1) throw UsageError("evaluate needs at least one episode");
    std::vector<std::vector<double>> undiscounted, discounted;
    for (std::size_t e = 0; e < n_episodes; ++e) {
        EpisodeRunner<Env> run(env, seed, e);
        std::vector<double> disc(env.num_objectives(), 0.0);
        double g = 1.0;
        while (!run.done()) {
            const auto& s = run.step(agent);
            for (std::size_t i = 0; i < disc.size(); ++i) disc[i] += g * s.reward[i];
            g *= gamma;
        }
        undiscounted.push_back(run.cum_return());
        discounted.push_back(std::move(disc));
    }
    EvalSummary out;
    mean_std(undiscounted, out.mean, out.std);
    mean_std(discounted, out.discounted_mean, out.discounted_std);
    out.n_episodes = n_episodes;
    out.tag = agent.tag();
    return out;
}

/// policy_a acts for steps t < t_switch, policy_b afterwards.
template <VectorEnv Env>
RolloutRecord switch_rollout(Agent& policy_a, Agent& policy_b, int t_switch, Env& env, std::uint64_t seed) {
    EpisodeRunner<Env> run(env, seed, 0);
    while (!run.done()) run.step(run.t() < t_switch ? policy_a : policy_b);
    return run.record();
}

template <VectorEnv Env>
RolloutRecord plain_rollout(Agent& policy, Env& env, std::uint64_t seed) {
    EpisodeRunner<Env> run(env, seed, 0);
    while (!run.done()) run.step(policy);
    return run.record();
}

// ---- exports ---------------------------------------------------------------

inline std::string vec6(std::span<const double> v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt6(v[i]);
    return s + "]";
}

/// One JSONL line per step, numbers rendered with 6 fractional digits.
inline std::string rollout_step_jsonl(const RolloutStep& s) {
    std::string line = "{\"t\":" + std::to_string(s.t) + ",\"action_index\":" + std::to_string(s.action) +
                       ",\"reward\":" + vec6(s.reward);
    if (s.components) {
        const auto& c = *s.components;
        line += ",\"components\":{\"c1\":" + fmt6(c.red_access) + ",\"c2\":" + fmt6(c.red_impact) +
                ",\"c3\":" + fmt6(c.restore_cost) + ",\"c4\":" + fmt6(c.green_ports) + "}";
    }
    line += std::string(",\"done\":") + (s.done ? "true" : "false") + ",\"cum_return\":" + vec6(s.cum_return) +
            ",\"policy\":" + json(s.policy).dump() + "}";
    return line;
}

inline void write_rollout_jsonl(std::ostream& os, const RolloutRecord& r) {
    for (const auto& s : r.steps) os << rollout_step_jsonl(s) << '\n';
}

inline void write_rollout_jsonl(const std::string& path, const RolloutRecord& r) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    write_rollout_jsonl(os, r);
    if (!os) throw IoError("write failed for '" + path + "'");
}

/// A row of `front.csv`.
struct FrontRow {
    double w_green = 0.0;
    EvalSummary summary;
    std::string strategy = "linear";
    std::string tag;
};

inline void write_front_rows(std::ostream& os, std::span<const FrontRow> rows) {
    os << "w_green,obj0_mean,obj0_std,obj1_mean,obj1_std,n_episodes,strategy,tag\n";
    for (const auto& r : rows) {
        const auto& s = r.summary;
        auto at = [](const std::vector<double>& v, std::size_t i) { return i < v.size() ? v[i] : 0.0; };
        os << fmt6(r.w_green) << ',' << fmt6(at(s.mean, 0)) << ',' << fmt6(at(s.std, 0)) << ','
           << fmt6(at(s.mean, 1)) << ',' << fmt6(at(s.std, 1)) << ',' << s.n_episodes << ','
           << pareto::csv_escape(r.strategy) << ',' << pareto::csv_escape(r.tag) << '\n';
    }
}

inline void write_front_rows(const std::string& path, std::span<const FrontRow> rows) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    write_front_rows(os, rows);
    if (!os) throw IoError("write failed for '" + path + "'");
}

inline std::vector<pareto::ParetoPoint> front_points(std::span<const FrontRow> rows) {
    std::vector<pareto::ParetoPoint> out;
    for (const auto& r : rows) out.push_back({r.summary.mean, r.tag});
    return out;
}

inline json to_json(const EvalSummary& s) {
    return {{"mean", s.mean},
            {"std", s.std},
            {"discounted_mean", s.discounted_mean},
            {"discounted_std", s.discounted_std},
            {"n_episodes", s.n_episodes},
            {"tag", s.tag}};
}

inline void write_jsonl(const std::string& path, std::span<const json> lines) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    for (const auto& l : lines) os << l.dump() << '\n';
    if (!os) throw IoError("write failed for '" + path + "'");
}

}  // namespace acd
