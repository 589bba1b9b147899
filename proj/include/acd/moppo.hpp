#pragma once

// Multi-objective PPO: vector critic, per-objective GAE, advantage
// scalarisation (linear or Chebyshev) before the clipped policy loss.
// With one objective and w = [1] this is plain PPO.

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
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace acd::moppo {

enum class WeightingStrategy { Linear, Chebyshev };

inline std::string strategy_name(WeightingStrategy s) { return s == WeightingStrategy::Linear ? "linear" : "chebyshev"; }

inline WeightingStrategy parse_strategy(std::string_view s) {
    if (s == "linear") return WeightingStrategy::Linear;
    if (s == "chebyshev" || s == "tchebycheff") return WeightingStrategy::Chebyshev;
    throw ConfigError("unknown weighting strategy '" + std::string(s) + "'");
}

struct PpoConfig {
    long total_timesteps = 750000;
    std::size_t num_envs = 16;
    std::size_t num_steps = 512;
    std::size_t num_minibatches = 16;
    std::size_t update_epochs = 10;
    double learning_rate = 2.5e-4;
    bool anneal_lr = true;
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double clip_coef = 0.2;
    double ent_coef = 0.01;
    double vf_coef = 0.5;
    bool clip_vloss = true;
    bool norm_adv = true;
    double max_grad_norm = 0.5;
    pareto::WeightVector weights{std::vector<double>{1.0}};
    WeightingStrategy strategy = WeightingStrategy::Linear;
    std::uint64_t seed = 4;
    long eval_freq = 50000;
    std::vector<std::size_t> hidden{64, 64};

    std::size_t batch_size() const { return num_envs * num_steps; }
    std::size_t minibatch_size() const { return batch_size() / num_minibatches; }
    std::size_t num_updates() const {
        return std::max<std::size_t>(1, static_cast<std::size_t>(total_timesteps) / batch_size());
    }

    void validate() const {
        if (num_envs < 1 || num_steps < 1 || num_minibatches < 1 || update_epochs < 1) {
            throw ConfigError("num_envs, num_steps, n_minibatch and updt_epoch must be >= 1");
        }
        if (batch_size() % num_minibatches != 0) {
            throw ConfigError("num_envs * num_steps must be divisible by n_minibatch");
        }
        if (total_timesteps < 1) throw ConfigError("total_timesteps must be >= 1");
        if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
    }
};

inline json to_json(const PpoConfig& c) {
    return {{"total_timesteps", c.total_timesteps},
            {"num_envs", c.num_envs},
            {"num_steps", c.num_steps},
            {"n_minibatch", c.num_minibatches},
            {"updt_epoch", c.update_epochs},
            {"learning_rate", c.learning_rate},
            {"anneal_lr", c.anneal_lr},
            {"gamma", c.gamma},
            {"gae_lambda", c.gae_lambda},
            {"clip_coef", c.clip_coef},
            {"ent_coef", c.ent_coef},
            {"vf_coef", c.vf_coef},
            {"clip_vloss", c.clip_vloss},
            {"norm_adv", c.norm_adv},
            {"max_grad_norm", c.max_grad_norm},
            {"weights", c.weights.values()},
            {"wght_strat", strategy_name(c.strategy)},
            {"seed", c.seed},
            {"eval_freq", c.eval_freq},
            {"hidden", c.hidden}};
}


struct GaeResult {
    std::vector<double> advantages;  // [T][n_obj]
    std::vector<double> returns;     // [T][n_obj]
};

/// Per-objective GAE. `values` holds T+1 rows (the last is the bootstrap
/// value) and `dones` T+1 flags where dones[t] marks s_t as the first state
/// of a new episode.
inline GaeResult gae_vector(std::span<const double> rewards, std::span<const double> values,
                            std::span<const double> dones, std::size_t n_obj, double gamma, double lambda) {
    if (n_obj == 0 || rewards.size() % n_obj != 0) throw DimensionError("gae_vector: rewards shape");
    const std::size_t T = rewards.size() / n_obj;
    if (values.size() != (T + 1) * n_obj || dones.size() != T + 1) {
        throw DimensionError("gae_vector: values must have T+1 rows and dones T+1 entries");
    }
    GaeResult out;
    out.advantages.assign(T * n_obj, 0.0);
    out.returns.assign(T * n_obj, 0.0);
    for (std::size_t i = 0; i < n_obj; ++i) {
        double last = 0.0;
        for (std::size_t t = T; t-- > 0;) {
            const double nonterminal = 1.0 - dones[t + 1];
            const double delta = rewards[t * n_obj + i] + gamma * values[(t + 1) * n_obj + i] * nonterminal -
                                 values[t * n_obj + i];
            last = delta + gamma * lambda * nonterminal * last;
            out.advantages[t * n_obj + i] = last;
            out.returns[t * n_obj + i] = last + values[t * n_obj + i];
        }
    }
    return out;
}

/// (x - mean) / (std + 1e-8) with the unbiased standard deviation.
inline void standardize(std::span<double> x) {
    if (x.size() < 2) return;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(x.size() - 1));
    for (double& v : x) v = (v - mean) / (sd + 1e-8);
}

/// Rows of `adv` ([N][n_obj] flattened) to scalars. Chebyshev uses the
/// batch's componentwise maximum plus 0.1 as utopian point.
inline std::vector<double> scalarize_advantages(std::span<const double> adv, std::size_t n_obj,
                                                const pareto::WeightVector& w, WeightingStrategy strategy,
                                                bool norm_adv) {
    if (w.size() != n_obj) throw DimensionError("scalarize_advantages: weight length differs from n_obj");
    const std::size_t n = adv.size() / n_obj;
    std::vector<double> out(n);
    if (strategy == WeightingStrategy::Linear) {
        for (std::size_t r = 0; r < n; ++r) out[r] = pareto::scalarize_linear(adv.subspan(r * n_obj, n_obj), w);
    } else {
        pareto::UtopianPoint z{std::vector<double>(n_obj, -std::numeric_limits<double>::infinity())};
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t i = 0; i < n_obj; ++i) z.z_star[i] = std::max(z.z_star[i], adv[r * n_obj + i]);
        }
        for (double& zi : z.z_star) zi += 0.1;
        for (std::size_t r = 0; r < n; ++r) out[r] = pareto::scalarize_chebyshev(adv.subspan(r * n_obj, n_obj), w, z);
    }
    if (norm_adv) standardize(out);
    return out;
}

struct TrajectoryBatch {
    std::size_t num_envs = 0;
    std::size_t num_steps = 0;
    std::size_t n_obj = 0;
    std::size_t obs_dim = 0;
    // Row index = env * num_steps + step.
    std::vector<double> observations;  // [N][obs_dim]
    std::vector<std::size_t> actions;  // [N]
    std::vector<double> log_probs;     // [N]
    std::vector<double> rewards;       // [N][n_obj]
    std::vector<double> values;        // [N][n_obj]
    std::vector<double> dones;         // [N]; 1 when the row's state starts a new episode
    std::vector<double> bootstrap_values;  // [num_envs][n_obj]
    std::vector<double> next_dones;        // [num_envs]
    std::vector<double> advantages;    // [N][n_obj]
    std::vector<double> returns;       // [N][n_obj]

    std::size_t size() const { return num_envs * num_steps; }

    void resize(std::size_t envs, std::size_t steps, std::size_t objs, std::size_t obs) {
        num_envs = envs;
        num_steps = steps;
        n_obj = objs;
        obs_dim = obs;
        const std::size_t n = envs * steps;
        observations.assign(n * obs, 0.0);
        actions.assign(n, 0);
        log_probs.assign(n, 0.0);
        rewards.assign(n * objs, 0.0);
        values.assign(n * objs, 0.0);
        dones.assign(n, 0.0);
        bootstrap_values.assign(envs * objs, 0.0);
        next_dones.assign(envs, 0.0);
        advantages.assign(n * objs, 0.0);
        returns.assign(n * objs, 0.0);
    }

    std::span<const double> observation(std::size_t row) const {
        return std::span<const double>(observations).subspan(row * obs_dim, obs_dim);
    }
};

/// Runs gae_vector independently for each environment's segment.
inline void compute_advantages(TrajectoryBatch& b, double gamma, double lambda) {
    const std::size_t T = b.num_steps, m = b.n_obj;
    std::vector<double> values((T + 1) * m), dones(T + 1);
    for (std::size_t e = 0; e < b.num_envs; ++e) {
        const std::size_t base = e * T;
        std::copy_n(b.values.begin() + base * m, T * m, values.begin());
        std::copy_n(b.bootstrap_values.begin() + e * m, m, values.begin() + T * m);
        std::copy_n(b.dones.begin() + base, T, dones.begin());
        dones[T] = b.next_dones[e];
        auto g = gae_vector(std::span<const double>(b.rewards).subspan(base * m, T * m), values, dones, m, gamma,
                            lambda);
        std::copy(g.advantages.begin(), g.advantages.end(), b.advantages.begin() + base * m);
        std::copy(g.returns.begin(), g.returns.end(), b.returns.begin() + base * m);
    }
}

struct LossStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double approx_kl = 0.0;
    double clip_fraction = 0.0;
    double grad_norm = 0.0;
};

/// Clipped PPO loss over one minibatch, summed across value heads.
class PpoLoss {
  public:
    PpoLoss(const TrajectoryBatch& batch, std::span<const std::size_t> rows, std::span<const double> adv_hat,
            const PpoConfig& cfg)
        : b_(batch), rows_(rows), adv_(adv_hat), cfg_(cfg) {}

    std::size_t size() const { return rows_.size(); }
    std::span<const double> input(std::size_t i) const { return b_.observation(rows_[i]); }

    double evaluate(std::size_t i, std::span<const double> logits, std::span<const double> values,
                    std::span<double> dlogits, std::span<double> dvalues) {
        const std::size_t row = rows_[i];
        const double inv_m = 1.0 / static_cast<double>(rows_.size());
        const std::size_t a = b_.actions[row];

        const double lse = nn::log_sum_exp(logits);
        const double logp = logits[a] - lse;
        const double logratio = logp - b_.log_probs[row];
        const double ratio = std::exp(logratio);
        const double adv = adv_[i];
        const double pg1 = -adv * ratio;
        const double pg2 = -adv * std::clamp(ratio, 1.0 - cfg_.clip_coef, 1.0 + cfg_.clip_coef);
        const double pg = std::max(pg1, pg2);
        const double dpg_dlogp = pg1 >= pg2 ? -adv * ratio : 0.0;

        double entropy = 0.0;
        for (double l : logits) {
            const double lp = l - lse;
            entropy -= std::exp(lp) * lp;
        }

        for (std::size_t k = 0; k < logits.size(); ++k) {
            const double lp = logits[k] - lse;
            const double p = std::exp(lp);
            const double onehot = k == a ? 1.0 : 0.0;
            dlogits[k] += dpg_dlogp * inv_m * (onehot - p) + cfg_.ent_coef * inv_m * p * (lp + entropy);
        }

        double vloss = 0.0;
        for (std::size_t j = 0; j < b_.n_obj; ++j) {
            const double v = values[j];
            const double ret = b_.returns[row * b_.n_obj + j];
            const double unclipped = (v - ret) * (v - ret);
            double term = unclipped;
            double dterm = 2.0 * (v - ret);
            if (cfg_.clip_vloss) {
                const double old = b_.values[row * b_.n_obj + j];
                const double diff = v - old;
                const double vc = old + std::clamp(diff, -cfg_.clip_coef, cfg_.clip_coef);
                const double clipped = (vc - ret) * (vc - ret);
                if (clipped > unclipped) {
                    term = clipped;
                    dterm = std::abs(diff) < cfg_.clip_coef ? 2.0 * (vc - ret) : 0.0;
                }
            }
            vloss += 0.5 * term * inv_m;
            dvalues[j] += cfg_.vf_coef * 0.5 * dterm * inv_m;
        }

        const double pg_term = pg * inv_m;
        const double ent_term = entropy * inv_m;
        policy_ += pg_term;
        value_ += vloss;
        entropy_ += ent_term;
        kl_ += ((ratio - 1.0) - logratio) * inv_m;
        if (std::abs(ratio - 1.0) > cfg_.clip_coef) clipped_ += inv_m;
        return pg_term + cfg_.vf_coef * vloss - cfg_.ent_coef * ent_term;
    }

    std::vector<std::pair<std::string, double>> terms() const {
        return {{"policy", policy_}, {"value", value_}, {"entropy", entropy_}};
    }

    LossStats stats() const { return {policy_, value_, entropy_, kl_, clipped_, 0.0}; }

  private:
    const TrajectoryBatch& b_;
    std::span<const std::size_t> rows_;
    std::span<const double> adv_;
    const PpoConfig& cfg_;
    double policy_ = 0.0, value_ = 0.0, entropy_ = 0.0, kl_ = 0.0, clipped_ = 0.0;
};

/// Scalarised, standardised advantages for a set of batch rows.
inline std::vector<double> minibatch_advantages(const TrajectoryBatch& b, std::span<const std::size_t> rows,
                                                const PpoConfig& cfg) {
    std::vector<double> adv(rows.size() * b.n_obj);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy_n(b.advantages.begin() + rows[i] * b.n_obj, b.n_obj, adv.begin() + i * b.n_obj);
    }
    return scalarize_advantages(adv, b.n_obj, cfg.weights, cfg.strategy, cfg.norm_adv);
}

/// Loss and gradient of one minibatch.
inline double minibatch_gradient(const nn::Mlp& net, std::span<const double> params, const TrajectoryBatch& b,
                                 std::span<const std::size_t> rows, const PpoConfig& cfg, std::span<double> grad,
                                 LossStats* stats = nullptr) {
    const auto adv = minibatch_advantages(b, rows, cfg);
    PpoLoss loss(b, rows, adv, cfg);
    const double total = net.loss_and_grad(params, loss, grad);
    if (stats) *stats = loss.stats();
    return total;
}

/// update_epochs passes over shuffled minibatches, one optimiser step each.
/// Returns statistics averaged over all minibatches.
inline LossStats ppo_update(const nn::Mlp& net, nn::Params& params, nn::OptState& opt, const TrajectoryBatch& batch,
                            const PpoConfig& cfg, Rng& rng) {
    const std::size_t n = batch.size();
    const std::size_t mb = n / cfg.num_minibatches;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> grad(params.size());
    LossStats acc;
    std::size_t count = 0;
    for (std::size_t epoch = 0; epoch < cfg.update_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start + mb <= n; start += mb) {
            std::span<const std::size_t> rows(order.data() + start, mb);
            LossStats s;
            minibatch_gradient(net, params, batch, rows, cfg, grad, &s);
            s.grad_norm = nn::opt_step(params, grad, opt);
            acc.policy_loss += s.policy_loss;
            acc.value_loss += s.value_loss;
            acc.entropy += s.entropy;
            acc.approx_kl += s.approx_kl;
            acc.clip_fraction += s.clip_fraction;
            acc.grad_norm += s.grad_norm;
            ++count;
        }
    }
    const double k = static_cast<double>(std::max<std::size_t>(count, 1));
    acc.policy_loss /= k;
    acc.value_loss /= k;
    acc.entropy /= k;
    acc.approx_kl /= k;
    acc.clip_fraction /= k;
    acc.grad_norm /= k;
    return acc;
}

/// Learning rate for update `u` of `total` when annealing: linear from lr to
/// exactly 0 at the final update.
inline double annealed_lr(double lr, std::size_t u, std::size_t total) {
    if (total <= 1) return lr;
    return lr * (1.0 - static_cast<double>(u) / static_cast<double>(total - 1));
}

/// Returns of one finished training episode.
struct EpisodeStats {
    std::vector<double> discounted;
    std::vector<double> undiscounted;
    std::optional<RewardComponents> discounted_components;
};

/// num_envs environments advanced in lock step, each with its own seeds.
template <VectorEnv Env>
class RolloutCollector {
  public:
    using Episode = EpisodeStats;

    template <class Factory>
    RolloutCollector(Factory&& make_env, const PpoConfig& cfg) : cfg_(cfg) {
        for (std::size_t e = 0; e < cfg.num_envs; ++e) {
            envs_.push_back(make_env());
            rngs_.push_back(make_rng(cfg.seed, 1000 + e));
        }
        n_obj_ = envs_.front().num_objectives();
        obs_.resize(cfg.num_envs);
        next_done_.assign(cfg.num_envs, 0.0);
        episode_index_.assign(cfg.num_envs, 0);
        running_.resize(cfg.num_envs);
        for (std::size_t e = 0; e < cfg.num_envs; ++e) start_episode(e);
    }

    const Env& env(std::size_t e = 0) const { return envs_[e]; }
    std::size_t n_obj() const { return n_obj_; }

    void collect(const nn::Mlp& net, std::span<const double> params, TrajectoryBatch& b) {
        const std::size_t T = cfg_.num_steps;
        b.resize(cfg_.num_envs, T, n_obj_, envs_.front().observation_size());
        nn::Workspace ws;
        for (std::size_t e = 0; e < cfg_.num_envs; ++e) {
            for (std::size_t s = 0; s < T; ++s) {
                const std::size_t row = e * T + s;
                std::copy(obs_[e].begin(), obs_[e].end(), b.observations.begin() + row * b.obs_dim);
                b.dones[row] = next_done_[e];
                net.forward(params, obs_[e], ws);
                const std::size_t a = nn::sample_categorical(ws.logits, rngs_[e]);
                b.actions[row] = a;
                b.log_probs[row] = ws.logits[a] - nn::log_sum_exp(ws.logits);
                std::copy(ws.values.begin(), ws.values.end(), b.values.begin() + row * n_obj_);

                auto r = envs_[e].step(a);
                std::copy(r.reward.begin(), r.reward.end(), b.rewards.begin() + row * n_obj_);
                track(e, r);
                obs_[e] = std::move(r.observation);
                next_done_[e] = r.done ? 1.0 : 0.0;
                if (r.done) {
                    finished_.push_back(std::move(running_[e].ep));
                    start_episode(e);
                }
            }
            net.forward(params, obs_[e], ws);
            std::copy(ws.values.begin(), ws.values.end(), b.bootstrap_values.begin() + e * n_obj_);
            b.next_dones[e] = next_done_[e];
        }
    }

    /// Episodes completed since the last call.
    std::vector<Episode> take_finished() { return std::exchange(finished_, {}); }

  private:
    struct Running {
        Episode ep;
        double discount = 1.0;
    };

    void start_episode(std::size_t e) {
        obs_[e] = envs_[e].reset(mix_seed(mix_seed(cfg_.seed, e), episode_index_[e]++));
        running_[e] = Running{};
        running_[e].ep.discounted.assign(n_obj_, 0.0);
        running_[e].ep.undiscounted.assign(n_obj_, 0.0);
    }

    template <class R>
    void track(std::size_t e, const R& r) {
        auto& run = running_[e];
        for (std::size_t i = 0; i < n_obj_; ++i) {
            run.ep.discounted[i] += run.discount * r.reward[i];
            run.ep.undiscounted[i] += r.reward[i];
        }
        if constexpr (HasComponents<R>) {
            if (!run.ep.discounted_components) run.ep.discounted_components = RewardComponents{};
            auto& c = *run.ep.discounted_components;
            c.red_access += run.discount * r.components.red_access;
            c.red_impact += run.discount * r.components.red_impact;
            c.restore_cost += run.discount * r.components.restore_cost;
            c.green_ports += run.discount * r.components.green_ports;
        }
        run.discount *= cfg_.gamma;
    }

    const PpoConfig& cfg_;
    std::vector<Env> envs_;
    std::vector<Rng> rngs_;
    std::vector<Observation> obs_;
    std::vector<double> next_done_;
    std::vector<std::uint64_t> episode_index_;
    std::vector<Running> running_;
    std::vector<Episode> finished_;
    std::size_t n_obj_ = 1;
};

struct TrainResult {
    PolicyCheckpoint checkpoint;
    std::vector<json> metrics;
};

struct TrainingAborted : NumericError {
    TrainingAborted(const std::string& what, TrainResult partial)
        : NumericError(what), partial(std::move(partial)) {}
    TrainResult partial;
};

inline nn::NetSpec policy_spec(std::size_t obs_dim, std::size_t num_actions, std::size_t n_obj,
                               const std::vector<std::size_t>& hidden) {
    nn::NetSpec s;
    s.input_dim = obs_dim;
    s.hidden = hidden;
    s.policy_out = num_actions;
    s.value_heads = n_obj;
    return s;
}

namespace detail {

inline json metrics_line(const std::vector<EpisodeStats>& eps,
                         std::size_t n_obj, const pareto::WeightVector& w) {
    std::vector<std::vector<double>> disc, undisc;
    for (const auto& e : eps) {
        disc.push_back(e.discounted);
        undisc.push_back(e.undiscounted);
    }
    std::vector<double> mean, sd, umean, usd;
    mean_std(disc, mean, sd);
    mean_std(undisc, umean, usd);
    if (mean.empty()) {
        mean.assign(n_obj, 0.0);
        sd = umean = usd = mean;
    }
    double sum = 0.0;
    for (double m : mean) sum += m;
    json j = {{"episodes", eps.size()},
              {"mean_return", mean},
              {"std_return", sd},
              {"mean_return_undiscounted", umean},
              {"scalarized_return", pareto::scalarize_linear(mean, w)},
              {"return_sum", sum}};
    if (!eps.empty() && eps.front().discounted_components) {
        RewardComponents c;
        for (const auto& e : eps) {
            c.red_access += e.discounted_components->red_access;
            c.red_impact += e.discounted_components->red_impact;
            c.restore_cost += e.discounted_components->restore_cost;
            c.green_ports += e.discounted_components->green_ports;
        }
        const double k = static_cast<double>(eps.size());
        j["components"] = {{"c1", c.red_access / k},
                           {"c2", c.red_impact / k},
                           {"c3", c.restore_cost / k},
                           {"c4", c.green_ports / k}};
    }
    return j;
}

}  // namespace detail

/// Full training run: rollout, GAE, update, until total_timesteps. Emits one
/// metrics line each time global_step crosses a multiple of eval_freq and
/// after the final update.
template <class Factory>
TrainResult train(const PpoConfig& cfg, Factory&& make_env,
                  const std::function<void(const json&)>& on_metric = {}) {
    cfg.validate();
    using Env = std::decay_t<decltype(make_env())>;
    static_assert(VectorEnv<Env>);
    RolloutCollector<Env> collector(make_env, cfg);
    const Env& probe = collector.env();
    const std::size_t n_obj = probe.num_objectives();
    if (cfg.weights.size() != n_obj) {
        throw ConfigError("weights have " + std::to_string(cfg.weights.size()) + " entries but the game has " +
                          std::to_string(n_obj) + " objectives");
    }
    nn::Mlp net(policy_spec(probe.observation_size(), probe.num_actions(), n_obj, cfg.hidden));

    TrainResult result;
    auto& ck = result.checkpoint;
    ck.trainer = "moppo";
    ck.spec = net.spec();
    ck.n_obj = n_obj;
    ck.seed = cfg.seed;
    ck.weights = cfg.weights.values();
    ck.strategy = strategy_name(cfg.strategy);
    ck.config_hash = config_hash(to_json(cfg));
    ck.params = net.init(cfg.seed);

    nn::OptState opt = nn::OptState::for_params(net.num_params(), cfg.learning_rate, cfg.max_grad_norm);
    Rng shuffle_rng = make_rng(cfg.seed, 7);
    TrajectoryBatch batch;
    const std::size_t updates = cfg.num_updates();
    long global_step = 0;
    long next_log = cfg.eval_freq > 0 ? cfg.eval_freq : std::numeric_limits<long>::max();
    std::vector<EpisodeStats> window;

    for (std::size_t u = 0; u < updates; ++u) {
        opt.learning_rate = cfg.anneal_lr ? annealed_lr(cfg.learning_rate, u, updates) : cfg.learning_rate;
        LossStats stats;
        try {
            collector.collect(net, ck.params, batch);
            compute_advantages(batch, cfg.gamma, cfg.gae_lambda);
            stats = ppo_update(net, ck.params, opt, batch, cfg, shuffle_rng);
        } catch (const std::exception& e) {
            ck.partial = true;
            throw TrainingAborted("update " + std::to_string(u) + " at global_step " + std::to_string(global_step) +
                                      ": " + e.what(),
                                  result);
        }
        global_step += static_cast<long>(batch.size());
        for (auto& ep : collector.take_finished()) window.push_back(std::move(ep));
        if (global_step >= next_log || u + 1 == updates) {
            json line = detail::metrics_line(window, n_obj, cfg.weights);
            line["global_step"] = global_step;
            line["update"] = u + 1;
            line["learning_rate"] = opt.learning_rate;
            line["policy_loss"] = stats.policy_loss;
            line["value_loss"] = stats.value_loss;
            line["entropy"] = stats.entropy;
            line["approx_kl"] = stats.approx_kl;
            line["clip_fraction"] = stats.clip_fraction;
            line["grad_norm"] = stats.grad_norm;
            if (on_metric) on_metric(line);
            result.metrics.push_back(std::move(line));
            window.clear();
            while (next_log <= global_step) next_log += cfg.eval_freq > 0 ? cfg.eval_freq : 1;
        }
    }
    return result;
}

struct SweepMember {
    double w_green = 0.0;
    pareto::WeightVector weights;
    TrainResult training;
    EvalSummary summary;
    std::string tag;
};

struct SweepOptions {
    std::size_t eval_episodes = 1000;
    std::uint64_t eval_seed = 12345;
    bool greedy = false;
    double gamma = 0.99;  // for the discounted columns
};

/// Weight grid on the second (green) objective: 0, 1/steps, ..., 1.
inline std::vector<pareto::WeightVector> default_sweep_weights(int steps = 10) {
    std::vector<pareto::WeightVector> out;
    for (int k = 0; k <= steps; ++k) {
        const double g = static_cast<double>(k) / steps;
        out.emplace_back(std::vector<double>{1.0 - g, g});
    }
    return out;
}

inline std::string sweep_tag(double w_green, WeightingStrategy s) {
    return "w_green=" + fmt6(w_green) + ";" + strategy_name(s);
}

struct SweepAborted : std::runtime_error {
    SweepAborted(const std::string& what, std::vector<SweepMember> done)
        : std::runtime_error(what), completed(std::move(done)) {}
    std::vector<SweepMember> completed;
};

/// One policy per weight vector, each trained from the same base seed and
/// evaluated with the harness. Points are returned un-pruned.
template <class Factory>
std::vector<SweepMember> weight_sweep(const PpoConfig& base, Factory&& make_env,
                                      const std::vector<pareto::WeightVector>& weights, const SweepOptions& opts,
                                      const std::function<void(const SweepMember&)>& on_member = {}) {
    if (weights.empty()) throw ConfigError("weight sweep needs at least one weight vector");
    std::vector<SweepMember> members;
    for (const auto& w : weights) {
        SweepMember m;
        m.weights = w;
        m.w_green = w.size() > 1 ? w[1] : 0.0;
        m.tag = sweep_tag(m.w_green, base.strategy);
        try {
            PpoConfig cfg = base;
            cfg.weights = w;
            m.training = train(cfg, make_env);
            auto env = make_env();
            MoppoAgent agent = MoppoAgent::from_checkpoint(m.training.checkpoint, opts.greedy, m.tag);
            m.summary = evaluate(agent, env, opts.eval_episodes, opts.eval_seed, opts.gamma);
            m.summary.tag = m.tag;
        } catch (const std::exception& e) {
            throw SweepAborted("sweep member " + m.tag + " failed: " + e.what(), std::move(members));
        }
        if (on_member) on_member(m);
        members.push_back(std::move(m));
    }
    return members;
}

inline std::vector<FrontRow> front_rows(const std::vector<SweepMember>& members, WeightingStrategy s) {
    std::vector<FrontRow> rows;
    for (const auto& m : members) rows.push_back({m.w_green, m.summary, strategy_name(s), m.tag});
    return rows;
}

}  // namespace acd::moppo
