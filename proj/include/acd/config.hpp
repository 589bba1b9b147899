#pragma once

// Run configuration: one JSON object whose keys reuse the hyperparameter
// names of the published PPO/PCN blocks, so those blocks paste in almost
// verbatim. Unknown keys are rejected by name.

#include <acd/common.hpp>
#include <acd/momdp_env.hpp>
#include <acd/moppo.hpp>
#include <acd/pcn.hpp>

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <vector>

namespace acd::config {

enum class Trainer { Ppo, Pcn };

struct EvalBlock {
    std::size_t episodes = 1000;
    std::uint64_t seed = 12345;
    bool greedy = false;
};

struct RunConfig {
    EnvConfig env;
    moppo::PpoConfig ppo;
    pcn::PcnConfig pcn;
    EvalBlock eval;
    int sweep_steps = 10;
    std::vector<std::uint64_t> seeds;  // multi-seed drivers; empty = {seed}
    std::string out = "runs";
    json source = json::object();  // the config as read, for the manifest
};

/// Keys from the published blocks that no operation consumes. Accepted so
/// those blocks load unchanged; ignored otherwise.
inline const std::set<std::string>& inert_keys() {
    static const std::set<std::string> k{"num_episodes", "steps_per_iteration", "project_name", "experiment_name"};
    return k;
}

inline Game parse_game_value(const json& v) {
    if (v.is_number_integer()) {
        switch (v.get<int>()) {
        case 0: return Game::A;
        case 1: return Game::B;
        case 6: return Game::C;
        default: throw ConfigError("game: integer code must be 0 (A), 1 (B) or 6 (C)");
        }
    }
    return parse_game(v.get<std::string>());
}

/// Accepts either a JSON array of points or a string holding one.
inline std::vector<pareto::ParetoPoint> parse_front_value(const json& v) {
    const json arr = v.is_string() ? json::parse(v.get<std::string>()) : v;
    std::vector<pareto::ParetoPoint> out;
    for (std::size_t i = 0; i < arr.size(); ++i) out.push_back({arr[i].get<std::vector<double>>(), std::to_string(i)});
    return out;
}

/// "1,1,0.1" or [1,1,0.1].
inline std::vector<double> parse_number_list(const json& v) {
    if (!v.is_string()) return v.get<std::vector<double>>();
    std::vector<double> out;
    for (const auto& part : pareto::split_csv_line(v.get<std::string>())) out.push_back(std::stod(part));
    return out;
}

namespace detail {

template <class T>
T get(const json& v, const std::string& key) {
    try {
        return v.get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("key '" + key + "': " + e.what());
    }
}

// Integer-valued keys may arrive as 50000.0 in pasted blocks.
inline long get_count(const json& v, const std::string& key) {
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d != std::floor(d) || d < 0) throw ConfigError("key '" + key + "' must be a non-negative integer");
        return static_cast<long>(d);
    }
    return get<long>(v, key);
}

inline bool apply_env_key(EnvConfig& e, const std::string& k, const json& v) {
    if (k == "scenario") e.sim.scenario = sim::parse_scenario(get<std::string>(v, k));
    else if (k == "redagenttype") e.sim.red_mode = sim::parse_red_mode(get<std::string>(v, k));
    else if (k == "game") e.game.game = parse_game_value(v);
    else if (k == "baseline_ports") e.sim.baseline_ports = get<int>(v, k);
    else if (k == "max_ports") e.sim.max_ports = get<int>(v, k);
    else if (k == "episode_length") e.game.episode_length = get<int>(v, k);
    else if (k == "green_subgroup") {
        e.sim.green_subgroup.clear();
        for (const auto& n : v) {
            auto h = sim::parse_host(get<std::string>(n, k));
            if (!h) throw ConfigError("key 'green_subgroup': unknown host '" + n.get<std::string>() + "'");
            e.sim.green_subgroup.push_back(*h);
        }
    } else return false;
    return true;
}

inline bool apply_ppo_key(moppo::PpoConfig& c, const std::string& k, const json& v) {
    if (k == "total_timesteps") c.total_timesteps = get_count(v, k);
    else if (k == "num_envs") c.num_envs = static_cast<std::size_t>(get_count(v, k));
    else if (k == "num_steps") c.num_steps = static_cast<std::size_t>(get_count(v, k));
    else if (k == "n_minibatch") c.num_minibatches = static_cast<std::size_t>(get_count(v, k));
    else if (k == "updt_epoch") c.update_epochs = static_cast<std::size_t>(get_count(v, k));
    else if (k == "learning_rate") c.learning_rate = get<double>(v, k);
    else if (k == "anneal_lr") c.anneal_lr = get<bool>(v, k);
    else if (k == "gamma") c.gamma = get<double>(v, k);
    else if (k == "gae_lambda") c.gae_lambda = get<double>(v, k);
    else if (k == "clip_coef") c.clip_coef = get<double>(v, k);
    else if (k == "ent_coef") c.ent_coef = get<double>(v, k);
    else if (k == "vf_coef") c.vf_coef = get<double>(v, k);
    else if (k == "clip_vloss") c.clip_vloss = get<bool>(v, k);
    else if (k == "norm_adv") c.norm_adv = get<bool>(v, k);
    else if (k == "max_grad_norm") c.max_grad_norm = get<double>(v, k);
    else if (k == "weights") c.weights = pareto::WeightVector(parse_number_list(v));
    else if (k == "wght_strat") c.strategy = moppo::parse_strategy(get<std::string>(v, k));
    else if (k == "seed") c.seed = static_cast<std::uint64_t>(get_count(v, k));
    else if (k == "eval_freq") c.eval_freq = get_count(v, k);
    else if (k == "hidden") c.hidden = get<std::vector<std::size_t>>(v, k);
    else if (k == "target_kl") {
        if (!v.is_null()) throw ConfigError("key 'target_kl': early stopping on KL is not supported; use null");
    } else if (k == "gae") {
        if (!get<bool>(v, k)) throw ConfigError("key 'gae': only GAE advantages are supported");
    } else return false;
    return true;
}

inline bool apply_pcn_key(pcn::PcnConfig& c, const std::string& k, const json& v) {
    if (k == "total_timesteps") c.total_timesteps = get_count(v, k);
    else if (k == "batch_size") c.batch_size = static_cast<std::size_t>(get_count(v, k));
    else if (k == "max_buffer_size") c.max_buffer_size = static_cast<std::size_t>(get_count(v, k));
    else if (k == "num_er_episodes") c.num_er_episodes = static_cast<std::size_t>(get_count(v, k));
    else if (k == "num_step_episodes") c.num_step_episodes = static_cast<std::size_t>(get_count(v, k));
    else if (k == "num_model_updates") c.num_model_updates = static_cast<std::size_t>(get_count(v, k));
    else if (k == "learning_rate") c.learning_rate = get<double>(v, k);
    else if (k == "gamma") c.gamma = get<double>(v, k);
    else if (k == "hidden_dim") c.hidden_dim = static_cast<std::size_t>(get_count(v, k));
    else if (k == "noise") c.noise = get<double>(v, k);
    else if (k == "scaling_factor") c.scaling_factor = parse_number_list(v);
    else if (k == "ref_point") c.ref_point = parse_number_list(v);
    else if (k == "max_return") c.max_return = parse_number_list(v);
    else if (k == "num_points_pf") c.num_points_pf = static_cast<std::size_t>(get_count(v, k));
    else if (k == "max_steps") c.max_steps = static_cast<std::size_t>(get_count(v, k));
    else if (k == "seed") c.seed = static_cast<std::uint64_t>(get_count(v, k));
    else if (k == "eval_freq") c.eval_freq = get_count(v, k);
    else if (k == "eval_seed") c.eval_seed = static_cast<std::uint64_t>(get_count(v, k));
    else if (k == "known_pareto_front") c.warm_start = parse_front_value(v);
    else return false;
    return true;
}

inline void apply_eval_block(EvalBlock& e, const json& block) {
    for (const auto& [k, v] : block.items()) {
        if (k == "episodes") e.episodes = static_cast<std::size_t>(get_count(v, "eval." + k));
        else if (k == "seed") e.seed = static_cast<std::uint64_t>(get_count(v, "eval." + k));
        else if (k == "greedy") e.greedy = get<bool>(v, "eval." + k);
        else throw ConfigError("unknown key 'eval." + k + "'");
    }
}

}  // namespace detail

/// The environment and trainer defaults before any file is read: the PPO
/// block's scenario, red agent and game for PPO runs; the PCN block's for
/// PCN runs.
inline RunConfig default_config(Trainer t) {
    RunConfig rc;
    rc.env.sim.scenario = sim::Scenario::Modified9u6e;
    if (t == Trainer::Ppo) {
        rc.env.sim.red_mode = sim::RedMode::BLine;
        rc.env.game.game = Game::A;
    } else {
        rc.env.sim.red_mode = sim::RedMode::Meander;
        rc.env.game.game = Game::C;
    }
    return rc;
}

/// Flat keys go to the environment, then to the selected trainer; nested
/// "ppo", "pcn" and "eval" blocks are also accepted.
inline RunConfig parse_config(const json& j, Trainer t) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig rc = default_config(t);
    rc.source = j;
    auto apply_trainer = [&](const std::string& k, const json& v, Trainer which) {
        return which == Trainer::Ppo ? detail::apply_ppo_key(rc.ppo, k, v) : detail::apply_pcn_key(rc.pcn, k, v);
    };
    for (const auto& [k, v] : j.items()) {
        if (k == "ppo" || k == "pcn") {
            const Trainer which = k == "ppo" ? Trainer::Ppo : Trainer::Pcn;
            for (const auto& [kk, vv] : v.items()) {
                if (!apply_trainer(kk, vv, which) && !inert_keys().contains(kk)) {
                    throw ConfigError("unknown key '" + k + "." + kk + "'");
                }
            }
        } else if (k == "eval") {
            detail::apply_eval_block(rc.eval, v);
        } else if (k == "out") {
            rc.out = detail::get<std::string>(v, k);
        } else if (k == "seeds") {
            rc.seeds = detail::get<std::vector<std::uint64_t>>(v, k);
        } else if (k == "sweep_steps") {
            rc.sweep_steps = detail::get<int>(v, k);
            if (rc.sweep_steps < 1) throw ConfigError("key 'sweep_steps' must be >= 1");
        } else if (detail::apply_env_key(rc.env, k, v)) {
        } else if (apply_trainer(k, v, t)) {
        } else if (!inert_keys().contains(k)) {
            throw ConfigError("unknown key '" + k + "'");
        }
    }
    if (t == Trainer::Ppo) rc.env.game.gamma = rc.ppo.gamma;
    if (rc.eval.episodes < 1) throw ConfigError("key 'eval.episodes' must be >= 1");
    return rc;
}

inline json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("config '" + path + "' not found");
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

/// Everything needed to re-run: the resolved configuration, seeds, argv.
inline json manifest(const RunConfig& rc, Trainer t, const std::vector<std::string>& argv) {
    const json resolved = {{"env", to_json(rc.env)},
                           {"trainer", t == Trainer::Ppo ? moppo::to_json(rc.ppo) : pcn::to_json(rc.pcn)},
                           {"eval", {{"episodes", rc.eval.episodes}, {"seed", rc.eval.seed}, {"greedy", rc.eval.greedy}}},
                           {"sweep_steps", rc.sweep_steps},
                           {"seeds", rc.seeds}};
    return {{"tool", "acd"},
            {"version", "1.0.0"},
            {"argv", argv},
            {"config", rc.source},
            {"resolved", resolved},
            {"config_hash", config_hash(resolved)}};
}

}  // namespace acd::config
