#pragma once

// Training comparison driver: single-objective PPO on the summed reward
// against equal-weight MOPPO on the split reward, over several seeds.

#include <acd/evalharness.hpp>
#include <acd/momdp_env.hpp>
#include <acd/moppo.hpp>

#include <json.hpp>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace acd::experiments {

struct Curve {
    std::string name;
    std::vector<long> steps;
    std::vector<double> mean;
    std::vector<double> std;
};

inline json to_json(const Curve& c) {
    return {{"name", c.name}, {"global_step", c.steps}, {"mean", c.mean}, {"std", c.std}};
}

struct Experiment1Config {
    moppo::PpoConfig ppo;  // weights and seed are overridden per arm and run
    EnvConfig env;         // game is overridden per arm
    std::size_t seeds = 5;
    std::uint64_t base_seed = 1;
    std::size_t eval_episodes = 200;
    std::uint64_t eval_seed = 12345;
};

struct ArmResult {
    Curve total;                    // discounted return in summed-reward units
    std::vector<Curve> objectives;  // per objective of the arm's game
    std::vector<Curve> components;  // c1..c4
    std::vector<double> terminal;   // per seed, final evaluation, summed units
    double terminal_mean = 0.0;
    double terminal_std = 0.0;
    std::optional<long> steps_to_90;
};

struct Experiment1Report {
    ArmResult ppo;
    ArmResult moppo;
    double terminal_difference = 0.0;  // moppo - ppo
    double terminal_percent = 0.0;     // difference relative to |ppo|
    bool moppo_at_least_ppo = false;
};

/// Mean and population std across runs at each logged index.
inline Curve aggregate(const std::string& name, const std::vector<long>& steps,
                       const std::vector<std::vector<double>>& per_run) {
    Curve c;
    c.name = name;
    c.steps = steps;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        std::vector<std::vector<double>> col;
        for (const auto& run : per_run) col.push_back({run[i]});
        std::vector<double> m, s;
        mean_std(col, m, s);
        c.mean.push_back(m[0]);
        c.std.push_back(s[0]);
    }
    return c;
}

/// First logged step at which the curve has covered 90% of its climb from
/// the first logged value to the last. A flat or falling curve reports the
/// first step.
inline std::optional<long> steps_to_fraction(const Curve& c, double fraction = 0.9) {
    if (c.mean.empty()) return std::nullopt;
    const double start = c.mean.front();
    const double climb = c.mean.back() - start;
    if (climb <= 0.0) return c.steps.front();
    for (std::size_t i = 0; i < c.mean.size(); ++i) {
        if (c.mean[i] - start >= fraction * climb) return c.steps[i];
    }
    return c.steps.back();
}

namespace detail {

inline double total_of(const json& line) { return line.at("return_sum").get<double>(); }

inline ArmResult run_arm(const Experiment1Config& cfg, Game game, const std::string& label) {
    EnvConfig env_cfg = cfg.env;
    env_cfg.game.game = game;
    const std::size_t n_obj = num_objectives(game);
    auto make_env = [&] { return CyberDefenceEnv(env_cfg); };

    std::vector<long> steps;
    std::vector<std::vector<double>> totals;
    std::vector<std::vector<std::vector<double>>> objectives(n_obj);
    std::vector<std::vector<std::vector<double>>> components(4);
    ArmResult arm;
    for (std::size_t k = 0; k < cfg.seeds; ++k) {
        moppo::PpoConfig pc = cfg.ppo;
        pc.seed = cfg.base_seed + k;
        pc.weights = pareto::WeightVector(std::vector<double>(n_obj, 1.0));
        pc.gamma = env_cfg.game.gamma;
        const auto result = moppo::train(pc, make_env);

        std::vector<long> run_steps;
        std::vector<double> run_total;
        std::vector<std::vector<double>> run_obj(n_obj), run_comp(4);
        for (const auto& line : result.metrics) {
            run_steps.push_back(line.at("global_step").get<long>());
            run_total.push_back(total_of(line));
            const auto mean = line.at("mean_return").get<std::vector<double>>();
            for (std::size_t i = 0; i < n_obj; ++i) run_obj[i].push_back(mean[i]);
            const auto& comp = line.at("components");
            const char* keys[] = {"c1", "c2", "c3", "c4"};
            for (std::size_t i = 0; i < 4; ++i) run_comp[i].push_back(comp.at(keys[i]).get<double>());
        }
        if (k == 0) steps = run_steps;
        if (run_steps != steps) throw NumericError("runs logged at different steps");
        totals.push_back(std::move(run_total));
        for (std::size_t i = 0; i < n_obj; ++i) objectives[i].push_back(std::move(run_obj[i]));
        for (std::size_t i = 0; i < 4; ++i) components[i].push_back(std::move(run_comp[i]));

        auto env = make_env();
        MoppoAgent agent = MoppoAgent::from_checkpoint(result.checkpoint, false, label);
        const auto summary = evaluate(agent, env, cfg.eval_episodes, cfg.eval_seed, env_cfg.game.gamma);
        double total = 0.0;
        for (double m : summary.discounted_mean) total += m;
        arm.terminal.push_back(total);
    }

    arm.total = aggregate(label + ":total", steps, totals);
    for (std::size_t i = 0; i < n_obj; ++i) {
        arm.objectives.push_back(aggregate(label + ":obj" + std::to_string(i), steps, objectives[i]));
    }
    const char* names[] = {"c1", "c2", "c3", "c4"};
    for (std::size_t i = 0; i < 4; ++i) arm.components.push_back(aggregate(label + ":" + names[i], steps, components[i]));
    std::vector<std::vector<double>> col;
    for (double t : arm.terminal) col.push_back({t});
    std::vector<double> m, s;
    mean_std(col, m, s);
    arm.terminal_mean = m[0];
    arm.terminal_std = s[0];
    arm.steps_to_90 = steps_to_fraction(arm.total);
    return arm;
}

}  // namespace detail

inline Experiment1Report run_experiment_1(const Experiment1Config& cfg) {
    if (cfg.seeds < 1) throw ConfigError("experiment needs at least one seed");
    Experiment1Report r;
    r.ppo = detail::run_arm(cfg, Game::A, "ppo");
    r.moppo = detail::run_arm(cfg, Game::B, "moppo");
    r.terminal_difference = r.moppo.terminal_mean - r.ppo.terminal_mean;
    r.terminal_percent = r.ppo.terminal_mean != 0.0 ? 100.0 * r.terminal_difference / std::abs(r.ppo.terminal_mean) : 0.0;
    r.moppo_at_least_ppo = r.moppo.terminal_mean >= r.ppo.terminal_mean;
    return r;
}

inline json to_json(const ArmResult& a) {
    json obj = json::array(), comp = json::array();
    for (const auto& c : a.objectives) obj.push_back(to_json(c));
    for (const auto& c : a.components) comp.push_back(to_json(c));
    return {{"total", to_json(a.total)},
            {"objectives", obj},
            {"components", comp},
            {"terminal", a.terminal},
            {"terminal_mean", a.terminal_mean},
            {"terminal_std", a.terminal_std},
            {"steps_to_90", a.steps_to_90 ? json(*a.steps_to_90) : json(nullptr)}};
}

inline json to_json(const Experiment1Report& r) {
    return {{"ppo", to_json(r.ppo)},
            {"moppo", to_json(r.moppo)},
            {"terminal_difference", r.terminal_difference},
            {"terminal_percent", r.terminal_percent},
            {"moppo_at_least_ppo", r.moppo_at_least_ppo}};
}

}  // namespace acd::experiments
