// Command-line entry point: trainers, evaluation, rollouts, front pruning,
// the steering server and the training comparison driver.

#include <acd/config.hpp>
#include <acd/evalharness.hpp>
#include <acd/experiments.hpp>
#include <acd/moppo.hpp>
#include <acd/pareto.hpp>
#include <acd/pcn.hpp>
#include <acd/steer_server.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace acd;
using config::RunConfig;
using config::Trainer;

namespace {

struct Options {
    std::string config_path;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string weights;
    std::string strategy;
    std::optional<std::size_t> episodes;
    std::string checkpoint;
    std::string switch_to;
    int switch_at = 256;
    std::string addr = "127.0.0.1:8765";
    std::string portfolio;
    std::string in;
    std::string targets;
    double speed = 4.0;
    bool greedy = false;
    std::size_t seeds = 5;
};

std::vector<std::string> g_argv;

RunConfig load_run_config(const Options& o, Trainer t) {
    json j = o.config_path.empty() ? json::object() : config::read_json_file(o.config_path);
    RunConfig rc = config::parse_config(j, t);
    const bool has_weights = j.contains("weights") || (j.contains("ppo") && j["ppo"].contains("weights"));
    if (o.seed) {
        rc.ppo.seed = *o.seed;
        rc.pcn.seed = *o.seed;
    }
    if (!o.strategy.empty()) rc.ppo.strategy = moppo::parse_strategy(o.strategy);
    if (!o.weights.empty()) {
        rc.ppo.weights = pareto::WeightVector(config::parse_number_list(json(o.weights)));
    } else if (!has_weights) {
        rc.ppo.weights = pareto::WeightVector(std::vector<double>(num_objectives(rc.env.game.game), 1.0));
    }
    if (o.episodes) rc.eval.episodes = *o.episodes;
    if (o.greedy) rc.eval.greedy = true;
    if (!o.out.empty()) rc.out = o.out;
    return rc;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream os(p);
    if (!os) throw IoError("cannot open '" + p.string() + "' for writing");
    os << text;
    if (!os) throw IoError("write failed for '" + p.string() + "'");
}

fs::path prepare_out(const RunConfig& rc, Trainer t) {
    const fs::path out(rc.out);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create output directory '" + out.string() + "': " + ec.message());
    write_text(out / "manifest.json", config::manifest(rc, t, g_argv).dump(2) + "\n");
    return out;
}

auto env_factory(const EnvConfig& e) {
    return [e] { return CyberDefenceEnv(e); };
}

int cmd_train_moppo(const Options& o) {
    RunConfig rc = load_run_config(o, Trainer::Ppo);
    const auto out = prepare_out(rc, Trainer::Ppo);
    std::ofstream metrics(out / "metrics.jsonl");
    auto log = [&](const json& line) {
        metrics << line.dump() << '\n';
        metrics.flush();
        std::cerr << "step " << line["global_step"] << " mean_return " << line["mean_return"].dump() << '\n';
    };
    moppo::TrainResult result;
    try {
        result = moppo::train(rc.ppo, env_factory(rc.env), log);
    } catch (const moppo::TrainingAborted& e) {
        auto partial = e.partial.checkpoint;
        partial.env = to_json(rc.env);
        save_checkpoint(partial, (out / "policy").string());
        throw;
    }
    result.checkpoint.env = to_json(rc.env);
    save_checkpoint(result.checkpoint, (out / "policy").string());
    std::cout << (out / "policy").string() << '\n';
    return 0;
}

int cmd_train_pcn(const Options& o) {
    RunConfig rc = load_run_config(o, Trainer::Pcn);
    const auto out = prepare_out(rc, Trainer::Pcn);
    std::ofstream log_file(out / "front_log.jsonl");
    auto log = [&](const json& line) {
        log_file << line.dump() << '\n';
        log_file.flush();
        std::cerr << "step " << line["global_step"] << " front size " << line["front"].size() << '\n';
    };
    auto result = pcn::train_pcn(rc.pcn, env_factory(rc.env), log);
    result.checkpoint.env = to_json(rc.env);
    save_checkpoint(result.checkpoint, (out / "pcn").string());
    std::ofstream front(out / "front.csv");
    pareto::write_front_csv(front, result.final_front.front);
    std::cout << (out / "pcn").string() << '\n';
    return 0;
}

int cmd_sweep(const Options& o) {
    RunConfig rc = load_run_config(o, Trainer::Ppo);
    json j = o.config_path.empty() ? json::object() : config::read_json_file(o.config_path);
    if (!j.contains("game")) rc.env.game.game = Game::C;
    if (num_objectives(rc.env.game.game) != 2) throw ConfigError("sweep needs a two-objective game (B or C)");
    const auto out = prepare_out(rc, Trainer::Ppo);
    moppo::SweepOptions opts;
    opts.eval_episodes = rc.eval.episodes;
    opts.eval_seed = rc.eval.seed;
    opts.greedy = rc.eval.greedy;
    opts.gamma = rc.env.game.gamma;
    auto save_member = [&](const moppo::SweepMember& m) {
        auto ck = m.training.checkpoint;
        ck.env = to_json(rc.env);
        ck.extra["tag"] = m.tag;
        save_checkpoint(ck, (out / ("w_green_" + fmt6(m.w_green)) / "policy").string());
        std::cerr << m.tag << " mean " << vec6(m.summary.mean) << '\n';
    };
    std::vector<moppo::SweepMember> members;
    try {
        members = moppo::weight_sweep(rc.ppo, env_factory(rc.env), moppo::default_sweep_weights(rc.sweep_steps), opts,
                                      save_member);
    } catch (const moppo::SweepAborted& e) {
        const auto rows = moppo::front_rows(e.completed, rc.ppo.strategy);
        write_front_rows((out / "front.partial.csv").string(), rows);
        throw;
    }
    const auto rows = moppo::front_rows(members, rc.ppo.strategy);
    write_front_rows((out / "front.csv").string(), rows);
    std::cout << (out / "front.csv").string() << '\n';
    return 0;
}

std::vector<pcn::Command> load_targets(const std::string& path, const PolicyCheckpoint& ck) {
    const json j = path.empty() ? ck.extra.value("targets", json::array()) : config::read_json_file(path);
    std::vector<pcn::Command> out;
    for (const auto& t : j) out.push_back(pcn::command_from_json(t));
    if (out.empty()) throw ConfigError("no PCN targets: pass --targets or use a checkpoint that stores them");
    return out;
}

int cmd_eval(const Options& o) {
    if (o.checkpoint.empty()) throw UsageError("eval needs --checkpoint");
    const auto ck = load_checkpoint(o.checkpoint);
    if (ck.env.is_null()) throw ConfigError("checkpoint has no environment block");
    const EnvConfig env_cfg = env_config_from_json(ck.env);
    const std::size_t episodes = o.episodes.value_or(1000);
    const std::uint64_t seed = o.seed.value_or(12345);
    const fs::path out(o.out.empty() ? "eval" : o.out);
    fs::create_directories(out);
    write_text(out / "manifest.json", json({{"tool", "acd"}, {"argv", g_argv}, {"checkpoint_hash", ck.config_hash}})
                                          .dump(2) + "\n");
    auto env = CyberDefenceEnv(env_cfg);
    if (ck.trainer == "pcn") {
        const auto evals = pcn::evaluate_points(ck, load_targets(o.targets, ck), episodes, env_factory(env_cfg), seed);
        std::ofstream os(out / "points.csv");
        pcn::write_point_evals(os, evals);
        pcn::write_point_evals(std::cout, evals);
        return 0;
    }
    MoppoAgent agent = MoppoAgent::from_checkpoint(ck, o.greedy, ck.extra.value("tag", std::string{}));
    const auto s = evaluate(agent, env, episodes, seed, env_cfg.game.gamma);
    const FrontRow row{ck.weights.size() > 1 ? ck.weights[1] : 0.0, s, ck.strategy, agent.tag()};
    write_front_rows((out / "front.csv").string(), std::span<const FrontRow>(&row, 1));
    write_text(out / "summary.json", to_json(s).dump(2) + "\n");
    std::cout << to_json(s).dump() << '\n';
    return 0;
}

std::unique_ptr<Agent> make_agent(const PolicyCheckpoint& ck, bool greedy) {
    if (ck.trainer == "pcn") {
        return std::make_unique<pcn::PcnAgent>(pcn::PcnAgent::from_checkpoint(ck, load_targets({}, ck).front()));
    }
    return std::make_unique<MoppoAgent>(MoppoAgent::from_checkpoint(ck, greedy, ck.extra.value("tag", std::string{})));
}

int cmd_rollout(const Options& o) {
    if (o.checkpoint.empty()) throw UsageError("rollout needs --checkpoint");
    const auto ck_a = load_checkpoint(o.checkpoint);
    if (ck_a.env.is_null()) throw ConfigError("checkpoint has no environment block");
    const EnvConfig env_cfg = env_config_from_json(ck_a.env);
    auto env = CyberDefenceEnv(env_cfg);
    const std::uint64_t seed = o.seed.value_or(0);
    auto a = make_agent(ck_a, o.greedy);
    RolloutRecord rec;
    if (!o.switch_to.empty()) {
        const auto ck_b = load_checkpoint(o.switch_to);
        if (ck_b.env != ck_a.env) throw ConfigError("--switch-to policy was trained on a different environment");
        if (o.switch_at <= 0 || o.switch_at >= env_cfg.game.episode_length) {
            throw UsageError("--switch-at must lie strictly inside the episode");
        }
        auto b = make_agent(ck_b, o.greedy);
        if (b->tag() == a->tag()) throw UsageError("both policies carry the same tag; timelines would be ambiguous");
        rec = switch_rollout(*a, *b, o.switch_at, env, seed);
    } else {
        rec = plain_rollout(*a, env, seed);
    }
    const fs::path out(o.out.empty() ? "rollout" : o.out);
    fs::create_directories(out);
    write_text(out / "manifest.json", json({{"tool", "acd"}, {"argv", g_argv}}).dump(2) + "\n");
    write_rollout_jsonl((out / "rollout.jsonl").string(), rec);
    std::cout << (out / "rollout.jsonl").string() << '\n';
    return 0;
}

int cmd_prune(const Options& o) {
    if (o.in.empty()) throw UsageError("prune-front needs --in");
    std::ifstream is(o.in);
    if (!is) throw IoError("cannot open '" + o.in + "'");
    const auto pts = pareto::read_front_csv(is);
    const auto pruned = pareto::pareto_prune(pts);
    if (o.out.empty()) {
        pareto::write_front_csv(std::cout, pruned.points);
    } else {
        std::ofstream os(o.out);
        if (!os) throw IoError("cannot open '" + o.out + "' for writing");
        pareto::write_front_csv(os, pruned.points);
    }
    return 0;
}

int cmd_serve(const Options& o) {
    if (o.portfolio.empty()) throw UsageError("serve needs --portfolio");
    auto portfolio = std::make_shared<const steer::Portfolio>(steer::load_portfolio(o.portfolio));
    steer::SessionDefaults d;
    d.seed = o.seed.value_or(0);
    d.steps_per_sec = o.speed;
    steer::serve(portfolio, o.addr, d);
    return 0;
}

int cmd_experiment1(const Options& o) {
    RunConfig rc = load_run_config(o, Trainer::Ppo);
    const auto out = prepare_out(rc, Trainer::Ppo);
    experiments::Experiment1Config cfg;
    cfg.ppo = rc.ppo;
    cfg.env = rc.env;
    cfg.seeds = o.seeds;
    cfg.base_seed = rc.ppo.seed;
    cfg.eval_episodes = rc.eval.episodes;
    cfg.eval_seed = rc.eval.seed;
    const auto report = experiments::run_experiment_1(cfg);
    write_text(out / "experiment1.json", experiments::to_json(report).dump(2) + "\n");
    std::cout << "ppo terminal " << fmt6(report.ppo.terminal_mean) << " moppo terminal "
              << fmt6(report.moppo.terminal_mean) << " difference " << fmt6(report.terminal_percent) << "%\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    g_argv.assign(argv, argv + argc);
    CLI::App app{"Autonomous cyber defence with multi-objective reinforcement learning"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* c) {
        c->add_option("--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
        c->add_option("--out", o.out, "output directory");
        c->add_option("--seed", o.seed, "seed override");
    };
    auto* train_moppo = app.add_subcommand("train-moppo", "train one (MO)PPO policy");
    common(train_moppo);
    train_moppo->add_option("--weights", o.weights, "objective weights, e.g. 0.5,0.5");
    train_moppo->add_option("--strategy", o.strategy, "linear or chebyshev");

    auto* train_pcn = app.add_subcommand("train-pcn", "train a Pareto Conditioned Network");
    common(train_pcn);

    auto* sweep = app.add_subcommand("sweep", "train and evaluate one policy per green weight");
    common(sweep);
    sweep->add_option("--strategy", o.strategy, "linear or chebyshev");
    sweep->add_option("--episodes", o.episodes, "evaluation episodes per policy");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("--checkpoint", o.checkpoint, "checkpoint stem or file")->required();
    eval->add_option("--episodes", o.episodes, "episodes (default 1000)");
    eval->add_option("--seed", o.seed, "evaluation seed");
    eval->add_option("--out", o.out, "output directory");
    eval->add_option("--targets", o.targets, "JSON list of PCN commands {return, horizon}");
    eval->add_flag("--greedy", o.greedy, "argmax actions instead of sampling");

    auto* rollout = app.add_subcommand("rollout", "record one episode, optionally switching policy");
    rollout->add_option("--checkpoint", o.checkpoint, "first policy")->required();
    rollout->add_option("--switch-to", o.switch_to, "second policy");
    rollout->add_option("--switch-at", o.switch_at, "first step of the second policy (default 256)");
    rollout->add_option("--seed", o.seed, "episode seed");
    rollout->add_option("--out", o.out, "output directory");
    rollout->add_flag("--greedy", o.greedy, "argmax actions instead of sampling");

    auto* prune = app.add_subcommand("prune-front", "keep the non-dominated rows of a points CSV");
    prune->add_option("--in", o.in, "input CSV")->required()->check(CLI::ExistingFile);
    prune->add_option("--out", o.out, "output CSV (default stdout)");

    auto* serve = app.add_subcommand("serve", "run the WebSocket steering server");
    serve->add_option("--portfolio", o.portfolio, "directory of checkpoints (a sweep output)")->required();
    serve->add_option("--addr", o.addr, "HOST:PORT (default 127.0.0.1:8765)");
    serve->add_option("--seed", o.seed, "default session seed");
    serve->add_option("--speed", o.speed, "steps per second; 0 = manual stepping")->check(CLI::NonNegativeNumber);

    auto* exp1 = app.add_subcommand("experiment1", "PPO on the summed reward vs equal-weight MOPPO on the split reward");
    common(exp1);
    exp1->add_option("--seeds", o.seeds, "number of seeds (default 5)")->check(CLI::PositiveNumber);
    exp1->add_option("--episodes", o.episodes, "final evaluation episodes per run");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*train_moppo) return cmd_train_moppo(o);
        if (*train_pcn) return cmd_train_pcn(o);
        if (*sweep) return cmd_sweep(o);
        if (*eval) return cmd_eval(o);
        if (*rollout) return cmd_rollout(o);
        if (*prune) return cmd_prune(o);
        if (*serve) return cmd_serve(o);
        if (*exp1) return cmd_experiment1(o);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
