// Acceptance suite: one PASS/FAIL line per criterion. An optional argument
// runs only the criteria whose name contains it. Exit status is nonzero if
// any selected criterion fails.

#include <acd/checkpoint.hpp>
#include <acd/config.hpp>
#include <acd/evalharness.hpp>
#include <acd/experiments.hpp>
#include <acd/moppo.hpp>
#include <acd/pareto.hpp>
#include <acd/pcn.hpp>

#include "support/oracles.hpp"
#include "support/toy_envs.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

using namespace acd;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    std::string name;
    double time_limit_s;  // <= 0 means unbounded
    std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... xs) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, xs...);
    return buf;
}

using Points = std::vector<std::vector<double>>;

std::vector<pareto::ParetoPoint> to_points(const Points& xs) {
    std::vector<pareto::ParetoPoint> out;
    for (const auto& x : xs) out.push_back({x, ""});
    return out;
}

std::set<std::vector<double>> as_set(const std::vector<pareto::ParetoPoint>& pts) {
    std::set<std::vector<double>> s;
    for (const auto& p : pts) s.insert(p.f);
    return s;
}

EnvConfig cyber(Game g, int length = 512) {
    EnvConfig e;
    e.game.game = g;
    e.game.episode_length = length;
    return e;
}

// ---- pareto ---------------------------------------------------------------

const Points kPublishedFront = {
    {-4576.593262, 5497.799805}, {-2731.05542, 5448.600098},  {-2153.070068, 5262.200195},
    {-1753.648071, 5180.649902}, {-1159.431396, 4817.149902}, {-872.6861572, 3661.550049},
    {-780.8148193, 3217.899902}, {-740.6045532, 3534.550049}, {-716.069397, 2698.5},
    {-733.4193115, 2488.300049}, {-686.8294678, 2360.149902}};

Outcome published_prune() {
    const auto pts = to_points(kPublishedFront);
    const auto got = as_set(pareto::pareto_prune(pts).points);
    const auto want = oracle::brute_front(kPublishedFront);
    std::set<std::vector<double>> removed;
    for (const auto& p : kPublishedFront) {
        if (!got.count(p)) removed.insert(p);
    }
    const std::set<std::vector<double>> expected_removed = {{-780.8148193, 3217.899902}, {-733.4193115, 2488.300049}};
    return {got.size() == 9 && got == want && removed == expected_removed,
            fmt("%zu points kept, %zu removed", got.size(), removed.size())};
}

Outcome oracle_equivalence() {
    Rng rng = make_rng(2024, 0);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + uniform_index(rng, 200);
        Points xs(n);
        // Coarse grid half the time so ties and duplicates are exercised.
        const bool grid = trial % 2 == 0;
        std::uniform_real_distribution<double> u(-100.0, 100.0);
        for (auto& x : xs) {
            x = grid ? std::vector<double>{static_cast<double>(uniform_index(rng, 15)),
                                           static_cast<double>(uniform_index(rng, 15))}
                     : std::vector<double>{u(rng), u(rng)};
        }
        if (as_set(pareto::pareto_prune(to_points(xs)).points) != oracle::brute_front(xs)) ++mismatches;
    }
    return {mismatches == 0, fmt("%zu mismatches over 1000 sets", mismatches)};
}

Outcome hypervolume() {
    constexpr double kTol = 0.005;
    const std::vector<double> origin{0.0, 0.0};
    const std::vector<pareto::ParetoPoint> unit{{{1.0, 1.0}, ""}};
    bool trivial = pareto::hypervolume_2d(unit, origin) == 1.0 &&
                   pareto::hypervolume_2d(std::vector<pareto::ParetoPoint>{}, origin) == 0.0;
    Rng rng = make_rng(99, 0);
    std::uniform_real_distribution<double> u(0.0, 1000.0);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        Points xs(2 + uniform_index(rng, 30));
        for (auto& x : xs) x = {u(rng) - 500.0, u(rng)};
        const auto front = pareto::pareto_prune(to_points(xs)).points;
        const std::vector<double> ref{-600.0, -50.0};
        Points f;
        for (const auto& p : front) f.push_back(p.f);
        const double exact = pareto::hypervolume_2d(front, ref);
        const double mc = oracle::monte_carlo_hv(f, ref, 1000000, 1000 + static_cast<std::uint64_t>(k));
        worst = std::max(worst, std::abs(exact - mc) / exact);
    }
    return {trivial && worst < kTol, fmt("worst relative error %.5f, trivial cases %s", worst, trivial ? "exact" : "wrong")};
}

// ---- gradients ------------------------------------------------------------

moppo::TrajectoryBatch random_batch(const nn::Mlp& net, const nn::Params& params, std::size_t n_obj,
                                    std::size_t rows, Rng& rng) {
    moppo::TrajectoryBatch b;
    b.resize(1, rows, n_obj, net.spec().input_dim);
    std::normal_distribution<double> g(0.0, 1.0);
    for (double& x : b.observations) x = g(rng);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto out = net.forward(params, b.observation(r));
        b.actions[r] = uniform_index(rng, net.spec().policy_out);
        b.log_probs[r] = out.logits[b.actions[r]] - nn::log_sum_exp(out.logits) + 0.3 * g(rng);
        for (std::size_t j = 0; j < n_obj; ++j) {
            b.values[r * n_obj + j] = out.values[j] + 0.3 * g(rng);
            b.returns[r * n_obj + j] = g(rng);
            b.advantages[r * n_obj + j] = g(rng);
        }
    }
    return b;
}

std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> r(n);
    std::iota(r.begin(), r.end(), 0);
    return r;
}

Outcome gradient_check() {
    constexpr double kH = 1e-5, kTol = 1e-4;
    constexpr int kBatches = 20, kCoords = 200;
    Rng rng = make_rng(4242, 0);
    double worst_ppo = 0.0, worst_pcn = 0.0;

    const nn::Mlp ppo_net(moppo::policy_spec(20, 9, 2, {32, 32}));
    for (int k = 0; k < kBatches; ++k) {
        const auto p = ppo_net.init(static_cast<std::uint64_t>(k));
        const auto b = random_batch(ppo_net, p, 2, 32, rng);
        moppo::PpoConfig cfg;
        cfg.weights = pareto::WeightVector({0.3, 0.7});
        cfg.strategy = k % 2 ? moppo::WeightingStrategy::Chebyshev : moppo::WeightingStrategy::Linear;
        cfg.clip_vloss = k % 4 < 2;
        const auto rows = all_rows(b.size());
        std::vector<double> g(ppo_net.num_params());
        moppo::minibatch_gradient(ppo_net, p, b, rows, cfg, g);
        const auto adv = moppo::minibatch_advantages(b, rows, cfg);
        auto f = [&](const nn::Params& q) {
            moppo::PpoLoss l(b, rows, adv, cfg);
            return ppo_net.loss_value(q, l);
        };
        for (int c = 0; c < kCoords; ++c) {
            const std::size_t i = uniform_index(rng, ppo_net.num_params());
            worst_ppo = std::max(worst_ppo, oracle::rel_error(g[i], oracle::central_difference(f, p, i, kH)));
        }
    }

    const nn::Mlp pcn_net(pcn::pcn_spec(20, 9, 2, 32));
    std::normal_distribution<double> n(0.0, 1.0);
    for (int k = 0; k < kBatches; ++k) {
        const auto p = pcn_net.init(static_cast<std::uint64_t>(k));
        std::vector<std::vector<double>> xs;
        std::vector<std::size_t> ys;
        for (int i = 0; i < 32; ++i) {
            std::vector<double> x(pcn_net.spec().input_dim);
            for (double& v : x) v = n(rng);
            xs.push_back(x);
            ys.push_back(uniform_index(rng, 9));
        }
        pcn::CrossEntropyLoss loss(xs, ys);
        std::vector<double> g(pcn_net.num_params());
        pcn_net.loss_and_grad(p, loss, g);
        auto f = [&](const nn::Params& q) {
            pcn::CrossEntropyLoss l(xs, ys);
            return pcn_net.loss_value(q, l);
        };
        for (int c = 0; c < kCoords; ++c) {
            const std::size_t i = uniform_index(rng, pcn_net.num_params());
            worst_pcn = std::max(worst_pcn, oracle::rel_error(g[i], oracle::central_difference(f, p, i, kH)));
        }
    }
    return {worst_ppo < kTol && worst_pcn < kTol,
            fmt("max relative error PPO %.2e, PCN %.2e", worst_ppo, worst_pcn)};
}

Outcome ppo_reduction() {
    const nn::Mlp net(moppo::policy_spec(12, 6, 1, {16, 16}));
    Rng rng = make_rng(515, 0);
    int identical = 0;
    for (int k = 0; k < 50; ++k) {
        const auto p = net.init(static_cast<std::uint64_t>(k));
        const auto b = random_batch(net, p, 1, 48, rng);
        moppo::PpoConfig cfg;
        cfg.clip_vloss = k % 2 == 0;
        const auto rows = all_rows(b.size());
        std::vector<double> g(net.num_params()), g_ref(net.num_params());
        const double loss = moppo::minibatch_gradient(net, p, b, rows, cfg, g);
        const auto adv = oracle::standardized(b.advantages);
        std::vector<oracle::ScalarPpoLoss::Sample> samples;
        for (std::size_t r = 0; r < b.size(); ++r) {
            const auto o = b.observation(r);
            samples.push_back({{o.begin(), o.end()}, b.actions[r], b.log_probs[r], adv[r], b.returns[r], b.values[r]});
        }
        oracle::ScalarPpoLoss ref(samples, cfg.clip_coef, cfg.vf_coef, cfg.ent_coef, cfg.clip_vloss);
        const double ref_loss = net.loss_and_grad(p, ref, g_ref);
        identical += loss == ref_loss && g == g_ref;
    }
    return {identical == 50, fmt("%d/50 batches bit-identical", identical)};
}

// Dyadic inputs with gamma * lambda = 1/2 keep every partial sum exact.
Outcome gae_linearity() {
    Rng rng = make_rng(808, 0);
    auto dyadic = [&](int range) {
        return static_cast<double>(static_cast<int>(uniform_index(rng, 2 * range + 1)) - range) / 16.0;
    };
    int exact = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t T = 30;
        std::vector<double> r(T * 2), v((T + 1) * 2), d(T + 1, 0.0);
        for (auto& x : r) x = dyadic(64);
        for (auto& x : v) x = dyadic(64);
        for (std::size_t t = 1; t <= T; ++t) d[t] = uniform_index(rng, 10) == 0 ? 1.0 : 0.0;
        const double wg = static_cast<double>(uniform_index(rng, 9)) / 8.0;
        const pareto::WeightVector w({1.0 - wg, wg});
        std::vector<double> rs(T), vs(T + 1);
        for (std::size_t t = 0; t < T; ++t) rs[t] = w[0] * r[t * 2] + w[1] * r[t * 2 + 1];
        for (std::size_t t = 0; t <= T; ++t) vs[t] = w[0] * v[t * 2] + w[1] * v[t * 2 + 1];
        const double gamma = trial % 2 ? 0.5 : 1.0, lambda = trial % 2 ? 1.0 : 0.5;
        const auto vec = moppo::gae_vector(r, v, d, 2, gamma, lambda);
        const auto scal = moppo::gae_vector(rs, vs, d, 1, gamma, lambda);
        const auto lin = moppo::scalarize_advantages(vec.advantages, 2, w, moppo::WeightingStrategy::Linear, false);
        exact += lin == scal.advantages;
    }
    return {exact == 100, fmt("%d/100 trajectories exact", exact)};
}

// ---- environment ----------------------------------------------------------

Outcome decomposition_identity() {
    std::size_t violations = 0, steps = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        CyberDefenceEnv a(cyber(Game::A)), b(cyber(Game::B)), c(cyber(Game::C));
        a.reset(seed);
        b.reset(seed);
        c.reset(seed);
        Rng rng = make_rng(seed, 0xb1);
        bool done = false;
        while (!done) {
            const std::size_t act = uniform_index(rng, a.num_actions());
            const auto ra = a.step(act), rb = b.step(act), rc = c.step(act);
            violations += !(ra.reward[0] == rb.reward[0] + rb.reward[1] && ra.reward[0] == rc.reward[0]);
            ++steps;
            done = ra.done;
        }
    }
    return {violations == 0 && steps == 100 * 512, fmt("%zu steps, %zu violations", steps, violations)};
}

// ---- determinism ----------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string dump_all(const std::vector<json>& lines) {
    std::string s;
    for (const auto& l : lines) s += l.dump() + "\n";
    return s;
}

Outcome determinism() {
    std::vector<std::string> broken;
    auto check = [&](bool same, const char* what) {
        if (!same) broken.push_back(what);
    };

    moppo::PpoConfig pc;
    pc.num_envs = 2;
    pc.num_steps = 128;
    pc.num_minibatches = 4;
    pc.update_epochs = 2;
    pc.total_timesteps = 1024;
    pc.eval_freq = 256;
    pc.hidden = {16, 16};
    pc.weights = pareto::WeightVector({0.5, 0.5});
    auto make_c = [] { return CyberDefenceEnv(cyber(Game::C, 128)); };
    const auto m1 = moppo::train(pc, make_c), m2 = moppo::train(pc, make_c);
    check(m1.checkpoint.params == m2.checkpoint.params && dump_all(m1.metrics) == dump_all(m2.metrics), "moppo");

    pcn::PcnConfig cc;
    cc.total_timesteps = 2000;
    cc.batch_size = 32;
    cc.num_er_episodes = 5;
    cc.num_step_episodes = 2;
    cc.num_model_updates = 5;
    cc.max_steps = 128;
    cc.hidden_dim = 16;
    cc.eval_freq = 500;
    const auto p1 = pcn::train_pcn(cc, make_c), p2 = pcn::train_pcn(cc, make_c);
    check(p1.checkpoint.params == p2.checkpoint.params && dump_all(p1.front_log) == dump_all(p2.front_log), "pcn");

    moppo::SweepOptions so;
    so.eval_episodes = 3;
    auto sweep_csv = [&] {
        auto cfg = pc;
        cfg.total_timesteps = 256;
        std::ostringstream os;
        const auto members = moppo::weight_sweep(cfg, make_c, moppo::default_sweep_weights(2), so);
        const auto rows = moppo::front_rows(members, cfg.strategy);
        write_front_rows(os, rows);
        return os.str();
    };
    check(sweep_csv() == sweep_csv(), "sweep");

    CyberDefenceEnv env = make_c();
    auto agent = MoppoAgent::from_checkpoint(m1.checkpoint);
    const auto e1 = evaluate(agent, env, 20, 7, 0.99), e2 = evaluate(agent, env, 20, 7, 0.99);
    check(to_json(e1).dump() == to_json(e2).dump(), "evaluate");

    const auto targets = pcn::buffer_targets(p1.buffer, cc);
    const auto pe1 = pcn::evaluate_points(p1.checkpoint, targets, 3, make_c, 5);
    const auto pe2 = pcn::evaluate_points(p1.checkpoint, targets, 3, make_c, 5);
    std::ostringstream x1, x2;
    pcn::write_point_evals(x1, pe1);
    pcn::write_point_evals(x2, pe2);
    check(x1.str() == x2.str(), "pcn evaluate_points");

    auto other = MoppoAgent::from_checkpoint(m2.checkpoint, true, "greedy");
    std::ostringstream r1, r2;
    write_rollout_jsonl(r1, switch_rollout(agent, other, 64, env, 3));
    write_rollout_jsonl(r2, switch_rollout(agent, other, 64, env, 3));
    check(r1.str() == r2.str(), "switch_rollout");

    experiments::Experiment1Config ec;
    ec.ppo = pc;
    ec.ppo.total_timesteps = 512;
    ec.env = cyber(Game::A, 64);
    ec.seeds = 2;
    ec.eval_episodes = 3;
    check(experiments::to_json(experiments::run_experiment_1(ec)).dump() ==
              experiments::to_json(experiments::run_experiment_1(ec)).dump(),
          "experiment1");

    const auto dir = std::filesystem::temp_directory_path() / "acd_acceptance_ckpt";
    std::filesystem::create_directories(dir);
    save_checkpoint(m1.checkpoint, (dir / "a").string());
    save_checkpoint(m2.checkpoint, (dir / "b").string());
    save_checkpoint(p1.checkpoint, (dir / "c").string());
    save_checkpoint(p2.checkpoint, (dir / "d").string());
    check(slurp(dir / "a.meta.json") == slurp(dir / "b.meta.json") &&
              slurp(dir / "a.params.f64le") == slurp(dir / "b.params.f64le") &&
              slurp(dir / "c.meta.json") == slurp(dir / "d.meta.json") &&
              slurp(dir / "c.params.f64le") == slurp(dir / "d.params.f64le"),
          "checkpoint files");
    check(load_checkpoint((dir / "a").string()).params == m1.checkpoint.params, "checkpoint round trip");
    std::filesystem::remove_all(dir);

    std::string detail = broken.empty() ? "trainers, evaluators and checkpoints reproduce bit-for-bit" : "differs:";
    for (const auto& b : broken) detail += " " + b;
    return {broken.empty(), detail};
}

// ---- learning -------------------------------------------------------------

Outcome toy_ppo() {
    int ok = 0;
    std::string scores;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        moppo::PpoConfig cfg;
        cfg.num_envs = 4;
        cfg.num_steps = 128;
        cfg.num_minibatches = 4;
        cfg.update_epochs = 4;
        cfg.total_timesteps = 50000;
        cfg.hidden = {64, 64};
        cfg.eval_freq = 5120;
        cfg.seed = seed;
        const auto r = moppo::train(cfg, [] { return toy::TwoArmedBandit{}; });
        auto agent = MoppoAgent::from_checkpoint(r.checkpoint);
        toy::TwoArmedBandit env;
        const double score = evaluate(agent, env, 100, 1000 + seed, 1.0).mean[0];
        ok += score >= 0.95 * 10.0;
        scores += fmt(" %.2f", score);
    }
    return {ok == 5, fmt("%d/5 seeds >= 9.5; mean return", ok) + scores};
}

Outcome pcn_toy_front() {
    const std::set<std::vector<double>> exact = {{1.0, 0.0}, {0.0, 3.0}};
    int ok = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        pcn::PcnConfig c;
        c.total_timesteps = 3000;
        c.batch_size = 64;
        c.num_er_episodes = 20;
        c.num_step_episodes = 10;
        c.num_model_updates = 20;
        c.max_steps = 10;
        c.scaling_factor = {1.0, 1.0, 1.0};
        c.ref_point = {-1.0, -1.0};
        c.eval_freq = 1000;
        c.seed = seed;
        const auto r = pcn::train_pcn(c, [] { return toy::TreasureChain{}; });
        bool good = as_set(r.final_front.front) == exact;
        for (std::size_t k = 0; good && k < r.final_front.prompts.size(); ++k) {
            const auto ev = pcn::evaluate_points(r.checkpoint, {r.final_front.prompts[k]}, 5,
                                                 [] { return toy::TreasureChain{}; }, 1);
            good = ev[0].mean == r.final_front.front[k].f && ev[0].std == std::vector<double>{0.0, 0.0};
        }
        ok += good;
    }
    return {ok == 5, fmt("%d/5 seeds recover {[1,0],[0,3]} and reproduce each prompt exactly", ok)};
}

Outcome sweep_trend() {
    auto rc = config::parse_config(json{{"game", "C"}}, config::Trainer::Ppo);
    auto cfg = rc.ppo;
    cfg.total_timesteps = 13 * static_cast<long>(cfg.batch_size());  // first multiple of the batch above 1e5
    moppo::SweepOptions opts;
    opts.eval_episodes = 200;
    opts.gamma = rc.env.game.gamma;
    const auto env_cfg = rc.env;
    const auto members =
        moppo::weight_sweep(cfg, [&] { return CyberDefenceEnv(env_cfg); }, moppo::default_sweep_weights(), opts);
    std::vector<double> w, green, red;
    std::string table;
    for (const auto& m : members) {
        w.push_back(m.w_green);
        red.push_back(m.summary.mean[0]);
        green.push_back(m.summary.mean[1]);
        table += fmt(" [%.1f: %.1f, %.1f]", m.w_green, m.summary.mean[0], m.summary.mean[1]);
    }
    const double rho_green = oracle::spearman(w, green), rho_red = oracle::spearman(w, red);
    return {rho_green >= 0.8 && rho_red <= -0.6,
            fmt("rho(w, green) = %.3f, rho(w, obj0) = %.3f; w: obj0, green =", rho_green, rho_red) + table};
}

Outcome experiment_1() {
    auto rc = config::parse_config(json{{"game", "A"}}, config::Trainer::Ppo);
    experiments::Experiment1Config ec;
    ec.ppo = rc.ppo;
    // Published budget: 750k steps per run.
    ec.env = rc.env;
    ec.seeds = 5;
    ec.eval_episodes = 200;
    const auto r = experiments::run_experiment_1(ec);
    return {r.moppo_at_least_ppo && ec.seeds >= 5,
            fmt("terminal PPO %.2f +- %.2f, MOPPO %.2f +- %.2f, difference %+.2f (%+.1f%%) over %zu seeds",
                r.ppo.terminal_mean, r.ppo.terminal_std, r.moppo.terminal_mean, r.moppo.terminal_std,
                r.terminal_difference, r.terminal_percent, ec.seeds)};
}

// ---- rollouts -------------------------------------------------------------

Outcome switch_prefix() {
    CyberDefenceEnv env(cyber(Game::C));
    const auto spec = moppo::policy_spec(env.observation_size(), env.num_actions(), 2, {32, 32});
    const nn::Mlp net(spec);
    int ok = 0, diverged = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto pa = net.init(2 * seed + 1), pb = net.init(2 * seed + 2);
        // Sharpen the logits so each policy acts distinctly.
        for (std::size_t i = net.layout().policy.offset; i < net.layout().policy.offset + net.layout().policy.size(); ++i) {
            pa[i] *= 100.0;
            pb[i] *= 100.0;
        }
        MoppoAgent a(spec, pa, {0.5, 0.5}, "a"), b(spec, pb, {0.5, 0.5}, "b");
        const std::uint64_t rollout_seed = 1000 + 17 * seed;
        const auto pure = plain_rollout(a, env, rollout_seed);
        const auto sw = switch_rollout(a, b, 256, env, rollout_seed);
        bool same = sw.steps.size() == 512;
        for (int t = 0; same && t < 256; ++t) {
            const auto &x = sw.steps[t], &y = pure.steps[t];
            same = x.action == y.action && x.reward == y.reward && x.cum_return == y.cum_return && x.policy == y.policy &&
                   rollout_step_jsonl(x) == rollout_step_jsonl(y);
        }
        for (int t = 256; t < 512; ++t) diverged += sw.steps[t].action != pure.steps[t].action;
        ok += same;
    }
    return {ok == 20, fmt("%d/20 seeds with identical prefix; %d suffix steps differ", ok, diverged)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::string filter = argc > 1 ? argv[1] : "";
    const std::vector<Criterion> criteria = {
        {"front-pruning-published", 1, published_prune},
        {"dominance-oracle-equivalence", 30, oracle_equivalence},
        {"hypervolume-monte-carlo", 60, hypervolume},
        {"gradient-check", 60, gradient_check},
        {"reduction-to-ppo", 0, ppo_reduction},
        {"gae-linearity", 0, gae_linearity},
        {"decomposition-identity", 120, decomposition_identity},
        {"determinism", 0, determinism},
        {"toy-ppo-optimality", 300, toy_ppo},
        {"pcn-toy-front", 600, pcn_toy_front},
        {"sweep-trend", 4 * 3600, sweep_trend},
        {"experiment1-direction", 0, experiment_1},
        {"switch-prefix-equality", 0, switch_prefix},
    };
    int failures = 0, ran = 0;
    for (const auto& c : criteria) {
        if (!filter.empty() && c.name.find(filter) == std::string::npos) continue;
        ++ran;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = c.time_limit_s <= 0 || secs < c.time_limit_s;
        const bool pass = o.pass && in_time;
        failures += !pass;
        std::cout << (pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << fmt(" [%.1fs", secs)
                  << (c.time_limit_s > 0 ? fmt(" of %.0fs]", c.time_limit_s) : std::string("]"))
                  << (in_time ? "" : " time limit exceeded") << std::endl;
    }
    if (ran == 0) {
        std::cout << "no criterion matches '" << filter << "'" << std::endl;
        return 2;
    }
    std::cout << (ran - failures) << "/" << ran << " criteria passed" << std::endl;
    return failures == 0 ? 0 : 1;
}
