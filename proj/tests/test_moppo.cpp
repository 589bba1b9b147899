#include <acd/moppo.hpp>

#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "support/toy_envs.hpp"

#include <sstream>

using namespace acd;
using namespace acd::moppo;

namespace {

PpoConfig tiny_cfg() {
    PpoConfig c;
    c.num_envs = 2;
    c.num_steps = 64;
    c.num_minibatches = 4;
    c.update_epochs = 2;
    c.total_timesteps = 2 * 64 * 3;
    c.hidden = {16, 16};
    c.eval_freq = 128;
    return c;
}

EnvConfig short_cyber(Game g, int length = 64) {
    EnvConfig e;
    e.game.game = g;
    e.game.episode_length = length;
    return e;
}

/// Random batch whose rows carry a consistent old log-prob from `params`.
TrajectoryBatch random_batch(const nn::Mlp& net, const nn::Params& params, std::size_t n_obj, std::size_t rows,
                             Rng& rng) {
    TrajectoryBatch b;
    b.resize(1, rows, n_obj, net.spec().input_dim);
    std::normal_distribution<double> g(0.0, 1.0);
    for (double& x : b.observations) x = g(rng);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto out = net.forward(params, b.observation(r));
        b.actions[r] = uniform_index(rng, net.spec().policy_out);
        // Perturb the stored log-prob so ratios differ from 1 and some clip.
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

}  // namespace

TEST(Gae, HandExample) {
    const std::vector<double> r{1, 1}, v{0.5, 0.5, 0}, d{0, 0, 0};
    const auto g = gae_vector(r, v, d, 1, 1.0, 1.0);
    EXPECT_EQ(g.advantages, (std::vector<double>{1.5, 0.5}));
    EXPECT_EQ(g.returns, (std::vector<double>{2.0, 1.0}));
}

TEST(Gae, ZeroInputsGiveZero) {
    const auto g = gae_vector(std::vector<double>(10, 0.0), std::vector<double>(12, 0.0), std::vector<double>(6, 0.0),
                              2, 0.99, 0.95);
    for (double a : g.advantages) EXPECT_EQ(a, 0.0);
}

TEST(Gae, MatchesForwardSumOracleWithEpisodeBoundaries) {
    Rng rng = make_rng(31, 0);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t T = 40;
        std::vector<double> r(T), v(T + 1), d(T + 1, 0.0);
        for (auto& x : r) x = n(rng);
        for (auto& x : v) x = n(rng);
        for (std::size_t t = 1; t <= T; ++t) d[t] = uniform_index(rng, 8) == 0 ? 1.0 : 0.0;
        const auto got = gae_vector(r, v, d, 1, 0.99, 0.95);
        const auto want = oracle::gae_forward_sum(r, v, d, 0.99, 0.95);
        for (std::size_t t = 0; t < T; ++t) EXPECT_NEAR(got.advantages[t], want[t], 1e-12);
    }
}

TEST(Gae, TwoObjectivesEqualStackedSingles) {
    Rng rng = make_rng(3, 0);
    std::normal_distribution<double> n(0.0, 1.0);
    const std::size_t T = 25;
    std::vector<double> r(T * 2), v((T + 1) * 2), d(T + 1, 0.0);
    for (auto& x : r) x = n(rng);
    for (auto& x : v) x = n(rng);
    d[9] = 1.0;
    const auto both = gae_vector(r, v, d, 2, 0.9, 0.8);
    for (std::size_t i = 0; i < 2; ++i) {
        std::vector<double> ri(T), vi(T + 1);
        for (std::size_t t = 0; t < T; ++t) ri[t] = r[t * 2 + i];
        for (std::size_t t = 0; t <= T; ++t) vi[t] = v[t * 2 + i];
        const auto single = gae_vector(ri, vi, d, 1, 0.9, 0.8);
        for (std::size_t t = 0; t < T; ++t) {
            EXPECT_EQ(both.advantages[t * 2 + i], single.advantages[t]);
            EXPECT_EQ(both.returns[t * 2 + i], single.returns[t]);
        }
    }
}

TEST(Gae, ShapeErrors) {
    EXPECT_THROW(gae_vector(std::vector<double>(3), std::vector<double>(3), std::vector<double>(4), 1, 1, 1),
                 DimensionError);
    EXPECT_THROW(gae_vector(std::vector<double>(3), std::vector<double>(4), std::vector<double>(3), 2, 1, 1),
                 DimensionError);
}

// Dyadic rewards, values and weights with gamma * lambda = 1/2 need about
// 40 mantissa bits over 30 steps, so every sum is exact and linearity holds
// with ==.
TEST(Gae, LinearityIsExactOnDyadicInputs) {
    Rng rng = make_rng(77, 0);
    auto dyadic = [&](int range) {
        return static_cast<double>(static_cast<int>(uniform_index(rng, 2 * range + 1)) - range) / 16.0;
    };
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t T = 30;
        std::vector<double> r(T * 2), v((T + 1) * 2), d(T + 1, 0.0);
        for (auto& x : r) x = dyadic(64);
        for (auto& x : v) x = dyadic(64);
        for (std::size_t t = 1; t <= T; ++t) d[t] = uniform_index(rng, 10) == 0 ? 1.0 : 0.0;
        const pareto::WeightVector w({0.25, 0.75});
        std::vector<double> rs(T), vs(T + 1);
        for (std::size_t t = 0; t < T; ++t) rs[t] = w[0] * r[t * 2] + w[1] * r[t * 2 + 1];
        for (std::size_t t = 0; t <= T; ++t) vs[t] = w[0] * v[t * 2] + w[1] * v[t * 2 + 1];
        const double gamma = trial % 2 ? 0.5 : 1.0, lambda = trial % 2 ? 1.0 : 0.5;
        const auto vec = gae_vector(r, v, d, 2, gamma, lambda);
        const auto scal = gae_vector(rs, vs, d, 1, gamma, lambda);
        const auto lin = scalarize_advantages(vec.advantages, 2, w, WeightingStrategy::Linear, false);
        for (std::size_t t = 0; t < T; ++t) ASSERT_EQ(lin[t], scal.advantages[t]) << "trial " << trial << " t " << t;
    }
}

TEST(Scalarize, Examples) {
    const std::vector<double> rows{2, 0, 0, 2};
    const pareto::WeightVector half({0.5, 0.5});
    EXPECT_EQ(scalarize_advantages(rows, 2, half, WeightingStrategy::Linear, false), (std::vector<double>{1, 1}));
    const auto cheb = scalarize_advantages(rows, 2, half, WeightingStrategy::Chebyshev, false);
    EXPECT_DOUBLE_EQ(cheb[0], -1.05);
    EXPECT_DOUBLE_EQ(cheb[1], -1.05);
    EXPECT_THROW(scalarize_advantages(rows, 2, pareto::WeightVector({1.0}), WeightingStrategy::Linear, false),
                 DimensionError);
}

TEST(Scalarize, SingleObjectiveReducesToStandardisedColumn) {
    const std::vector<double> col{0.5, -1.25, 3.0, 2.0, -0.75};
    const auto out = scalarize_advantages(col, 1, pareto::WeightVector({1.0}), WeightingStrategy::Linear, true);
    EXPECT_EQ(out, oracle::standardized(col));
    EXPECT_EQ(scalarize_advantages(col, 1, pareto::WeightVector({1.0}), WeightingStrategy::Linear, false), col);
    std::vector<double> one{4.0};
    standardize(one);
    EXPECT_EQ(one[0], 4.0);
}

TEST(PpoLossTerms, IdentityPolicyGivesMinusMeanAdvantage) {
    const nn::Mlp net(policy_spec(5, 3, 2, {8}));
    const auto p = net.init(2);
    Rng rng = make_rng(6, 0);
    auto b = random_batch(net, p, 2, 32, rng);
    for (std::size_t r = 0; r < b.size(); ++r) {
        const auto out = net.forward(p, b.observation(r));
        b.log_probs[r] = out.logits[b.actions[r]] - nn::log_sum_exp(out.logits);
    }
    PpoConfig cfg;
    cfg.weights = pareto::WeightVector({0.5, 0.5});
    const auto rows = all_rows(b.size());
    const auto adv = minibatch_advantages(b, rows, cfg);
    std::vector<double> g(net.num_params());
    LossStats s;
    minibatch_gradient(net, p, b, rows, cfg, g, &s);
    const double mean_adv = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(adv.size());
    EXPECT_NEAR(s.policy_loss, -mean_adv, 1e-12);
    EXPECT_EQ(s.clip_fraction, 0.0);
    EXPECT_NEAR(s.approx_kl, 0.0, 1e-15);
}

TEST(PpoLossTerms, ZeroAdvantageLeavesOnlyValueAndEntropy) {
    const nn::Mlp net(policy_spec(5, 3, 1, {8}));
    const auto p = net.init(2);
    Rng rng = make_rng(8, 0);
    auto b = random_batch(net, p, 1, 16, rng);
    std::fill(b.advantages.begin(), b.advantages.end(), 0.0);
    PpoConfig cfg;
    cfg.ent_coef = 0.0;
    cfg.vf_coef = 0.0;
    const auto rows = all_rows(b.size());
    std::vector<double> g(net.num_params());
    LossStats s;
    minibatch_gradient(net, p, b, rows, cfg, g, &s);
    for (double x : g) EXPECT_EQ(x, 0.0);
    EXPECT_EQ(s.policy_loss, 0.0);
}

TEST(PpoLossTerms, GradientMatchesFiniteDifferences) {
    const nn::Mlp net(policy_spec(5, 4, 2, {8, 6}));
    Rng rng = make_rng(12, 0);
    for (int trial = 0; trial < 4; ++trial) {
        const auto p = net.init(static_cast<std::uint64_t>(trial));
        const auto b = random_batch(net, p, 2, 16, rng);
        PpoConfig cfg;
        cfg.weights = pareto::WeightVector({0.3, 0.7});
        cfg.strategy = trial % 2 ? WeightingStrategy::Chebyshev : WeightingStrategy::Linear;
        const auto rows = all_rows(b.size());
        std::vector<double> g(net.num_params());
        minibatch_gradient(net, p, b, rows, cfg, g);
        const auto adv = minibatch_advantages(b, rows, cfg);
        auto f = [&](const nn::Params& q) {
            PpoLoss l(b, rows, adv, cfg);
            return net.loss_value(q, l);
        };
        double worst = 0.0;
        for (std::size_t i = 0; i < net.num_params(); ++i) {
            worst = std::max(worst, oracle::rel_error(g[i], oracle::central_difference(f, p, i, 1e-5)));
        }
        EXPECT_LT(worst, 1e-4);
    }
}

TEST(Reduction, SingleObjectiveMatchesScalarReferenceBitForBit) {
    const nn::Mlp net(policy_spec(5, 4, 1, {8, 8}));
    Rng rng = make_rng(21, 0);
    for (int trial = 0; trial < 10; ++trial) {
        const auto p = net.init(static_cast<std::uint64_t>(trial));
        const auto b = random_batch(net, p, 1, 24, rng);
        PpoConfig cfg;
        cfg.clip_vloss = trial % 2 == 0;
        const auto rows = all_rows(b.size());
        std::vector<double> g(net.num_params()), g_ref(net.num_params());
        const double loss = minibatch_gradient(net, p, b, rows, cfg, g);

        const auto adv = oracle::standardized(b.advantages);
        std::vector<oracle::ScalarPpoLoss::Sample> samples;
        for (std::size_t r = 0; r < b.size(); ++r) {
            const auto o = b.observation(r);
            samples.push_back({{o.begin(), o.end()}, b.actions[r], b.log_probs[r], adv[r], b.returns[r], b.values[r]});
        }
        oracle::ScalarPpoLoss ref(samples, cfg.clip_coef, cfg.vf_coef, cfg.ent_coef, cfg.clip_vloss);
        const double ref_loss = net.loss_and_grad(p, ref, g_ref);
        EXPECT_EQ(loss, ref_loss);
        EXPECT_EQ(g, g_ref);
    }
}

TEST(Schedule, AnnealsToExactlyZero) {
    EXPECT_EQ(annealed_lr(2.5e-4, 0, 91), 2.5e-4);
    EXPECT_EQ(annealed_lr(2.5e-4, 90, 91), 0.0);
    EXPECT_EQ(annealed_lr(2.5e-4, 0, 1), 2.5e-4);
    for (std::size_t u = 1; u < 91; ++u) EXPECT_LT(annealed_lr(2.5e-4, u, 91), annealed_lr(2.5e-4, u - 1, 91));
}

TEST(Config, DefaultsAndValidation) {
    const PpoConfig c;
    EXPECT_EQ(c.total_timesteps, 750000);
    EXPECT_EQ(c.batch_size(), 8192u);
    EXPECT_EQ(c.minibatch_size(), 512u);
    EXPECT_EQ(c.update_epochs, 10u);
    EXPECT_EQ(c.learning_rate, 2.5e-4);
    EXPECT_NO_THROW(c.validate());
    PpoConfig bad = c;
    bad.num_minibatches = 3;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.gamma = 0.0;
    EXPECT_THROW(bad.validate(), ConfigError);
    EXPECT_EQ(to_json(c)["wght_strat"], "linear");
    EXPECT_EQ(parse_strategy("chebyshev"), WeightingStrategy::Chebyshev);
    EXPECT_THROW(parse_strategy("max"), ConfigError);
}

TEST(Train, OneBatchIsOneUpdate) {
    auto cfg = tiny_cfg();
    cfg.total_timesteps = static_cast<long>(cfg.batch_size());
    const auto r = train(cfg, [] { return toy::TwoArmedBandit{}; });
    ASSERT_EQ(r.metrics.size(), 1u);
    EXPECT_EQ(r.metrics[0]["update"], 1);
    EXPECT_EQ(r.metrics[0]["global_step"], 128);
    EXPECT_EQ(r.metrics[0]["episodes"], 12);
    EXPECT_EQ(r.checkpoint.trainer, "moppo");
    EXPECT_FALSE(r.checkpoint.partial);
}

TEST(Train, IdenticalSeedsGiveIdenticalLogsAndParams) {
    auto cfg = tiny_cfg();
    cfg.weights = pareto::WeightVector({0.5, 0.5});
    auto make = [] { return CyberDefenceEnv(short_cyber(Game::B)); };
    const auto a = train(cfg, make);
    const auto b = train(cfg, make);
    EXPECT_EQ(a.checkpoint.params, b.checkpoint.params);
    ASSERT_EQ(a.metrics.size(), b.metrics.size());
    for (std::size_t i = 0; i < a.metrics.size(); ++i) EXPECT_EQ(a.metrics[i].dump(), b.metrics[i].dump());
    cfg.seed = 5;
    EXPECT_NE(train(cfg, make).checkpoint.params, a.checkpoint.params);
}

TEST(Train, MetricsCarryComponentsAndFinalLearningRateIsZero) {
    auto cfg = tiny_cfg();
    cfg.weights = pareto::WeightVector({1.0});
    const auto r = train(cfg, [] { return CyberDefenceEnv(short_cyber(Game::A)); });
    ASSERT_FALSE(r.metrics.empty());
    const auto& last = r.metrics.back();
    EXPECT_EQ(last["learning_rate"], 0.0);
    EXPECT_TRUE(last.contains("components"));
    const double c = last["components"]["c1"].get<double>() + last["components"]["c2"].get<double>() +
                     last["components"]["c3"].get<double>();
    EXPECT_NEAR(c, last["mean_return"][0].get<double>(), 1e-9);
}

TEST(Train, RejectsWeightsOfTheWrongLength) {
    auto cfg = tiny_cfg();
    cfg.weights = pareto::WeightVector({0.5, 0.5});
    EXPECT_THROW(train(cfg, [] { return CyberDefenceEnv(short_cyber(Game::A)); }), ConfigError);
}

TEST(Train, BanditLearnsTheGoodArm) {
    PpoConfig cfg;
    cfg.num_envs = 4;
    cfg.num_steps = 128;
    cfg.num_minibatches = 4;
    cfg.update_epochs = 4;
    cfg.total_timesteps = 50000;
    cfg.hidden = {64, 64};
    cfg.eval_freq = 5120;
    const auto r = train(cfg, [] { return toy::TwoArmedBandit{}; });
    EXPECT_GE(r.metrics.back()["mean_return"][0].get<double>(), 9.5);
}

TEST(Sweep, ElevenDefaultWeightsGiveElevenTaggedRows) {
    auto cfg = tiny_cfg();
    cfg.total_timesteps = static_cast<long>(cfg.batch_size());
    cfg.strategy = WeightingStrategy::Chebyshev;
    SweepOptions opts;
    opts.eval_episodes = 2;
    const auto weights = default_sweep_weights();
    ASSERT_EQ(weights.size(), 11u);
    EXPECT_EQ(weights[3][1], 0.3);
    const auto members = weight_sweep(cfg, [] { return CyberDefenceEnv(short_cyber(Game::C, 32)); }, weights, opts);
    ASSERT_EQ(members.size(), 11u);
    EXPECT_EQ(members[10].tag, "w_green=1.000000;chebyshev");
    const auto rows = front_rows(members, cfg.strategy);
    std::ostringstream os;
    write_front_rows(os, rows);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "w_green,obj0_mean,obj0_std,obj1_mean,obj1_std,n_episodes,strategy,tag");
    int count = 0;
    while (std::getline(is, line)) ++count;
    EXPECT_EQ(count, 11);
    EXPECT_EQ(front_points(rows).size(), 11u);
}

TEST(Sweep, PureRedWeightMatchesSingleObjectiveGame) {
    auto cfg = tiny_cfg();
    cfg.total_timesteps = static_cast<long>(cfg.batch_size());
    SweepOptions opts;
    opts.eval_episodes = 30;
    const auto members = weight_sweep(cfg, [] { return CyberDefenceEnv(short_cyber(Game::C)); },
                                      {pareto::WeightVector({1.0, 0.0})}, opts);
    ASSERT_EQ(members.size(), 1u);
    PpoConfig a = cfg;
    a.weights = pareto::WeightVector({1.0});
    const auto trained = train(a, [] { return CyberDefenceEnv(short_cyber(Game::A)); });
    auto agent = MoppoAgent::from_checkpoint(trained.checkpoint);
    CyberDefenceEnv env(short_cyber(Game::A));
    const auto single = evaluate(agent, env, opts.eval_episodes, opts.eval_seed, opts.gamma);
    const auto& swept = members[0].summary;
    const double se = std::sqrt((swept.std[0] * swept.std[0] + single.std[0] * single.std[0]) / opts.eval_episodes);
    EXPECT_LE(std::abs(swept.mean[0] - single.mean[0]), 4.0 * se + 1e-9);
}

TEST(Sweep, EmptyWeightListIsRejected) {
    EXPECT_THROW(weight_sweep(tiny_cfg(), [] { return toy::TwoArmedBandit{}; }, {}, SweepOptions{}), ConfigError);
}
