#pragma once

// Live steering session, independent of any transport: consumes client
// messages, advances one episode step by step, and produces the frames to
// send back.

#include <acd/checkpoint.hpp>
#include <acd/evalharness.hpp>
#include <acd/momdp_env.hpp>
#include <acd/moppo.hpp>
#include <acd/pcn.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace acd::steer {

struct PortfolioEntry {
    pareto::WeightVector weights;
    PolicyCheckpoint checkpoint;
    std::string tag;
};

/// Policies a session can switch between. Immutable once built.
class Portfolio {
  public:
    Portfolio(EnvConfig env, std::vector<PortfolioEntry> moppo, std::optional<PolicyCheckpoint> pcn = std::nullopt)
        : env_(std::move(env)), moppo_(std::move(moppo)), pcn_(std::move(pcn)) {
        if (moppo_.empty()) throw ConfigError("portfolio needs at least one MOPPO policy");
        std::set<std::string> tags;
        for (const auto& e : moppo_) {
            if (!tags.insert(e.tag).second) throw ConfigError("duplicate portfolio tag '" + e.tag + "'");
            if (e.checkpoint.trainer != "moppo") throw ConfigError("portfolio entry '" + e.tag + "' is not MOPPO");
            if (e.weights.size() != n_obj()) throw ConfigError("portfolio entry '" + e.tag + "' has wrong weight length");
        }
        if (pcn_ && pcn_->trainer != "pcn") throw ConfigError("PCN slot holds a non-PCN checkpoint");
    }

    const EnvConfig& env() const { return env_; }
    std::size_t n_obj() const { return num_objectives(env_.game.game); }
    std::size_t size() const { return moppo_.size(); }
    const PortfolioEntry& operator[](std::size_t i) const { return moppo_[i]; }
    const std::optional<PolicyCheckpoint>& pcn() const { return pcn_; }

    /// Entry with the smallest Euclidean distance to `w`; ties go to the
    /// lower index.
    std::size_t nearest(std::span<const double> w) const {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < moppo_.size(); ++i) {
            double d = 0.0;
            for (std::size_t j = 0; j < w.size(); ++j) {
                const double diff = moppo_[i].weights[j] - w[j];
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        return best;
    }

  private:
    EnvConfig env_;
    std::vector<PortfolioEntry> moppo_;
    std::optional<PolicyCheckpoint> pcn_;
};

/// Loads every checkpoint under `dir`. MOPPO policies are ordered by their
/// second weight (then tag); at most one PCN checkpoint is allowed.
inline Portfolio load_portfolio(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("portfolio directory '" + dir + "' not found");
    std::vector<std::string> metas;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        const auto p = e.path().string();
        if (e.is_regular_file() && p.ends_with(".meta.json")) metas.push_back(p);
    }
    std::sort(metas.begin(), metas.end());
    std::vector<PortfolioEntry> entries;
    std::optional<PolicyCheckpoint> pcn;
    json env = nullptr;
    for (const auto& m : metas) {
        auto ck = load_checkpoint(m);
        if (ck.env.is_null()) throw ConfigError(m + ": checkpoint has no environment block");
        if (env.is_null()) env = ck.env;
        if (ck.env != env) throw ConfigError(m + ": environment differs from the rest of the portfolio");
        if (ck.trainer == "pcn") {
            if (pcn) throw ConfigError(m + ": more than one PCN checkpoint in the portfolio");
            pcn = std::move(ck);
            continue;
        }
        PortfolioEntry e;
        e.weights = pareto::WeightVector(ck.weights);
        e.tag = ck.extra.value("tag", "w=" + MoppoAgent::weights_label(ck.weights));
        e.checkpoint = std::move(ck);
        entries.push_back(std::move(e));
    }
    if (env.is_null()) throw ConfigError("portfolio directory '" + dir + "' holds no checkpoints");
    std::stable_sort(entries.begin(), entries.end(), [](const PortfolioEntry& a, const PortfolioEntry& b) {
        const double ga = a.weights.size() > 1 ? a.weights[1] : 0.0;
        const double gb = b.weights.size() > 1 ? b.weights[1] : 0.0;
        return ga != gb ? ga < gb : a.tag < b.tag;
    });
    return Portfolio(env_config_from_json(env), std::move(entries), std::move(pcn));
}

struct SessionDefaults {
    std::uint64_t seed = 0;
    double steps_per_sec = 4.0;  // 0 means manual stepping
    std::size_t policy_index = 0;
};

inline std::string_view known_level_name(sim::KnownLevel k) {
    switch (k) {
    case sim::KnownLevel::Unknown: return "unknown";
    case sim::KnownLevel::None: return "none";
    case sim::KnownLevel::UserAccess: return "user";
    case sim::KnownLevel::Privileged: return "privileged";
    }
    return "unknown";
}

class SteerSession {
  public:
    SteerSession(std::shared_ptr<const Portfolio> portfolio, SessionDefaults defaults)
        : portfolio_(std::move(portfolio)), defaults_(defaults), env_(portfolio_->env()),
          steps_per_sec_(defaults.steps_per_sec) {
        if (defaults_.policy_index >= portfolio_->size()) throw ConfigError("default policy index out of range");
        for (std::size_t i = 0; i < portfolio_->size(); ++i) {
            const auto& e = (*portfolio_)[i];
            moppo_.push_back(std::make_unique<MoppoAgent>(MoppoAgent::from_checkpoint(e.checkpoint, false, e.tag)));
        }
        restart(defaults_.seed);
    }

    /// Full snapshot of the current step; the first frame of every session.
    json state_frame() const {
        json hosts = json::array();
        for (const auto& h : env_.state().hosts) {
            hosts.push_back({{"id", sim::host_name(h.id)},
                             {"known_level", known_level_name(h.known_level)},
                             {"ports", h.ports_open},
                             {"scan", h.scan_flag},
                             {"exploit", h.exploit_flag}});
        }
        const auto& rec = runner_->record();
        json reward = rec.steps.empty() ? json(std::vector<double>(portfolio_->n_obj(), 0.0)) : json(rec.steps.back().reward);
        return {{"type", "state"},
                {"t", runner_->t()},
                {"cum_return", runner_->cum_return()},
                {"reward", reward},
                {"hosts", hosts},
                {"active_policy", active_->describe()},
                {"paused", paused_},
                {"steps_per_sec", steps_per_sec_},
                {"seed", seed_},
                {"done", runner_->done()}};
    }

    /// Parses and applies one client message; returns the frames to send.
    std::vector<json> handle(std::string_view text) {
        json msg;
        try {
            msg = json::parse(text);
        } catch (const json::exception& e) {
            return {error_frame(std::string("malformed message: ") + e.what())};
        }
        try {
            return apply(msg);
        } catch (const std::exception& e) {
            return {error_frame(e.what(), msg)};
        }
    }

    /// Advances one step if the session runs autonomously and is not paused.
    std::vector<json> tick() {
        if (paused_ || steps_per_sec_ <= 0.0 || runner_->done()) return {};
        return advance();
    }

    bool running() const { return !paused_ && steps_per_sec_ > 0.0 && !runner_->done(); }
    double steps_per_sec() const { return steps_per_sec_; }
    bool paused() const { return paused_; }
    const RolloutRecord& record() const { return runner_->record(); }
    const Agent& active() const { return *active_; }

  private:
    std::vector<json> apply(const json& msg) {
        if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
            throw UsageError("message needs a string 'type' field");
        }
        const std::string type = msg["type"].get<std::string>();
        if (type == "set_weights") {
            const auto w = msg.at("w").get<std::vector<double>>();
            if (w.size() != portfolio_->n_obj()) {
                throw UsageError("w has " + std::to_string(w.size()) + " entries, expected " +
                                 std::to_string(portfolio_->n_obj()));
            }
            for (double x : w) {
                if (!std::isfinite(x)) throw UsageError("w entries must be finite");
            }
            active_ = moppo_[portfolio_->nearest(w)].get();
            return {ack(msg)};
        }
        if (type == "set_target") {
            if (!portfolio_->pcn()) throw UsageError("no PCN policy in the portfolio");
            pcn::Command c;
            c.desired_return = msg.at("return").get<std::vector<double>>();
            c.desired_horizon = msg.at("horizon").get<int>();
            if (c.desired_return.size() != portfolio_->n_obj()) throw UsageError("return has the wrong length");
            if (c.desired_horizon < 1) throw UsageError("horizon must be >= 1");
            pcn_ = std::make_unique<pcn::PcnAgent>(pcn::PcnAgent::from_checkpoint(*portfolio_->pcn(), std::move(c)));
            active_ = pcn_.get();
            return {ack(msg)};
        }
        if (type == "pause" || type == "resume") {
            paused_ = type == "pause";
            return {ack(msg)};
        }
        if (type == "reset") {
            restart(msg.contains("seed") ? msg["seed"].get<std::uint64_t>() : seed_);
            return {ack(msg), state_frame()};
        }
        if (type == "set_speed") {
            const double x = msg.at("steps_per_sec").get<double>();
            if (!std::isfinite(x) || x < 0.0) throw UsageError("steps_per_sec must be finite and >= 0");
            steps_per_sec_ = x;
            return {ack(msg)};
        }
        if (type == "step") {
            if (runner_->done()) throw UsageError("episode finished; send reset");
            return advance();
        }
        throw UsageError("unknown message type '" + type + "'");
    }

    std::vector<json> advance() {
        runner_->step(*active_);
        std::vector<json> out{state_frame()};
        if (runner_->done()) {
            out.push_back({{"type", "episode_end"},
                           {"summary",
                            {{"steps", runner_->t()}, {"cum_return", runner_->cum_return()}, {"seed", seed_}}}});
        }
        return out;
    }

    void restart(std::uint64_t seed) {
        seed_ = seed;
        runner_.reset();
        runner_ = std::make_unique<EpisodeRunner<CyberDefenceEnv>>(env_, seed_, 0);
        if (!active_) active_ = moppo_[defaults_.policy_index].get();
    }

    // Commands land between steps, so the next step is the first to see them.
    json ack(const json& msg) const {
        return {{"type", "ack"}, {"cmd_id", msg.value("cmd_id", json(nullptr))}, {"effective_step", runner_->t() + 1}};
    }

    static json error_frame(const std::string& detail, const json& msg = nullptr) {
        json f = {{"type", "error"}, {"detail", detail}};
        if (msg.is_object() && msg.contains("cmd_id")) f["cmd_id"] = msg["cmd_id"];
        return f;
    }

    std::shared_ptr<const Portfolio> portfolio_;
    SessionDefaults defaults_;
    CyberDefenceEnv env_;
    std::vector<std::unique_ptr<MoppoAgent>> moppo_;
    std::unique_ptr<pcn::PcnAgent> pcn_;
    Agent* active_ = nullptr;
    std::unique_ptr<EpisodeRunner<CyberDefenceEnv>> runner_;
    std::uint64_t seed_ = 0;
    double steps_per_sec_;
    bool paused_ = false;
};

}  // namespace acd::steer
