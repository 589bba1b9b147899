#pragma once

// Policy checkpoints: `<stem>.meta.json` + `<stem>.params.f64le`.

#include <acd/common.hpp>
#include <acd/momdp_env.hpp>
#include <acd/nn.hpp>

#include <json.hpp>

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace acd {

using json = nlohmann::json;

/// FNV-1a over the canonical JSON dump.
inline std::string config_hash(const json& j) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : j.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline json to_json(const nn::NetSpec& s) {
    return {{"input_dim", s.input_dim},
            {"hidden", s.hidden},
            {"activation", "tanh"},
            {"policy_out", s.policy_out},
            {"value_heads", s.value_heads}};
}

inline nn::NetSpec net_spec_from_json(const json& j) {
    nn::NetSpec s;
    s.input_dim = j.at("input_dim").get<std::size_t>();
    s.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    if (j.value("activation", "tanh") != "tanh") throw ConfigError("unsupported activation");
    s.policy_out = j.at("policy_out").get<std::size_t>();
    s.value_heads = j.at("value_heads").get<std::size_t>();
    return s;
}

inline json to_json(const EnvConfig& e) {
    json subgroup = json::array();
    for (auto h : e.sim.green_subgroup) subgroup.push_back(sim::host_name(h));
    return {{"scenario", sim::scenario_name(e.sim.scenario)},
            {"redagenttype", e.sim.red_mode == sim::RedMode::Meander ? "meander" : "b-line"},
            {"baseline_ports", e.sim.baseline_ports},
            {"max_ports", e.sim.max_ports},
            {"green_subgroup", subgroup},
            {"game", game_name(e.game.game)},
            {"gamma", e.game.gamma},
            {"episode_length", e.game.episode_length}};
}

inline EnvConfig env_config_from_json(const json& j) {
    EnvConfig e;
    e.sim.scenario = sim::parse_scenario(j.at("scenario").get<std::string>());
    e.sim.red_mode = sim::parse_red_mode(j.at("redagenttype").get<std::string>());
    e.sim.baseline_ports = j.at("baseline_ports").get<int>();
    e.sim.max_ports = j.at("max_ports").get<int>();
    for (const auto& name : j.at("green_subgroup")) {
        auto h = sim::parse_host(name.get<std::string>());
        if (!h) throw ConfigError("unknown host '" + name.get<std::string>() + "'");
        e.sim.green_subgroup.push_back(*h);
    }
    e.game.game = parse_game(j.at("game").get<std::string>());
    e.game.gamma = j.at("gamma").get<double>();
    e.game.episode_length = j.at("episode_length").get<int>();
    return e;
}

struct PolicyCheckpoint {
    std::string trainer;  // "moppo" or "pcn"
    nn::NetSpec spec;
    std::size_t n_obj = 1;
    std::uint64_t seed = 0;
    std::vector<double> weights;         // MOPPO
    std::string strategy = "linear";     // MOPPO
    std::vector<double> scaling_factor;  // PCN
    std::string config_hash;
    bool partial = false;
    json env = nullptr;      // EnvConfig JSON, or null for non-cyber environments
    json extra = json::object();
    nn::Params params;
};

inline json meta_json(const PolicyCheckpoint& c) {
    return {{"format", 1},
            {"trainer", c.trainer},
            {"net", to_json(c.spec)},
            {"num_params", c.params.size()},
            {"n_obj", c.n_obj},
            {"seed", c.seed},
            {"weights", c.weights},
            {"strategy", c.strategy},
            {"scaling_factor", c.scaling_factor},
            {"config_hash", c.config_hash},
            {"partial", c.partial},
            {"env", c.env},
            {"extra", c.extra}};
}

/// Strips a trailing `.meta.json` or `.params.f64le` so either file path or
/// the bare stem can name a checkpoint.
inline std::string checkpoint_stem(std::string path) {
    for (std::string suffix : {".meta.json", ".params.f64le"}) {
        if (path.size() > suffix.size() && path.ends_with(suffix)) return path.substr(0, path.size() - suffix.size());
    }
    return path;
}

inline void write_f64le(std::ostream& os, std::span<const double> values) {
    std::vector<unsigned char> bytes(values.size() * 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto bits = std::bit_cast<std::uint64_t>(values[i]);
        for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<unsigned char>(bits >> (8 * b));
    }
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline std::vector<double> read_f64le(std::istream& is, std::size_t count) {
    std::vector<unsigned char> bytes(count * 8);
    is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(is.gcount()) != bytes.size()) throw IoError("parameter file is truncated");
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
        out[i] = std::bit_cast<double>(bits);
    }
    return out;
}

inline void save_checkpoint(const PolicyCheckpoint& c, const std::string& path) {
    const std::string stem = checkpoint_stem(path);
    const auto parent = std::filesystem::path(stem).parent_path();
    if (!parent.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(parent, ec);
    }
    {
        std::ofstream meta(stem + ".meta.json");
        if (!meta) throw IoError("cannot write '" + stem + ".meta.json'");
        meta << meta_json(c).dump(2) << '\n';
    }
    std::ofstream bin(stem + ".params.f64le", std::ios::binary);
    if (!bin) throw IoError("cannot write '" + stem + ".params.f64le'");
    write_f64le(bin, c.params);
    if (!bin) throw IoError("write failed for '" + stem + ".params.f64le'");
}

inline PolicyCheckpoint load_checkpoint(const std::string& path) {
    const std::string stem = checkpoint_stem(path);
    std::ifstream meta(stem + ".meta.json");
    if (!meta) throw IoError("checkpoint '" + stem + ".meta.json' not found");
    json j;
    try {
        meta >> j;
    } catch (const json::exception& e) {
        throw IoError(stem + ".meta.json: " + e.what());
    }
    PolicyCheckpoint c;
    c.trainer = j.at("trainer").get<std::string>();
    c.spec = net_spec_from_json(j.at("net"));
    c.n_obj = j.at("n_obj").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.weights = j.at("weights").get<std::vector<double>>();
    c.strategy = j.at("strategy").get<std::string>();
    c.scaling_factor = j.at("scaling_factor").get<std::vector<double>>();
    c.config_hash = j.at("config_hash").get<std::string>();
    c.partial = j.at("partial").get<bool>();
    c.env = j.at("env");
    c.extra = j.at("extra");
    const std::size_t n = j.at("num_params").get<std::size_t>();
    if (n != nn::make_layout(c.spec).total) throw IoError(stem + ": num_params does not match the network layout");
    std::ifstream bin(stem + ".params.f64le", std::ios::binary);
    if (!bin) throw IoError("checkpoint '" + stem + ".params.f64le' not found");
    c.params = read_f64le(bin, n);
    return c;
}

}  // namespace acd
