#pragma once

// Experiment configuration: a default document that doubles as the schema,
// named presets, and strict merging of files and key=value overrides.

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "ergodic/agent.hpp"
#include "ergodic/cartpole.hpp"
#include "ergodic/env_core.hpp"
#include "ergodic/error.hpp"
#include "ergodic/risk_sensitive.hpp"
#include "ergodic/serialize.hpp"

namespace ergodic::cli {

using nlohmann::json;

inline json default_config()
{
    CoinTossConfig coin;
    GbmConfig gbm;
    cartpole::Params cp;
    TrainConfig agent;
    risk::RiskParams rp;
    json agent_json = to_json(agent);
    agent_json.erase("transform");
    agent_json.erase("transform_mode");
    agent_json["modes"] = json::array({"none"});
    agent_json["observation_scale"] = 10.0;
    agent_json["test_pole_length_scale"] = 1.0;
    agent_json["kelly_band"] = json::array({0.15, 0.35});
    agent_json["non_robust_action"] = 0.8;
    agent_json["min_passing_seeds"] = 1;
    agent_json["transform_file"] = "";

    json transform = to_json(agent.transform);
    transform["input"] = "";
    transform["pilot_bet_fraction"] = 1.0;
    transform["pilot_horizon"] = 10000;
    transform["min_r_squared"] = 0.95;

    return {
        {"experiment", "custom"},
        {"seed", 1},
        {"n_seeds", 1},
        {"output_dir", "runs/custom"},
        {"env",
         {{"kind", "coin-toss"},
          {"coin_toss",
           {{"initial_return", coin.initial_return},
            {"gain_frac", coin.gain_frac},
            {"loss_frac", coin.loss_frac},
            {"p_heads", coin.p_heads},
            {"horizon", coin.horizon}}},
          {"gbm",
           {{"drift", gbm.drift},
            {"volatility", gbm.volatility},
            {"initial_value", gbm.initial_value},
            {"dt", gbm.dt},
            {"horizon", gbm.horizon},
            {"exact", gbm.exact}}},
          {"random_walk", {{"start", 100.0}, {"step_sd", 1.0}, {"horizon", 10000}}},
          {"cartpole",
           {{"gravity", cp.gravity},
            {"cart_mass", cp.cart_mass},
            {"pole_mass", cp.pole_mass},
            {"pole_half_length", cp.pole_half_length},
            {"force_magnitude", cp.force_magnitude},
            {"dt", cp.dt},
            {"angle_threshold", cp.angle_threshold},
            {"position_threshold", cp.position_threshold}}}}},
        {"simulate", {{"n_trajectories", 10}, {"bet_fraction", 1.0}}},
        {"transform", transform},
        {"agent", agent_json},
        {"diagnose",
         {{"kind", "witness"},
          {"n_trajectories", 100000},
          {"t", 10},
          {"tolerance", 0.05},
          {"long_horizon", 100000},
          {"growth_band", json::array({-0.0577, -0.0477})},
          {"n_bins", 10},
          {"stabilization_horizon", 10000},
          {"min_raw_ratio", 50.0},
          {"max_transformed_ratio", 3.0},
          {"max_identity_ratio", 1.5},
          {"levels", json::array({10.0, 100.0})},
          {"n_levels", 5},
          {"samples_per_level", 1000000},
          {"max_spread", 1.5},
          {"kelly_resolution", 10000},
          {"sde",
           {{"beta", rp.beta},
            {"mu", rp.mu},
            {"sigma", rp.sigma},
            {"dts", json::array({0.00390625, 0.0009765625, 0.000244140625, 0.00006103515625})},
            {"horizon", 1.0},
            {"n_seeds", 100},
            {"ratio_band", json::array({1.2, 1.7})}}}}},
    };
}

struct Preset {
    std::string command;
    std::string description;
    json patch;
};

inline json coin_agent_patch()
{
    return {{"optimizer", "adam"},      {"learning_rate", 0.001},  {"discount", 0.5},
            {"training_episodes", 5000}, {"train_episode_length", 100}, {"test_episode_length", 1000},
            {"test_episodes", 100},      {"min_passing_seeds", 4}};
}

inline const std::map<std::string, Preset>& presets()
{
    static const std::map<std::string, Preset> table = [] {
        std::map<std::string, Preset> t;
        t["fig1"] = {"simulate", "10 coin-toss trajectories, F=1, T=1000",
                     {{"experiment", "fig1"}, {"simulate", {{"n_trajectories", 10}, {"bet_fraction", 1.0}}}}};
        t["coin-pilot"] = {"learn-transform", "transform learned from one coin-toss path, F=1, T=10^4",
                           {{"experiment", "coin-pilot"}, {"env", {{"kind", "coin-toss"}}}}};
        t["gbm"] = {"learn-transform", "transform learned from one GBM path of 10^5 steps",
                    {{"experiment", "gbm"}, {"env", {{"kind", "gbm"}, {"gbm", {{"horizon", 100000}}}}}}};
        json fig2_agent = coin_agent_patch();
        fig2_agent["modes"] = json::array({"none"});
        t["fig2"] = {"train", "REINFORCE on the fractional coin toss with raw returns, 5 seeds",
                     {{"experiment", "fig2"}, {"n_seeds", 5}, {"agent", fig2_agent}}};
        json fig3_agent = coin_agent_patch();
        fig3_agent["modes"] = json::array({"static"});
        t["fig3"] = {"train", "REINFORCE on the fractional coin toss with a learned transform, 5 seeds",
                     {{"experiment", "fig3"}, {"n_seeds", 5}, {"agent", fig3_agent}}};
        t["fig4a"] = {"train", "cart-pole, standard vs ergodic REINFORCE, 5 paired seeds, test pole x1.5",
                      {{"experiment", "fig4a"},
                       {"n_seeds", 5},
                       {"env", {{"kind", "cartpole"}}},
                       {"agent",
                        {{"optimizer", "adam"},
                         {"modes", json::array({"none", "per-episode"})},
                         {"transform_target", "return-to-go"},
                         {"test_pole_length_scale", 1.5},
                         {"min_passing_seeds", 4}}}}};
        t["witness"] = {"diagnose", "ensemble mean grows while the time average decays (coin toss, F=1)",
                        {{"experiment", "witness"}, {"diagnose", {{"kind", "witness"}}}}};
        t["proportionality"] = {"diagnose", "second moment proportional to variance across levels",
                                {{"experiment", "proportionality"}, {"diagnose", {{"kind", "proportionality"}}}}};
        t["stabilization"] = {"diagnose", "binned increment variance before and after the learned transform",
                              {{"experiment", "stabilization"}, {"diagnose", {{"kind", "stabilization"}}}}};
        t["identity"] = {"diagnose", "additive random walk: already stationary, transform close to linear",
                         {{"experiment", "identity"}, {"diagnose", {{"kind", "identity"}}}}};
        t["sde-check"] = {"diagnose", "Euler-Maruyama vs closed form of the exponential-transform SDE",
                          {{"experiment", "sde-check"}, {"diagnose", {{"kind", "sde-check"}}}}};
        t["kelly"] = {"diagnose", "brute-force Kelly fraction of the coin toss",
                      {{"experiment", "kelly"}, {"diagnose", {{"kind", "kelly"}}}}};
        return t;
    }();
    return table;
}

inline std::string preset_list(const std::string& command = {})
{
    std::string out;
    for (const auto& [name, p] : presets())
        if (command.empty() || p.command == command)
            out += (out.empty() ? "" : ", ") + name;
    return out;
}

namespace detail {

inline bool same_kind(const json& schema, const json& value)
{
    if (schema.is_boolean())
        return value.is_boolean();
    if (schema.is_number_integer() || schema.is_number_unsigned())
        return value.is_number_integer() || value.is_number_unsigned();
    if (schema.is_number())
        return value.is_number();
    if (schema.is_string())
        return value.is_string();
    if (schema.is_array())
        return value.is_array();
    if (schema.is_object())
        return value.is_object();
    return false;
}

inline const char* kind_name(const json& schema)
{
    if (schema.is_boolean())
        return "boolean";
    if (schema.is_number_integer() || schema.is_number_unsigned())
        return "integer";
    if (schema.is_number())
        return "number";
    if (schema.is_string())
        return "string";
    if (schema.is_array())
        return "array";
    return "object";
}

} // namespace detail

/// Applies `patch` onto `target`, rejecting keys absent from `target` and
/// values whose JSON kind differs from the default's.
inline void merge_checked(json& target, const json& patch, const std::string& path = "")
{
    if (!patch.is_object())
        throw ConfigError("config" + (path.empty() ? "" : " at '" + path + "'") + ": expected an object");
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        const std::string key = path.empty() ? it.key() : path + "." + it.key();
        if (!target.contains(it.key()))
            throw ConfigError("config: unknown key '" + key + "'");
        json& slot = target[it.key()];
        if (slot.is_object()) {
            merge_checked(slot, it.value(), key);
            continue;
        }
        if (!detail::same_kind(slot, it.value()))
            throw ConfigError("config: '" + key + "' must be " + detail::kind_name(slot));
        if (slot.is_number_float() && it.value().is_number())
            slot = it.value().get<double>();
        else
            slot = it.value();
    }
}

/// "a.b.c=value": the value is parsed as JSON when possible, otherwise
/// taken as a string.
inline json override_patch(const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override '" + assignment + "' is not of the form key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded())
        value = text;
    json patch = value;
    std::string rest = key;
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto dot = rest.find('.', start);
        parts.push_back(rest.substr(start, dot - start));
        if (dot == std::string::npos)
            break;
        start = dot + 1;
    }
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
        if (it->empty())
            throw ConfigError("override '" + assignment + "' has an empty key segment");
        patch = json{{*it, patch}};
    }
    return patch;
}

inline json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded())
        throw ConfigError("config file '" + path + "' is not valid JSON");
    return j;
}

struct ResolveRequest {
    std::string command;
    std::string preset;
    std::string config_path;
    std::optional<long long> seed;
    std::string output_dir;
    std::vector<std::string> overrides;
};

inline json resolve_config(const ResolveRequest& req)
{
    json cfg = default_config();
    if (!req.preset.empty()) {
        const auto it = presets().find(req.preset);
        if (it == presets().end())
            throw ConfigError("unknown preset '" + req.preset + "'; available: " + preset_list());
        if (it->second.command != req.command)
            throw ConfigError("preset '" + req.preset + "' belongs to '" + it->second.command + "'; presets for '" +
                              req.command + "': " + preset_list(req.command));
        merge_checked(cfg, it->second.patch);
        cfg["output_dir"] = "runs/" + req.preset;
    }
    if (!req.config_path.empty())
        merge_checked(cfg, read_json_file(req.config_path));
    if (req.seed)
        cfg["seed"] = *req.seed;
    if (!req.output_dir.empty())
        cfg["output_dir"] = req.output_dir;
    for (const auto& o : req.overrides)
        merge_checked(cfg, override_patch(o));
    return cfg;
}

// Typed views with semantic validation.

inline CoinTossConfig coin_toss_config(const json& cfg)
{
    const auto& j = cfg.at("env").at("coin_toss");
    CoinTossConfig c;
    c.initial_return = j.at("initial_return");
    c.gain_frac = j.at("gain_frac");
    c.loss_frac = j.at("loss_frac");
    c.p_heads = j.at("p_heads");
    c.horizon = j.at("horizon");
    c.validate();
    return c;
}

inline GbmConfig gbm_config(const json& cfg)
{
    const auto& j = cfg.at("env").at("gbm");
    GbmConfig g;
    g.drift = j.at("drift");
    g.volatility = j.at("volatility");
    g.initial_value = j.at("initial_value");
    g.dt = j.at("dt");
    g.horizon = j.at("horizon");
    g.exact = j.at("exact");
    g.validate();
    return g;
}

inline cartpole::Params cartpole_params(const json& cfg)
{
    const auto& j = cfg.at("env").at("cartpole");
    cartpole::Params p;
    p.gravity = j.at("gravity");
    p.cart_mass = j.at("cart_mass");
    p.pole_mass = j.at("pole_mass");
    p.pole_half_length = j.at("pole_half_length");
    p.force_magnitude = j.at("force_magnitude");
    p.dt = j.at("dt");
    p.angle_threshold = j.at("angle_threshold");
    p.position_threshold = j.at("position_threshold");
    p.validate();
    return p;
}

inline TransformOptions transform_options(const json& cfg)
{
    return transform_options_from_json(cfg.at("transform"));
}

inline TrainConfig train_config(const json& cfg)
{
    json j = cfg.at("agent");
    j["transform"] = cfg.at("transform");
    return train_config_from_json(j);
}

inline std::vector<std::uint64_t> seed_list(const json& cfg)
{
    const long long seed = cfg.at("seed");
    const int n = cfg.at("n_seeds");
    ergodic::detail::require(seed >= 0, "seed must be >= 0");
    ergodic::detail::require(n >= 1, "n_seeds must be >= 1");
    std::vector<std::uint64_t> out;
    for (int i = 0; i < n; ++i)
        out.push_back(static_cast<std::uint64_t>(seed + i));
    return out;
}

} // namespace ergodic::cli
