#pragma once

// JSON persistence for policies and training configuration.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "json.hpp"

#include "ergodic/agent.hpp"
#include "ergodic/error.hpp"
#include "ergodic/policy.hpp"
#include "ergodic/transform.hpp"

namespace ergodic {

inline nlohmann::json to_json(const TransformOptions& o)
{
    return {{"span", o.span},
            {"robust_iterations", o.robust_iterations},
            {"grid_size", o.grid_size},
            {"abs_epsilon", o.increments.abs_epsilon},
            {"rel_epsilon", o.increments.rel_epsilon},
            {"scale", to_string(o.scale)},
            {"auto_log_ratio", o.auto_log_ratio},
            {"loess_delta_fraction", o.loess_delta_fraction}};
}

inline TransformOptions transform_options_from_json(const nlohmann::json& j)
{
    try {
        TransformOptions o;
        o.span = j.value("span", o.span);
        o.robust_iterations = j.value("robust_iterations", o.robust_iterations);
        o.grid_size = j.value("grid_size", o.grid_size);
        o.increments.abs_epsilon = j.value("abs_epsilon", o.increments.abs_epsilon);
        o.increments.rel_epsilon = j.value("rel_epsilon", o.increments.rel_epsilon);
        o.scale = level_scale_from_string(j.value("scale", to_string(o.scale)));
        o.auto_log_ratio = j.value("auto_log_ratio", o.auto_log_ratio);
        o.loess_delta_fraction = j.value("loess_delta_fraction", o.loess_delta_fraction);
        o.validate();
        return o;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("transform options: ") + e.what());
    }
}

inline nlohmann::json to_json(const TrainConfig& c)
{
    return {{"discount", c.discount},
            {"training_episodes", c.training_episodes},
            {"test_episodes", c.test_episodes},
            {"train_episode_length", c.train_episode_length},
            {"test_episode_length", c.test_episode_length},
            {"epochs", c.epochs},
            {"learning_rate", c.learning_rate},
            {"hidden", c.hidden},
            {"transform_mode", to_string(c.transform_mode)},
            {"transform_target", to_string(c.transform_target)},
            {"baseline", to_string(c.baseline)},
            {"optimizer", to_string(c.optimizer)},
            {"normalize_advantages", c.normalize_advantages},
            {"max_gradient_norm", c.max_gradient_norm},
            {"adam_beta1", c.adam_beta1},
            {"adam_beta2", c.adam_beta2},
            {"adam_epsilon", c.adam_epsilon},
            {"greedy_evaluation", c.greedy_evaluation},
            {"transform", to_json(c.transform)}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j)
{
    try {
        TrainConfig c;
        c.discount = j.value("discount", c.discount);
        c.training_episodes = j.value("training_episodes", c.training_episodes);
        c.test_episodes = j.value("test_episodes", c.test_episodes);
        c.train_episode_length = j.value("train_episode_length", c.train_episode_length);
        c.test_episode_length = j.value("test_episode_length", c.test_episode_length);
        c.epochs = j.value("epochs", c.epochs);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.hidden = j.value("hidden", c.hidden);
        c.transform_mode = transform_mode_from_string(j.value("transform_mode", to_string(c.transform_mode)));
        c.transform_target = transform_target_from_string(j.value("transform_target", to_string(c.transform_target)));
        c.baseline = baseline_from_string(j.value("baseline", to_string(c.baseline)));
        c.optimizer = optimizer_from_string(j.value("optimizer", to_string(c.optimizer)));
        c.normalize_advantages = j.value("normalize_advantages", c.normalize_advantages);
        c.max_gradient_norm = j.value("max_gradient_norm", c.max_gradient_norm);
        c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
        c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
        c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
        c.greedy_evaluation = j.value("greedy_evaluation", c.greedy_evaluation);
        if (j.contains("transform"))
            c.transform = transform_options_from_json(j.at("transform"));
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
}

/// FNV-1a of the compact JSON text, as 16 hex digits.
inline std::string config_hash(const nlohmann::json& j)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : j.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline nlohmann::json to_json(const PolicyParams& p, const std::string& hash = {})
{
    const Eigen::VectorXd flat = p.flat();
    return {{"head", to_string(p.head)},
            {"observation_dim", p.observation_dim()},
            {"hidden", p.hidden()},
            {"output_dim", p.output_dim()},
            {"activation", "tanh"},
            {"layout", "w1 (column-major), b1, w2 (column-major), b2"},
            {"weights", std::vector<double>(flat.data(), flat.data() + flat.size())},
            {"config_hash", hash}};
}

inline PolicyParams policy_from_json(const nlohmann::json& j)
{
    try {
        PolicyParams p;
        p.head = policy_head_from_string(j.at("head").get<std::string>());
        const int obs = j.at("observation_dim").get<int>();
        const int hidden = j.at("hidden").get<int>();
        const int out = j.at("output_dim").get<int>();
        if (obs < 1 || hidden < 1 || out < 2)
            throw ConfigError("policy JSON: invalid shapes");
        p.w1.resize(hidden, obs);
        p.b1.resize(hidden);
        p.w2.resize(out, hidden);
        p.b2.resize(out);
        const auto w = j.at("weights").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(w.size()) != p.size())
            throw ConfigError("policy JSON: expected " + std::to_string(p.size()) + " weights, got " +
                              std::to_string(w.size()));
        p.set_flat(Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())));
        if (!p.finite())
            throw ConfigError("policy JSON: non-finite weights");
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("policy JSON: ") + e.what());
    }
}

} // namespace ergodic
