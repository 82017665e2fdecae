#pragma once

// Monte Carlo policy gradient (REINFORCE) with an optional ergodicity
// transformation of the returns the update sees.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ergodic/cartpole.hpp"
#include "ergodic/env_core.hpp"
#include "ergodic/error.hpp"
#include "ergodic/policy.hpp"
#include "ergodic/rng.hpp"
#include "ergodic/trajectory.hpp"
#include "ergodic/transform.hpp"

namespace ergodic {

enum class TransformMode { none, fixed, per_episode };
/// Which return sequence the transform acts on. `cumulative_return` maps
/// R(t_k) and rebuilds rewards as h(R(t_k)) - h(R(t_{k-1})).
/// `return_to_go` maps the discounted returns-to-go G_k directly; this is
/// the only non-trivial choice for constant-reward tasks such as cart-pole,
/// whose cumulative return has constant increments.
enum class TransformTarget { cumulative_return, return_to_go };
enum class Baseline { none, mean };
enum class Optimizer { sgd, adam };

inline std::string to_string(TransformMode m)
{
    switch (m) {
    case TransformMode::none: return "none";
    case TransformMode::fixed: return "static";
    case TransformMode::per_episode: return "per-episode";
    }
    return "none";
}

inline TransformMode transform_mode_from_string(const std::string& s)
{
    if (s == "none")
        return TransformMode::none;
    if (s == "static")
        return TransformMode::fixed;
    if (s == "per-episode")
        return TransformMode::per_episode;
    throw ConfigError("unknown transform mode '" + s + "' (expected none, static, per-episode)");
}

inline std::string to_string(TransformTarget t)
{
    return t == TransformTarget::cumulative_return ? "cumulative-return" : "return-to-go";
}

inline TransformTarget transform_target_from_string(const std::string& s)
{
    if (s == "cumulative-return")
        return TransformTarget::cumulative_return;
    if (s == "return-to-go")
        return TransformTarget::return_to_go;
    throw ConfigError("unknown transform target '" + s + "' (expected cumulative-return, return-to-go)");
}

inline std::string to_string(Baseline b)
{
    return b == Baseline::none ? "none" : "mean";
}

inline Baseline baseline_from_string(const std::string& s)
{
    if (s == "none")
        return Baseline::none;
    if (s == "mean")
        return Baseline::mean;
    throw ConfigError("unknown baseline '" + s + "' (expected none, mean)");
}

inline std::string to_string(Optimizer o)
{
    return o == Optimizer::sgd ? "sgd" : "adam";
}

inline Optimizer optimizer_from_string(const std::string& s)
{
    if (s == "sgd")
        return Optimizer::sgd;
    if (s == "adam")
        return Optimizer::adam;
    throw ConfigError("unknown optimizer '" + s + "' (expected sgd, adam)");
}

/// Defaults are the standard cart-pole REINFORCE settings.
struct TrainConfig {
    double discount = 0.99;
    int training_episodes = 1000;
    int test_episodes = 100;
    int train_episode_length = 100;
    int test_episode_length = 200;
    int epochs = 10;
    double learning_rate = 0.0007;
    int hidden = 16;
    TransformMode transform_mode = TransformMode::none;
    TransformTarget transform_target = TransformTarget::cumulative_return;
    Baseline baseline = Baseline::mean;
    Optimizer optimizer = Optimizer::sgd;
    /// Divide advantages by their batch standard deviation.
    bool normalize_advantages = false;
    /// Rescale the gradient to at most this Euclidean norm; 0 disables.
    double max_gradient_norm = 0.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    /// Evaluate with the distribution mean (Beta) or most likely action
    /// (softmax) instead of sampling.
    bool greedy_evaluation = false;
    TransformOptions transform{};

    void validate() const
    {
        detail::require(discount > 0.0 && discount <= 1.0, "train: discount must lie in (0,1]");
        detail::require(training_episodes >= 0 && test_episodes >= 0, "train: episode counts must be >= 0");
        detail::require(train_episode_length >= 1 && test_episode_length >= 1,
                        "train: episode lengths must be >= 1");
        detail::require(epochs >= 1, "train: epochs must be >= 1");
        detail::require(std::isfinite(learning_rate) && learning_rate > 0.0, "train: learning_rate must be > 0");
        detail::require(hidden >= 1, "train: hidden must be >= 1");
        detail::require(max_gradient_norm >= 0.0, "train: max_gradient_norm must be >= 0");
        detail::require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 &&
                            adam_epsilon > 0.0,
                        "train: invalid Adam constants");
        transform.validate();
    }
};

struct EnvStep {
    Eigen::VectorXd observation;
    double reward = 0.0;
    bool terminated = false;
};

template <class E>
concept EpisodicEnv = requires(E& env, const E& cenv, Engine& engine, double action) {
    { cenv.observation_dim() } -> std::convertible_to<int>;
    { cenv.n_actions() } -> std::convertible_to<int>;
    { cenv.head() } -> std::same_as<PolicyHead>;
    { cenv.initial_return() } -> std::convertible_to<double>;
    { env.reset(engine) } -> std::same_as<Eigen::VectorXd>;
    { env.step(action, engine) } -> std::same_as<EnvStep>;
};

/// Fractional coin toss with a Beta policy over the bet fraction. The
/// observation is the log-wealth ln(R / R0) divided by `observation_scale`.
class CoinTossEnv {
public:
    explicit CoinTossEnv(CoinTossConfig game = {}, double observation_scale = 10.0)
        : game_(game), observation_scale_(observation_scale)
    {
        game_.validate();
        detail::require(observation_scale > 0.0, "coin toss env: observation_scale must be > 0");
    }

    int observation_dim() const { return 1; }
    int n_actions() const { return 1; }
    PolicyHead head() const { return PolicyHead::beta; }
    double initial_return() const { return game_.initial_return; }
    const CoinTossConfig& game() const { return game_; }
    double observation_scale() const { return observation_scale_; }

    Eigen::VectorXd reset(Engine&)
    {
        level_ = game_.initial_return;
        return observe();
    }

    EnvStep step(double fraction, Engine& engine)
    {
        const bool heads = detail::draw_heads(engine, game_.p_heads);
        const double reward = coin_toss_step(level_, fraction, heads, game_);
        level_ += reward;
        return {observe(), reward, false};
    }

private:
    Eigen::VectorXd observe() const
    {
        Eigen::VectorXd obs(1);
        obs[0] = level_ > 0.0 ? std::log(level_ / game_.initial_return) / observation_scale_ : -745.0;
        return obs;
    }

    CoinTossConfig game_;
    double observation_scale_;
    double level_ = 0.0;
};

/// Cart-pole with the raw four-component state as observation.
class CartPoleEnv {
public:
    explicit CartPoleEnv(cartpole::Params params = {}) : params_(params) { params_.validate(); }

    int observation_dim() const { return 4; }
    int n_actions() const { return 2; }
    PolicyHead head() const { return PolicyHead::softmax; }
    double initial_return() const { return 0.0; }
    const cartpole::Params& params() const { return params_; }

    Eigen::VectorXd reset(Engine& engine)
    {
        std::uniform_real_distribution<double> dist(-0.05, 0.05);
        state_.cart_position = dist(engine);
        state_.cart_velocity = dist(engine);
        state_.pole_angle = dist(engine);
        state_.pole_angular_velocity = dist(engine);
        return observe();
    }

    EnvStep step(double action, Engine&)
    {
        const auto result =
            cartpole::step(state_, action >= 0.5 ? cartpole::Action::right : cartpole::Action::left, params_);
        state_ = result.next;
        return {observe(), result.reward, result.terminated};
    }

private:
    Eigen::VectorXd observe() const
    {
        const auto a = state_.as_array();
        return Eigen::Map<const Eigen::Vector4d>(a.data());
    }

    cartpole::Params params_;
    cartpole::State state_{};
};

struct EpisodeBatch {
    std::vector<Eigen::VectorXd> observations;
    std::vector<double> actions;
    std::vector<double> log_probs;
    /// r_{k+1} received after action k.
    std::vector<double> rewards;
    /// Transformed rewards, when the transform acts on the cumulative return.
    std::vector<double> transformed_rewards;
    /// G_k = r_{k+1} + discount * G_{k+1} over whichever reward sequence the
    /// update uses.
    std::vector<double> returns_to_go;
    /// Per-step weights entering the gradient before the baseline: equal to
    /// returns_to_go, or h(G_k) when the transform acts on returns-to-go.
    std::vector<double> targets;
    Trajectory trajectory;

    std::size_t size() const { return actions.size(); }

    void check_consistent() const
    {
        const std::size_t n = actions.size();
        if (observations.size() != n || log_probs.size() != n || rewards.size() != n ||
            returns_to_go.size() != n || targets.size() != n ||
            (!transformed_rewards.empty() && transformed_rewards.size() != n))
            throw DomainError("EpisodeBatch: per-step arrays differ in length");
    }
};

inline std::vector<double> returns_to_go(std::span<const double> rewards, double discount)
{
    std::vector<double> g(rewards.size());
    double running = 0.0;
    for (std::size_t k = rewards.size(); k-- > 0;) {
        running = rewards[k] + discount * running;
        g[k] = running;
    }
    return g;
}

/// Rolls out one episode, sampling actions from `params` (or taking the
/// greedy action). Stops at `max_steps` or termination.
template <EpisodicEnv Env>
EpisodeBatch collect_episode(Env& env, const PolicyParams& params, int max_steps, Engine& engine,
                             bool greedy = false)
{
    EpisodeBatch batch;
    batch.trajectory = Trajectory(env.initial_return());
    Eigen::VectorXd obs = env.reset(engine);
    for (int k = 0; k < max_steps; ++k) {
        const auto dist = policy_forward(params, obs);
        const double action = greedy ? dist.mode_or_mean() : sample_action(dist, engine);
        const EnvStep out = env.step(action, engine);
        batch.observations.push_back(obs);
        batch.actions.push_back(action);
        batch.log_probs.push_back(greedy ? 0.0 : log_prob(params, obs, action));
        batch.rewards.push_back(out.reward);
        batch.trajectory.push_reward(out.reward);
        obs = out.observation;
        if (out.terminated)
            break;
    }
    return batch;
}

struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long long t = 0;
};

namespace detail {

inline std::string batch_statistics(const EpisodeBatch& batch)
{
    std::ostringstream os;
    auto range = [&](const char* name, const std::vector<double>& v) {
        if (v.empty())
            return;
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        os << ' ' << name << "=[" << *lo << ", " << *hi << ']';
    };
    os << "steps=" << batch.size();
    range("reward", batch.rewards);
    range("return_to_go", batch.returns_to_go);
    range("target", batch.targets);
    range("action", batch.actions);
    return os.str();
}

} // namespace detail

/// Advantages A_k = target_k - b, optionally normalized.
inline std::vector<double> advantages(const EpisodeBatch& batch, const TrainConfig& cfg)
{
    std::vector<double> a = batch.targets;
    if (a.empty())
        return a;
    if (cfg.baseline == Baseline::mean) {
        double mean = 0.0;
        for (double v : a)
            mean += v;
        mean /= static_cast<double>(a.size());
        for (double& v : a)
            v -= mean;
    }
    if (cfg.normalize_advantages && a.size() > 1) {
        double sq = 0.0;
        for (double v : a)
            sq += v * v;
        const double sd = std::sqrt(sq / static_cast<double>(a.size()));
        if (sd > 0.0)
            for (double& v : a)
                v /= sd;
    }
    return a;
}

/// sum_k grad log pi(a_k | s_k) * A_k at `params`.
inline PolicyParams policy_gradient(const PolicyParams& params, const EpisodeBatch& batch,
                                    std::span<const double> adv)
{
    PolicyParams grad = params.zeros_like();
    for (std::size_t k = 0; k < batch.size(); ++k) {
        if (adv[k] == 0.0)
            continue;
        grad.axpy(adv[k], grad_log_prob(params, batch.observations[k], batch.actions[k]));
    }
    return grad;
}

/// `cfg.epochs` gradient-ascent passes over one batch, recomputing the
/// policy gradient at the current parameters on every pass.
inline PolicyParams reinforce_update(PolicyParams params, const EpisodeBatch& batch, const TrainConfig& cfg,
                                     AdamState* adam = nullptr)
{
    batch.check_consistent();
    const auto adv = advantages(batch, cfg);
    for (double a : adv)
        if (!std::isfinite(a))
            throw RangeError("reinforce_update: non-finite advantage; " + detail::batch_statistics(batch));
    AdamState local;
    if (cfg.optimizer == Optimizer::adam && adam == nullptr)
        adam = &local;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        PolicyParams grad = policy_gradient(params, batch, adv);
        if (!grad.finite())
            throw RangeError("reinforce_update: non-finite gradient in epoch " + std::to_string(epoch) + "; " +
                             detail::batch_statistics(batch));
        if (cfg.max_gradient_norm > 0.0) {
            const double norm = grad.flat().norm();
            if (norm > cfg.max_gradient_norm)
                grad.set_flat(grad.flat() * (cfg.max_gradient_norm / norm));
        }
        if (cfg.optimizer == Optimizer::sgd) {
            params.axpy(cfg.learning_rate, grad);
        } else {
            const Eigen::VectorXd g = grad.flat();
            if (adam->m.size() != g.size()) {
                adam->m = Eigen::VectorXd::Zero(g.size());
                adam->v = Eigen::VectorXd::Zero(g.size());
                adam->t = 0;
            }
            ++adam->t;
            adam->m = cfg.adam_beta1 * adam->m + (1.0 - cfg.adam_beta1) * g;
            adam->v = cfg.adam_beta2 * adam->v + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
            const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(adam->t));
            const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(adam->t));
            const Eigen::VectorXd step =
                ((adam->m / c1).array() / ((adam->v / c2).array().sqrt() + cfg.adam_epsilon)).matrix();
            params.set_flat(params.flat() + cfg.learning_rate * step);
        }
        if (!params.finite())
            throw RangeError("reinforce_update: parameters became non-finite; " + detail::batch_statistics(batch));
    }
    return params;
}

/// Fills returns_to_go and targets of a freshly collected batch.
inline void prepare_targets(EpisodeBatch& batch, const TrainConfig& cfg, const ErgodicityTransform* transform)
{
    batch.transformed_rewards.clear();
    const bool transformed = transform != nullptr && cfg.transform_mode != TransformMode::none;
    if (transformed && cfg.transform_target == TransformTarget::cumulative_return) {
        batch.transformed_rewards = transform_rewards(batch.trajectory, *transform);
        batch.returns_to_go = returns_to_go(batch.transformed_rewards, cfg.discount);
        batch.targets = batch.returns_to_go;
        return;
    }
    batch.returns_to_go = returns_to_go(batch.rewards, cfg.discount);
    batch.targets = batch.returns_to_go;
    if (transformed)
        for (double& g : batch.targets)
            g = (*transform)(g);
}

/// The sequence a per-episode transform is learned from.
inline Trajectory transform_source(const EpisodeBatch& batch, const TrainConfig& cfg)
{
    if (cfg.transform_target == TransformTarget::cumulative_return)
        return batch.trajectory;
    return Trajectory::from_returns(returns_to_go(batch.rewards, cfg.discount));
}

struct TrainEvent {
    int episode = 0;
    std::string message;
};

struct TrainResult {
    PolicyParams params;
    /// Raw (untransformed) return of every training episode.
    std::vector<double> learning_curve;
    std::vector<int> episode_lengths;
    std::vector<TrainEvent> events;
    int transform_refreshes = 0;
};

/// Per episode: rollout, refresh the transform if configured, compute
/// targets, update. Episode e draws its randomness from stream e + 1 of
/// `seed`; the network initialisation uses `seed` itself.
template <EpisodicEnv Env>
TrainResult train(Env& env, const TrainConfig& cfg, const std::optional<ErgodicityTransform>& static_transform,
                  std::uint64_t seed)
{
    cfg.validate();
    if (cfg.transform_mode == TransformMode::fixed && !static_transform)
        throw ConfigError("train: static transform mode needs a transform");
    TrainResult result;
    result.params = init_policy(env.observation_dim(), cfg.hidden, env.head(), env.n_actions(), seed);
    std::optional<ErgodicityTransform> current;
    if (cfg.transform_mode == TransformMode::fixed)
        current = static_transform;
    AdamState adam;
    for (int e = 0; e < cfg.training_episodes; ++e) {
        Engine engine = make_engine(seed, static_cast<std::uint64_t>(e) + 1);
        EpisodeBatch batch = collect_episode(env, result.params, cfg.train_episode_length, engine);
        if (cfg.transform_mode == TransformMode::per_episode) {
            try {
                current = learn_transform(transform_source(batch, cfg), cfg.transform);
                ++result.transform_refreshes;
            } catch (const std::exception& ex) {
                result.events.push_back({e, std::string(current ? "kept previous transform: " : "no transform yet: ") +
                                                ex.what()});
            }
        }
        prepare_targets(batch, cfg, current ? &*current : nullptr);
        result.params = reinforce_update(std::move(result.params), batch, cfg, &adam);
        result.learning_curve.push_back(batch.trajectory.back().ret);
        result.episode_lengths.push_back(static_cast<int>(batch.size()));
    }
    return result;
}

struct EvalSummary {
    std::vector<double> final_returns;
    std::vector<int> lengths;
    double mean = 0.0;
    double median = 0.0;
    double q05 = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
    double q95 = 0.0;
    /// Mean over all visited states of the policy's expected action.
    double mean_action = 0.0;
};

/// Linear-interpolation quantile (type 7) of unsorted data.
inline double quantile(std::vector<double> values, double p)
{
    if (values.empty())
        throw EmptySampleError("quantile: empty sample");
    if (!(p >= 0.0 && p <= 1.0))
        throw DomainError("quantile: p outside [0,1]");
    std::sort(values.begin(), values.end());
    const double h = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline EvalSummary summarize(std::vector<double> finals, std::vector<int> lengths, double mean_action)
{
    EvalSummary s;
    s.final_returns = std::move(finals);
    s.lengths = std::move(lengths);
    s.mean_action = mean_action;
    if (s.final_returns.empty())
        return s;
    double sum = 0.0;
    for (double v : s.final_returns)
        sum += v;
    s.mean = sum / static_cast<double>(s.final_returns.size());
    s.median = quantile(s.final_returns, 0.5);
    s.q05 = quantile(s.final_returns, 0.05);
    s.q25 = quantile(s.final_returns, 0.25);
    s.q75 = quantile(s.final_returns, 0.75);
    s.q95 = quantile(s.final_returns, 0.95);
    return s;
}

/// A decision rule for evaluation: returns the action and the expected
/// action at an observation.
using ActionRule = std::function<std::pair<double, double>(const Eigen::VectorXd& observation, Engine& engine)>;

inline ActionRule policy_rule(const PolicyParams& params, bool greedy)
{
    return [params, greedy](const Eigen::VectorXd& obs, Engine& engine) {
        const auto dist = policy_forward(params, obs);
        return std::pair{greedy ? dist.mode_or_mean() : sample_action(dist, engine), dist.mean()};
    };
}

inline ActionRule constant_rule(double action)
{
    return [action](const Eigen::VectorXd&, Engine&) { return std::pair{action, action}; };
}

/// Episode i uses stream i of `seed`, so summaries are reproducible and
/// independent of training streams when a distinct seed is passed.
template <EpisodicEnv Env>
EvalSummary evaluate(const ActionRule& rule, Env& env, int n_episodes, int episode_length, std::uint64_t seed)
{
    detail::require(n_episodes >= 1 && episode_length >= 1, "evaluate: need at least one episode and step");
    std::vector<double> finals;
    std::vector<int> lengths;
    double action_sum = 0.0;
    long long action_count = 0;
    for (int i = 0; i < n_episodes; ++i) {
        Engine engine = make_engine(seed, static_cast<std::uint64_t>(i));
        Eigen::VectorXd obs = env.reset(engine);
        double level = env.initial_return();
        int k = 0;
        for (; k < episode_length; ++k) {
            const auto [action, expected] = rule(obs, engine);
            action_sum += expected;
            ++action_count;
            const EnvStep out = env.step(action, engine);
            level += out.reward;
            obs = out.observation;
            if (out.terminated) {
                ++k;
                break;
            }
        }
        finals.push_back(level);
        lengths.push_back(k);
    }
    return summarize(std::move(finals), std::move(lengths), action_sum / static_cast<double>(action_count));
}

template <EpisodicEnv Env>
EvalSummary evaluate(const PolicyParams& params, Env& env, const TrainConfig& cfg, int n_episodes,
                     std::uint64_t seed)
{
    return evaluate(policy_rule(params, cfg.greedy_evaluation), env, n_episodes, cfg.test_episode_length, seed);
}

} // namespace ergodic
