#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ergodic/error.hpp"
#include "ergodic/rng.hpp"
#include "ergodic/trajectory.hpp"

namespace ergodic {

/// Multiplicative coin-toss game: heads pays gain_frac of the stake,
/// tails costs loss_frac of it. The stake is the bet fraction F times the
/// current return.
struct CoinTossConfig {
    double initial_return = 100.0;
    double gain_frac = 0.5;
    double loss_frac = 0.4;
    double p_heads = 0.5;
    int horizon = 1000;

    void validate() const
    {
        detail::require(std::isfinite(initial_return) && initial_return > 0.0,
                        "coin toss: initial_return must be > 0");
        detail::require(std::isfinite(gain_frac) && gain_frac > 0.0, "coin toss: gain_frac must be > 0");
        detail::require(loss_frac > 0.0 && loss_frac < 1.0, "coin toss: loss_frac must lie in (0,1)");
        detail::require(p_heads >= 0.0 && p_heads <= 1.0, "coin toss: p_heads must lie in [0,1]");
        detail::require(horizon >= 1, "coin toss: horizon must be >= 1");
    }
};

struct GbmConfig {
    double drift = 0.05;
    double volatility = 0.2;
    double initial_value = 1.0;
    double dt = 0.01;
    int horizon = 1000;
    /// Exact log-normal stepping instead of the multiplicative Euler scheme.
    bool exact = false;

    void validate() const
    {
        detail::require(std::isfinite(drift), "gbm: drift must be finite");
        detail::require(std::isfinite(volatility) && volatility >= 0.0, "gbm: volatility must be >= 0");
        detail::require(std::isfinite(initial_value) && initial_value > 0.0, "gbm: initial_value must be > 0");
        detail::require(std::isfinite(dt) && dt > 0.0, "gbm: dt must be > 0");
        detail::require(horizon >= 1, "gbm: horizon must be >= 1");
    }
};

/// Bet fraction chosen at step k (0-based transition index) given the
/// current return.
using BetPolicy = std::function<double(std::int64_t step, double current_return)>;
/// Play/skip decision of the binary game.
using PlayPolicy = std::function<bool(std::int64_t step, double current_return)>;

inline BetPolicy constant_bet(double fraction)
{
    return [fraction](std::int64_t, double) { return fraction; };
}

inline double coin_toss_step(double previous_return, double fraction, bool heads, const CoinTossConfig& cfg)
{
    if (!std::isfinite(previous_return))
        throw DomainError("coin_toss_step: non-finite return");
    if (!(fraction >= 0.0 && fraction <= 1.0))
        throw DomainError("coin_toss_step: bet fraction outside [0,1]");
    return heads ? cfg.gain_frac * fraction * previous_return
                 : -cfg.loss_frac * fraction * previous_return;
}

namespace detail {

inline bool draw_heads(Engine& engine, double p_heads)
{
    return uniform01(engine) < p_heads;
}

inline Trajectory rollout_coin_toss_stream(const CoinTossConfig& cfg, const BetPolicy& policy,
                                           std::uint64_t seed, std::uint64_t stream)
{
    Engine engine = make_engine(seed, stream);
    Trajectory traj(cfg.initial_return);
    for (int k = 0; k < cfg.horizon; ++k) {
        const double current = traj.back().ret;
        const double fraction = policy(k, current);
        const bool heads = draw_heads(engine, cfg.p_heads);
        traj.push_reward(coin_toss_step(current, fraction, heads, cfg));
    }
    return traj;
}

} // namespace detail

inline Trajectory rollout_coin_toss(const CoinTossConfig& cfg, const BetPolicy& policy, std::uint64_t seed)
{
    cfg.validate();
    return detail::rollout_coin_toss_stream(cfg, policy, seed, 0);
}

/// The original play-or-skip game: F restricted to {0, 1}.
inline Trajectory rollout_binary_coin_toss(const CoinTossConfig& cfg, const PlayPolicy& play, std::uint64_t seed)
{
    return rollout_coin_toss(
        cfg, [&play](std::int64_t k, double r) { return play(k, r) ? 1.0 : 0.0; }, seed);
}

/// Trajectory i uses stream i of `seed`; trajectory 0 equals
/// rollout_coin_toss(cfg, policy, seed).
inline std::vector<Trajectory> rollout_ensemble(const CoinTossConfig& cfg, const BetPolicy& policy,
                                                int n_trajectories, std::uint64_t seed)
{
    cfg.validate();
    detail::require(n_trajectories >= 1, "rollout_ensemble: n_trajectories must be >= 1");
    std::vector<Trajectory> out;
    out.reserve(static_cast<std::size_t>(n_trajectories));
    for (int i = 0; i < n_trajectories; ++i)
        out.push_back(detail::rollout_coin_toss_stream(cfg, policy, seed, static_cast<std::uint64_t>(i)));
    return out;
}

/// Final return of each trajectory without materializing the paths.
inline std::vector<double> ensemble_final_returns(const CoinTossConfig& cfg, const BetPolicy& policy,
                                                  int n_trajectories, std::uint64_t seed)
{
    cfg.validate();
    detail::require(n_trajectories >= 1, "ensemble_final_returns: n_trajectories must be >= 1");
    std::vector<double> finals;
    finals.reserve(static_cast<std::size_t>(n_trajectories));
    for (int i = 0; i < n_trajectories; ++i) {
        Engine engine = make_engine(seed, static_cast<std::uint64_t>(i));
        double current = cfg.initial_return;
        for (int k = 0; k < cfg.horizon; ++k) {
            const bool heads = detail::draw_heads(engine, cfg.p_heads);
            current += coin_toss_step(current, policy(k, current), heads, cfg);
        }
        finals.push_back(current);
    }
    return finals;
}

/// Natural log of the return along the same coin sequence as
/// rollout_coin_toss. Long F=1 paths underflow double precision
/// (100 * 0.9^(T/2) drops below 1e-308 near T = 13500), so long-horizon
/// growth statistics are computed here in the log domain. The policy sees
/// exp(log return), which may itself underflow to 0.
inline std::vector<double> rollout_coin_toss_log(const CoinTossConfig& cfg, const BetPolicy& policy,
                                                 std::uint64_t seed)
{
    cfg.validate();
    Engine engine = make_engine(seed, 0);
    std::vector<double> log_returns;
    log_returns.reserve(static_cast<std::size_t>(cfg.horizon) + 1);
    log_returns.push_back(std::log(cfg.initial_return));
    for (int k = 0; k < cfg.horizon; ++k) {
        const double log_current = log_returns.back();
        const double fraction = policy(k, std::exp(log_current));
        if (!(fraction >= 0.0 && fraction <= 1.0))
            throw DomainError("rollout_coin_toss_log: bet fraction outside [0,1]");
        const bool heads = detail::draw_heads(engine, cfg.p_heads);
        const double factor = heads ? 1.0 + cfg.gain_frac * fraction : 1.0 - cfg.loss_frac * fraction;
        log_returns.push_back(log_current + std::log(factor));
    }
    return log_returns;
}

namespace detail {

inline Trajectory simulate_gbm_stream(const GbmConfig& cfg, std::uint64_t seed, std::uint64_t stream)
{
    Engine engine = make_engine(seed, stream);
    Trajectory traj(cfg.initial_value);
    const double sqrt_dt = std::sqrt(cfg.dt);
    const double log_drift = (cfg.drift - 0.5 * cfg.volatility * cfg.volatility) * cfg.dt;
    for (int k = 0; k < cfg.horizon; ++k) {
        const double current = traj.back().ret;
        const double z = cfg.volatility > 0.0 ? standard_normal(engine) : 0.0;
        const double next = cfg.exact
                                ? current * std::exp(log_drift + cfg.volatility * sqrt_dt * z)
                                : current * (1.0 + cfg.drift * cfg.dt + cfg.volatility * sqrt_dt * z);
        if (!(next > 0.0) || !std::isfinite(next))
            throw DomainError("simulate_gbm: non-positive or non-finite value at step " +
                              std::to_string(k + 1) + "; reduce dt");
        traj.push_return(next);
    }
    return traj;
}

} // namespace detail

/// Multiplicative Euler scheme X_{k+1} = X_k (1 + drift dt + vol sqrt(dt) z_k).
inline Trajectory simulate_gbm(const GbmConfig& cfg, std::uint64_t seed)
{
    cfg.validate();
    return detail::simulate_gbm_stream(cfg, seed, 0);
}

inline std::vector<Trajectory> simulate_gbm_ensemble(const GbmConfig& cfg, int n_trajectories, std::uint64_t seed)
{
    cfg.validate();
    detail::require(n_trajectories >= 1, "simulate_gbm_ensemble: n_trajectories must be >= 1");
    std::vector<Trajectory> out;
    out.reserve(static_cast<std::size_t>(n_trajectories));
    for (int i = 0; i < n_trajectories; ++i)
        out.push_back(detail::simulate_gbm_stream(cfg, seed, static_cast<std::uint64_t>(i)));
    return out;
}

/// Additive Gaussian random walk; the constant-variance reference process.
inline Trajectory simulate_random_walk(double start, double step_sd, int horizon, std::uint64_t seed)
{
    detail::require(horizon >= 1, "random walk: horizon must be >= 1");
    detail::require(step_sd > 0.0, "random walk: step_sd must be > 0");
    Engine engine = make_engine(seed, 0);
    Trajectory traj(start);
    for (int k = 0; k < horizon; ++k)
        traj.push_reward(step_sd * standard_normal(engine));
    return traj;
}

} // namespace ergodic
