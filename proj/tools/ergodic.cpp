// Command-line front end: simulate, learn-transform, train, diagnose.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure,
// 4 an acceptance threshold was not met.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "config.hpp"
#include "ergodic/ergodic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitThreshold = 4;

#ifndef ERGODIC_VERSION
#define ERGODIC_VERSION "unknown"
#endif

/// Collects outputs and pass/fail checks of one run.
class Run {
public:
    Run(std::string command, std::string preset, json config)
        : command_(std::move(command)), preset_(std::move(preset)), config_(std::move(config)),
          dir_(config_.at("output_dir").get<std::string>())
    {
        fs::create_directories(dir_);
    }

    const json& config() const { return config_; }
    const fs::path& dir() const { return dir_; }

    std::ofstream open(const std::string& relative)
    {
        outputs_.push_back(relative);
        return ergodic::io::open_output(dir_ / relative);
    }

    void write_json(const std::string& relative, const json& j)
    {
        auto out = open(relative);
        out << std::setw(2) << j << '\n';
    }

    void check(json& report, const std::string& name, double value, const std::string& threshold, bool pass)
    {
        report["checks"].push_back({{"name", name}, {"value", value}, {"threshold", threshold}, {"pass", pass}});
        if (!pass)
            failed_ = true;
    }

    bool failed() const { return failed_; }

    void finish(const std::vector<std::uint64_t>& seeds)
    {
        write_json("config.json", config_);
        json manifest = {{"tool", "ergodic"},
                         {"version", ERGODIC_VERSION},
                         {"command", command_},
                         {"preset", preset_},
                         {"seeds", seeds},
                         {"config_hash", ergodic::config_hash(config_)},
                         {"outputs", outputs_}};
        auto out = ergodic::io::open_output(dir_ / "manifest.json");
        out << std::setw(2) << manifest << '\n';
    }

private:
    std::string command_;
    std::string preset_;
    json config_;
    fs::path dir_;
    std::vector<std::string> outputs_;
    bool failed_ = false;
};

std::string numbered(const std::string& stem, std::size_t i, const std::string& ext)
{
    std::ostringstream os;
    os << stem << std::setw(3) << std::setfill('0') << i << ext;
    return os.str();
}

json growth_json(const ergodic::GrowthStats& s)
{
    return {{"ensemble_mean_final", s.ensemble_mean_by_time.back()},
            {"time_average_growth", s.time_average_growth},
            {"final_mean", s.final_mean},
            {"final_median", s.final_median},
            {"final_quantiles",
             {{"q05", s.final_q05}, {"q25", s.final_q25}, {"q75", s.final_q75}, {"q95", s.final_q95}}}};
}

json eval_json(const ergodic::EvalSummary& s)
{
    return {{"episodes", s.final_returns.size()},
            {"mean", s.mean},
            {"median", s.median},
            {"quantiles", {{"q05", s.q05}, {"q25", s.q25}, {"q75", s.q75}, {"q95", s.q95}}},
            {"mean_action", s.mean_action}};
}

std::string env_kind(const json& cfg)
{
    return cfg.at("env").at("kind").get<std::string>();
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(Run& run, const std::vector<std::uint64_t>& seeds)
{
    const json& cfg = run.config();
    const std::string kind = env_kind(cfg);
    const int n = cfg.at("simulate").at("n_trajectories");
    ergodic::detail::require(n >= 1, "simulate.n_trajectories must be >= 1");
    std::vector<ergodic::Trajectory> ensemble;
    if (kind == "coin-toss") {
        const auto game = ergodic::cli::coin_toss_config(cfg);
        const double f = cfg.at("simulate").at("bet_fraction");
        ergodic::detail::require(f >= 0.0 && f <= 1.0, "simulate.bet_fraction must lie in [0,1]");
        ensemble = ergodic::rollout_ensemble(game, ergodic::constant_bet(f), n, seeds.front());
    } else if (kind == "gbm") {
        ensemble = ergodic::simulate_gbm_ensemble(ergodic::cli::gbm_config(cfg), n, seeds.front());
    } else if (kind == "random-walk") {
        const auto& rw = cfg.at("env").at("random_walk");
        for (int i = 0; i < n; ++i)
            ensemble.push_back(ergodic::simulate_random_walk(rw.at("start"), rw.at("step_sd"), rw.at("horizon"),
                                                             ergodic::stream_seed(seeds.front(), i)));
    } else {
        throw ergodic::ConfigError("simulate: env.kind must be coin-toss, gbm or random-walk");
    }
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        auto out = run.open(numbered("trajectories/traj_", i, ".csv"));
        ergodic::write_csv(out, ensemble[i]);
    }
    json report = {{"kind", kind}, {"n_trajectories", n}, {"horizon", ensemble.front().horizon()}};
    bool positive = true;
    for (const auto& t : ensemble)
        positive = positive && t.front().ret > 0.0 && t.back().ret > 0.0;
    if (positive)
        report["growth"] = growth_json(ergodic::growth_stats(ensemble));
    run.write_json("summary.json", report);
    std::cout << "simulate: wrote " << ensemble.size() << " trajectories to " << run.dir() / "trajectories" << '\n';
    return kExitOk;
}

// ---------------------------------------------------------- learn-transform

ergodic::Trajectory pilot_trajectory(const json& cfg, std::uint64_t seed)
{
    const auto& t = cfg.at("transform");
    const std::string input = t.at("input");
    if (!input.empty()) {
        auto in = ergodic::io::open_input(input);
        return ergodic::read_csv(in);
    }
    const std::string kind = env_kind(cfg);
    if (kind == "coin-toss") {
        auto game = ergodic::cli::coin_toss_config(cfg);
        game.horizon = t.at("pilot_horizon");
        const double f = t.at("pilot_bet_fraction");
        ergodic::detail::require(f >= 0.0 && f <= 1.0, "transform.pilot_bet_fraction must lie in [0,1]");
        return ergodic::rollout_coin_toss(game, ergodic::constant_bet(f), seed);
    }
    if (kind == "gbm")
        return ergodic::simulate_gbm(ergodic::cli::gbm_config(cfg), seed);
    if (kind == "random-walk") {
        const auto& rw = cfg.at("env").at("random_walk");
        return ergodic::simulate_random_walk(rw.at("start"), rw.at("step_sd"), rw.at("horizon"), seed);
    }
    throw ergodic::ConfigError("learn-transform: env.kind must be coin-toss, gbm or random-walk, "
                               "or transform.input must name a trajectory CSV");
}

int cmd_learn_transform(Run& run, const std::vector<std::uint64_t>& seeds)
{
    const json& cfg = run.config();
    const auto options = ergodic::cli::transform_options(cfg);
    const auto pilot = pilot_trajectory(cfg, seeds.front());
    {
        auto out = run.open("pilot.csv");
        ergodic::write_csv(out, pilot);
    }
    const auto transform = ergodic::learn_transform(pilot, options);
    run.write_json("transform.json", ergodic::to_json(transform));

    json report = {{"source", cfg.at("transform").at("input").get<std::string>().empty() ? env_kind(cfg) : "file"},
                   {"pilot_steps", pilot.horizon()},
                   {"n_samples", transform.meta().n_samples},
                   {"scale", ergodic::to_string(transform.scale())},
                   {"checks", json::array()}};
    const double min_r2 = cfg.at("transform").at("min_r_squared");
    if (min_r2 > 0.0 && transform.grid().front() > 0.0) {
        const auto fit = ergodic::log_recovery(transform, 0.8);
        report["log_recovery"] = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"r_squared", fit.r_squared},
                                  {"points", fit.n}};
        run.check(report, "log_recovery_r_squared", fit.r_squared, ">= " + ergodic::io::format_double(min_r2),
                  fit.r_squared >= min_r2);
    }
    report["pass"] = !run.failed();
    run.write_json("report.json", report);
    std::cout << "learn-transform: " << transform.meta().n_samples << " samples, scale "
              << ergodic::to_string(transform.scale());
    if (report.contains("log_recovery"))
        std::cout << ", log-recovery R^2 " << report["log_recovery"]["r_squared"].get<double>();
    std::cout << '\n';
    return run.failed() ? kExitThreshold : kExitOk;
}

// -------------------------------------------------------------------- train

void write_training_outputs(Run& run, const std::string& tag, const ergodic::TrainResult& r, const json& hash_source)
{
    {
        auto out = run.open("curve_" + tag + ".csv");
        out << "episode,raw_return\n";
        for (std::size_t e = 0; e < r.learning_curve.size(); ++e)
            out << e << ',' << ergodic::io::format_double(r.learning_curve[e]) << '\n';
    }
    {
        auto out = run.open("episodes_" + tag + ".csv");
        out << "episode,length,return\n";
        for (std::size_t e = 0; e < r.learning_curve.size(); ++e)
            out << e << ',' << r.episode_lengths[e] << ',' << ergodic::io::format_double(r.learning_curve[e])
                << '\n';
    }
    run.write_json("policy_" + tag + ".json", ergodic::to_json(r.params, ergodic::config_hash(hash_source)));
}

std::optional<ergodic::ErgodicityTransform> static_transform(Run& run, const json& cfg, std::uint64_t seed)
{
    const std::string file = cfg.at("agent").at("transform_file");
    if (!file.empty()) {
        auto in = ergodic::io::open_input(file);
        json j = json::parse(in, nullptr, false);
        if (j.is_discarded())
            throw ergodic::ConfigError("agent.transform_file is not valid JSON");
        return ergodic::transform_from_json(j);
    }
    if (env_kind(cfg) != "coin-toss")
        throw ergodic::ConfigError("static transform mode on " + env_kind(cfg) + " needs agent.transform_file");
    const auto pilot = pilot_trajectory(cfg, ergodic::stream_seed(seed, 0x9170));
    auto t = ergodic::learn_transform(pilot, ergodic::cli::transform_options(cfg));
    run.write_json("static_transform.json", ergodic::to_json(t));
    return t;
}

int cmd_train(Run& run, const std::vector<std::uint64_t>& seeds)
{
    const json& cfg = run.config();
    const std::string kind = env_kind(cfg);
    ergodic::TrainConfig base = ergodic::cli::train_config(cfg);
    const auto& agent = cfg.at("agent");
    std::vector<ergodic::TransformMode> modes;
    for (const auto& m : agent.at("modes"))
        modes.push_back(ergodic::transform_mode_from_string(m.get<std::string>()));
    ergodic::detail::require(!modes.empty(), "agent.modes must not be empty");
    const int min_pass = agent.at("min_passing_seeds");

    std::optional<ergodic::ErgodicityTransform> fixed;
    for (auto m : modes)
        if (m == ergodic::TransformMode::fixed && !fixed)
            fixed = static_transform(run, cfg, seeds.front());

    json report = {{"env", kind}, {"runs", json::array()}, {"checks", json::array()}};
    // test_mean[mode][seed]
    std::vector<std::vector<double>> test_mean(modes.size());
    std::vector<std::vector<ergodic::EvalSummary>> evals(modes.size());

    for (std::size_t mi = 0; mi < modes.size(); ++mi) {
        ergodic::TrainConfig tc = base;
        tc.transform_mode = modes[mi];
        for (std::uint64_t seed : seeds) {
            const auto t0 = std::chrono::steady_clock::now();
            ergodic::TrainResult r;
            ergodic::EvalSummary ev;
            const std::uint64_t eval_seed = ergodic::stream_seed(seed, 0xe7a1);
            if (kind == "coin-toss") {
                auto game = ergodic::cli::coin_toss_config(cfg);
                ergodic::CoinTossEnv env(game, agent.at("observation_scale").get<double>());
                r = ergodic::train(env, tc, fixed, seed);
                ev = ergodic::evaluate(r.params, env, tc, tc.test_episodes, eval_seed);
            } else if (kind == "cartpole") {
                const auto params = ergodic::cli::cartpole_params(cfg);
                ergodic::CartPoleEnv env(params);
                r = ergodic::train(env, tc, fixed, seed);
                auto test_params = params;
                test_params.pole_half_length *= agent.at("test_pole_length_scale").get<double>();
                ergodic::CartPoleEnv test_env(test_params);
                ev = ergodic::evaluate(r.params, test_env, tc, tc.test_episodes, eval_seed);
            } else {
                throw ergodic::ConfigError("train: env.kind must be coin-toss or cartpole");
            }
            const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            const std::string tag = ergodic::to_string(modes[mi]) + "_seed" + std::to_string(seed);
            write_training_outputs(run, tag, r, ergodic::to_json(tc));
            json events = json::array();
            for (const auto& e : r.events)
                events.push_back({{"episode", e.episode}, {"message", e.message}});
            report["runs"].push_back({{"mode", ergodic::to_string(modes[mi])},
                                      {"seed", seed},
                                      {"evaluation", eval_json(ev)},
                                      {"transform_refreshes", r.transform_refreshes},
                                      {"events", events},
                                      {"seconds", seconds}});
            std::cout << "train: " << tag << " test mean " << ev.mean << " median " << ev.median << " mean action "
                      << ev.mean_action << '\n';
            test_mean[mi].push_back(ev.mean);
            evals[mi].push_back(std::move(ev));
        }
    }

    const std::string seeds_needed = ">= " + std::to_string(min_pass) + " seeds";
    if (kind == "coin-toss") {
        const auto& game = cfg.at("env").at("coin_toss");
        const double r0 = game.at("initial_return");
        const double lo = agent.at("kelly_band").at(0), hi = agent.at("kelly_band").at(1);
        const double non_robust = agent.at("non_robust_action");
        for (std::size_t mi = 0; mi < modes.size(); ++mi) {
            int pass = 0;
            if (modes[mi] == ergodic::TransformMode::none) {
                for (const auto& ev : evals[mi])
                    pass += ev.mean_action >= non_robust || ev.median < r0;
                run.check(report, "raw_returns_non_robust_seeds", pass, seeds_needed, pass >= min_pass);
            } else {
                int above = 0;
                for (const auto& ev : evals[mi]) {
                    pass += ev.mean_action >= lo && ev.mean_action <= hi;
                    above += ev.median > r0;
                }
                run.check(report, ergodic::to_string(modes[mi]) + "_mean_action_in_kelly_band_seeds", pass,
                          seeds_needed, pass >= min_pass);
                run.check(report, ergodic::to_string(modes[mi]) + "_median_above_initial_seeds", above, seeds_needed,
                          above >= min_pass);
            }
        }
    } else if (modes.size() >= 2 && modes.front() == ergodic::TransformMode::none) {
        for (std::size_t mi = 1; mi < modes.size(); ++mi) {
            int wins = 0;
            for (std::size_t s = 0; s < seeds.size(); ++s)
                wins += test_mean[mi][s] > test_mean[0][s];
            run.check(report, ergodic::to_string(modes[mi]) + "_beats_standard_seeds", wins, seeds_needed,
                      wins >= min_pass);
        }
    }
    report["pass"] = !run.failed();
    run.write_json("report.json", report);
    return run.failed() ? kExitThreshold : kExitOk;
}

// ----------------------------------------------------------------- diagnose

json estimate_json(const ergodic::Estimate& e)
{
    return {{"value", e.value}, {"standard_error", e.standard_error}, {"n", e.n}};
}

json binned_json(const ergodic::BinnedVariance& b)
{
    json bins = json::array();
    for (const auto& x : b.bins)
        bins.push_back({{"level_lo", x.level_lo}, {"level_hi", x.level_hi}, {"count", x.count},
                        {"variance", x.variance}, {"log_variance", x.log_variance}});
    return {{"bins", bins}, {"ratio", b.ratio}, {"log10_ratio", b.log10_ratio}, {"requested_bins", b.requested_bins}, {"merged", b.merged}};
}

json proportionality_json(const ergodic::ProportionalityReport& r)
{
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"level", row.level},
                        {"second_moment", estimate_json(row.second_moment)},
                        {"variance", row.variance},
                        {"ratio", row.ratio}});
    return {{"rows", rows}, {"samples_per_level", r.samples_per_level}, {"spread", r.spread}};
}

void write_sde_path(Run& run, const std::string& name, const ergodic::risk::SdePath& path)
{
    auto out = run.open(name);
    out << "t,W,R\n";
    for (std::size_t k = 0; k < path.times.size(); ++k)
        out << ergodic::io::format_double(path.times[k]) << ',' << ergodic::io::format_double(path.brownian[k])
            << ',' << ergodic::io::format_double(path.values[k]) << '\n';
}

int cmd_diagnose(Run& run, const std::vector<std::uint64_t>& seeds)
{
    using ergodic::io::format_double;
    const json& cfg = run.config();
    const json& d = cfg.at("diagnose");
    const std::string kind = d.at("kind");
    const std::uint64_t seed = seeds.front();
    json report = {{"kind", kind},
                   {"checks", json::array()},
                   {"note", "finite-sample ergodicity thresholds are engineering choices"}};

    if (kind == "witness") {
        auto game = ergodic::cli::coin_toss_config(cfg);
        const int n = d.at("n_trajectories");
        const int t = d.at("t");
        const double tol = d.at("tolerance");
        game.horizon = t;
        const auto finals = ergodic::ensemble_final_returns(game, ergodic::constant_bet(1.0), n, seed);
        const auto ens = ergodic::ensemble_average(finals);
        const double per_step_mean = game.p_heads * game.gain_frac - (1.0 - game.p_heads) * game.loss_frac;
        const double oracle = game.initial_return * std::pow(1.0 + per_step_mean, t);
        game.horizon = d.at("long_horizon");
        const auto logs = ergodic::rollout_coin_toss_log(game, ergodic::constant_bet(1.0), seed);
        const double g = ergodic::time_average_growth_log(logs);
        const double lo = d.at("growth_band").at(0), hi = d.at("growth_band").at(1);
        report["inputs"] = {{"n_trajectories", n}, {"t", t}, {"long_horizon", game.horizon}};
        report["estimates"] = {{"ensemble_average", estimate_json(ens)},
                               {"ensemble_oracle", oracle},
                               {"time_average_growth", g},
                               {"time_average_oracle", ergodic::coin_toss_growth_rate(game, 1.0)}};
        run.check(report, "ensemble_relative_error", std::abs(ens.value / oracle - 1.0),
                  "<= " + format_double(tol), std::abs(ens.value / oracle - 1.0) <= tol);
        run.check(report, "time_average_growth", g, "[" + format_double(lo) + ", " + format_double(hi) + "]",
                  g >= lo && g <= hi);
    } else if (kind == "proportionality") {
        const auto levels = ergodic::geometric_levels(d.at("levels").at(0), d.at("levels").at(1), d.at("n_levels"));
        const std::size_t n = d.at("samples_per_level");
        const double max_spread = d.at("max_spread");
        const auto gbm = ergodic::proportionality_check(ergodic::gbm_increment_sampler(ergodic::cli::gbm_config(cfg)),
                                                        levels, n, seed);
        const auto coin = ergodic::proportionality_check(
            ergodic::coin_toss_increment_sampler(ergodic::cli::coin_toss_config(cfg), 1.0), levels, n, seed + 1);
        report["estimates"] = {{"gbm", proportionality_json(gbm)}, {"coin_toss", proportionality_json(coin)}};
        run.check(report, "gbm_ratio_spread", gbm.spread, "<= " + format_double(max_spread), gbm.spread <= max_spread);
        run.check(report, "coin_toss_ratio_spread", coin.spread, "<= " + format_double(max_spread),
                  coin.spread <= max_spread);
    } else if (kind == "stabilization") {
        auto game = ergodic::cli::coin_toss_config(cfg);
        game.horizon = d.at("stabilization_horizon");
        const auto path = ergodic::rollout_coin_toss(game, ergodic::constant_bet(1.0), seed);
        const auto h = ergodic::learn_transform(path, ergodic::cli::transform_options(cfg));
        const int bins = d.at("n_bins");
        const auto raw = ergodic::increment_variance_by_bin(path, nullptr, bins);
        const auto stab = ergodic::increment_variance_by_bin(path, &h, bins);
        const double min_raw = d.at("min_raw_ratio"), max_tr = d.at("max_transformed_ratio");
        report["estimates"] = {{"raw", binned_json(raw)}, {"transformed", binned_json(stab)}};
        // The raw ratio can exceed the double range, so it is checked in log10.
        run.check(report, "raw_variance_log10_ratio", raw.log10_ratio, ">= log10(" + format_double(min_raw) + ")",
                  raw.log10_ratio >= std::log10(min_raw));
        run.check(report, "transformed_variance_ratio", stab.ratio, "<= " + format_double(max_tr),
                  stab.ratio <= max_tr);
    } else if (kind == "identity") {
        const auto& rw = cfg.at("env").at("random_walk");
        const auto path = ergodic::simulate_random_walk(rw.at("start"), rw.at("step_sd"), rw.at("horizon"), seed);
        auto options = ergodic::cli::transform_options(cfg);
        options.scale = ergodic::LevelScale::linear;
        const auto h = ergodic::learn_transform(path, options);
        const auto raw = ergodic::increment_variance_by_bin(path, nullptr, d.at("n_bins"));
        std::vector<double> grid(h.grid().begin(), h.grid().end()), values(h.values().begin(), h.values().end());
        const auto lin = ergodic::affine_fit(grid, values);
        const double max_ratio = d.at("max_identity_ratio");
        report["estimates"] = {{"raw", binned_json(raw)},
                               {"transform_linear_fit", {{"slope", lin.slope}, {"r_squared", lin.r_squared}}}};
        run.check(report, "raw_variance_ratio", raw.ratio, "<= " + format_double(max_ratio), raw.ratio <= max_ratio);
        run.check(report, "transform_linear_r_squared", lin.r_squared, ">= 0.99", lin.r_squared >= 0.99);
    } else if (kind == "sde-check") {
        const auto& s = d.at("sde");
        ergodic::risk::RiskParams p{s.at("beta"), s.at("mu"), s.at("sigma")};
        p.validate();
        const auto dts = s.at("dts").get<std::vector<double>>();
        const double horizon = s.at("horizon");
        const auto study = ergodic::risk::convergence_study(p, dts, horizon, s.at("n_seeds"), seed);
        const double lo = s.at("ratio_band").at(0), hi = s.at("ratio_band").at(1);
        report["estimates"] = {{"dts", study.dts},
                               {"mean_max_error", study.mean_max_error},
                               {"standard_error", study.standard_error},
                               {"refinement_ratios", study.refinement_ratios},
                               {"n_seeds", study.n_seeds}};
        bool monotone = true;
        for (std::size_t i = 0; i + 1 < study.mean_max_error.size(); ++i)
            monotone = monotone && study.mean_max_error[i + 1] < study.mean_max_error[i];
        run.check(report, "monotone_decrease", monotone ? 1.0 : 0.0, "errors strictly decreasing", monotone);
        for (std::size_t i = 0; i < study.refinement_ratios.size(); ++i) {
            const double r = study.refinement_ratios[i];
            run.check(report, "refinement_ratio_" + std::to_string(i), r,
                      "[" + format_double(lo) + ", " + format_double(hi) + "]", r >= lo && r <= hi);
        }
        const double r0 = ergodic::risk::closed_form_return(0.0, 0.0, p);
        const double dt = study.dts.back();
        const auto bm = ergodic::risk::brownian_path(dt, static_cast<int>(std::llround(horizon / dt)), seed);
        write_sde_path(run, "sde_euler.csv", ergodic::risk::euler_maruyama_on_path(p, r0, bm));
        ergodic::risk::SdePath exact{bm.times, bm.values, {}};
        for (std::size_t k = 0; k < bm.times.size(); ++k)
            exact.values.push_back(ergodic::risk::closed_form_return(bm.times[k], bm.values[k], p));
        write_sde_path(run, "sde_closed_form.csv", exact);
    } else if (kind == "kelly") {
        const auto game = ergodic::cli::coin_toss_config(cfg);
        const int resolution = d.at("kelly_resolution");
        const auto k = ergodic::kelly_oracle(game, resolution);
        const double stationary =
            std::clamp((game.p_heads * game.gain_frac - (1.0 - game.p_heads) * game.loss_frac) /
                           (game.gain_frac * game.loss_frac),
                       0.0, 1.0);
        report["estimates"] = {{"fraction", k.fraction}, {"growth", k.growth}, {"resolution", k.resolution},
                               {"closed_form_fraction", stationary}};
        run.check(report, "grid_vs_closed_form", std::abs(k.fraction - stationary),
                  "<= " + format_double(1.0 / resolution), std::abs(k.fraction - stationary) <= 1.0 / resolution);
    } else {
        throw ergodic::ConfigError("diagnose.kind '" + kind +
                                   "' unknown; expected witness, proportionality, stabilization, identity, "
                                   "sde-check, kelly");
    }
    report["pass"] = !run.failed();
    run.write_json("report.json", report);
    std::cout << "diagnose " << kind << ": " << (run.failed() ? "FAIL" : "pass") << '\n';
    for (const auto& c : report["checks"])
        std::cout << "  " << c["name"].get<std::string>() << " = " << c["value"].get<double>() << " ("
                  << c["threshold"].get<std::string>() << ") " << (c["pass"].get<bool>() ? "pass" : "FAIL") << '\n';
    return run.failed() ? kExitThreshold : kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Ergodicity transformations for reinforcement learning: experiments and diagnostics"};
    app.set_version_flag("--version", std::string(ERGODIC_VERSION));
    app.require_subcommand(1);

    ergodic::cli::ResolveRequest req;
    long long seed = 0;
    struct Sub {
        const char* name;
        const char* help;
        int (*fn)(Run&, const std::vector<std::uint64_t>&);
    };
    const Sub subs[] = {
        {"simulate", "simulate coin-toss, GBM or random-walk trajectories", cmd_simulate},
        {"learn-transform", "learn an ergodicity transform from a trajectory", cmd_learn_transform},
        {"train", "train REINFORCE agents and evaluate them", cmd_train},
        {"diagnose", "run an ergodicity diagnostic with pass/fail thresholds", cmd_diagnose},
    };
    std::vector<CLI::App*> commands;
    for (const auto& s : subs) {
        auto* c = app.add_subcommand(s.name, s.help);
        c->add_option("--config", req.config_path, "JSON config file");
        c->add_option("--preset", req.preset, "named preset");
        c->add_option("--seed", seed, "master seed");
        c->add_option("--out", req.output_dir, "output directory");
        c->add_option("--override", req.overrides, "key=value with dotted keys, repeatable");
        commands.push_back(c);
    }
    auto* schema = app.add_subcommand("schema", "print the default config, which is also the schema");
    auto* list = app.add_subcommand("presets", "list presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    if (schema->parsed()) {
        std::cout << std::setw(2) << ergodic::cli::default_config() << '\n';
        return kExitOk;
    }
    if (list->parsed()) {
        for (const auto& [name, p] : ergodic::cli::presets())
            std::cout << std::left << std::setw(16) << name << std::setw(16) << p.command << p.description << '\n';
        return kExitOk;
    }

    for (std::size_t i = 0; i < commands.size(); ++i) {
        if (!commands[i]->parsed())
            continue;
        req.command = subs[i].name;
        if (commands[i]->count("--seed"))
            req.seed = seed;
        try {
            const json cfg = ergodic::cli::resolve_config(req);
            const auto seeds = ergodic::cli::seed_list(cfg);
            Run run(req.command, req.preset, cfg);
            int code = kExitRuntime;
            try {
                code = subs[i].fn(run, seeds);
            } catch (const ergodic::ConfigError&) {
                throw;
            } catch (const nlohmann::json::exception& e) {
                throw ergodic::ConfigError(e.what());
            } catch (const std::exception& e) {
                std::cerr << "error: " << e.what() << '\n';
                run.finish(seeds);
                return kExitRuntime;
            }
            run.finish(seeds);
            return code;
        } catch (const ergodic::ConfigError& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return kExitConfig;
        } catch (const nlohmann::json::exception& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return kExitConfig;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return kExitRuntime;
        }
    }
    return kExitConfig;
}
