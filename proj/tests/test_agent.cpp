#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ergodic/agent.hpp"
#include "ergodic/diagnostics.hpp"

using namespace ergodic;

namespace {

// Scripted environment: episode e pays rewards_by_episode[e % size] per step.
class ScriptedEnv {
public:
    explicit ScriptedEnv(std::vector<std::vector<double>> rewards) : rewards_(std::move(rewards)) {}

    int observation_dim() const { return 1; }
    int n_actions() const { return 2; }
    PolicyHead head() const { return PolicyHead::softmax; }
    double initial_return() const { return 1.0; }

    Eigen::VectorXd reset(Engine&)
    {
        ++episode_;
        step_ = 0;
        return Eigen::VectorXd::Zero(1);
    }

    EnvStep step(double, Engine&)
    {
        const auto& script = rewards_[static_cast<std::size_t>(episode_ - 1) % rewards_.size()];
        const double r = script[static_cast<std::size_t>(step_) % script.size()];
        ++step_;
        return {Eigen::VectorXd::Constant(1, 0.1 * step_), r, false};
    }

private:
    std::vector<std::vector<double>> rewards_;
    int episode_ = 0;
    int step_ = 0;
};

EpisodeBatch one_step_batch(const PolicyParams& p, double action, double reward)
{
    EpisodeBatch b;
    Eigen::VectorXd obs(1);
    obs << 0.4;
    b.observations.push_back(obs);
    b.actions.push_back(action);
    b.log_probs.push_back(log_prob(p, obs, action));
    b.rewards.push_back(reward);
    b.trajectory = Trajectory(0.0);
    b.trajectory.push_reward(reward);
    return b;
}

TrainConfig small_coin_config()
{
    TrainConfig cfg;
    cfg.training_episodes = 30;
    cfg.train_episode_length = 20;
    cfg.epochs = 2;
    cfg.hidden = 4;
    cfg.optimizer = Optimizer::adam;
    cfg.learning_rate = 0.001;
    cfg.discount = 0.5;
    return cfg;
}

} // namespace

// ---- returns ----

TEST(ReturnsToGo, Recursion)
{
    const std::vector<double> r{1.0, 2.0, 3.0};
    const auto g = returns_to_go(r, 0.5);
    EXPECT_DOUBLE_EQ(g[2], 3.0);
    EXPECT_DOUBLE_EQ(g[1], 2.0 + 0.5 * 3.0);
    EXPECT_DOUBLE_EQ(g[0], 1.0 + 0.5 * 3.5);
    const auto undiscounted = returns_to_go(r, 1.0);
    EXPECT_DOUBLE_EQ(undiscounted[0], 6.0);
    EXPECT_TRUE(returns_to_go(std::vector<double>{}, 0.9).empty());
}

TEST(ReturnsToGo, PrepareTargetsOnTransformedCumulativeReturn)
{
    const auto p = init_policy(1, 3, PolicyHead::beta, 1, 1);
    auto b = one_step_batch(p, 0.5, 50.0);
    b.trajectory = Trajectory(100.0);
    b.trajectory.push_reward(50.0);
    TrainConfig cfg;
    cfg.transform_mode = TransformMode::fixed;
    const auto h = ErgodicityTransform::tabulate([](double u) { return std::log(u); }, 1.0, 1e4, 64, LevelScale::log);
    prepare_targets(b, cfg, &h);
    ASSERT_EQ(b.targets.size(), 1u);
    EXPECT_NEAR(b.targets[0], std::log(1.5), 1e-12);
    EXPECT_NEAR(b.transformed_rewards[0], std::log(1.5), 1e-12);
}

TEST(ReturnsToGo, PrepareTargetsOnTransformedReturnToGo)
{
    const auto p = init_policy(1, 3, PolicyHead::softmax, 2, 1);
    EpisodeBatch b = one_step_batch(p, 1.0, 1.0);
    b.observations.push_back(b.observations[0]);
    b.actions.push_back(0.0);
    b.log_probs.push_back(0.0);
    b.rewards.push_back(1.0);
    b.trajectory.push_reward(1.0);
    TrainConfig cfg;
    cfg.discount = 0.5;
    cfg.transform_mode = TransformMode::fixed;
    cfg.transform_target = TransformTarget::return_to_go;
    const auto h = ErgodicityTransform::tabulate([](double u) { return 3.0 * u; }, 0.0, 10.0, 11, LevelScale::linear);
    prepare_targets(b, cfg, &h);
    EXPECT_DOUBLE_EQ(b.returns_to_go[0], 1.5);
    EXPECT_NEAR(b.targets[0], 4.5, 1e-12);
    EXPECT_NEAR(b.targets[1], 3.0, 1e-12);
    EXPECT_TRUE(b.transformed_rewards.empty());
}

// ---- update ----

TEST(ReinforceUpdate, ZeroAdvantageLeavesParamsUnchanged)
{
    const auto p = init_policy(1, 5, PolicyHead::beta, 1, 3);
    auto b = one_step_batch(p, 0.3, 2.0);
    TrainConfig cfg;
    prepare_targets(b, cfg, nullptr);
    // A single step minus its own mean is zero.
    EXPECT_EQ(reinforce_update(p, b, cfg), p);
    cfg.baseline = Baseline::none;
    b.targets = {0.0};
    EXPECT_EQ(reinforce_update(p, b, cfg), p);
    cfg.optimizer = Optimizer::adam;
    EXPECT_EQ(reinforce_update(p, b, cfg), p);
}

TEST(ReinforceUpdate, SingleStepSgdIsScaledScore)
{
    for (auto head : {PolicyHead::beta, PolicyHead::softmax}) {
        const auto p = init_policy(1, 6, head, 2, 8);
        const double action = head == PolicyHead::beta ? 0.35 : 1.0;
        auto b = one_step_batch(p, action, 2.5);
        TrainConfig cfg;
        cfg.baseline = Baseline::none;
        cfg.epochs = 1;
        cfg.learning_rate = 0.01;
        prepare_targets(b, cfg, nullptr);
        const auto updated = reinforce_update(p, b, cfg);
        const Eigen::VectorXd score = grad_log_prob(p, b.observations[0], action).flat();
        const Eigen::VectorXd expected = p.flat() + cfg.learning_rate * (2.5 * score);
        EXPECT_LE((updated.flat() - expected).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(ReinforceUpdate, FirstAdamStepIsSignedLearningRate)
{
    const auto p = init_policy(1, 4, PolicyHead::beta, 1, 2);
    auto b = one_step_batch(p, 0.8, 1.0);
    TrainConfig cfg;
    cfg.baseline = Baseline::none;
    cfg.epochs = 1;
    cfg.optimizer = Optimizer::adam;
    cfg.learning_rate = 0.01;
    prepare_targets(b, cfg, nullptr);
    const Eigen::VectorXd score = grad_log_prob(p, b.observations[0], 0.8).flat();
    const Eigen::VectorXd delta = reinforce_update(p, b, cfg).flat() - p.flat();
    for (Eigen::Index i = 0; i < score.size(); ++i)
        if (std::abs(score[i]) > 1e-6) {
            EXPECT_NEAR(delta[i], 0.01 * (score[i] > 0 ? 1.0 : -1.0), 1e-7);
        }
}

TEST(ReinforceUpdate, GradientClippingBoundsStep)
{
    const auto p = init_policy(1, 4, PolicyHead::beta, 1, 2);
    auto b = one_step_batch(p, 0.9, 1.0);
    TrainConfig cfg;
    cfg.baseline = Baseline::none;
    cfg.epochs = 1;
    cfg.learning_rate = 1.0;
    cfg.max_gradient_norm = 1e-3;
    prepare_targets(b, cfg, nullptr);
    b.targets = {1e6};
    const double step = (reinforce_update(p, b, cfg).flat() - p.flat()).norm();
    EXPECT_NEAR(step, 1e-3, 1e-12);
}

TEST(ReinforceUpdate, NonFiniteAdvantageAbortsWithStatistics)
{
    const auto p = init_policy(1, 4, PolicyHead::beta, 1, 2);
    auto b = one_step_batch(p, 0.5, 1.0);
    TrainConfig cfg;
    prepare_targets(b, cfg, nullptr);
    b.targets = {std::numeric_limits<double>::infinity()};
    try {
        reinforce_update(p, b, cfg);
        FAIL() << "expected RangeError";
    } catch (const RangeError& e) {
        EXPECT_NE(std::string(e.what()).find("steps=1"), std::string::npos);
    }
}

TEST(ReinforceUpdate, AdvantagesSubtractBatchMean)
{
    EpisodeBatch b;
    b.targets = {1.0, 2.0, 6.0};
    TrainConfig cfg;
    const auto a = advantages(b, cfg);
    EXPECT_DOUBLE_EQ(a[0], -2.0);
    EXPECT_DOUBLE_EQ(a[2], 3.0);
    cfg.normalize_advantages = true;
    const auto n = advantages(b, cfg);
    EXPECT_NEAR(n[0] * n[0] + n[1] * n[1] + n[2] * n[2], 3.0, 1e-12);
}

// ---- environments ----

TEST(CoinTossEnvTest, ObservationIsScaledLogWealth)
{
    CoinTossEnv env({}, 10.0);
    Engine engine = make_engine(1);
    EXPECT_EQ(env.reset(engine)[0], 0.0);
    const auto s = env.step(1.0, engine);
    const double level = 100.0 + s.reward;
    EXPECT_NEAR(s.observation[0], std::log(level / 100.0) / 10.0, 1e-15);
    EXPECT_FALSE(s.terminated);
}

TEST(CartPoleEnvTest, ThresholdActionMapping)
{
    CartPoleEnv env;
    Engine a = make_engine(2), b = make_engine(2);
    env.reset(a);
    const auto right = env.step(0.7, a);
    CartPoleEnv env2;
    env2.reset(b);
    const auto also_right = env2.step(1.0, b);
    EXPECT_EQ(right.observation, also_right.observation);
    EXPECT_DOUBLE_EQ(right.reward, 1.0);
}

// ---- evaluation ----

TEST(Evaluate, ZeroBetKeepsInitialReturn)
{
    CoinTossEnv env;
    const auto s = evaluate(constant_rule(0.0), env, 20, 100, 1);
    for (double v : s.final_returns)
        EXPECT_EQ(v, 100.0);
    EXPECT_EQ(s.mean_action, 0.0);
}

TEST(Evaluate, FullBetMedianRuins)
{
    CoinTossEnv env;
    const auto s = evaluate(constant_rule(1.0), env, 100, 1000, 2);
    EXPECT_LT(s.median, 1.0);
    // Median path oracle: 100 * 0.9^500.
    EXPECT_LT(100.0 * std::pow(0.9, 500), 1.0);
}

TEST(Evaluate, CartPoleReturnBoundedByEpisodeLength)
{
    // Push toward the side the pole is falling.
    const ActionRule balance = [](const Eigen::VectorXd& obs, Engine&) {
        const double a = obs[2] + 0.5 * obs[3] > 0.0 ? 1.0 : 0.0;
        return std::pair{a, a};
    };
    CartPoleEnv env;
    const auto s = evaluate(balance, env, 50, 200, 3);
    for (std::size_t i = 0; i < s.final_returns.size(); ++i) {
        EXPECT_LE(s.final_returns[i], 200.0);
        EXPECT_EQ(s.final_returns[i], s.lengths[i]);
    }
    EXPECT_GT(s.mean, 150.0);
}

TEST(Evaluate, QuantileInterpolates)
{
    const std::vector<double> v{4.0, 1.0, 3.0, 2.0};
    EXPECT_DOUBLE_EQ(quantile(v, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(quantile(v, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(quantile(v, 1.0), 4.0);
    EXPECT_THROW(quantile({}, 0.5), EmptySampleError);
}

// ---- training loop ----

TEST(Train, ReproducibleForFixedSeed)
{
    CoinTossEnv env;
    const auto cfg = small_coin_config();
    const auto a = train(env, cfg, std::nullopt, 5);
    const auto b = train(env, cfg, std::nullopt, 5);
    EXPECT_EQ(a.params, b.params);
    EXPECT_EQ(a.learning_curve, b.learning_curve);
    const auto c = train(env, cfg, std::nullopt, 6);
    EXPECT_FALSE(a.params == c.params);
    ASSERT_EQ(a.learning_curve.size(), 30u);
}

TEST(Train, LearningCurveRecordsRawReturns)
{
    CoinTossEnv env;
    auto cfg = small_coin_config();
    cfg.transform_mode = TransformMode::fixed;
    const auto h =
        ErgodicityTransform::tabulate([](double u) { return std::log(u); }, 1e-6, 1e8, 128, LevelScale::log);
    const auto result = train(env, cfg, h, 3);
    for (double r : result.learning_curve)
        EXPECT_GT(r, 0.0);
    // Log-wealth stays below 20 ln 1.5 over 20 steps, so raw returns stay below 100 * 1.5^20.
    for (double r : result.learning_curve)
        EXPECT_LE(r, 100.0 * std::pow(1.5, 20) * (1 + 1e-12));
}

TEST(Train, StaticModeNeedsTransform)
{
    CoinTossEnv env;
    auto cfg = small_coin_config();
    cfg.transform_mode = TransformMode::fixed;
    EXPECT_THROW(train(env, cfg, std::nullopt, 1), ConfigError);
}

TEST(Train, PerEpisodeFailureKeepsPreviousTransform)
{
    // Episode 1 has varied rewards; episode 2 is flat, so its transform cannot be learned.
    ScriptedEnv env({{0.5, -0.2, 1.0, 0.3, -0.4, 2.0, 0.1, -0.3}, {0.0}});
    TrainConfig cfg;
    cfg.training_episodes = 2;
    cfg.train_episode_length = 40;
    cfg.epochs = 1;
    cfg.hidden = 3;
    cfg.transform_mode = TransformMode::per_episode;
    const auto result = train(env, cfg, std::nullopt, 2);
    EXPECT_EQ(result.transform_refreshes, 1);
    ASSERT_EQ(result.events.size(), 1u);
    EXPECT_EQ(result.events[0].episode, 1);
    EXPECT_EQ(result.events[0].message.rfind("kept previous transform", 0), 0u);
    EXPECT_TRUE(result.params.finite());
}

TEST(Train, PerEpisodeFailureBeforeAnyTransformTrainsRaw)
{
    ScriptedEnv env(std::vector<std::vector<double>>{{0.0}});
    TrainConfig cfg;
    cfg.training_episodes = 3;
    cfg.train_episode_length = 10;
    cfg.hidden = 3;
    cfg.transform_mode = TransformMode::per_episode;
    const auto result = train(env, cfg, std::nullopt, 2);
    ASSERT_EQ(result.events.size(), 3u);
    EXPECT_EQ(result.events[0].message.rfind("no transform yet", 0), 0u);
    EXPECT_EQ(result.transform_refreshes, 0);
}

TEST(Train, CartPoleBaselineLearnsTrainingTask)
{
    // Default hyperparameters with Adam; success is a mean of at least 60 over
    // the last 50 of 1000 training episodes.
    TrainConfig cfg;
    cfg.optimizer = Optimizer::adam;
    int successes = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        CartPoleEnv env;
        const auto result = train(env, cfg, std::nullopt, seed);
        const auto& c = result.learning_curve;
        const double tail = std::accumulate(c.end() - 50, c.end(), 0.0) / 50.0;
        successes += tail >= 60.0;
    }
    EXPECT_GE(successes, 3);
}

// ---- monotone transforms ----

TEST(Ranking, IncreasingTransformPreservesEpisodeOrder)
{
    CoinTossConfig game;
    game.horizon = 200;
    const auto ens = rollout_ensemble(game, constant_bet(0.6), 200, 4);
    std::vector<Trajectory> pool(ens.begin(), ens.begin() + 20);
    const auto h = learn_transform(pool);
    std::vector<double> finals;
    for (const auto& t : ens)
        finals.push_back(t.back().ret);
    std::sort(finals.begin(), finals.end());
    for (std::size_t i = 1; i < finals.size(); ++i) {
        EXPECT_LE(h(finals[i - 1]), h(finals[i]));
        if (finals[i] > finals[i - 1] * (1.0 + 1e-9)) {
            EXPECT_LT(h(finals[i - 1]), h(finals[i]));
        }
    }
}

TEST(TrainConfigTest, Validates)
{
    TrainConfig cfg;
    cfg.discount = 0.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.epochs = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    EXPECT_EQ(transform_mode_from_string("static"), TransformMode::fixed);
    EXPECT_EQ(to_string(TransformMode::per_episode), "per-episode");
    EXPECT_THROW(transform_mode_from_string("dynamic"), ConfigError);
}
