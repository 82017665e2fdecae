#pragma once

// Single-hidden-layer stochastic policy with hand-written gradients.
//
//   h = tanh(W1 obs + b1),  o = W2 h + b2
//
// softmax head: pi(a|obs) = softmax(o)_a over discrete actions.
// beta head:    F ~ Beta(softplus(o_0) + 1, softplus(o_1) + 1) on [0,1].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Dense>
#include <boost/math/special_functions/digamma.hpp>

#include "ergodic/error.hpp"
#include "ergodic/rng.hpp"

namespace ergodic {

enum class PolicyHead { softmax, beta };

inline std::string to_string(PolicyHead head)
{
    return head == PolicyHead::softmax ? "softmax" : "beta";
}

inline PolicyHead policy_head_from_string(const std::string& text)
{
    if (text == "softmax")
        return PolicyHead::softmax;
    if (text == "beta")
        return PolicyHead::beta;
    throw ConfigError("unknown policy head '" + text + "'");
}

/// Beta samples are kept this far from the support boundary so that the
/// log-density stays finite.
inline constexpr double kBetaEdge = 1e-9;

struct PolicyParams {
    PolicyHead head = PolicyHead::softmax;
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;
    Eigen::VectorXd b2;

    int observation_dim() const { return static_cast<int>(w1.cols()); }
    int hidden() const { return static_cast<int>(w1.rows()); }
    int output_dim() const { return static_cast<int>(w2.rows()); }

    Eigen::Index size() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

    PolicyParams zeros_like() const
    {
        PolicyParams z;
        z.head = head;
        z.w1 = Eigen::MatrixXd::Zero(w1.rows(), w1.cols());
        z.b1 = Eigen::VectorXd::Zero(b1.size());
        z.w2 = Eigen::MatrixXd::Zero(w2.rows(), w2.cols());
        z.b2 = Eigen::VectorXd::Zero(b2.size());
        return z;
    }

    /// Layout: w1 (column-major), b1, w2 (column-major), b2.
    Eigen::VectorXd flat() const
    {
        Eigen::VectorXd v(size());
        Eigen::Index o = 0;
        v.segment(o, w1.size()) = Eigen::Map<const Eigen::VectorXd>(w1.data(), w1.size());
        o += w1.size();
        v.segment(o, b1.size()) = b1;
        o += b1.size();
        v.segment(o, w2.size()) = Eigen::Map<const Eigen::VectorXd>(w2.data(), w2.size());
        o += w2.size();
        v.segment(o, b2.size()) = b2;
        return v;
    }

    void set_flat(const Eigen::VectorXd& v)
    {
        if (v.size() != size())
            throw DomainError("PolicyParams::set_flat: size mismatch");
        Eigen::Index o = 0;
        Eigen::Map<Eigen::VectorXd>(w1.data(), w1.size()) = v.segment(o, w1.size());
        o += w1.size();
        b1 = v.segment(o, b1.size());
        o += b1.size();
        Eigen::Map<Eigen::VectorXd>(w2.data(), w2.size()) = v.segment(o, w2.size());
        o += w2.size();
        b2 = v.segment(o, b2.size());
    }

    bool finite() const { return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite(); }

    bool same_shape(const PolicyParams& other) const
    {
        return head == other.head && w1.rows() == other.w1.rows() && w1.cols() == other.w1.cols() &&
               w2.rows() == other.w2.rows() && w2.cols() == other.w2.cols();
    }

    /// this += scale * other
    void axpy(double scale, const PolicyParams& other)
    {
        w1 += scale * other.w1;
        b1 += scale * other.b1;
        w2 += scale * other.w2;
        b2 += scale * other.b2;
    }

    friend bool operator==(const PolicyParams& a, const PolicyParams& b)
    {
        return a.same_shape(b) && a.w1 == b.w1 && a.b1 == b.b1 && a.w2 == b.w2 && a.b2 == b.b2;
    }
};

/// Gaussian hidden weights with variance 1/fan_in; output weights scaled
/// down by `output_scale` so the initial policy is close to uniform.
inline PolicyParams init_policy(int observation_dim, int hidden, PolicyHead head, int n_actions, std::uint64_t seed,
                                double output_scale = 0.1)
{
    detail::require(observation_dim >= 1 && hidden >= 1, "init_policy: dimensions must be >= 1");
    const int out = head == PolicyHead::beta ? 2 : n_actions;
    detail::require(out >= 2, "init_policy: softmax head needs at least 2 actions");
    Engine engine = make_engine(seed, 0x9011c7ULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    PolicyParams p;
    p.head = head;
    p.w1 = Eigen::MatrixXd::NullaryExpr(hidden, observation_dim, [&] { return normal(engine); }) /
           std::sqrt(static_cast<double>(observation_dim));
    p.b1 = Eigen::VectorXd::Zero(hidden);
    p.w2 = Eigen::MatrixXd::NullaryExpr(out, hidden, [&] { return normal(engine); }) *
           (output_scale / std::sqrt(static_cast<double>(hidden)));
    p.b2 = Eigen::VectorXd::Zero(out);
    return p;
}

struct ActionDistribution {
    PolicyHead head = PolicyHead::softmax;
    Eigen::VectorXd probabilities;
    double alpha = 1.0;
    double beta = 1.0;

    /// Expected action: the Beta mean, or the expected action index.
    double mean() const
    {
        if (head == PolicyHead::beta)
            return alpha / (alpha + beta);
        double m = 0.0;
        for (Eigen::Index i = 0; i < probabilities.size(); ++i)
            m += static_cast<double>(i) * probabilities[i];
        return m;
    }

    double mode_or_mean() const
    {
        if (head == PolicyHead::beta)
            return mean();
        Eigen::Index best = 0;
        probabilities.maxCoeff(&best);
        return static_cast<double>(best);
    }
};

namespace detail {

inline double softplus(double x)
{
    return x > 30.0 ? x : std::log1p(std::exp(x));
}

inline double sigmoid(double x)
{
    return 1.0 / (1.0 + std::exp(-x));
}

struct ForwardCache {
    Eigen::VectorXd hidden;
    Eigen::VectorXd output;
};

inline ForwardCache forward(const PolicyParams& p, const Eigen::VectorXd& observation)
{
    if (observation.size() != p.observation_dim())
        throw DomainError("policy_forward: observation has dimension " + std::to_string(observation.size()) +
                          ", expected " + std::to_string(p.observation_dim()));
    if (!observation.allFinite())
        throw DomainError("policy_forward: non-finite observation");
    ForwardCache c;
    c.hidden = (p.w1 * observation + p.b1).array().tanh().matrix();
    c.output = p.w2 * c.hidden + p.b2;
    if (!c.output.allFinite())
        throw DomainError("policy_forward: non-finite activations");
    return c;
}

inline ActionDistribution distribution_from_output(PolicyHead head, const Eigen::VectorXd& output)
{
    ActionDistribution d;
    d.head = head;
    if (head == PolicyHead::softmax) {
        const double shift = output.maxCoeff();
        d.probabilities = (output.array() - shift).exp().matrix();
        d.probabilities /= d.probabilities.sum();
    } else {
        d.alpha = softplus(output[0]) + 1.0;
        d.beta = softplus(output[1]) + 1.0;
    }
    return d;
}

inline double beta_log_density(double x, double a, double b)
{
    return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) + std::lgamma(a + b) - std::lgamma(a) -
           std::lgamma(b);
}

} // namespace detail

inline ActionDistribution policy_forward(const PolicyParams& p, const Eigen::VectorXd& observation)
{
    return detail::distribution_from_output(p.head, detail::forward(p, observation).output);
}

/// Discrete actions are represented by their index.
inline double log_prob(const PolicyParams& p, const Eigen::VectorXd& observation, double action)
{
    const auto d = policy_forward(p, observation);
    if (p.head == PolicyHead::softmax) {
        const auto a = static_cast<Eigen::Index>(action);
        if (a < 0 || a >= d.probabilities.size() || static_cast<double>(a) != action)
            throw DomainError("log_prob: invalid discrete action");
        return std::log(d.probabilities[a]);
    }
    if (!(action > 0.0 && action < 1.0))
        throw DomainError("log_prob: Beta action must lie in (0,1)");
    return detail::beta_log_density(action, d.alpha, d.beta);
}

/// Gradient of log pi(action | observation) with respect to every parameter.
inline PolicyParams grad_log_prob(const PolicyParams& p, const Eigen::VectorXd& observation, double action)
{
    const auto cache = detail::forward(p, observation);
    Eigen::VectorXd d_output(cache.output.size());
    if (p.head == PolicyHead::softmax) {
        const auto d = detail::distribution_from_output(p.head, cache.output);
        const auto a = static_cast<Eigen::Index>(action);
        if (a < 0 || a >= d.probabilities.size() || static_cast<double>(a) != action)
            throw DomainError("grad_log_prob: invalid discrete action");
        d_output = -d.probabilities;
        d_output[a] += 1.0;
    } else {
        if (!(action > 0.0 && action < 1.0))
            throw DomainError("grad_log_prob: Beta action must lie in (0,1)");
        const double a = detail::softplus(cache.output[0]) + 1.0;
        const double b = detail::softplus(cache.output[1]) + 1.0;
        const double psi_ab = boost::math::digamma(a + b);
        const double d_alpha = std::log(action) + psi_ab - boost::math::digamma(a);
        const double d_beta = std::log1p(-action) + psi_ab - boost::math::digamma(b);
        d_output[0] = d_alpha * detail::sigmoid(cache.output[0]);
        d_output[1] = d_beta * detail::sigmoid(cache.output[1]);
    }
    PolicyParams g;
    g.head = p.head;
    g.w2 = d_output * cache.hidden.transpose();
    g.b2 = d_output;
    const Eigen::VectorXd d_hidden =
        ((p.w2.transpose() * d_output).array() * (1.0 - cache.hidden.array().square())).matrix();
    g.w1 = d_hidden * observation.transpose();
    g.b1 = d_hidden;
    return g;
}

inline double sample_action(const ActionDistribution& d, Engine& engine)
{
    if (d.head == PolicyHead::softmax) {
        const double u = uniform01(engine);
        double cumulative = 0.0;
        for (Eigen::Index i = 0; i < d.probabilities.size(); ++i) {
            cumulative += d.probabilities[i];
            if (u < cumulative)
                return static_cast<double>(i);
        }
        return static_cast<double>(d.probabilities.size() - 1);
    }
    const double x = std::gamma_distribution<double>(d.alpha, 1.0)(engine);
    const double y = std::gamma_distribution<double>(d.beta, 1.0)(engine);
    const double f = x / (x + y);
    return std::clamp(f, kBetaEdge, 1.0 - kBetaEdge);
}

} // namespace ergodic
