#pragma once

// Exponential (risk-sensitive) transform h_rs(R) = beta exp(beta R) read as an
// ergodicity transformation. If dh_rs = mu dt + sigma dW, Ito's lemma gives
//
//   dR = (mu / (beta^2 e^{beta R}) - sigma^2 / (2 beta^3 e^{2 beta R})) dt
//        + sigma / (beta^2 e^{beta R}) dW,
//
// a reducible SDE solved by R_t = l^{-1}(mu t / sigma + W_t + l(0)) with
// l(R) = (beta / sigma) e^{beta R}.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "ergodic/error.hpp"
#include "ergodic/rng.hpp"

namespace ergodic::risk {

struct RiskParams {
    double beta = -1.0;
    double mu = 0.05;
    double sigma = 0.2;

    void validate() const
    {
        detail::require(std::isfinite(beta) && beta != 0.0, "risk: beta must be nonzero");
        detail::require(std::isfinite(mu), "risk: mu must be finite");
        detail::require(std::isfinite(sigma) && sigma > 0.0, "risk: sigma must be > 0");
    }
    /// Coefficient of variation sigma / mu.
    double coefficient_of_variation() const { return sigma / mu; }
};

/// exp(x) with explicit failure instead of saturation to inf or 0.
inline double checked_exp(double x, const char* where)
{
    constexpr double max_arg = 709.0;
    constexpr double min_arg = -708.0;
    if (!std::isfinite(x) || x > max_arg || x < min_arg)
        throw RangeError(std::string(where) + ": exponent " + std::to_string(x) +
                         " outside the double-precision range");
    return std::exp(x);
}

/// beta exp(beta R). Overflow is an error; underflow returns a (sub)normal
/// or zero value.
inline double exp_transform(double level, double beta)
{
    if (beta == 0.0 || !std::isfinite(beta))
        throw DomainError("exp_transform: beta must be nonzero and finite");
    if (!std::isfinite(level))
        throw DomainError("exp_transform: non-finite return");
    const double x = beta * level;
    if (x > 709.0)
        throw RangeError("exp_transform: exp(" + std::to_string(x) + ") overflows");
    return beta * std::exp(x);
}

struct DriftDiffusion {
    double drift = 0.0;
    double diffusion = 0.0;
};

inline DriftDiffusion drift_diffusion(double level, const RiskParams& p)
{
    p.validate();
    const double e1 = checked_exp(p.beta * level, "drift_diffusion");
    const double e2 = checked_exp(2.0 * p.beta * level, "drift_diffusion");
    const double b2 = p.beta * p.beta;
    DriftDiffusion out;
    out.drift = p.mu / (b2 * e1) - 0.5 * p.sigma * p.sigma / (b2 * p.beta * e2);
    out.diffusion = p.sigma / (b2 * e1);
    return out;
}

/// l(R) = (beta / sigma) exp(beta R).
inline double ell(double level, const RiskParams& p)
{
    p.validate();
    return p.beta / p.sigma * checked_exp(p.beta * level, "ell");
}

/// l^{-1}(y) = (1/beta) ln|sigma/beta| + (1/beta) ln|y|, defined on the
/// branch where y has the sign of beta.
inline double ell_inverse(double y, const RiskParams& p)
{
    p.validate();
    if (!std::isfinite(y) || !(y * p.beta / p.sigma > 0.0))
        throw DomainError("ell_inverse: argument outside the branch y * beta / sigma > 0");
    return (std::log(std::abs(p.sigma / p.beta)) + std::log(std::abs(y))) / p.beta;
}

/// R_t = (1/beta) ln|sigma/beta| + (1/beta) ln|mu t / sigma + W_t + beta / sigma|.
inline double closed_form_return(double t, double brownian, const RiskParams& p)
{
    p.validate();
    const double arg = p.mu * t / p.sigma + brownian + p.beta / p.sigma;
    if (arg == 0.0 || !std::isfinite(arg))
        throw SingularityError("closed_form_return: logarithm argument is zero at t=" + std::to_string(t));
    return (std::log(std::abs(p.sigma / p.beta)) + std::log(std::abs(arg))) / p.beta;
}

struct BrownianPath {
    std::vector<double> times;
    std::vector<double> values;
};

struct SdePath {
    std::vector<double> times;
    std::vector<double> brownian;
    std::vector<double> values;
};

/// W on the grid k*dt, k = 0..n_steps, with W_0 = 0.
inline BrownianPath brownian_path(double dt, int n_steps, std::uint64_t seed, std::uint64_t stream = 0)
{
    detail::require(dt > 0.0 && std::isfinite(dt), "brownian_path: dt must be > 0");
    detail::require(n_steps >= 1, "brownian_path: n_steps must be >= 1");
    Engine engine = make_engine(seed, stream);
    BrownianPath path;
    path.times.resize(static_cast<std::size_t>(n_steps) + 1);
    path.values.resize(path.times.size());
    const double sd = std::sqrt(dt);
    path.times[0] = 0.0;
    path.values[0] = 0.0;
    for (std::size_t k = 1; k < path.times.size(); ++k) {
        path.times[k] = static_cast<double>(k) * dt;
        path.values[k] = path.values[k - 1] + sd * standard_normal(engine);
    }
    return path;
}

/// Every `factor`-th point of a path: the same Brownian motion observed on a
/// coarser grid.
inline BrownianPath coarsen(const BrownianPath& fine, int factor)
{
    detail::require(factor >= 1, "coarsen: factor must be >= 1");
    const std::size_t steps = fine.times.size() - 1;
    detail::require(steps % static_cast<std::size_t>(factor) == 0, "coarsen: factor must divide the step count");
    BrownianPath out;
    for (std::size_t k = 0; k <= steps; k += static_cast<std::size_t>(factor)) {
        out.times.push_back(fine.times[k]);
        out.values.push_back(fine.values[k]);
    }
    return out;
}

struct EulerOptions {
    /// Test hook: drop the dW term, leaving the drift ODE.
    bool suppress_diffusion = false;
};

/// Euler-Maruyama along a given Brownian path.
inline SdePath euler_maruyama_on_path(const RiskParams& p, double initial_return, const BrownianPath& path,
                                      const EulerOptions& options = {})
{
    p.validate();
    if (path.times.size() < 2 || path.times.size() != path.values.size() || path.values.front() != 0.0)
        throw DomainError("euler_maruyama: Brownian path must start at W=0 and have >= 2 points");
    SdePath out;
    out.times = path.times;
    out.brownian = path.values;
    out.values.resize(path.times.size());
    out.values[0] = initial_return;
    for (std::size_t k = 0; k + 1 < path.times.size(); ++k) {
        DriftDiffusion dd;
        try {
            dd = drift_diffusion(out.values[k], p);
        } catch (const RangeError& e) {
            throw RangeError(std::string(e.what()) + " (Euler-Maruyama step " + std::to_string(k) + ")");
        }
        const double dt = path.times[k + 1] - path.times[k];
        const double dw = path.values[k + 1] - path.values[k];
        out.values[k + 1] = out.values[k] + dd.drift * dt + (options.suppress_diffusion ? 0.0 : dd.diffusion * dw);
    }
    return out;
}

inline SdePath euler_maruyama(const RiskParams& p, double initial_return, double dt, int n_steps,
                              std::uint64_t seed, const EulerOptions& options = {})
{
    return euler_maruyama_on_path(p, initial_return, brownian_path(dt, n_steps, seed), options);
}

/// max_k |R^EM_k - R(t_k, W_k)| against the closed form on the path's own noise.
inline double pathwise_max_error(const SdePath& path, const RiskParams& p)
{
    double worst = 0.0;
    for (std::size_t k = 0; k < path.times.size(); ++k)
        worst = std::max(worst, std::abs(path.values[k] - closed_form_return(path.times[k], path.brownian[k], p)));
    return worst;
}

struct ConvergenceStudy {
    std::vector<double> dts;
    std::vector<double> mean_max_error;
    std::vector<double> standard_error;
    /// mean_max_error[i] / mean_max_error[i+1].
    std::vector<double> refinement_ratios;
    int n_seeds = 0;
};

/// Strong-error ladder: for each seed one Brownian path on the finest grid
/// is shared by all coarser grids. `dts` must be dyadic refinements of
/// `horizon`, ordered coarse to fine.
inline ConvergenceStudy convergence_study(const RiskParams& p, std::vector<double> dts, double horizon, int n_seeds,
                                          std::uint64_t seed)
{
    p.validate();
    detail::require(!dts.empty() && n_seeds >= 1 && horizon > 0.0, "convergence_study: invalid arguments");
    std::sort(dts.begin(), dts.end(), std::greater<>());
    const double finest = dts.back();
    const double fine_steps_real = horizon / finest;
    const auto fine_steps = static_cast<int>(std::llround(fine_steps_real));
    detail::require(std::abs(fine_steps_real - fine_steps) < 1e-9, "convergence_study: dt must divide horizon");
    std::vector<int> factors;
    for (double dt : dts) {
        const double f = dt / finest;
        const auto fi = static_cast<int>(std::llround(f));
        detail::require(std::abs(f - fi) < 1e-9 && fine_steps % fi == 0,
                        "convergence_study: each dt must be a multiple of the finest");
        factors.push_back(fi);
    }
    const double r0 = closed_form_return(0.0, 0.0, p);
    std::vector<std::vector<double>> errors(dts.size());
    for (int s = 0; s < n_seeds; ++s) {
        const BrownianPath fine = brownian_path(finest, fine_steps, seed, static_cast<std::uint64_t>(s));
        for (std::size_t i = 0; i < dts.size(); ++i) {
            const SdePath em = euler_maruyama_on_path(p, r0, coarsen(fine, factors[i]));
            errors[i].push_back(pathwise_max_error(em, p));
        }
    }
    ConvergenceStudy out;
    out.dts = dts;
    out.n_seeds = n_seeds;
    for (const auto& e : errors) {
        double mean = 0.0;
        for (double v : e)
            mean += v;
        mean /= static_cast<double>(e.size());
        double var = 0.0;
        for (double v : e)
            var += (v - mean) * (v - mean);
        var = e.size() > 1 ? var / static_cast<double>(e.size() - 1) : 0.0;
        out.mean_max_error.push_back(mean);
        out.standard_error.push_back(std::sqrt(var / static_cast<double>(e.size())));
    }
    for (std::size_t i = 0; i + 1 < out.mean_max_error.size(); ++i)
        out.refinement_ratios.push_back(out.mean_max_error[i] / out.mean_max_error[i + 1]);
    return out;
}

} // namespace ergodic::risk
