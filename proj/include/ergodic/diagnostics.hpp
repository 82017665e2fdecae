#pragma once

// Ergodicity statistics and independent oracles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ergodic/agent.hpp"
#include "ergodic/env_core.hpp"
#include "ergodic/error.hpp"
#include "ergodic/rng.hpp"
#include "ergodic/trajectory.hpp"
#include "ergodic/transform.hpp"

namespace ergodic {

/// A Monte Carlo estimate with its standard error and sample count.
struct Estimate {
    double value = 0.0;
    double standard_error = 0.0;
    std::size_t n = 0;
};

inline Estimate mean_estimate(std::span<const double> values)
{
    if (values.empty())
        throw EmptySampleError("mean_estimate: empty sample");
    Estimate e;
    e.n = values.size();
    // Welford keeps the variance accurate for large, nearly constant samples.
    double mean = 0.0, m2 = 0.0;
    std::size_t k = 0;
    for (double v : values) {
        ++k;
        const double d = v - mean;
        mean += d / static_cast<double>(k);
        m2 += d * (v - mean);
    }
    e.value = mean;
    if (e.n > 1)
        e.standard_error = std::sqrt(m2 / static_cast<double>(e.n - 1) / static_cast<double>(e.n));
    return e;
}

inline double sample_variance(std::span<const double> values)
{
    if (values.size() < 2)
        throw EmptySampleError("sample_variance: need at least two values");
    double mean = 0.0, m2 = 0.0;
    std::size_t k = 0;
    for (double v : values) {
        ++k;
        const double d = v - mean;
        mean += d / static_cast<double>(k);
        m2 += d * (v - mean);
    }
    return m2 / static_cast<double>(values.size() - 1);
}

/// Mean of R(t_k) across trajectories of equal length.
inline Estimate ensemble_average(std::span<const Trajectory> ensemble, std::size_t k)
{
    if (ensemble.empty())
        throw EmptySampleError("ensemble_average: empty ensemble");
    const std::size_t len = ensemble.front().size();
    for (const auto& t : ensemble)
        if (t.size() != len)
            throw DomainError("ensemble_average: ragged ensemble");
    if (k >= len)
        throw DomainError("ensemble_average: time index " + std::to_string(k) + " beyond horizon " +
                          std::to_string(len - 1));
    std::vector<double> values;
    values.reserve(ensemble.size());
    for (const auto& t : ensemble)
        values.push_back(t[k].ret);
    return mean_estimate(values);
}

/// Mean of already extracted values R_i(t_k).
inline Estimate ensemble_average(std::span<const double> values_at_t)
{
    return mean_estimate(values_at_t);
}

inline std::vector<double> ensemble_mean_by_time(std::span<const Trajectory> ensemble)
{
    if (ensemble.empty())
        throw EmptySampleError("ensemble_mean_by_time: empty ensemble");
    std::vector<double> out;
    for (std::size_t k = 0; k < ensemble.front().size(); ++k)
        out.push_back(ensemble_average(ensemble, k).value);
    return out;
}

/// (ln R(T) - ln R(t_0)) / T.
inline double time_average_growth(const Trajectory& trajectory)
{
    if (trajectory.horizon() == 0)
        throw EmptySampleError("time_average_growth: trajectory has no transitions");
    const double first = trajectory.front().ret;
    const double last = trajectory.back().ret;
    if (!(first > 0.0) || !(last > 0.0))
        throw DomainError("time_average_growth: returns must be strictly positive");
    return (std::log(last) - std::log(first)) / static_cast<double>(trajectory.horizon());
}

/// Same quantity from a log-domain path ln R(t_0), ..., ln R(T).
inline double time_average_growth_log(std::span<const double> log_returns)
{
    if (log_returns.size() < 2)
        throw EmptySampleError("time_average_growth_log: need at least two points");
    for (double v : log_returns)
        if (!std::isfinite(v))
            throw DomainError("time_average_growth_log: non-finite log return");
    return (log_returns.back() - log_returns.front()) / static_cast<double>(log_returns.size() - 1);
}

struct GrowthStats {
    std::vector<double> ensemble_mean_by_time;
    std::vector<double> time_average_growth;
    double final_mean = 0.0;
    double final_median = 0.0;
    double final_q05 = 0.0;
    double final_q25 = 0.0;
    double final_q75 = 0.0;
    double final_q95 = 0.0;
};

inline GrowthStats growth_stats(std::span<const Trajectory> ensemble)
{
    GrowthStats s;
    s.ensemble_mean_by_time = ensemble_mean_by_time(ensemble);
    std::vector<double> finals;
    for (const auto& t : ensemble) {
        s.time_average_growth.push_back(time_average_growth(t));
        finals.push_back(t.back().ret);
    }
    const auto summary = summarize(finals, {}, 0.0);
    s.final_mean = summary.mean;
    s.final_median = summary.median;
    s.final_q05 = summary.q05;
    s.final_q25 = summary.q25;
    s.final_q75 = summary.q75;
    s.final_q95 = summary.q95;
    return s;
}

/// g(F) = p ln(1 + gain F) + (1 - p) ln(1 - loss F).
inline double coin_toss_growth_rate(const CoinTossConfig& cfg, double fraction)
{
    return cfg.p_heads * std::log1p(cfg.gain_frac * fraction) +
           (1.0 - cfg.p_heads) * std::log1p(-cfg.loss_frac * fraction);
}

struct KellyResult {
    double fraction = 0.0;
    double growth = 0.0;
    int resolution = 0;
};

/// Brute-force maximizer of g over F = i / resolution, i = 0..resolution.
inline KellyResult kelly_oracle(const CoinTossConfig& cfg, int resolution)
{
    cfg.validate();
    detail::require(resolution >= 100, "kelly_oracle: resolution must be >= 100");
    KellyResult best{0.0, coin_toss_growth_rate(cfg, 0.0), resolution};
    for (int i = 1; i <= resolution; ++i) {
        const double f = static_cast<double>(i) / resolution;
        const double g = coin_toss_growth_rate(cfg, f);
        if (g > best.growth) {
            best.fraction = f;
            best.growth = g;
        }
    }
    return best;
}

struct VarianceBin {
    double level_lo = 0.0;
    double level_hi = 0.0;
    std::size_t count = 0;
    double variance = 0.0;
    /// ln(variance), computed with scaling so that it stays finite when the
    /// variance itself underflows.
    double log_variance = 0.0;
};

struct BinnedVariance {
    std::vector<VarianceBin> bins;
    /// max / min bin variance; may overflow to infinity.
    double ratio = 0.0;
    double log10_ratio = 0.0;
    int requested_bins = 0;
    /// Bins absorbed into a neighbour because they held too few increments.
    int merged = 0;
};

/// Increments (raw, or h(R_{k+1}) - h(R_k)) grouped into equal-count bins of
/// the conditioning level R(t_k).
inline BinnedVariance increment_variance_by_bin(const Trajectory& trajectory, const ErgodicityTransform* transform,
                                                int n_bins, std::size_t min_per_bin = 10)
{
    detail::require(n_bins >= 1, "increment_variance_by_bin: n_bins must be >= 1");
    detail::require(min_per_bin >= 2, "increment_variance_by_bin: min_per_bin must be >= 2");
    struct Point {
        double level;
        double increment;
    };
    std::vector<Point> points;
    points.reserve(trajectory.horizon());
    for (std::size_t k = 1; k < trajectory.size(); ++k) {
        const double u = trajectory[k - 1].ret;
        const double d = transform ? (*transform)(trajectory[k].ret) - (*transform)(u) : trajectory[k].reward;
        points.push_back({u, d});
    }
    if (points.size() < min_per_bin)
        throw EmptySampleError("increment_variance_by_bin: only " + std::to_string(points.size()) + " increments");
    std::stable_sort(points.begin(), points.end(), [](const Point& a, const Point& b) { return a.level < b.level; });

    std::vector<std::size_t> bounds;
    for (int b = 0; b <= n_bins; ++b)
        bounds.push_back(points.size() * static_cast<std::size_t>(b) / static_cast<std::size_t>(n_bins));

    BinnedVariance out;
    out.requested_bins = n_bins;
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (int b = 0; b < n_bins; ++b)
        if (bounds[b + 1] > bounds[b])
            ranges.emplace_back(bounds[b], bounds[b + 1]);
    out.merged = n_bins - static_cast<int>(ranges.size());
    // Merge sparse bins into the following one (the last into the previous).
    for (std::size_t i = 0; i < ranges.size();) {
        if (ranges[i].second - ranges[i].first >= min_per_bin || ranges.size() == 1) {
            ++i;
            continue;
        }
        if (i + 1 < ranges.size()) {
            ranges[i + 1].first = ranges[i].first;
        } else {
            ranges[i - 1].second = ranges[i].second;
        }
        ranges.erase(ranges.begin() + static_cast<std::ptrdiff_t>(i));
        ++out.merged;
    }
    std::vector<double> increments;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& [a, b] : ranges) {
        increments.clear();
        double scale = 0.0;
        for (std::size_t i = a; i < b; ++i) {
            increments.push_back(points[i].increment);
            scale = std::max(scale, std::abs(points[i].increment));
        }
        VarianceBin bin;
        bin.level_lo = points[a].level;
        bin.level_hi = points[b - 1].level;
        bin.count = b - a;
        if (scale > 0.0) {
            for (double& x : increments)
                x /= scale;
            const double scaled = sample_variance(increments);
            bin.variance = scaled * scale * scale;
            bin.log_variance = std::log(scaled) + 2.0 * std::log(scale);
        } else {
            bin.log_variance = -std::numeric_limits<double>::infinity();
        }
        lo = std::min(lo, bin.log_variance);
        hi = std::max(hi, bin.log_variance);
        out.bins.push_back(bin);
    }
    out.log10_ratio = (hi - lo) / std::log(10.0);
    out.ratio = std::exp(hi - lo);
    return out;
}

/// Draws one next-step increment of a process started at level u.
using IncrementSampler = std::function<double(double level, Engine& engine)>;

inline IncrementSampler coin_toss_increment_sampler(const CoinTossConfig& cfg, double fraction = 1.0)
{
    cfg.validate();
    return [cfg, fraction](double u, Engine& engine) {
        return coin_toss_step(u, fraction, detail::draw_heads(engine, cfg.p_heads), cfg);
    };
}

/// Next increment of the multiplicative Euler GBM scheme.
inline IncrementSampler gbm_increment_sampler(const GbmConfig& cfg)
{
    cfg.validate();
    return [cfg](double u, Engine& engine) {
        if (cfg.exact) {
            const double z = standard_normal(engine);
            const double a = (cfg.drift - 0.5 * cfg.volatility * cfg.volatility) * cfg.dt +
                             cfg.volatility * std::sqrt(cfg.dt) * z;
            return u * std::expm1(a);
        }
        return u * (cfg.drift * cfg.dt + cfg.volatility * std::sqrt(cfg.dt) * standard_normal(engine));
    };
}

struct ProportionalityRow {
    double level = 0.0;
    Estimate second_moment;
    double variance = 0.0;
    double ratio = 0.0;
};

struct ProportionalityReport {
    std::vector<ProportionalityRow> rows;
    std::size_t samples_per_level = 0;
    /// max / min of ratio across levels.
    double spread = 0.0;
};

/// Regenerates the next step from each level u (stream i for level i),
/// estimating E[dR^2 | R=u], Var[dR | R=u] and their ratio.
inline ProportionalityReport proportionality_check(const IncrementSampler& sampler, std::span<const double> levels,
                                                   std::size_t samples_per_level, std::uint64_t seed)
{
    detail::require(!levels.empty(), "proportionality_check: no levels");
    detail::require(samples_per_level >= 2, "proportionality_check: need at least two samples per level");
    ProportionalityReport out;
    out.samples_per_level = samples_per_level;
    std::vector<double> increments(samples_per_level), squares(samples_per_level);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        Engine engine = make_engine(seed, i);
        for (std::size_t j = 0; j < samples_per_level; ++j) {
            increments[j] = sampler(levels[i], engine);
            squares[j] = increments[j] * increments[j];
        }
        ProportionalityRow row;
        row.level = levels[i];
        row.second_moment = mean_estimate(squares);
        row.variance = sample_variance(increments);
        row.ratio = row.variance > 0.0 ? row.second_moment.value / row.variance
                                       : std::numeric_limits<double>::infinity();
        lo = std::min(lo, row.ratio);
        hi = std::max(hi, row.ratio);
        out.rows.push_back(row);
    }
    out.spread = hi / lo;
    return out;
}

/// n levels geometrically spaced over [lo, hi].
inline std::vector<double> geometric_levels(double lo, double hi, int n)
{
    detail::require(lo > 0.0 && hi > lo && n >= 2, "geometric_levels: need 0 < lo < hi and n >= 2");
    std::vector<double> out;
    for (int i = 0; i < n; ++i)
        out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
    return out;
}

/// sum_u R(u) / (1 + exp(-g0 (u - m0))) with episodes numbered u = 1..n.
inline double sigmoid_utility_score(std::span<const double> curve, double m0, double g0)
{
    detail::require(std::isfinite(m0) && std::isfinite(g0) && g0 > 0.0, "sigmoid_utility_score: need g0 > 0");
    double score = 0.0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        if (!std::isfinite(curve[i]))
            throw DomainError("sigmoid_utility_score: non-finite curve value");
        const double z = g0 * (static_cast<double>(i + 1) - m0);
        const double w = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        score += curve[i] * w;
    }
    return score;
}

struct AffineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t n = 0;
};

/// Ordinary least squares y = slope * x + intercept.
inline AffineFit affine_fit(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw DomainError("affine_fit: need two or more paired points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0))
        throw DomainError("affine_fit: x has no spread");
    AffineFit f;
    f.n = x.size();
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

/// Fit of h(u) = a ln u + b over the central `fraction` of the transform's
/// grid points.
inline AffineFit log_recovery(const ErgodicityTransform& transform, double fraction = 0.8)
{
    detail::require(fraction > 0.0 && fraction <= 1.0, "log_recovery: fraction must lie in (0,1]");
    const auto grid = transform.grid();
    const auto values = transform.values();
    const std::size_t n = grid.size();
    const auto skip = static_cast<std::size_t>(std::floor(0.5 * (1.0 - fraction) * static_cast<double>(n)));
    std::vector<double> x, y;
    for (std::size_t i = skip; i < n - skip; ++i) {
        if (!(grid[i] > 0.0))
            throw DomainError("log_recovery: grid must be positive");
        x.push_back(std::log(grid[i]));
        y.push_back(values[i]);
    }
    return affine_fit(x, y);
}

} // namespace ergodic
