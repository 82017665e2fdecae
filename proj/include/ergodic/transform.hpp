#pragma once

// Learned ergodicity transformation.
//
// For each transition the scatter point (R(t_k), log((R(t_{k+1}) - R(t_k))^2))
// is formed; a LOESS curve through these points estimates log mu2(u), the log
// conditional second moment of the next increment, which is proportional to
// the conditional variance v(u). The transform is the variance-stabilizing
// integral h(u) = int_{u_0}^{u} exp(-fit(u')/2) du', tabulated on a grid.
//
// The grid is uniform in a level coordinate: u itself (linear scale) or
// ln u (log scale). Smoothing neighbourhoods, interpolation and extrapolation
// all act in that coordinate. On log scale the integral is evaluated as
// int exp(-fit/2 + s) ds with s = ln u.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <iomanip>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ergodic/error.hpp"
#include "ergodic/loess.hpp"
#include "ergodic/trajectory.hpp"

namespace ergodic {

enum class LevelScale { linear, log, automatic };

inline std::string to_string(LevelScale scale)
{
    switch (scale) {
    case LevelScale::linear: return "linear";
    case LevelScale::log: return "log";
    case LevelScale::automatic: return "auto";
    }
    return "?";
}

inline LevelScale level_scale_from_string(const std::string& text)
{
    if (text == "linear")
        return LevelScale::linear;
    if (text == "log")
        return LevelScale::log;
    if (text == "auto")
        return LevelScale::automatic;
    throw ConfigError("unknown level scale '" + text + "' (expected linear, log or auto)");
}

struct IncrementSample {
    double level = 0.0;
    double log_sq_increment = 0.0;
};

/// A transition is dropped when |dR| <= abs_epsilon + rel_epsilon * |R|.
struct IncrementOptions {
    double abs_epsilon = 0.0;
    double rel_epsilon = 1e-12;
};

struct TransformOptions {
    double span = 0.3;
    int robust_iterations = 2;
    int grid_size = 256;
    IncrementOptions increments{};
    LevelScale scale = LevelScale::automatic;
    /// `auto` picks log scale when every level is positive and
    /// max/min level is at least this ratio.
    double auto_log_ratio = 10.0;
    /// LOESS delta as a fraction of the level-coordinate range.
    double loess_delta_fraction = 0.002;

    void validate() const
    {
        detail::require(span > 0.0 && span <= 1.0, "transform: span must lie in (0,1]");
        detail::require(robust_iterations >= 0, "transform: robust_iterations must be >= 0");
        detail::require(grid_size >= 2, "transform: grid_size must be >= 2");
        detail::require(increments.abs_epsilon >= 0.0 && increments.rel_epsilon >= 0.0,
                        "transform: epsilons must be >= 0");
        detail::require(auto_log_ratio > 1.0, "transform: auto_log_ratio must be > 1");
        detail::require(loess_delta_fraction >= 0.0 && loess_delta_fraction < 1.0,
                        "transform: loess_delta_fraction must lie in [0,1)");
    }
};

struct TransformMeta {
    double span = 0.0;
    int robust_iterations = 0;
    double abs_epsilon = 0.0;
    double rel_epsilon = 0.0;
    std::string source_hash;
    std::size_t n_samples = 0;
};

/// Scatter points for all consecutive pairs of all trajectories, sorted by
/// level. Throws EmptySampleError when every increment is below threshold.
inline std::vector<IncrementSample> build_increment_samples(std::span<const Trajectory> trajectories,
                                                            const IncrementOptions& options = {})
{
    std::vector<IncrementSample> samples;
    for (const auto& traj : trajectories) {
        if (traj.size() < 2)
            throw DomainError("build_increment_samples: trajectory needs at least 2 steps");
        auto steps = traj.steps();
        for (std::size_t k = 0; k + 1 < steps.size(); ++k) {
            const double level = steps[k].ret;
            const double increment = steps[k + 1].ret - level;
            if (std::abs(increment) <= options.abs_epsilon + options.rel_epsilon * std::abs(level))
                continue;
            samples.push_back({level, 2.0 * std::log(std::abs(increment))});
        }
    }
    if (samples.empty())
        throw EmptySampleError("build_increment_samples: all increments are below the zero threshold");
    std::stable_sort(samples.begin(), samples.end(),
                     [](const IncrementSample& a, const IncrementSample& b) { return a.level < b.level; });
    return samples;
}

inline std::vector<IncrementSample> build_increment_samples(const Trajectory& trajectory,
                                                            const IncrementOptions& options = {})
{
    return build_increment_samples(std::span<const Trajectory>(&trajectory, 1), options);
}

inline LoessFit loess_fit(std::span<const IncrementSample> samples, const LoessOptions& options)
{
    std::vector<double> x, y;
    x.reserve(samples.size());
    y.reserve(samples.size());
    for (const auto& s : samples) {
        x.push_back(s.level);
        y.push_back(s.log_sq_increment);
    }
    return loess_fit(x, y, options);
}

/// FNV-1a over the bit patterns of all returns.
inline std::string trajectory_hash(std::span<const Trajectory> trajectories)
{
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    auto feed = [&hash](std::uint64_t word) {
        for (int b = 0; b < 8; ++b) {
            hash ^= (word >> (8 * b)) & 0xffU;
            hash *= 0x100000001b3ULL;
        }
    };
    for (const auto& traj : trajectories) {
        feed(traj.size());
        for (const auto& s : traj.steps()) {
            std::uint64_t bits = 0;
            static_assert(sizeof(bits) == sizeof(s.ret));
            std::memcpy(&bits, &s.ret, sizeof(bits));
            feed(bits);
        }
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << hash;
    return out.str();
}

/// Tabulated strictly increasing map h with h(u_0) = 0, interpolated and
/// linearly extrapolated in the level coordinate.
class ErgodicityTransform {
public:
    ErgodicityTransform() = default;

    ErgodicityTransform(std::vector<double> grid, std::vector<double> values, double slope_left,
                        double slope_right, LevelScale scale, TransformMeta meta = {})
        : grid_(std::move(grid)), values_(std::move(values)), slope_left_(slope_left),
          slope_right_(slope_right), scale_(scale), meta_(std::move(meta))
    {
        if (scale_ == LevelScale::automatic)
            throw DomainError("ErgodicityTransform: scale must be linear or log");
        if (grid_.size() < 2 || grid_.size() != values_.size())
            throw DomainError("ErgodicityTransform: need at least 2 grid points and matching values");
        if (scale_ == LevelScale::log && !(grid_.front() > 0.0))
            throw DomainError("ErgodicityTransform: log scale needs a positive grid");
        if (values_.front() != 0.0)
            throw DomainError("ErgodicityTransform: h(u_0) must be 0");
        if (!(slope_left_ > 0.0) || !(slope_right_ > 0.0) || !std::isfinite(slope_left_) ||
            !std::isfinite(slope_right_))
            throw DomainError("ErgodicityTransform: extrapolation slopes must be positive and finite");
        coords_.reserve(grid_.size());
        for (std::size_t i = 0; i < grid_.size(); ++i) {
            if (!std::isfinite(grid_[i]) || !std::isfinite(values_[i]))
                throw RangeError("ErgodicityTransform: non-finite grid or value");
            if (i > 0 && !(grid_[i] > grid_[i - 1]))
                throw DomainError("ErgodicityTransform: grid must be strictly increasing");
            if (i > 0 && !(values_[i] > values_[i - 1]))
                throw RangeError("ErgodicityTransform: values must be strictly increasing");
            coords_.push_back(coordinate(grid_[i]));
        }
    }

    /// Tabulates fn on a grid uniform in the level coordinate, shifted so
    /// that h(lo) = 0. Extrapolation slopes are the end-segment slopes.
    static ErgodicityTransform tabulate(const std::function<double(double)>& fn, double lo, double hi,
                                        int grid_size, LevelScale scale)
    {
        if (scale == LevelScale::automatic)
            throw DomainError("tabulate: scale must be linear or log");
        if (!(hi > lo) || grid_size < 2 || (scale == LevelScale::log && !(lo > 0.0)))
            throw DomainError("tabulate: invalid range or grid size");
        const double c_lo = scale == LevelScale::log ? std::log(lo) : lo;
        const double c_hi = scale == LevelScale::log ? std::log(hi) : hi;
        std::vector<double> grid(static_cast<std::size_t>(grid_size));
        std::vector<double> values(grid.size());
        std::vector<double> coords(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double c = c_lo + (c_hi - c_lo) * static_cast<double>(i) / static_cast<double>(grid_size - 1);
            coords[i] = c;
            grid[i] = scale == LevelScale::log ? std::exp(c) : c;
        }
        grid.front() = lo;
        grid.back() = hi;
        const double base = fn(grid.front());
        for (std::size_t i = 0; i < grid.size(); ++i)
            values[i] = fn(grid[i]) - base;
        values.front() = 0.0;
        const std::size_t m = grid.size() - 1;
        const double coord_first = scale == LevelScale::log ? std::log(grid[0]) : grid[0];
        const double coord_second = scale == LevelScale::log ? std::log(grid[1]) : grid[1];
        const double coord_penult = scale == LevelScale::log ? std::log(grid[m - 1]) : grid[m - 1];
        const double coord_last = scale == LevelScale::log ? std::log(grid[m]) : grid[m];
        const double left = (values[1] - values[0]) / (coord_second - coord_first);
        const double right = (values[m] - values[m - 1]) / (coord_last - coord_penult);
        return ErgodicityTransform(std::move(grid), std::move(values), left, right, scale);
    }

    double coordinate(double level) const
    {
        if (scale_ == LevelScale::log) {
            if (!(level > 0.0))
                throw DomainError("ErgodicityTransform: log-scale transform needs a positive return");
            return std::log(level);
        }
        return level;
    }

    double operator()(double level) const
    {
        if (!std::isfinite(level))
            throw DomainError("ErgodicityTransform: non-finite return");
        const double c = coordinate(level);
        if (c <= coords_.front())
            return values_.front() + slope_left_ * (c - coords_.front());
        if (c >= coords_.back())
            return values_.back() + slope_right_ * (c - coords_.back());
        auto it = std::upper_bound(coords_.begin(), coords_.end(), c);
        const auto hi = static_cast<std::size_t>(it - coords_.begin());
        const std::size_t lo = hi - 1;
        const double t = (c - coords_[lo]) / (coords_[hi] - coords_[lo]);
        return values_[lo] + t * (values_[hi] - values_[lo]);
    }

    std::span<const double> grid() const noexcept { return grid_; }
    std::span<const double> values() const noexcept { return values_; }
    /// Grid in the level coordinate (ln u on log scale).
    std::span<const double> coordinates() const noexcept { return coords_; }
    double slope_left() const noexcept { return slope_left_; }
    double slope_right() const noexcept { return slope_right_; }
    LevelScale scale() const noexcept { return scale_; }
    const TransformMeta& meta() const noexcept { return meta_; }

private:
    std::vector<double> grid_;
    std::vector<double> values_;
    std::vector<double> coords_;
    double slope_left_ = 1.0;
    double slope_right_ = 1.0;
    LevelScale scale_ = LevelScale::linear;
    TransformMeta meta_;
};

inline double apply(const ErgodicityTransform& transform, double level)
{
    return transform(level);
}

/// r~(t_k) = h(R(t_k)) - h(R(t_{k-1})) for k = 1..T.
inline std::vector<double> transform_rewards(const Trajectory& trajectory, const ErgodicityTransform& transform)
{
    std::vector<double> out;
    if (trajectory.size() < 2)
        return out;
    out.reserve(trajectory.size() - 1);
    double previous = transform(trajectory.front().ret);
    for (std::size_t k = 1; k < trajectory.size(); ++k) {
        const double current = transform(trajectory[k].ret);
        out.push_back(current - previous);
        previous = current;
    }
    return out;
}

inline LevelScale resolve_scale(std::span<const IncrementSample> samples, const TransformOptions& options)
{
    const double lo = samples.front().level;
    const double hi = samples.back().level;
    switch (options.scale) {
    case LevelScale::linear: return LevelScale::linear;
    case LevelScale::log:
        if (!(lo > 0.0))
            throw DomainError("learn_transform: log scale requires positive returns");
        return LevelScale::log;
    case LevelScale::automatic:
        return (lo > 0.0 && hi / lo >= options.auto_log_ratio) ? LevelScale::log : LevelScale::linear;
    }
    return LevelScale::linear;
}

/// Learns h from the pooled increments of all trajectories.
inline ErgodicityTransform learn_transform(std::span<const Trajectory> trajectories,
                                           const TransformOptions& options = {})
{
    options.validate();
    const auto samples = build_increment_samples(trajectories, options.increments);
    const LevelScale scale = resolve_scale(samples, options);
    const bool log_scale = scale == LevelScale::log;

    std::vector<double> x, y;
    x.reserve(samples.size());
    y.reserve(samples.size());
    for (const auto& s : samples) {
        x.push_back(log_scale ? std::log(s.level) : s.level);
        y.push_back(s.log_sq_increment);
    }
    const double c_lo = x.front();
    const double c_hi = x.back();
    if (!(c_hi > c_lo))
        throw EmptySampleError("learn_transform: all informative samples sit at a single return level");

    LoessOptions loess_options;
    loess_options.span = options.span;
    loess_options.robust_iterations = options.robust_iterations;
    loess_options.delta = options.loess_delta_fraction * (c_hi - c_lo);
    const LoessFit fit = loess_fit(x, y, loess_options);

    const auto m = static_cast<std::size_t>(options.grid_size);
    std::vector<double> coords(m), grid(m), integrand(m), values(m);
    for (std::size_t j = 0; j < m; ++j) {
        coords[j] = c_lo + (c_hi - c_lo) * static_cast<double>(j) / static_cast<double>(m - 1);
        grid[j] = log_scale ? std::exp(coords[j]) : coords[j];
        const double log_integrand = -0.5 * fit(coords[j]) + (log_scale ? coords[j] : 0.0);
        integrand[j] = std::exp(log_integrand);
        if (!std::isfinite(integrand[j]) || !(integrand[j] > 0.0))
            throw RangeError("learn_transform: integrand 1/sqrt(v) out of range at grid point " +
                             std::to_string(j));
    }
    grid.front() = samples.front().level;
    grid.back() = samples.back().level;
    values[0] = 0.0;
    for (std::size_t j = 1; j < m; ++j)
        values[j] = values[j - 1] + 0.5 * (integrand[j - 1] + integrand[j]) * (coords[j] - coords[j - 1]);

    TransformMeta meta;
    meta.span = options.span;
    meta.robust_iterations = options.robust_iterations;
    meta.abs_epsilon = options.increments.abs_epsilon;
    meta.rel_epsilon = options.increments.rel_epsilon;
    meta.source_hash = trajectory_hash(trajectories);
    meta.n_samples = samples.size();
    return ErgodicityTransform(std::move(grid), std::move(values), integrand.front(), integrand.back(), scale,
                               std::move(meta));
}

inline ErgodicityTransform learn_transform(const Trajectory& trajectory, const TransformOptions& options = {})
{
    return learn_transform(std::span<const Trajectory>(&trajectory, 1), options);
}

// JSON: {grid, values, slope_left, slope_right, scale, meta{...}}

inline nlohmann::json to_json(const ErgodicityTransform& t)
{
    nlohmann::json j;
    j["grid"] = std::vector<double>(t.grid().begin(), t.grid().end());
    j["values"] = std::vector<double>(t.values().begin(), t.values().end());
    j["slope_left"] = t.slope_left();
    j["slope_right"] = t.slope_right();
    j["scale"] = to_string(t.scale());
    const auto& m = t.meta();
    j["meta"] = {{"span", m.span},
                 {"robust_iterations", m.robust_iterations},
                 {"epsilon", m.abs_epsilon},
                 {"rel_epsilon", m.rel_epsilon},
                 {"source_hash", m.source_hash},
                 {"n_samples", m.n_samples}};
    return j;
}

inline ErgodicityTransform transform_from_json(const nlohmann::json& j)
{
    try {
        TransformMeta meta;
        if (j.contains("meta")) {
            const auto& m = j.at("meta");
            meta.span = m.value("span", 0.0);
            meta.robust_iterations = m.value("robust_iterations", 0);
            meta.abs_epsilon = m.value("epsilon", 0.0);
            meta.rel_epsilon = m.value("rel_epsilon", 0.0);
            meta.source_hash = m.value("source_hash", std::string{});
            meta.n_samples = m.value("n_samples", std::size_t{0});
        }
        const auto scale = level_scale_from_string(j.value("scale", std::string("linear")));
        return ErgodicityTransform(j.at("grid").get<std::vector<double>>(), j.at("values").get<std::vector<double>>(),
                                   j.at("slope_left").get<double>(), j.at("slope_right").get<double>(), scale,
                                   std::move(meta));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("transform JSON: ") + e.what());
    }
}

} // namespace ergodic
