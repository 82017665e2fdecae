#pragma once

// Robust locally weighted linear regression (Cleveland's LOWESS).
//
// Neighbourhoods are the q = ceil(span * n) nearest abscissae; the radius h
// of a neighbourhood is the q-th smallest distance, and every sample gets
// tricube weight (1 - (d/h)^3)^3 for d < h and zero otherwise. Robustness
// passes multiply these by bisquare weights of the residuals scaled by six
// median absolute residuals.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ergodic/error.hpp"

namespace ergodic {

struct LoessOptions {
    double span = 0.3;
    int robust_iterations = 2;
    /// Abscissae closer than `delta` to the last fitted one are interpolated
    /// instead of fitted. Zero fits at every distinct abscissa.
    double delta = 0.0;
};

/// Piecewise-linear curve through locally fitted values; constant beyond
/// the outermost fit points.
class LoessFit {
public:
    LoessFit() = default;

    LoessFit(std::vector<double> x, std::vector<double> fitted, double span, int robust_iterations)
        : x_(std::move(x)), fitted_(std::move(fitted)), span_(span), robust_iterations_(robust_iterations)
    {
        if (x_.empty() || x_.size() != fitted_.size())
            throw DomainError("LoessFit: inconsistent fit points");
        for (std::size_t i = 0; i < x_.size(); ++i) {
            if (!std::isfinite(fitted_[i]))
                throw RangeError("LoessFit: non-finite fitted value");
            if (i > 0 && !(x_[i] > x_[i - 1]))
                throw DomainError("LoessFit: abscissae must be strictly increasing");
        }
    }

    double operator()(double x) const
    {
        if (x <= x_.front())
            return fitted_.front();
        if (x >= x_.back())
            return fitted_.back();
        auto it = std::upper_bound(x_.begin(), x_.end(), x);
        const std::size_t hi = static_cast<std::size_t>(it - x_.begin());
        const std::size_t lo = hi - 1;
        const double t = (x - x_[lo]) / (x_[hi] - x_[lo]);
        return fitted_[lo] + t * (fitted_[hi] - fitted_[lo]);
    }

    std::span<const double> abscissae() const noexcept { return x_; }
    std::span<const double> fitted() const noexcept { return fitted_; }
    double span() const noexcept { return span_; }
    int robust_iterations() const noexcept { return robust_iterations_; }

private:
    std::vector<double> x_;
    std::vector<double> fitted_;
    double span_ = 0.3;
    int robust_iterations_ = 0;
};

/// Neighbourhood size for n samples: ceil(span * n), at least 3, at most n.
inline std::size_t loess_neighbor_count(std::size_t n, double span)
{
    // Guard against 0.3 * 10 = 3.0000000000000004 rounding up to 4.
    const double raw = span * static_cast<double>(n);
    auto q = static_cast<std::size_t>(std::ceil(raw - 1e-9 * raw));
    q = std::max<std::size_t>(q, 3);
    return std::min(q, n);
}

inline double tricube(double u)
{
    if (u >= 1.0)
        return 0.0;
    const double c = 1.0 - u * u * u;
    return c * c * c;
}

inline double bisquare(double u)
{
    if (std::abs(u) >= 1.0)
        return 0.0;
    const double c = 1.0 - u * u;
    return c * c;
}

namespace detail {

inline double median_of(std::vector<double> values)
{
    const std::size_t n = values.size();
    const std::size_t mid = n / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    double upper = values[mid];
    if (n % 2 == 1)
        return upper;
    double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

/// Local fit at x0 over the window [lo, lo + q) of sorted samples.
inline double local_linear(std::span<const double> xs, std::span<const double> ys, std::span<const double> robust,
                           std::size_t lo, std::size_t q, double x0, double degenerate_spread)
{
    const std::size_t hi = lo + q - 1;
    const double radius = std::max(x0 - xs[lo], xs[hi] - x0);

    if (radius <= 0.0) {
        // Every neighbour sits at x0; widen to all ties and average.
        std::size_t a = lo, b = hi;
        while (a > 0 && xs[a - 1] == x0)
            --a;
        while (b + 1 < xs.size() && xs[b + 1] == x0)
            ++b;
        double sw = 0.0, swy = 0.0, plain = 0.0;
        for (std::size_t i = a; i <= b; ++i) {
            sw += robust[i];
            swy += robust[i] * ys[i];
            plain += ys[i];
        }
        return sw > 0.0 ? swy / sw : plain / static_cast<double>(b - a + 1);
    }

    double sw = 0.0, swx = 0.0, swy = 0.0;
    for (std::size_t i = lo; i <= hi; ++i) {
        const double w = tricube(std::abs(xs[i] - x0) / radius) * robust[i];
        sw += w;
        swx += w * xs[i];
        swy += w * ys[i];
    }
    if (!(sw > 0.0)) {
        double plain = 0.0;
        for (std::size_t i = lo; i <= hi; ++i)
            plain += ys[i];
        return plain / static_cast<double>(q);
    }
    const double xbar = swx / sw;
    const double ybar = swy / sw;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = lo; i <= hi; ++i) {
        const double w = tricube(std::abs(xs[i] - x0) / radius) * robust[i];
        const double dx = xs[i] - xbar;
        sxx += w * dx * dx;
        sxy += w * dx * (ys[i] - ybar);
    }
    if (sxx / sw <= degenerate_spread * degenerate_spread)
        return ybar;
    return ybar + (sxy / sxx) * (x0 - xbar);
}

} // namespace detail

inline LoessFit loess_fit(std::span<const double> x, std::span<const double> y, const LoessOptions& options = {})
{
    const std::size_t n = x.size();
    if (y.size() != n)
        throw DomainError("loess_fit: x and y differ in length");
    if (!(options.span > 0.0 && options.span <= 1.0))
        throw DomainError("loess_fit: span must lie in (0,1]");
    if (options.robust_iterations < 0)
        throw DomainError("loess_fit: robust_iterations must be >= 0");
    if (!(options.delta >= 0.0))
        throw DomainError("loess_fit: delta must be >= 0");
    const std::size_t q = loess_neighbor_count(n, options.span);
    if (n < 3 || n < q)
        throw EmptySampleError("loess_fit: need at least max(3, ceil(span*n)) samples, got " + std::to_string(n));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = x[order[i]];
        ys[i] = y[order[i]];
        if (!std::isfinite(xs[i]) || !std::isfinite(ys[i]))
            throw DomainError("loess_fit: non-finite sample");
    }
    const double range = xs.back() - xs.front();
    const double degenerate_spread = 1e-8 * range;

    // Anchors: first index of each distinct abscissa retained after delta skipping.
    std::vector<std::size_t> anchors;
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0 && xs[i] == xs[i - 1])
            continue;
        const bool last_distinct = xs[i] == xs.back();
        if (anchors.empty() || last_distinct || xs[i] > xs[anchors.back()] + options.delta)
            anchors.push_back(i);
    }

    std::vector<double> robust(n, 1.0);
    std::vector<double> anchor_fit(anchors.size());
    std::vector<double> fitted(n);
    double mean_abs_y = 0.0;
    for (double v : ys)
        mean_abs_y += std::abs(v);
    mean_abs_y /= static_cast<double>(n);

    for (int pass = 0; pass <= options.robust_iterations; ++pass) {
        std::size_t lo = 0;
        for (std::size_t a = 0; a < anchors.size(); ++a) {
            const double x0 = xs[anchors[a]];
            while (lo + q < n && (x0 - xs[lo]) > (xs[lo + q] - x0))
                ++lo;
            anchor_fit[a] = detail::local_linear(xs, ys, robust, lo, q, x0, degenerate_spread);
        }
        // Fitted values at every sample by interpolation between anchors.
        std::size_t a = 0;
        for (std::size_t i = 0; i < n; ++i) {
            while (a + 1 < anchors.size() && xs[anchors[a + 1]] <= xs[i])
                ++a;
            if (xs[i] == xs[anchors[a]] || a + 1 == anchors.size()) {
                fitted[i] = anchor_fit[a];
            } else {
                const double x_lo = xs[anchors[a]], x_hi = xs[anchors[a + 1]];
                const double t = (xs[i] - x_lo) / (x_hi - x_lo);
                fitted[i] = anchor_fit[a] + t * (anchor_fit[a + 1] - anchor_fit[a]);
            }
        }
        if (pass == options.robust_iterations)
            break;

        std::vector<double> abs_residual(n);
        for (std::size_t i = 0; i < n; ++i)
            abs_residual[i] = std::abs(ys[i] - fitted[i]);
        const double mad = detail::median_of(abs_residual);
        if (mad <= 1e-12 * mean_abs_y || mad == 0.0)
            break;
        for (std::size_t i = 0; i < n; ++i)
            robust[i] = bisquare((ys[i] - fitted[i]) / (6.0 * mad));
    }

    std::vector<double> fit_x, fit_y;
    fit_x.reserve(anchors.size());
    fit_y.reserve(anchors.size());
    for (std::size_t a = 0; a < anchors.size(); ++a) {
        fit_x.push_back(xs[anchors[a]]);
        fit_y.push_back(anchor_fit[a]);
    }
    return LoessFit(std::move(fit_x), std::move(fit_y), options.span, options.robust_iterations);
}

} // namespace ergodic
