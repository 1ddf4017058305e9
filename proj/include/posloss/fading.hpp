// Copyright 2026 The posloss Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <posloss/core.hpp>
#include <posloss/csv.hpp>
#include <posloss/rng.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace posloss
{
struct CdfPoint
{
    double x = 0.0;  // fading loss, dB
    double y = 0.0;  // percentile rank, [0, 100]

    friend bool operator==(const CdfPoint&, const CdfPoint&) = default;
};

/// Empirical CDF as (value, percentile) knots with linear interpolation.
class FadingCdf
{
public:
    FadingCdf() = default;

    /// Validates: >= 2 points, x and y non-decreasing, y spans exactly [0, 100].
    explicit FadingCdf(std::vector<CdfPoint> points) : points_(std::move(points))
    {
        if (points_.size() < 2)
            throw ValidationError("fading CDF: at least 2 points required");
        for (const auto& p : points_)
            if (!std::isfinite(p.x) || !std::isfinite(p.y))
                throw ValidationError("fading CDF: non-finite value");
        for (std::size_t i = 1; i < points_.size(); ++i)
        {
            if (points_[i].y < points_[i - 1].y)
                throw ValidationError("fading CDF: percentile must be non-decreasing");
            if (points_[i].x < points_[i - 1].x)
                throw ValidationError("fading CDF: fading_db must be non-decreasing");
        }
        if (points_.front().y != 0.0 || points_.back().y != 100.0)
            throw ValidationError("fading CDF: percentile must span [0, 100] (first 0, last 100)");
    }

    const std::vector<CdfPoint>& points() const noexcept { return points_; }

    /// Inverse transform for u in [0, 100]. Leftmost x on flat runs.
    double quantile(double u) const noexcept
    {
        const auto it = std::lower_bound(
            points_.begin(), points_.end(), u, [](const CdfPoint& p, double v) { return p.y < v; });
        if (it == points_.begin())
            return it->x;
        if (it == points_.end())
            return points_.back().x;
        if (it->y == u)
            return it->x;
        const auto& a = *(it - 1);
        const auto& b = *it;
        return a.x + (u - a.y) / (b.y - a.y) * (b.x - a.x);
    }

    /// Forward CDF as a fraction in [0, 1]; on vertical runs takes the highest percentile.
    double fraction(double x) const noexcept
    {
        if (x < points_.front().x)
            return 0.0;
        if (x >= points_.back().x)
            return 1.0;
        const auto it = std::upper_bound(
            points_.begin(), points_.end(), x, [](double v, const CdfPoint& p) { return v < p.x; });
        const auto& a = *(it - 1);
        const auto& b = *it;
        return (a.y + (x - a.x) / (b.x - a.x) * (b.y - a.y)) / 100.0;
    }

private:
    std::vector<CdfPoint> points_;
};

inline constexpr std::size_t default_cdf_points = 1024;

namespace detail
{
/// Order-statistic interpolation on a sorted sample at fractional rank r in [0, N-1].
inline double interpolate_rank(const std::vector<double>& sorted, double r) noexcept
{
    const auto k = static_cast<std::size_t>(std::floor(r));
    if (k + 1 >= sorted.size())
        return sorted.back();
    const double t = r - static_cast<double>(k);
    return t == 0.0 ? sorted[k] : sorted[k] + t * (sorted[k + 1] - sorted[k]);
}
}  // namespace detail

/// Sorted residuals with percentile rank 100 k / (N - 1). Above `max_points`, keeps
/// evenly spaced percentiles (min and max always retained) read off the full-resolution CDF.
inline FadingCdf fit_cdf(std::span<const double> residuals, std::size_t max_points = default_cdf_points)
{
    if (residuals.size() < 2)
        throw ValidationError("fit_cdf: at least 2 residuals required");
    if (max_points < 2)
        throw ValidationError("fit_cdf: max_points must be >= 2");
    std::vector<double> sorted(residuals.begin(), residuals.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = sorted.size();
    const double last = static_cast<double>(n - 1);

    std::vector<CdfPoint> pts;
    if (n <= max_points)
    {
        pts.reserve(n);
        for (std::size_t k = 0; k < n; ++k)
            pts.push_back({sorted[k], k + 1 == n ? 100.0 : 100.0 * static_cast<double>(k) / last});
    }
    else
    {
        const double m_last = static_cast<double>(max_points - 1);
        pts.reserve(max_points);
        for (std::size_t j = 0; j < max_points; ++j)
        {
            if (j + 1 == max_points)
            {
                pts.push_back({sorted.back(), 100.0});
                break;
            }
            const double y = 100.0 * static_cast<double>(j) / m_last;
            pts.push_back({detail::interpolate_rank(sorted, static_cast<double>(j) * last / m_last), y});
        }
    }
    return FadingCdf(std::move(pts));
}

/// Mean squared difference between the fitted CDF and the empirical fraction of
/// residuals <= edge, evaluated at the right edges of `n_bins` equal-width bins.
inline double cdf_fit_mse(const FadingCdf& cdf, std::span<const double> residuals, std::size_t n_bins = 30)
{
    if (residuals.empty())
        throw ValidationError("cdf_fit_mse: empty residuals");
    if (n_bins == 0)
        throw ValidationError("cdf_fit_mse: n_bins must be > 0");
    std::vector<double> sorted(residuals.begin(), residuals.end());
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted.front();
    const double hi = sorted.back();
    if (hi == lo)
        return 0.0;
    const double width = (hi - lo) / static_cast<double>(n_bins);
    const double n = static_cast<double>(sorted.size());
    double s = 0.0;
    for (std::size_t b = 0; b < n_bins; ++b)
    {
        const double edge = b + 1 == n_bins ? hi : lo + static_cast<double>(b + 1) * width;
        const double empirical =
            static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), edge) - sorted.begin()) / n;
        const double d = cdf.fraction(edge) - empirical;
        s += d * d;
    }
    return s / static_cast<double>(n_bins);
}

/// Seeded inverse-transform sampler over a FadingCdf. Every sample() consumes one draw.
class FadingSampler
{
public:
    FadingSampler(FadingCdf cdf, std::uint64_t seed, std::uint64_t stream_id)
      : cdf_(std::move(cdf)), rng_(seed, derive_stream(stream_id, StreamPurpose::fading))
    {}

    double sample() noexcept { return cdf_.quantile(100.0 * rng_.uniform()); }

    const FadingCdf& cdf() const noexcept { return cdf_; }
    std::uint64_t draws() const noexcept { return rng_.draws(); }

private:
    FadingCdf cdf_;
    RandomStream rng_;
};

inline std::string cdf_to_csv(const FadingCdf& cdf)
{
    std::string out = "fading_db,percentile\n";
    for (const auto& p : cdf.points())
        out += csv::format(p.x) + ',' + csv::format(p.y) + '\n';
    return out;
}

inline void export_cdf(const FadingCdf& cdf, const std::string& path)
{
    csv::write_file(path, cdf_to_csv(cdf));
}

inline FadingCdf import_cdf(const std::string& path)
{
    const auto lines = csv::read_lines(path);
    if (lines.empty() || csv::split_row(lines.front()) != std::vector<std::string>{"fading_db", "percentile"})
        throw ParseError("fading CDF " + path + ": header must be fading_db,percentile", 1);
    std::vector<CdfPoint> pts;
    for (std::size_t i = 1; i < lines.size(); ++i)
    {
        const auto c = csv::split_row(lines[i]);
        if (c.size() != 2)
            throw ParseError("fading CDF: expected 2 columns", i + 1);
        pts.push_back({csv::parse_required(c[0], i + 1, "fading_db"), csv::parse_required(c[1], i + 1, "percentile")});
    }
    if (!pts.empty() && pts.back().y <= 1.0 && pts.back().y > 0.0)
        throw ValidationError("fading CDF " + path + ": percentile looks like a fraction; expected range [0, 100]");
    return FadingCdf(std::move(pts));
}

}  // namespace posloss
