// Copyright 2026 The posloss Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <posloss/channel.hpp>
#include <posloss/csv.hpp>
#include <posloss/dataset.hpp>
#include <posloss/fading.hpp>
#include <posloss/linksim.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace posloss
{
enum class ErrorKind
{
    loss,
    throughput,
};

inline const char* to_string(ErrorKind k) noexcept
{
    return k == ErrorKind::loss ? "loss" : "throughput";
}

struct ErrorSeries
{
    std::vector<double> values;  // signed, prediction - reference
    ErrorKind kind = ErrorKind::loss;
    std::string label;
};

/// E_i = total_loss(pair_i) - L_i, one fading draw per prediction in test order.
inline ErrorSeries loss_errors(PropagationModel& model, std::span<const LossSample> test)
{
    if (test.empty())
        throw ValidationError("loss_errors: empty test set");
    ErrorSeries s{{}, ErrorKind::loss, model.label()};
    s.values.reserve(test.size());
    for (const auto& t : test)
        s.values.push_back(model.total_loss(t.pair) - t.loss_db);
    return s;
}

/// Empirical CDF with the same rank convention as the fading fit: k-th of N sorted
/// values sits at percentile 100 k / (N - 1). A single value spans [0, 100].
inline std::vector<CdfPoint> error_cdf(const ErrorSeries& series, bool absolute)
{
    if (series.values.empty())
        throw ValidationError("error_cdf: empty series");
    std::vector<double> v = series.values;
    if (absolute)
        for (double& x : v)
            x = std::abs(x);
    std::sort(v.begin(), v.end());
    if (v.size() == 1)
        return {{v[0], 0.0}, {v[0], 100.0}};
    std::vector<CdfPoint> out;
    out.reserve(v.size());
    const double last = static_cast<double>(v.size() - 1);
    for (std::size_t k = 0; k < v.size(); ++k)
        out.push_back({v[k], k + 1 == v.size() ? 100.0 : 100.0 * static_cast<double>(k) / last});
    return out;
}

/// Value at percentile p in [0, 100], linear between order statistics.
inline double percentile(std::span<const double> values, double p)
{
    if (values.empty())
        throw ValidationError("percentile: empty input");
    if (!(p >= 0.0 && p <= 100.0))
        throw ValidationError("percentile: p must be in [0, 100]");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    return detail::interpolate_rank(v, p / 100.0 * static_cast<double>(v.size() - 1));
}

inline double median(std::span<const double> values)
{
    return percentile(values, 50.0);
}

inline std::vector<double> absolute(std::span<const double> values)
{
    std::vector<double> out(values.begin(), values.end());
    for (double& x : out)
        x = std::abs(x);
    return out;
}

inline double mean_square(std::span<const double> values)
{
    if (values.empty())
        throw ValidationError("mean_square: empty input");
    double s = 0.0;
    for (double v : values)
        s += v * v;
    return s / static_cast<double>(values.size());
}

/// Fraction of values strictly below zero.
inline double negative_fraction(std::span<const double> values)
{
    if (values.empty())
        return 0.0;
    return static_cast<double>(std::count_if(values.begin(), values.end(), [](double v) { return v < 0.0; })) /
           static_cast<double>(values.size());
}

struct ThroughputReference
{
    PositionPair pair;
    double throughput_mbps = 0.0;
};

/// E^T per simulated pair (pair order of `sim`). Pairs are matched on the 1 mm grid.
inline ErrorSeries throughput_errors(const SimResult& sim, std::span<const ThroughputReference> reference,
    std::string label = {})
{
    std::unordered_map<PairKey, double, PairKeyHash> ref;
    for (const auto& r : reference)
        ref[quantize(r.pair)] = r.throughput_mbps;
    ErrorSeries s{{}, ErrorKind::throughput, std::move(label)};
    std::string missing;
    for (const auto& p : sim.pairs)
    {
        const auto it = ref.find(quantize(p.pair));
        if (it == ref.end())
        {
            const auto f = features(p.pair);
            missing += " (";
            for (std::size_t i = 0; i < 6; ++i)
                missing += (i ? "," : "") + csv::format(f[i]);
            missing += ")";
            continue;
        }
        s.values.push_back(p.throughput_mbps - it->second);
    }
    if (!missing.empty())
        throw ValidationError("throughput_errors: no reference throughput for pair(s)" + missing);
    return s;
}

/// Mean measured throughput per unique pair, from the dataset's throughput column.
inline std::vector<ThroughputReference> throughput_reference(std::span<const RawSample> samples)
{
    std::map<PositionPair, std::pair<double, std::size_t>, PairLess> acc;
    for (const auto& s : samples)
        if (s.throughput_mbps)
        {
            auto& a = acc[s.pair];
            a.first += *s.throughput_mbps;
            ++a.second;
        }
    std::vector<ThroughputReference> out;
    for (const auto& [pair, a] : acc)
        out.push_back({pair, a.first / static_cast<double>(a.second)});
    return out;
}

/// `value,percentile` CSV preceded by a `#` metadata line.
inline std::string cdf_points_csv(const std::vector<CdfPoint>& cdf, const std::string& model, ErrorKind kind,
    std::uint64_t seed, bool absolute)
{
    std::string out = "# model=" + model + ", kind=" + to_string(kind) + (absolute ? ", absolute" : ", signed") +
                      ", seed=" + std::to_string(seed) + "\nvalue,percentile\n";
    for (const auto& p : cdf)
        out += csv::format(p.x) + ',' + csv::format(p.y) + '\n';
    return out;
}

}  // namespace posloss
