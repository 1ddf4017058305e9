// Copyright 2026 The posloss Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <posloss/core.hpp>

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <span>

namespace posloss
{
struct MeanInterval
{
    double mean = 0.0;
    double half_width = 0.0;  // mean +- half_width covers the true mean at `confidence`
};

/// Student-t confidence interval of the mean; needs at least two observations.
inline MeanInterval mean_confidence_interval(std::span<const double> values, double confidence = 0.95)
{
    if (values.size() < 2)
        throw ValidationError("confidence interval needs at least 2 observations");
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values)
        mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : values)
        ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    const boost::math::students_t dist(n - 1.0);
    const double t = boost::math::quantile(dist, 0.5 + confidence / 2.0);
    return {mean, t * sd / std::sqrt(n)};
}

}  // namespace posloss
