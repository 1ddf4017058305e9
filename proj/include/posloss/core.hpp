// Copyright 2026 The posloss Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace posloss
{
inline constexpr const char* version = "1.0.0";

/// Input that fails a documented contract (range, schema, missing field).
class ValidationError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Malformed textual input; carries the offending row when known.
class ParseError : public ValidationError
{
public:
    ParseError(const std::string& what, std::size_t row = 0)
      : ValidationError(row ? what + " (row " + std::to_string(row) + ")" : what), row_(row)
    {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

/// File could not be opened, read or written.
class IoError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Cartesian coordinates in meters relative to a scenario-wide origin.
struct Position
{
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const Position&, const Position&) = default;
};

inline bool is_finite(const Position& p) noexcept
{
    return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}

inline double distance(const Position& a, const Position& b) noexcept
{
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    const double dz = a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

/// Ordered link endpoints. (A, B) and (B, A) are different links.
struct PositionPair
{
    Position tx;
    Position rx;

    friend bool operator==(const PositionPair&, const PositionPair&) = default;
};

using FeatureVector = std::array<double, 6>;

inline FeatureVector features(const PositionPair& p) noexcept
{
    return {p.tx.x, p.tx.y, p.tx.z, p.rx.x, p.rx.y, p.rx.z};
}

inline PositionPair pair_from_features(const FeatureVector& v) noexcept
{
    return {{v[0], v[1], v[2]}, {v[3], v[4], v[5]}};
}

/// Integer grid key of a pair; coordinates rounded to multiples of `quantum` meters.
struct PairKey
{
    std::array<std::int64_t, 6> q{};
    friend bool operator==(const PairKey&, const PairKey&) = default;
};

inline PairKey quantize(const PositionPair& p, double quantum = 1e-3) noexcept
{
    const auto f = features(p);
    PairKey k;
    for (std::size_t i = 0; i < 6; ++i)
        k.q[i] = static_cast<std::int64_t>(std::llround(f[i] / quantum));
    return k;
}

inline PositionPair dequantize(const PairKey& k, double quantum = 1e-3) noexcept
{
    FeatureVector v;
    for (std::size_t i = 0; i < 6; ++i)
        v[i] = static_cast<double>(k.q[i]) * quantum;
    return pair_from_features(v);
}

struct PairKeyHash
{
    std::size_t operator()(const PairKey& k) const noexcept
    {
        // splitmix64 finalizer folded over the six coordinates
        std::uint64_t h = 0x9e3779b97f4a7c15ULL;
        for (const auto c : k.q)
        {
            std::uint64_t z = h ^ static_cast<std::uint64_t>(c);
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            h = z ^ (z >> 31);
        }
        return static_cast<std::size_t>(h);
    }
};

/// Exact (bitwise-equal coordinates) ordering, used for grouping samples.
struct PairLess
{
    bool operator()(const PositionPair& a, const PositionPair& b) const noexcept
    {
        const auto fa = features(a);
        const auto fb = features(b);
        return fa < fb;
    }
};

}  // namespace posloss
