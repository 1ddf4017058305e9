// Copyright 2026 The posloss Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace posloss
{
/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// Stream layout: key = 64-bit seed, counter = (draw index low, draw index high,
/// stream id low, stream id high). Each draw consumes one 128-bit block, so the
/// n-th draw of a stream is a pure function of (seed, stream id, n) and streams
/// never overlap.
///
/// Stream derivation: sub-streams of a user-facing stream id `s` are
/// `s * 16 + purpose` (see StreamPurpose), so the fading, PER, rate probing and
/// data-split streams of one run are distinct and reproducible.
class Philox4x32
{
public:
    using Block = std::array<std::uint32_t, 4>;

    static Block generate(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept
    {
        Block ctr{static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
            static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
        std::uint32_t k0 = static_cast<std::uint32_t>(seed);
        std::uint32_t k1 = static_cast<std::uint32_t>(seed >> 32);
        for (int round = 0; round < 10; ++round)
        {
            const std::uint64_t p0 = std::uint64_t{0xD2511F53} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57} * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k0, static_cast<std::uint32_t>(p1),
                static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k1, static_cast<std::uint32_t>(p0)};
            k0 += 0x9E3779B9;
            k1 += 0xBB67AE85;
        }
        return ctr;
    }
};

enum class StreamPurpose : std::uint64_t
{
    fading = 1,
    baseline_fading = 2,
    packet_error = 3,
    rate_probe = 4,
    split = 5,
    synthetic = 6,
};

inline constexpr std::uint64_t derive_stream(std::uint64_t stream_id, StreamPurpose purpose) noexcept
{
    return stream_id * 16 + static_cast<std::uint64_t>(purpose);
}

/// One seeded pseudo-random stream. Single owner; copies continue independently.
class RandomStream
{
public:
    RandomStream() = default;
    RandomStream(std::uint64_t seed, std::uint64_t stream) noexcept : seed_(seed), stream_(stream) {}

    std::uint64_t next_u64() noexcept
    {
        const auto b = Philox4x32::generate(seed_, stream_, index_++);
        return (std::uint64_t{b[0]} << 32) | b[1];
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n), n > 0. Lemire's multiply-shift with rejection.
    std::uint64_t uniform_index(std::uint64_t n) noexcept
    {
        for (;;)
        {
            const unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
            const auto low = static_cast<std::uint64_t>(m);
            if (low >= n || low >= (-n) % n)
                return static_cast<std::uint64_t>(m >> 64);
        }
    }

    /// Normal(mean, sd) by Box-Muller; consumes exactly two draws.
    double normal(double mean, double sd) noexcept
    {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }
    std::uint64_t draws() const noexcept { return index_; }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::uint64_t index_ = 0;
};

}  // namespace posloss
