// Copyright 2026 The posloss Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <posloss/core.hpp>
#include <posloss/fading.hpp>
#include <posloss/lru_cache.hpp>
#include <posloss/regress.hpp>
#include <posloss/rng.hpp>

#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <variant>

namespace posloss
{
inline constexpr double speed_of_light = 299792458.0;
inline constexpr std::size_t default_cache_capacity = 65536;
inline constexpr double default_cache_quantum_m = 1e-3;

/// Free-space path loss in dB at distance `d` meters and `frequency_mhz`.
inline double friis_loss(double d, double frequency_mhz)
{
    if (!(d > 0.0))
        throw ValidationError("Friis path loss undefined at distance 0");
    if (!(frequency_mhz > 0.0))
        throw ValidationError("Friis path loss needs a positive frequency");
    return 20.0 * std::log10(d) + 20.0 * std::log10(frequency_mhz * 1e6) +
           20.0 * std::log10(4.0 * std::numbers::pi / speed_of_light);
}

struct LogDistanceParams
{
    double exponent = 1.7;
    double reference_distance_m = 1.0;
    double frequency_mhz = 5220.0;
};

/// L_ref + 10 gamma log10(d / d_ref), with L_ref the free-space loss at d_ref.
inline double log_distance_loss(double d, const LogDistanceParams& p)
{
    if (!(d > 0.0))
        throw ValidationError("log-distance path loss undefined at distance 0");
    const double reference = friis_loss(p.reference_distance_m, p.frequency_mhz);
    if (d == p.reference_distance_m)
        return reference;
    return reference + 10.0 * p.exponent * std::log10(d / p.reference_distance_m);
}

struct NormalFading
{
    double mean_db = 0.0;
    double sd_db = 3.0;
};

/// Propagation-loss model: learned (regressor + empirical fading + cache), or a
/// Friis / log-distance baseline with optional Normal fading.
///
/// Owns mutable cache and RNG state; one instance per simulation.
class PropagationModel
{
public:
    static PropagationModel learned(std::shared_ptr<const PathLossModel> regressor, FadingCdf fading,
        std::uint64_t seed, std::uint64_t stream_id, std::size_t cache_capacity = default_cache_capacity,
        double quantum_m = default_cache_quantum_m)
    {
        if (!regressor)
            throw ValidationError("learned model needs a path-loss regressor");
        if (!(quantum_m > 0.0))
            throw ValidationError("cache quantum must be > 0");
        return PropagationModel(
            Learned{std::move(regressor), FadingSampler(std::move(fading), seed, stream_id), Cache(cache_capacity), quantum_m});
    }

    static PropagationModel friis(double frequency_mhz, std::optional<NormalFading> fading = {},
        std::uint64_t seed = 0, std::uint64_t stream_id = 0)
    {
        if (!(frequency_mhz > 0.0))
            throw ValidationError("Friis needs a positive frequency");
        return PropagationModel(Friis{frequency_mhz, fading, baseline_stream(seed, stream_id)});
    }

    static PropagationModel log_distance(const LogDistanceParams& params, std::optional<NormalFading> fading = {},
        std::uint64_t seed = 0, std::uint64_t stream_id = 0)
    {
        if (!(params.reference_distance_m > 0.0) || !(params.frequency_mhz > 0.0))
            throw ValidationError("log-distance needs positive reference distance and frequency");
        return PropagationModel(LogDistance{params, fading, baseline_stream(seed, stream_id)});
    }

    /// Deterministic component in dB. Learned models evaluate the regressor at the
    /// quantized pair, so outputs do not depend on whether the cache hit.
    double path_loss(const PositionPair& pair)
    {
        return std::visit([&](auto& v) { return path_loss_of(v, pair); }, state_);
    }

    /// Path loss plus exactly one fading draw (zero draws for baselines without fading).
    double total_loss(const PositionPair& pair)
    {
        const double pl = path_loss(pair);
        return pl + std::visit([](auto& v) { return fading_of(v); }, state_);
    }

    double rx_power(double tx_power_dbm, double tx_gain_dbi, double rx_gain_dbi, const PositionPair& pair)
    {
        return tx_power_dbm + tx_gain_dbi + rx_gain_dbi - total_loss(pair);
    }

    CacheStats cache_stats() const
    {
        if (const auto* l = std::get_if<Learned>(&state_))
            return l->cache.stats();
        return {};
    }

    /// Capacity 0 disables caching. Changing the quantum invalidates every entry.
    void cache_configure(std::size_t capacity, std::optional<double> quantum_m = {})
    {
        auto* l = std::get_if<Learned>(&state_);
        if (!l)
            return;
        if (quantum_m)
        {
            if (!(*quantum_m > 0.0))
                throw ValidationError("cache quantum must be > 0");
            if (*quantum_m != l->quantum)
            {
                l->cache.clear();
                l->quantum = *quantum_m;
            }
        }
        l->cache.set_capacity(capacity);
    }

    void cache_clear()
    {
        if (auto* l = std::get_if<Learned>(&state_))
            l->cache.clear();
    }

    bool is_learned() const noexcept { return std::holds_alternative<Learned>(state_); }

    std::string label() const
    {
        if (const auto* l = std::get_if<Learned>(&state_))
            return std::string("learned(") + kind_name(*l->regressor) + ")";
        if (std::holds_alternative<Friis>(state_))
            return "friis";
        return "log-distance";
    }

    /// Grid point that the learned model evaluates for `pair`.
    static PositionPair snap(const PositionPair& pair, double quantum_m)
    {
        return dequantize_exact(quantize_exact(pair, quantum_m), quantum_m);
    }

private:
    using Cache = LruCache<PairKey, double, PairKeyHash>;

    struct Learned
    {
        std::shared_ptr<const PathLossModel> regressor;
        FadingSampler sampler;
        Cache cache;
        double quantum;
    };
    struct Friis
    {
        double frequency_mhz;
        std::optional<NormalFading> fading;
        RandomStream rng;
    };
    struct LogDistance
    {
        LogDistanceParams params;
        std::optional<NormalFading> fading;
        RandomStream rng;
    };
    using State = std::variant<Learned, Friis, LogDistance>;

    explicit PropagationModel(State s) : state_(std::move(s)) {}

    static RandomStream baseline_stream(std::uint64_t seed, std::uint64_t stream_id)
    {
        return RandomStream(seed, derive_stream(stream_id, StreamPurpose::baseline_fading));
    }

    // Integral inverse quanta (1 mm -> 1000) divide exactly, so grid points such as
    // 10.000 m come back bit-identical.
    static double inverse_quantum(double q) noexcept
    {
        const double inv = 1.0 / q;
        const double r = std::round(inv);
        return std::abs(inv - r) < 1e-9 * r ? r : 0.0;
    }
    static PairKey quantize_exact(const PositionPair& p, double q) noexcept
    {
        const double inv = inverse_quantum(q);
        if (inv == 0.0)
            return quantize(p, q);
        const auto f = features(p);
        PairKey k;
        for (std::size_t i = 0; i < 6; ++i)
            k.q[i] = static_cast<std::int64_t>(std::llround(f[i] * inv));
        return k;
    }
    static PositionPair dequantize_exact(const PairKey& k, double q) noexcept
    {
        const double inv = inverse_quantum(q);
        if (inv == 0.0)
            return dequantize(k, q);
        FeatureVector v;
        for (std::size_t i = 0; i < 6; ++i)
            v[i] = static_cast<double>(k.q[i]) / inv;
        return pair_from_features(v);
    }

    static double path_loss_of(Learned& l, const PositionPair& pair)
    {
        const auto key = quantize_exact(pair, l.quantum);
        return l.cache.get_or_compute(
            key, [&] { return predict(*l.regressor, features(dequantize_exact(key, l.quantum))); });
    }
    static double path_loss_of(Friis& f, const PositionPair& pair)
    {
        return friis_loss(distance(pair.tx, pair.rx), f.frequency_mhz);
    }
    static double path_loss_of(LogDistance& l, const PositionPair& pair)
    {
        return log_distance_loss(distance(pair.tx, pair.rx), l.params);
    }

    static double fading_of(Learned& l) { return l.sampler.sample(); }
    template <typename Baseline>
    static double fading_of(Baseline& b)
    {
        return b.fading ? b.rng.normal(b.fading->mean_db, b.fading->sd_db) : 0.0;
    }

    State state_;
};

}  // namespace posloss
