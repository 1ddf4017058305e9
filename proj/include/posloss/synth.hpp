// Copyright 2026 The posloss Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <posloss/channel.hpp>
#include <posloss/dataset.hpp>
#include <posloss/rng.hpp>

#include <optional>
#include <vector>

namespace posloss
{
/// Synthetic trace generator: log-distance truth plus Normal fading.
///
/// Layout `random`: tx and rx drawn uniformly on an area x area square at a fixed
/// height, redrawn while closer than min_distance. Layout `axes`: tx at the origin,
/// rx stepping away along +X and then +Y (alternating pairs), 1 m apart starting at
/// min_distance. Random positions are rounded to 1 mm, like surveyed coordinates.
/// Every sample's loss = truth(d) + asymmetry (when rx.x < tx.x) + N(0, sd).
/// With a link budget the rows carry SNR and noise instead of loss.
struct SyntheticSpec
{
    enum class Layout
    {
        random,
        axes,
    };

    std::size_t n_pairs = 500;
    std::size_t samples_per_pair = 30;
    LogDistanceParams truth{};
    NormalFading fading{};
    Layout layout = Layout::random;
    double area_m = 60.0;
    double height_m = 1.5;
    double min_distance_m = 1.0;
    double asymmetry_db = 0.0;
    std::optional<LinkBudget> budget;
    double noise_dbm = default_noise_floor_dbm;
    std::uint64_t seed = 1;
};

inline double synthetic_path_loss(const SyntheticSpec& spec, const PositionPair& p)
{
    const double base = log_distance_loss(distance(p.tx, p.rx), spec.truth);
    return base + (p.rx.x < p.tx.x ? spec.asymmetry_db : 0.0);
}

inline std::vector<PositionPair> synthetic_pairs(const SyntheticSpec& spec)
{
    RandomStream rng(spec.seed, derive_stream(0, StreamPurpose::synthetic));
    std::vector<PositionPair> pairs;
    pairs.reserve(spec.n_pairs);
    for (std::size_t i = 0; i < spec.n_pairs; ++i)
    {
        PositionPair p;
        if (spec.layout == SyntheticSpec::Layout::axes)
        {
            const double d = spec.min_distance_m + static_cast<double>(i / 2);
            p.tx = {0.0, 0.0, 0.0};
            p.rx = i % 2 == 0 ? Position{d, 0.0, 0.0} : Position{0.0, d, 0.0};
        }
        else
        {
            do
            {
                p.tx = {spec.area_m * rng.uniform(), spec.area_m * rng.uniform(), spec.height_m};
                p.rx = {spec.area_m * rng.uniform(), spec.area_m * rng.uniform(), spec.height_m};
                p = PropagationModel::snap(p, default_cache_quantum_m);
            } while (distance(p.tx, p.rx) < spec.min_distance_m);
        }
        pairs.push_back(p);
    }
    return pairs;
}

/// Samples are grouped by pair, pair order as in synthetic_pairs().
inline std::vector<RawSample> generate_synthetic(const SyntheticSpec& spec)
{
    const auto pairs = synthetic_pairs(spec);
    RandomStream noise(spec.seed, derive_stream(1, StreamPurpose::synthetic));
    std::vector<RawSample> out;
    out.reserve(pairs.size() * spec.samples_per_pair);
    for (const auto& p : pairs)
    {
        const double pl = synthetic_path_loss(spec, p);
        for (std::size_t k = 0; k < spec.samples_per_pair; ++k)
        {
            const double loss = pl + noise.normal(spec.fading.mean_db, spec.fading.sd_db);
            RawSample s;
            s.pair = p;
            if (spec.budget)
            {
                s.noise_dbm = spec.noise_dbm;
                s.snr_db = rx_power_for_loss(loss, *spec.budget) - spec.noise_dbm;
            }
            else
                s.loss_db = loss;
            out.push_back(s);
        }
    }
    return out;
}

inline std::string dataset_to_csv(const std::vector<RawSample>& samples)
{
    std::string out = std::string(dataset_header) + '\n';
    for (const auto& s : samples)
    {
        for (double v : features(s.pair))
            out += csv::format(v) + ',';
        out += csv::format(s.loss_db) + ',' + csv::format(s.snr_db) + ',' + csv::format(s.noise_dbm) + ',' +
               csv::format(s.rx_power_dbm) + ',' + csv::format(s.throughput_mbps) + '\n';
    }
    return out;
}

}  // namespace posloss
