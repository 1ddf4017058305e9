// Copyright 2026 The posloss Authors.
// SPDX-License-Identifier: Apache-2.0

// JSON scenario and model-assembly configuration for the posloss CLI.

#pragma once

#include <posloss/posloss.hpp>

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace posloss::cli
{
namespace fs = std::filesystem;
using nlohmann::json;

inline json read_json(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path);
    try
    {
        return json::parse(in);
    }
    catch (const json::parse_error& e)
    {
        throw ParseError(path + ": " + e.what());
    }
}

/// Resolves `p` against the directory of the config file that named it.
inline std::string resolve(const std::string& p, const std::string& config_path)
{
    if (p.empty() || fs::path(p).is_absolute() || config_path.empty())
        return p;
    return (fs::path(config_path).parent_path() / p).lexically_normal().string();
}

template <typename T>
T get_or(const json& j, const char* key, T fallback)
{
    if (!j.contains(key) || j.at(key).is_null())
        return fallback;
    try
    {
        return j.at(key).get<T>();
    }
    catch (const json::exception& e)
    {
        throw ValidationError(std::string("config key '") + key + "': " + e.what());
    }
}

/// Model assembly: variant, files and RNG/cache settings.
struct ModelConfig
{
    std::string variant = "learned";  // learned | friis | log-distance | constant
    std::string model_path;
    std::string cdf_path;
    std::optional<std::uint64_t> seed;
    std::uint64_t stream_id = 0;
    std::size_t cache_capacity = default_cache_capacity;
    double quantum_m = default_cache_quantum_m;
    double frequency_mhz = 5220.0;
    double exponent = 1.7;
    double reference_distance_m = 1.0;
    std::optional<double> fading_sigma_db = 3.0;  // baselines; nullopt disables
    double loss_db = 0.0;                         // constant variant
    std::string label;
};

inline ModelConfig model_config_from_json(const json& j, const std::string& origin = {})
{
    ModelConfig c;
    c.variant = get_or<std::string>(j, "variant", c.variant);
    if (c.variant == "pmlpl" || c.variant == "p-mlpl")
        c.variant = "learned";
    if (c.variant != "learned" && c.variant != "friis" && c.variant != "log-distance" && c.variant != "constant")
        throw ValidationError("model config: unknown variant '" + c.variant + "'");
    c.model_path = resolve(get_or<std::string>(j, "model", ""), origin);
    c.cdf_path = resolve(get_or<std::string>(j, "cdf", ""), origin);
    if (j.contains("seed") && !j.at("seed").is_null())
        c.seed = j.at("seed").get<std::uint64_t>();
    c.stream_id = get_or<std::uint64_t>(j, "stream_id", c.stream_id);
    c.cache_capacity = get_or<std::size_t>(j, "cache_capacity", c.cache_capacity);
    c.quantum_m = get_or<double>(j, "quantum_m", c.quantum_m);
    c.frequency_mhz = get_or<double>(j, "frequency_mhz", c.frequency_mhz);
    c.exponent = get_or<double>(j, "exponent", c.exponent);
    c.reference_distance_m = get_or<double>(j, "reference_distance_m", c.reference_distance_m);
    if (j.contains("fading_sigma_db"))
        c.fading_sigma_db = j.at("fading_sigma_db").is_null() ? std::nullopt
                                                              : std::optional<double>(j.at("fading_sigma_db").get<double>());
    c.loss_db = get_or<double>(j, "loss_db", c.loss_db);
    c.label = get_or<std::string>(j, "label", c.variant);
    if (c.variant == "learned" && (c.model_path.empty() || c.cdf_path.empty()))
        throw ValidationError("model config: learned variant needs 'model' and 'cdf' paths");
    return c;
}

inline ModelConfig load_model_config(const std::string& path)
{
    return model_config_from_json(read_json(path), path);
}

/// Loads the regressor and CDF once; make() builds fresh instances per seed.
class ModelFactory
{
public:
    explicit ModelFactory(ModelConfig cfg) : cfg_(std::move(cfg))
    {
        if (cfg_.variant == "learned")
        {
            regressor_ = std::make_shared<const PathLossModel>(load_model(cfg_.model_path));
            cdf_ = import_cdf(cfg_.cdf_path);
        }
        else if (cfg_.variant == "constant")
        {
            GbrtModel g;
            g.base_prediction = cfg_.loss_db;
            regressor_ = std::make_shared<const PathLossModel>(std::move(g));
            cdf_ = FadingCdf({{0.0, 0.0}, {0.0, 100.0}});
        }
    }

    PropagationModel make(std::uint64_t seed) const
    {
        const auto s = cfg_.seed.value_or(seed);
        if (regressor_)
            return PropagationModel::learned(regressor_, *cdf_, s, cfg_.stream_id, cfg_.cache_capacity, cfg_.quantum_m);
        std::optional<NormalFading> fading;
        if (cfg_.fading_sigma_db)
            fading = NormalFading{0.0, *cfg_.fading_sigma_db};
        if (cfg_.variant == "friis")
            return PropagationModel::friis(cfg_.frequency_mhz, fading, s, cfg_.stream_id);
        return PropagationModel::log_distance(
            {cfg_.exponent, cfg_.reference_distance_m, cfg_.frequency_mhz}, fading, s, cfg_.stream_id);
    }

    const ModelConfig& config() const noexcept { return cfg_; }

private:
    ModelConfig cfg_;
    std::shared_ptr<const PathLossModel> regressor_;
    std::optional<FadingCdf> cdf_;
};

inline std::vector<PositionPair> unique_pairs(const std::vector<RawSample>& samples)
{
    std::vector<PositionPair> out;
    std::map<PositionPair, bool, PairLess> seen;
    for (const auto& s : samples)
        if (seen.emplace(s.pair, true).second)
            out.push_back(s.pair);
    return out;
}

struct Scenario
{
    LinkSimConfig sim;
    std::vector<PositionPair> pairs;
    std::optional<json> inline_model;
    std::string origin;
};

inline Scenario scenario_from_json(const json& j, const std::string& origin = {})
{
    Scenario s;
    s.origin = origin;
    auto& c = s.sim;
    if (j.contains("budget"))
        c.budget = link_budget_from_json(j.at("budget"));
    c.offered_load_mbps = get_or<double>(j, "offered_load_mbps", c.offered_load_mbps);
    c.payload_bytes = get_or<std::size_t>(j, "payload_bytes", c.payload_bytes);
    c.warmup_s = get_or<double>(j, "warmup_s", c.warmup_s);
    c.measure_s = get_or<double>(j, "measure_s", c.measure_s);
    c.preamble_threshold_dbm = get_or<double>(j, "preamble_threshold_dbm", c.preamble_threshold_dbm);
    c.noise_floor_dbm = get_or<double>(j, "noise_floor_dbm", c.noise_floor_dbm);
    const auto ra = get_or<std::string>(j, "rate_adaptation", "minstrel-lite");
    if (ra == "minstrel-lite")
        c.rate_adaptation = RateAdaptation::minstrel_lite;
    else if (ra == "fixed")
        c.rate_adaptation = RateAdaptation::fixed;
    else
        throw ValidationError("scenario: rate_adaptation must be 'minstrel-lite' or 'fixed'");
    c.fixed_rate_mbps = get_or<double>(j, "fixed_rate_mbps", c.fixed_rate_mbps);
    c.per_packet_fading = get_or<bool>(j, "per_packet_fading", c.per_packet_fading);
    c.queue_capacity = get_or<std::size_t>(j, "queue_capacity", c.queue_capacity);
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    c.stream_id = get_or<std::uint64_t>(j, "stream_id", c.stream_id);

    if (j.contains("pairs"))
    {
        for (const auto& p : j.at("pairs"))
        {
            const auto v = p.get<std::vector<double>>();
            if (v.size() != 6)
                throw ValidationError("scenario: each pair needs 6 coordinates [tx_x,tx_y,tx_z,rx_x,rx_y,rx_z]");
            s.pairs.push_back(pair_from_features({v[0], v[1], v[2], v[3], v[4], v[5]}));
        }
    }
    if (j.contains("dataset"))
    {
        const auto path = resolve(j.at("dataset").get<std::string>(), origin);
        const auto more = unique_pairs(parse_dataset_csv(csv::read_lines(path)));
        s.pairs.insert(s.pairs.end(), more.begin(), more.end());
    }
    if (j.contains("model"))
        s.inline_model = j.at("model");
    validate(c);
    return s;
}

inline Scenario load_scenario(const std::string& path)
{
    return scenario_from_json(read_json(path), path);
}

}  // namespace posloss::cli
