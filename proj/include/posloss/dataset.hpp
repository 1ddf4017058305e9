// Copyright 2026 The posloss Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <posloss/core.hpp>
#include <posloss/csv.hpp>
#include <posloss/rng.hpp>

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace posloss
{
/// Thermal noise of a 20 MHz channel (-101 dBm) plus a 7 dB receiver noise figure.
inline constexpr double default_noise_floor_dbm = -94.0;

enum class WifiStandard
{
    ieee80211a,
};

struct LinkBudget
{
    WifiStandard wifi_standard = WifiStandard::ieee80211a;
    double tx_power_dbm = 0.0;
    double tx_antenna_gain_dbi = 0.0;
    double rx_antenna_gain_dbi = 0.0;
    double channel_frequency_mhz = 5220.0;
    double channel_bandwidth_mhz = 20.0;
};

inline void validate(const LinkBudget& b)
{
    if (!(b.channel_frequency_mhz > 0.0))
        throw ValidationError("link budget: channel_frequency_mhz must be > 0");
    if (!(b.channel_bandwidth_mhz > 0.0))
        throw ValidationError("link budget: channel_bandwidth_mhz must be > 0");
}

inline LinkBudget link_budget_from_json(const nlohmann::json& j)
{
    static constexpr const char* keys[] = {"wifi_standard", "tx_power_dbm", "tx_antenna_gain_dbi",
        "rx_antenna_gain_dbi", "channel_frequency_mhz", "channel_bandwidth_mhz"};
    if (!j.is_object())
        throw ValidationError("link budget: expected a JSON object");
    for (const auto* k : keys)
        if (!j.contains(k))
            throw ValidationError(std::string("link budget: missing mandatory key '") + k + "'");

    LinkBudget b;
    try
    {
        const auto standard = j.at("wifi_standard").get<std::string>();
        if (standard != "802.11a")
            throw ValidationError("link budget: unsupported wifi_standard '" + standard + "'");
        b.tx_power_dbm = j.at("tx_power_dbm").get<double>();
        b.tx_antenna_gain_dbi = j.at("tx_antenna_gain_dbi").get<double>();
        b.rx_antenna_gain_dbi = j.at("rx_antenna_gain_dbi").get<double>();
        b.channel_frequency_mhz = j.at("channel_frequency_mhz").get<double>();
        b.channel_bandwidth_mhz = j.at("channel_bandwidth_mhz").get<double>();
    }
    catch (const nlohmann::json::type_error& e)
    {
        throw ValidationError(std::string("link budget: ") + e.what());
    }
    validate(b);
    return b;
}

inline nlohmann::json to_json(const LinkBudget& b)
{
    return {{"wifi_standard", "802.11a"}, {"tx_power_dbm", b.tx_power_dbm},
        {"tx_antenna_gain_dbi", b.tx_antenna_gain_dbi}, {"rx_antenna_gain_dbi", b.rx_antenna_gain_dbi},
        {"channel_frequency_mhz", b.channel_frequency_mhz}, {"channel_bandwidth_mhz", b.channel_bandwidth_mhz}};
}

inline LinkBudget load_link_budget(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open link budget " + path);
    nlohmann::json j;
    try
    {
        in >> j;
    }
    catch (const nlohmann::json::parse_error& e)
    {
        throw ParseError("link budget " + path + ": " + e.what());
    }
    return link_budget_from_json(j);
}

struct RawSample
{
    PositionPair pair;
    std::optional<double> loss_db;
    std::optional<double> snr_db;
    std::optional<double> noise_dbm;
    std::optional<double> rx_power_dbm;
    std::optional<double> throughput_mbps;
};

inline bool loss_derivable(const RawSample& s) noexcept
{
    return s.loss_db || s.rx_power_dbm || s.snr_db;
}

/// Total propagation loss excluding antenna gains.
///
/// `loss_db` wins when present. Otherwise rx power is taken directly or rebuilt
/// as noise + SNR (falling back to the default noise floor when the row has none).
inline double derive_loss(const RawSample& s, const LinkBudget& b)
{
    if (s.loss_db)
        return *s.loss_db;
    double rx = 0.0;
    if (s.rx_power_dbm)
        rx = *s.rx_power_dbm;
    else if (s.snr_db)
        rx = s.noise_dbm.value_or(default_noise_floor_dbm) + *s.snr_db;
    else
        throw ValidationError("sample has neither loss_db, rx_power_dbm nor snr_db");
    return b.tx_power_dbm + b.tx_antenna_gain_dbi + b.rx_antenna_gain_dbi - rx;
}

/// Inverse of derive_loss for the rx-power route.
inline double rx_power_for_loss(double loss_db, const LinkBudget& b) noexcept
{
    return b.tx_power_dbm + b.tx_antenna_gain_dbi + b.rx_antenna_gain_dbi - loss_db;
}

inline constexpr const char* dataset_header =
    "tx_x,tx_y,tx_z,rx_x,rx_y,rx_z,loss_db,snr_db,noise_dbm,rx_power_dbm,throughput_mbps";

struct LoadedDataset
{
    std::vector<RawSample> samples;
    std::optional<LinkBudget> budget;
};

/// Parses the trace CSV body. Row numbers in errors are 1-based file lines (header = 1).
inline std::vector<RawSample> parse_dataset_csv(const std::vector<std::string>& lines)
{
    if (lines.empty())
        throw ParseError("dataset: empty file, header row required");
    const auto header = csv::split_row(lines.front());
    const auto expected = csv::split_row(dataset_header);
    if (header.size() < expected.size() || !std::equal(expected.begin(), expected.end(), header.begin()))
        throw ParseError(std::string("dataset: header must start with ") + dataset_header, 1);

    std::vector<RawSample> out;
    out.reserve(lines.size() - 1);
    for (std::size_t i = 1; i < lines.size(); ++i)
    {
        const std::size_t row = i + 1;
        const auto c = csv::split_row(lines[i]);
        if (c.size() != header.size())
            throw ParseError("dataset: expected " + std::to_string(header.size()) + " columns, got " +
                                 std::to_string(c.size()),
                row);
        RawSample s;
        s.pair.tx = {csv::parse_required(c[0], row, "tx_x"), csv::parse_required(c[1], row, "tx_y"),
            csv::parse_required(c[2], row, "tx_z")};
        s.pair.rx = {csv::parse_required(c[3], row, "rx_x"), csv::parse_required(c[4], row, "rx_y"),
            csv::parse_required(c[5], row, "rx_z")};
        s.loss_db = csv::parse_optional(c[6], row, "loss_db");
        s.snr_db = csv::parse_optional(c[7], row, "snr_db");
        s.noise_dbm = csv::parse_optional(c[8], row, "noise_dbm");
        s.rx_power_dbm = csv::parse_optional(c[9], row, "rx_power_dbm");
        s.throughput_mbps = csv::parse_optional(c[10], row, "throughput_mbps");
        if (!loss_derivable(s))
            throw ValidationError("dataset: row " + std::to_string(row) +
                                  " has no loss_db and no rx_power_dbm/snr_db to derive it");
        out.push_back(s);
    }
    return out;
}

inline LoadedDataset load_dataset(const std::string& csv_path, const std::optional<std::string>& budget_path = {})
{
    LoadedDataset d;
    d.samples = parse_dataset_csv(csv::read_lines(csv_path));
    if (budget_path)
        d.budget = load_link_budget(*budget_path);
    return d;
}

struct LossSample
{
    PositionPair pair;
    double loss_db = 0.0;
};

/// Derives the total loss of every sample. A budget is required as soon as one row lacks `loss_db`.
inline std::vector<LossSample> derive_losses(const std::vector<RawSample>& samples, const std::optional<LinkBudget>& budget)
{
    std::vector<LossSample> out;
    out.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
    {
        const auto& s = samples[i];
        if (!s.loss_db && !budget)
            throw ValidationError("sample " + std::to_string(i) +
                                  " needs a link-budget JSON to derive loss from SNR/rx power");
        out.push_back({s.pair, s.loss_db ? *s.loss_db : derive_loss(s, *budget)});
    }
    return out;
}

struct OutlierResult
{
    std::vector<LossSample> kept;
    std::vector<std::size_t> kept_index;  // indices into the input
    std::size_t removed = 0;
};

/// Per-group z-score filter with population statistics. Drops x iff |x - mean| / sd > threshold;
/// zero-variance groups are kept whole. Input order is preserved.
inline OutlierResult remove_outliers(const std::vector<LossSample>& samples, double z_threshold = 5.0)
{
    std::map<PositionPair, std::vector<std::size_t>, PairLess> groups;
    for (std::size_t i = 0; i < samples.size(); ++i)
        groups[samples[i].pair].push_back(i);

    std::vector<char> keep(samples.size(), 1);
    for (const auto& [pair, idx] : groups)
    {
        double mean = 0.0;
        for (auto i : idx)
            mean += samples[i].loss_db;
        mean /= static_cast<double>(idx.size());
        double var = 0.0;
        for (auto i : idx)
            var += (samples[i].loss_db - mean) * (samples[i].loss_db - mean);
        const double sd = std::sqrt(var / static_cast<double>(idx.size()));
        if (sd == 0.0)
            continue;
        for (auto i : idx)
            if (std::abs(samples[i].loss_db - mean) / sd > z_threshold)
                keep[i] = 0;
    }

    OutlierResult r;
    for (std::size_t i = 0; i < samples.size(); ++i)
    {
        if (keep[i])
        {
            r.kept.push_back(samples[i]);
            r.kept_index.push_back(i);
        }
        else
            ++r.removed;
    }
    return r;
}

enum class SplitLabel : unsigned char
{
    train,
    test,
};

struct DecomposedDataset
{
    std::map<PositionPair, double, PairLess> path_loss_table;
    std::vector<LossSample> samples;       // total loss per sample
    std::vector<double> fading_residuals;  // aligned with samples
    std::vector<SplitLabel> split;         // aligned with samples; empty until split()

    double path_loss(const PositionPair& p) const { return path_loss_table.at(p); }
};

/// Path loss = per-pair mean; fading residual = total - path loss.
inline DecomposedDataset decompose(const std::vector<LossSample>& samples)
{
    std::map<PositionPair, std::pair<double, std::size_t>, PairLess> acc;
    for (const auto& s : samples)
    {
        auto& a = acc[s.pair];
        a.first += s.loss_db;
        ++a.second;
    }
    DecomposedDataset d;
    for (const auto& [pair, a] : acc)
        d.path_loss_table.emplace(pair, a.first / static_cast<double>(a.second));
    d.samples = samples;
    d.fading_residuals.reserve(samples.size());
    for (const auto& s : samples)
        d.fading_residuals.push_back(s.loss_db - d.path_loss_table.at(s.pair));
    return d;
}

/// Sample-level random partition. |train| = round(fraction * N); depends only on (seed, N, fraction).
inline std::vector<SplitLabel> split_labels(std::size_t n, double train_fraction, std::uint64_t seed)
{
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ValidationError("split: train_fraction must be in (0, 1)");
    if (n < 2)
        throw ValidationError("split: at least 2 samples required");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    RandomStream rng(seed, derive_stream(0, StreamPurpose::split));
    for (std::size_t i = n - 1; i > 0; --i)
        std::swap(order[i], order[rng.uniform_index(i + 1)]);

    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    std::vector<SplitLabel> labels(n, SplitLabel::test);
    for (std::size_t i = 0; i < n_train; ++i)
        labels[order[i]] = SplitLabel::train;
    return labels;
}

inline DecomposedDataset split(DecomposedDataset d, double train_fraction, std::uint64_t seed)
{
    d.split = split_labels(d.samples.size(), train_fraction, seed);
    return d;
}

/// (features, target) rows for the regressors: target is the decomposed path loss.
inline std::vector<std::pair<FeatureVector, double>> path_loss_rows(const DecomposedDataset& d, SplitLabel which)
{
    std::vector<std::pair<FeatureVector, double>> rows;
    for (std::size_t i = 0; i < d.samples.size(); ++i)
        if (d.split.empty() || d.split[i] == which)
            rows.emplace_back(features(d.samples[i].pair), d.path_loss(d.samples[i].pair));
    return rows;
}

inline std::vector<LossSample> loss_rows(const DecomposedDataset& d, SplitLabel which)
{
    std::vector<LossSample> rows;
    for (std::size_t i = 0; i < d.samples.size(); ++i)
        if (d.split.empty() || d.split[i] == which)
            rows.push_back(d.samples[i]);
    return rows;
}

inline const char* to_string(SplitLabel l) noexcept
{
    return l == SplitLabel::train ? "train" : "test";
}

/// Preprocessed CSV: the dataset schema (loss_db filled with the derived total loss)
/// plus path_loss_db, fading_db and split columns, in input row order.
inline std::string write_preprocessed_csv(const std::vector<RawSample>& raw, const DecomposedDataset& d)
{
    if (raw.size() != d.samples.size())
        throw ValidationError("preprocessed output: raw/decomposed size mismatch");
    std::string out = std::string(dataset_header) + ",path_loss_db,fading_db,split\n";
    for (std::size_t i = 0; i < raw.size(); ++i)
    {
        const auto& r = raw[i];
        const auto& s = d.samples[i];
        const auto f = features(s.pair);
        for (double v : f)
            out += csv::format(v) + ',';
        out += csv::format(s.loss_db) + ',' + csv::format(r.snr_db) + ',' + csv::format(r.noise_dbm) + ',' +
               csv::format(r.rx_power_dbm) + ',' + csv::format(r.throughput_mbps) + ',' +
               csv::format(d.path_loss(s.pair)) + ',' + csv::format(d.fading_residuals[i]) + ',' +
               (d.split.empty() ? "" : to_string(d.split[i])) + '\n';
    }
    return out;
}

struct PreprocessedDataset
{
    std::vector<RawSample> raw;
    DecomposedDataset data;
};

inline PreprocessedDataset load_preprocessed(const std::string& path)
{
    const auto lines = csv::read_lines(path);
    if (lines.empty())
        throw ParseError("preprocessed dataset: empty file");
    const auto header = csv::split_row(lines.front());
    const auto expected = csv::split_row(std::string(dataset_header) + ",path_loss_db,fading_db,split");
    if (header != expected)
        throw ParseError("preprocessed dataset: unexpected header (run preprocess first)", 1);

    PreprocessedDataset p;
    p.raw = parse_dataset_csv(lines);
    for (std::size_t i = 1; i < lines.size(); ++i)
    {
        const std::size_t row = i + 1;
        const auto c = csv::split_row(lines[i]);
        const auto& raw = p.raw[i - 1];
        if (!raw.loss_db)
            throw ParseError("preprocessed dataset: loss_db missing", row);
        const double pl = csv::parse_required(c[11], row, "path_loss_db");
        const double fd = csv::parse_required(c[12], row, "fading_db");
        p.data.samples.push_back({raw.pair, *raw.loss_db});
        p.data.fading_residuals.push_back(fd);
        auto [it, inserted] = p.data.path_loss_table.emplace(raw.pair, pl);
        if (!inserted && it->second != pl)
            throw ParseError("preprocessed dataset: inconsistent path_loss_db for one position pair", row);
        if (c[13] == "train")
            p.data.split.push_back(SplitLabel::train);
        else if (c[13] == "test")
            p.data.split.push_back(SplitLabel::test);
        else if (!c[13].empty())
            throw ParseError("preprocessed dataset: split must be train or test", row);
    }
    if (!p.data.split.empty() && p.data.split.size() != p.data.samples.size())
        throw ParseError("preprocessed dataset: split column partially filled");
    return p;
}

}  // namespace posloss
