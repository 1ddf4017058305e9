// Copyright 2026 The posloss Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <posloss/channel.hpp>
#include <posloss/core.hpp>
#include <posloss/dataset.hpp>
#include <posloss/rng.hpp>
#include <posloss/stats.hpp>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <queue>
#include <span>
#include <string>
#include <vector>

namespace posloss
{
// ---------------------------------------------------------------------------
// 802.11a PHY timing and error model
// ---------------------------------------------------------------------------

inline constexpr std::array<double, 8> ofdm_rates_mbps = {6, 9, 12, 18, 24, 36, 48, 54};
inline constexpr std::array<int, 8> data_bits_per_symbol = {24, 36, 48, 72, 96, 144, 192, 216};
inline constexpr std::array<double, 8> per_threshold_db = {5, 6, 8, 11, 14, 18, 22, 24};

inline constexpr double difs_us = 34.0;
inline constexpr double sifs_us = 16.0;
inline constexpr double slot_us = 9.0;
inline constexpr int cw_min = 15;
inline constexpr double mean_backoff_us = cw_min / 2.0 * slot_us;  // 67.5
inline constexpr double phy_header_us = 20.0;                       // preamble + SIGNAL
inline constexpr double symbol_us = 4.0;
inline constexpr std::size_t udp_ip_llc_mac_overhead_bytes = 8 + 20 + 8 + 28;
inline constexpr std::size_t ack_bytes = 14;

inline std::size_t rate_index(double rate_mbps)
{
    for (std::size_t i = 0; i < ofdm_rates_mbps.size(); ++i)
        if (ofdm_rates_mbps[i] == rate_mbps)
            return i;
    throw ValidationError("unknown 802.11a rate " + std::to_string(rate_mbps) + " Mbit/s");
}

/// PPDU duration: header + 4 us per OFDM symbol carrying SERVICE(16) + PSDU + tail(6) bits.
inline double ppdu_duration_us(std::size_t rate_idx, std::size_t psdu_bytes) noexcept
{
    const auto bits = 16 + 8 * psdu_bytes + 6;
    const auto dbps = static_cast<std::size_t>(data_bits_per_symbol[rate_idx]);
    const auto symbols = (bits + dbps - 1) / dbps;
    return phy_header_us + symbol_us * static_cast<double>(symbols);
}

/// Highest mandatory rate (6, 12, 24) not above the data rate.
inline std::size_t ack_rate_index(std::size_t data_rate_idx) noexcept
{
    if (data_rate_idx >= 4)
        return 4;
    if (data_rate_idx >= 2)
        return 2;
    return 0;
}

/// One DIFS + mean backoff + DATA + SIFS + ACK exchange, in microseconds.
inline double airtime_us(double rate_mbps, std::size_t payload_bytes)
{
    const auto r = rate_index(rate_mbps);
    const double data = ppdu_duration_us(r, payload_bytes + udp_ip_llc_mac_overhead_bytes);
    const double ack = ppdu_duration_us(ack_rate_index(r), ack_bytes);
    return difs_us + mean_backoff_us + data + sifs_us + ack;
}

/// Frame success probability: linear ramp from 0 at T - 1 dB to 1 at T + 1 dB.
inline double per_success(double snr_db, double rate_mbps)
{
    const double t = per_threshold_db[rate_index(rate_mbps)];
    if (snr_db >= t + 1.0)
        return 1.0;
    if (snr_db <= t - 1.0)
        return 0.0;
    return (snr_db - (t - 1.0)) / 2.0;
}

// ---------------------------------------------------------------------------
// Simplified Minstrel
// ---------------------------------------------------------------------------

struct MinstrelLiteState
{
    static constexpr double ewma_weight = 0.25;  // weight of the newest interval
    static constexpr double update_interval_s = 0.1;
    static constexpr std::uint64_t probe_every = 10;

    std::size_t payload_bytes = 1400;
    std::array<double, 8> probability{1, 1, 1, 1, 1, 1, 1, 1};
    std::array<bool, 8> sampled{};
    std::array<std::uint32_t, 8> attempts{};
    std::array<std::uint32_t, 8> successes{};
    double next_update_s = update_interval_s;
    std::size_t best = 7;
    std::uint64_t frames = 0;
};

struct RateFeedback
{
    std::size_t rate_idx = 0;
    bool success = false;
    double time_s = 0.0;
};

/// Best expected goodput: EWMA probability x payload bits / airtime.
inline std::size_t minstrel_lite_best(const MinstrelLiteState& s)
{
    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t i = ofdm_rates_mbps.size(); i-- > 0;)
    {
        const double score = s.probability[i] * 8.0 * static_cast<double>(s.payload_bytes) /
                             airtime_us(ofdm_rates_mbps[i], s.payload_bytes);
        if (score > best_score)
        {
            best_score = score;
            best = i;
        }
    }
    return best;
}

/// Records one frame outcome; folds interval statistics into the EWMA every 100 ms.
/// The first observed interval of a rate initializes its EWMA directly.
inline MinstrelLiteState minstrel_lite_step(MinstrelLiteState s, const RateFeedback& fb)
{
    ++s.attempts[fb.rate_idx];
    if (fb.success)
        ++s.successes[fb.rate_idx];
    if (fb.time_s >= s.next_update_s)
    {
        for (std::size_t i = 0; i < 8; ++i)
        {
            if (s.attempts[i] == 0)
                continue;
            const double p = static_cast<double>(s.successes[i]) / static_cast<double>(s.attempts[i]);
            s.probability[i] = s.sampled[i] ? (1.0 - s.ewma_weight) * s.probability[i] + s.ewma_weight * p : p;
            s.sampled[i] = true;
            s.attempts[i] = s.successes[i] = 0;
        }
        s.best = minstrel_lite_best(s);
        while (s.next_update_s <= fb.time_s)
            s.next_update_s += s.update_interval_s;
    }
    return s;
}

/// Rate for the next frame: the best rate, except every 10th frame probes a
/// uniformly random other rate. Returns (rate index, is probe).
inline std::pair<std::size_t, bool> minstrel_lite_select(MinstrelLiteState& s, RandomStream& rng)
{
    ++s.frames;
    if (s.frames % s.probe_every == 0)
    {
        auto r = static_cast<std::size_t>(rng.uniform_index(ofdm_rates_mbps.size() - 1));
        if (r >= s.best)
            ++r;
        return {r, true};
    }
    return {s.best, false};
}

// ---------------------------------------------------------------------------
// Link simulation
// ---------------------------------------------------------------------------

enum class RateAdaptation
{
    minstrel_lite,
    fixed,
};

struct LinkSimConfig
{
    LinkBudget budget{WifiStandard::ieee80211a, 1.0, -7.0, -7.0, 5220.0, 20.0};
    double offered_load_mbps = 54.0;
    std::size_t payload_bytes = 1400;
    double warmup_s = 1.0;
    double measure_s = 5.0;
    double preamble_threshold_dbm = -90.0;
    double noise_floor_dbm = default_noise_floor_dbm;
    RateAdaptation rate_adaptation = RateAdaptation::minstrel_lite;
    double fixed_rate_mbps = 54.0;
    bool per_packet_fading = true;
    std::size_t queue_capacity = 500;
    std::uint64_t seed = 1;
    std::uint64_t stream_id = 0;
    bool record_trace = false;
};

struct FrameRecord
{
    double end_time_s = 0.0;
    std::size_t rate_idx = 0;
    double rx_power_dbm = 0.0;
    bool detected = false;
    bool success = false;
    bool counted = false;  // inside the measurement window

    friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

struct PairResult
{
    PositionPair pair;
    double throughput_mbps = 0.0;
    std::size_t delivered = 0;
    std::size_t lost = 0;
    std::size_t queue_drops = 0;
    std::array<std::size_t, 8> rate_histogram{};
    std::vector<FrameRecord> trace;

    friend bool operator==(const PairResult&, const PairResult&) = default;
};

struct SimResult
{
    std::vector<PairResult> pairs;
    double wall_clock_s = 0.0;
    CacheStats cache;
};

/// Equality of everything but wall-clock time and cache counters.
inline bool same_outcome(const SimResult& a, const SimResult& b)
{
    return a.pairs == b.pairs;
}

inline void validate(const LinkSimConfig& c)
{
    validate(c.budget);
    if (!(c.measure_s > 0.0))
        throw ValidationError("link simulation: measure window must be > 0 s");
    if (!(c.warmup_s >= 0.0))
        throw ValidationError("link simulation: warmup must be >= 0 s");
    if (!(c.offered_load_mbps > 0.0))
        throw ValidationError("link simulation: offered load must be > 0");
    if (c.queue_capacity == 0)
        throw ValidationError("link simulation: queue capacity must be > 0");
    if (c.rate_adaptation == RateAdaptation::fixed)
        (void)rate_index(c.fixed_rate_mbps);
}

namespace detail
{
/// Single saturated tx -> rx link with CBR arrivals, drop-tail queue and no retries.
class LinkRun
{
public:
    LinkRun(const PositionPair& pair, std::size_t pair_idx, PropagationModel& model, const LinkSimConfig& cfg)
      : pair_(pair), model_(model), cfg_(cfg),
        per_rng_(cfg.seed, derive_stream((cfg.stream_id << 20) + pair_idx, StreamPurpose::packet_error)),
        probe_rng_(cfg.seed, derive_stream((cfg.stream_id << 20) + pair_idx, StreamPurpose::rate_probe))
    {
        minstrel_.payload_bytes = cfg.payload_bytes;
        interval_ns_ = 8.0 * static_cast<double>(cfg.payload_bytes) / cfg.offered_load_mbps * 1e3;
        window_start_ns_ = to_ns(cfg.warmup_s);
        end_ns_ = to_ns(cfg.warmup_s + cfg.measure_s);
    }

    PairResult run()
    {
        result_.pair = pair_;
        if (!cfg_.per_packet_fading)
            fixed_rx_ = model_.rx_power(cfg_.budget.tx_power_dbm, cfg_.budget.tx_antenna_gain_dbi,
                cfg_.budget.rx_antenna_gain_dbi, pair_);

        schedule(0, EventType::arrival);
        while (!events_.empty())
        {
            const auto e = events_.top();
            events_.pop();
            if (e.time_ns >= end_ns_)
                break;
            now_ns_ = e.time_ns;
            if (e.type == EventType::arrival)
                on_arrival();
            else
                on_tx_end();
        }
        result_.throughput_mbps =
            static_cast<double>(result_.delivered) * 8.0 * static_cast<double>(cfg_.payload_bytes) / cfg_.measure_s / 1e6;
        return std::move(result_);
    }

private:
    enum class EventType
    {
        arrival,
        tx_end,
    };
    struct Event
    {
        std::int64_t time_ns;
        std::uint64_t seq;
        EventType type;
        bool operator>(const Event& o) const noexcept
        {
            return time_ns != o.time_ns ? time_ns > o.time_ns : seq > o.seq;
        }
    };

    static std::int64_t to_ns(double s) noexcept { return std::llround(s * 1e9); }

    void schedule(std::int64_t t, EventType type) { events_.push({t, seq_++, type}); }

    void on_arrival()
    {
        if (queue_ < cfg_.queue_capacity)
            ++queue_;
        else if (now_ns_ >= window_start_ns_)
            ++result_.queue_drops;
        ++arrivals_;
        schedule(std::llround(static_cast<double>(arrivals_) * interval_ns_), EventType::arrival);
        if (!busy_)
            start_tx();
    }

    void start_tx()
    {
        --queue_;
        busy_ = true;
        std::size_t rate = 0;
        if (cfg_.rate_adaptation == RateAdaptation::fixed)
            rate = rate_index(cfg_.fixed_rate_mbps);
        else
            rate = minstrel_lite_select(minstrel_, probe_rng_).first;

        const double rx = cfg_.per_packet_fading
                              ? model_.rx_power(cfg_.budget.tx_power_dbm, cfg_.budget.tx_antenna_gain_dbi,
                                    cfg_.budget.rx_antenna_gain_dbi, pair_)
                              : fixed_rx_;
        const double u = per_rng_.uniform();  // always drawn so the stream is outcome-independent
        current_ = {};
        current_.rate_idx = rate;
        current_.rx_power_dbm = rx;
        current_.detected = rx >= cfg_.preamble_threshold_dbm;
        current_.success =
            current_.detected && u < per_success(rx - cfg_.noise_floor_dbm, ofdm_rates_mbps[rate]);
        const auto duration = std::llround(airtime_us(ofdm_rates_mbps[rate], cfg_.payload_bytes) * 1e3);
        schedule(now_ns_ + duration, EventType::tx_end);
    }

    void on_tx_end()
    {
        busy_ = false;
        current_.end_time_s = static_cast<double>(now_ns_) * 1e-9;
        current_.counted = now_ns_ >= window_start_ns_ && now_ns_ < end_ns_;
        if (current_.counted)
        {
            ++result_.rate_histogram[current_.rate_idx];
            if (current_.success)
                ++result_.delivered;
            else
                ++result_.lost;
        }
        if (cfg_.rate_adaptation == RateAdaptation::minstrel_lite)
            minstrel_ = minstrel_lite_step(minstrel_, {current_.rate_idx, current_.success, current_.end_time_s});
        if (cfg_.record_trace)
            result_.trace.push_back(current_);
        if (queue_ > 0)
            start_tx();
    }

    PositionPair pair_;
    PropagationModel& model_;
    const LinkSimConfig& cfg_;
    RandomStream per_rng_;
    RandomStream probe_rng_;
    MinstrelLiteState minstrel_;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
    std::uint64_t seq_ = 0;
    std::uint64_t arrivals_ = 0;
    double interval_ns_ = 0.0;
    std::int64_t now_ns_ = 0;
    std::int64_t window_start_ns_ = 0;
    std::int64_t end_ns_ = 0;
    std::size_t queue_ = 0;
    bool busy_ = false;
    double fixed_rx_ = 0.0;
    FrameRecord current_;
    PairResult result_;
};

}  // namespace detail

/// Replays each pair independently for warmup + measure seconds of saturated CBR traffic.
inline SimResult run_scenario(std::span<const PositionPair> pairs, PropagationModel& model, const LinkSimConfig& cfg)
{
    validate(cfg);
    if (pairs.empty())
        throw ValidationError("run_scenario: no position pairs");
    const auto start = std::chrono::steady_clock::now();
    SimResult r;
    r.pairs.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i)
        r.pairs.push_back(detail::LinkRun(pairs[i], i, model, cfg).run());
    r.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.cache = model.cache_stats();
    return r;
}

/// Saturation ceiling in Mbit/s at a given rate (payload bits per exchange airtime).
inline double throughput_ceiling_mbps(double rate_mbps, std::size_t payload_bytes)
{
    return 8.0 * static_cast<double>(payload_bytes) / airtime_us(rate_mbps, payload_bytes);
}

// ---------------------------------------------------------------------------
// Wall-clock benchmark
// ---------------------------------------------------------------------------

struct BenchModel
{
    std::string label;
    std::function<PropagationModel(std::uint64_t seed)> make;
};

struct BenchRow
{
    std::string label;
    bool cache = false;
    std::vector<double> durations_s;
    MeanInterval duration;
};

struct BenchResult
{
    std::vector<BenchRow> rows;
    bool outcomes_identical = true;  // cache on vs off, per model and repetition
};

/// Repetition r runs with seed cfg.seed + r, once with the cache disabled and once enabled.
inline BenchResult benchmark(std::span<const PositionPair> pairs, std::span<const BenchModel> models,
    const LinkSimConfig& cfg, std::size_t repetitions)
{
    if (repetitions < 2)
        throw ValidationError("benchmark: at least 2 repetitions required for a confidence interval");
    BenchResult out;
    for (const auto& m : models)
    {
        BenchRow off{m.label, false, {}, {}};
        BenchRow on{m.label, true, {}, {}};
        for (std::size_t rep = 0; rep < repetitions; ++rep)
        {
            auto c = cfg;
            c.seed = cfg.seed + rep;

            auto uncached = m.make(c.seed);
            uncached.cache_configure(0);
            const auto a = run_scenario(pairs, uncached, c);
            off.durations_s.push_back(a.wall_clock_s);

            auto cached = m.make(c.seed);
            const auto b = run_scenario(pairs, cached, c);
            on.durations_s.push_back(b.wall_clock_s);

            out.outcomes_identical = out.outcomes_identical && same_outcome(a, b);
        }
        off.duration = mean_confidence_interval(off.durations_s);
        on.duration = mean_confidence_interval(on.durations_s);
        out.rows.push_back(std::move(off));
        out.rows.push_back(std::move(on));
    }
    return out;
}

}  // namespace posloss
