#include "support.hpp"

#include <gtest/gtest.h>

using namespace posloss;
using posloss::test::pair_of;

namespace
{
/// Airtime of one DATA/ACK exchange computed from the 802.11a timing rules.
double airtime_oracle(int rate, int payload)
{
    const std::map<int, int> dbps = {{6, 24}, {9, 36}, {12, 48}, {18, 72}, {24, 96}, {36, 144}, {48, 192}, {54, 216}};
    auto ppdu = [&](int r, int bytes) {
        const int bits = 16 + 8 * bytes + 6;
        return 20.0 + 4.0 * ((bits + dbps.at(r) - 1) / dbps.at(r));
    };
    const int ack_rate = rate >= 24 ? 24 : rate >= 12 ? 12 : 6;
    return 34.0 + 7.5 * 9.0 + ppdu(rate, payload + 64) + 16.0 + ppdu(ack_rate, 14);
}

/// Channel with a fixed total loss (zero-tree GBRT, zero fading).
PropagationModel fixed_loss(double db)
{
    GbrtModel g;
    g.base_prediction = db;
    return PropagationModel::learned(std::make_shared<const PathLossModel>(g), FadingCdf({{0, 0}, {0, 100}}), 1, 0);
}

/// Loss giving the wanted SNR under the default link budget and noise floor.
double loss_for_snr(double snr_db)
{
    const LinkSimConfig c;
    return c.budget.tx_power_dbm + c.budget.tx_antenna_gain_dbi + c.budget.rx_antenna_gain_dbi -
           (c.noise_floor_dbm + snr_db);
}

LinkSimConfig fixed_rate(double rate)
{
    LinkSimConfig c;
    c.rate_adaptation = RateAdaptation::fixed;
    c.fixed_rate_mbps = rate;
    c.per_packet_fading = false;
    return c;
}

const std::vector<PositionPair> one_pair = {pair_of(0, 0, 5, 0)};

std::vector<PositionPair> dataset_pairs(std::size_t n)
{
    SyntheticSpec spec;
    spec.n_pairs = n;
    spec.area_m = 40.0;
    return synthetic_pairs(spec);
}
}  // namespace

TEST(Airtime, FiftyFourMbitExample)
{
    EXPECT_EQ(airtime_us(54, 1400), 385.5);
    EXPECT_EQ(ppdu_duration_us(rate_index(54), 1464), 240.0);
    EXPECT_EQ(ppdu_duration_us(rate_index(24), 14), 28.0);
    EXPECT_NEAR(throughput_ceiling_mbps(54, 1400), 29.05, 0.005);
}

TEST(Airtime, SixMbitData)
{
    EXPECT_EQ(ppdu_duration_us(rate_index(6), 1464), 1976.0);
}

TEST(Airtime, MatchesOracleForEveryRateAndPayload)
{
    for (int rate : {6, 9, 12, 18, 24, 36, 48, 54})
        for (int payload : {0, 1, 100, 576, 1400, 1500, 2304})
            EXPECT_EQ(airtime_us(rate, payload), airtime_oracle(rate, payload)) << rate << " " << payload;
}

TEST(Airtime, ZeroPayload)
{
    // 8 * 64 + 22 = 534 bits -> 3 symbols at 216 bits
    EXPECT_EQ(ppdu_duration_us(rate_index(54), 64), 32.0);
}

TEST(Airtime, UnknownRateRejected)
{
    EXPECT_THROW(airtime_us(11, 1400), ValidationError);
    EXPECT_THROW(per_success(20, 5.5), ValidationError);
}

TEST(Per, RampAroundThreshold)
{
    for (std::size_t i = 0; i < ofdm_rates_mbps.size(); ++i)
    {
        const double t = per_threshold_db[i];
        const double r = ofdm_rates_mbps[i];
        EXPECT_EQ(per_success(t + 5, r), 1.0);
        EXPECT_EQ(per_success(t, r), 0.5);
        EXPECT_EQ(per_success(t - 0.5, r), 0.25);
        EXPECT_EQ(per_success(t - 1, r), 0.0);
    }
}

TEST(Minstrel, AllRatesPerfectPicksFastest)
{
    MinstrelLiteState s;
    EXPECT_EQ(ofdm_rates_mbps[minstrel_lite_best(s)], 54.0);
}

TEST(Minstrel, OnlyLowestRateWorks)
{
    MinstrelLiteState s;
    s.probability.fill(0.0);
    s.probability[0] = 1.0;
    EXPECT_EQ(minstrel_lite_best(s), 0u);
}

TEST(Minstrel, EwmaUpdatesPerInterval)
{
    MinstrelLiteState s;
    // interval 1: 54 Mbit/s fails once -> first sample sets the EWMA directly
    s = minstrel_lite_step(s, {7, false, 0.05});
    EXPECT_EQ(s.probability[7], 1.0);  // not yet folded in
    s = minstrel_lite_step(s, {7, false, 0.1});
    EXPECT_EQ(s.probability[7], 0.0);
    // interval 2: all successes -> 0.75 * 0 + 0.25 * 1
    s = minstrel_lite_step(s, {7, true, 0.15});
    s = minstrel_lite_step(s, {7, true, 0.2});
    EXPECT_DOUBLE_EQ(s.probability[7], 0.25);
}

TEST(Minstrel, EveryTenthFrameProbesAnotherRate)
{
    MinstrelLiteState s;
    RandomStream rng(1, 0);
    for (int f = 1; f <= 100; ++f)
    {
        const auto [idx, probe] = minstrel_lite_select(s, rng);
        EXPECT_EQ(probe, f % 10 == 0);
        if (probe)
            EXPECT_NE(idx, s.best);
        else
            EXPECT_EQ(idx, s.best);
    }
}

TEST(Simulate, IdealChannelFixed54)
{
    auto m = fixed_loss(0.0);
    const auto r = run_scenario(one_pair, m, fixed_rate(54));
    EXPECT_NEAR(r.pairs[0].throughput_mbps, 29.0, 0.5);
    EXPECT_EQ(r.pairs[0].lost, 0u);
}

TEST(Simulate, IdealChannelFixed6)
{
    auto m = fixed_loss(0.0);
    const auto r = run_scenario(one_pair, m, fixed_rate(6));
    EXPECT_NEAR(r.pairs[0].throughput_mbps, 5.4, 0.2);
}

TEST(Simulate, PreambleGateBlocksEverything)
{
    auto m = fixed_loss(0.0);
    auto c = fixed_rate(54);
    c.preamble_threshold_dbm = 100.0;
    const auto r = run_scenario(one_pair, m, c);
    EXPECT_EQ(r.pairs[0].delivered, 0u);
    EXPECT_EQ(r.pairs[0].throughput_mbps, 0.0);
}

TEST(Simulate, BelowPreambleThresholdGivesZero)
{
    auto m = fixed_loss(loss_for_snr(3.0));  // rx = -91 dBm < -90 dBm
    LinkSimConfig c;
    c.per_packet_fading = false;
    EXPECT_EQ(run_scenario(one_pair, m, c).pairs[0].throughput_mbps, 0.0);
}

TEST(Simulate, SnrBetweenLowestThresholdsPrefersSixMbit)
{
    auto m = fixed_loss(loss_for_snr(5.5));
    LinkSimConfig c;
    c.per_packet_fading = false;
    const auto h = run_scenario(one_pair, m, c).pairs[0].rate_histogram;
    const auto total = std::accumulate(h.begin(), h.end(), std::size_t{0});
    EXPECT_GT(static_cast<double>(h[0]) / static_cast<double>(total), 0.8);
}

TEST(Simulate, StationarySnrTwentyConvergesWithinOneSecond)
{
    auto m = fixed_loss(loss_for_snr(20.0));
    LinkSimConfig c;
    c.per_packet_fading = false;
    c.record_trace = true;
    const auto r = run_scenario(one_pair, m, c);
    std::size_t late = 0, at_target = 0;
    for (const auto& f : r.pairs[0].trace)
        if (f.end_time_s >= 1.0)
        {
            ++late;
            at_target += ofdm_rates_mbps[f.rate_idx] == 24 || ofdm_rates_mbps[f.rate_idx] == 36;
        }
    // every 10th frame is a probe
    EXPECT_GE(static_cast<double>(at_target) / static_cast<double>(late), 0.88);
}

TEST(Simulate, ZeroMeasureWindowRejected)
{
    auto m = fixed_loss(0.0);
    LinkSimConfig c;
    c.measure_s = 0.0;
    EXPECT_THROW(run_scenario(one_pair, m, c), ValidationError);
    EXPECT_THROW(run_scenario({}, m, LinkSimConfig{}), ValidationError);
}

// Property: counted frames end inside [warmup, warmup + measure).
TEST(SimulateProperty, WarmupExclusion)
{
    for (double warmup : {0.5, 1.0, 2.0})
    {
        auto m = PropagationModel::log_distance({}, NormalFading{0, 3}, 1, 0);
        LinkSimConfig c;
        c.warmup_s = warmup;
        c.measure_s = 1.0;
        c.record_trace = true;
        const auto r = run_scenario(dataset_pairs(5), m, c);
        for (const auto& p : r.pairs)
        {
            std::size_t counted = 0;
            for (const auto& f : p.trace)
            {
                const bool inside = f.end_time_s >= warmup && f.end_time_s < warmup + 1.0;
                EXPECT_EQ(f.counted, inside);
                counted += f.counted;
            }
            EXPECT_EQ(counted, p.delivered + p.lost);
        }
    }
}

TEST(SimulateProperty, SaturationCeiling)
{
    auto m = PropagationModel::log_distance({}, NormalFading{0, 3}, 2, 0);
    const auto r = run_scenario(dataset_pairs(30), m, LinkSimConfig{});
    for (const auto& p : r.pairs)
    {
        EXPECT_LE(p.throughput_mbps, throughput_ceiling_mbps(54, 1400) + 1e-9);
        EXPECT_LE(p.throughput_mbps, 54.0);
    }
}

TEST(SimulateProperty, Deterministic)
{
    const auto pairs = dataset_pairs(10);
    auto a = PropagationModel::log_distance({}, NormalFading{0, 3}, 3, 0);
    auto b = PropagationModel::log_distance({}, NormalFading{0, 3}, 3, 0);
    LinkSimConfig c;
    c.record_trace = true;
    EXPECT_TRUE(same_outcome(run_scenario(pairs, a, c), run_scenario(pairs, b, c)));
}

TEST(SimulateProperty, SeedsChangeOutcome)
{
    const auto pairs = dataset_pairs(10);
    auto a = PropagationModel::log_distance({}, NormalFading{0, 3}, 3, 0);
    auto b = PropagationModel::log_distance({}, NormalFading{0, 3}, 3, 0);
    LinkSimConfig c1, c2;
    c2.seed = 2;
    EXPECT_FALSE(same_outcome(run_scenario(pairs, a, c1), run_scenario(pairs, b, c2)));
}

TEST(SimulateProperty, CacheTransparencyEndToEnd)
{
    SyntheticSpec spec;
    spec.n_pairs = 40;
    spec.samples_per_pair = 5;
    std::vector<TrainingRow> rows;
    for (const auto& s : generate_synthetic(spec))
        rows.push_back({features(s.pair), *s.loss_db});
    auto reg = std::make_shared<const PathLossModel>(train_gbrt(rows, {.n_trees = 30}));
    const auto cdf = fit_cdf(test::std_normal_draws(3000, 3.0, 1));
    auto on = PropagationModel::learned(reg, cdf, 4, 0);
    auto off = PropagationModel::learned(reg, cdf, 4, 0, 0);
    LinkSimConfig c;
    c.measure_s = 1.0;
    c.record_trace = true;
    const auto pairs = synthetic_pairs(spec);
    const auto a = run_scenario(pairs, on, c);
    const auto b = run_scenario(pairs, off, c);
    EXPECT_TRUE(same_outcome(a, b));
    EXPECT_EQ(a.cache.evaluations, pairs.size());
    EXPECT_EQ(b.cache.hits, 0u);
}

TEST(Benchmark, RequiresTwoRepetitions)
{
    std::vector<BenchModel> models = {{"friis", [](std::uint64_t s) { return PropagationModel::friis(5220, {}, s); }}};
    EXPECT_THROW(benchmark(one_pair, models, LinkSimConfig{}, 1), ValidationError);
}

TEST(Benchmark, RowsPerModelAndCacheSetting)
{
    std::vector<BenchModel> models = {
        {"friis", [](std::uint64_t s) { return PropagationModel::friis(5220, NormalFading{0, 3}, s); }},
        {"fixed", [](std::uint64_t) { return fixed_loss(60.0); }},
    };
    LinkSimConfig c;
    c.measure_s = 0.5;
    const auto r = benchmark(dataset_pairs(3), models, c, 3);
    ASSERT_EQ(r.rows.size(), 4u);
    EXPECT_TRUE(r.outcomes_identical);
    for (const auto& row : r.rows)
    {
        EXPECT_EQ(row.durations_s.size(), 3u);
        EXPECT_GE(row.duration.half_width, 0.0);
    }
    EXPECT_FALSE(r.rows[0].cache);
    EXPECT_TRUE(r.rows[1].cache);
}

TEST(Stats, StudentTInterval)
{
    // n = 4, mean 2.5, sample sd 1.2910, t(0.975, 3) = 3.18245
    const std::vector<double> v = {1, 2, 3, 4};
    const auto ci = mean_confidence_interval(v);
    EXPECT_DOUBLE_EQ(ci.mean, 2.5);
    EXPECT_NEAR(ci.half_width, 3.182446305 * std::sqrt(5.0 / 3.0) / 2.0, 1e-8);
    EXPECT_THROW(mean_confidence_interval(std::vector<double>{1.0}), ValidationError);
}
