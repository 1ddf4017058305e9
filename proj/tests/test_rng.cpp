#include "support.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace posloss;

// Philox4x32-10 known-answer vectors (counter, key) -> output.
TEST(Philox, KnownAnswerZero)
{
    const auto b = Philox4x32::generate(0, 0, 0);
    EXPECT_EQ(b[0], 0x6627e8d5u);
    EXPECT_EQ(b[1], 0xe169c58du);
    EXPECT_EQ(b[2], 0xbc57ac4cu);
    EXPECT_EQ(b[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerAllOnes)
{
    const auto b = Philox4x32::generate(~0ull, ~0ull, ~0ull);
    EXPECT_EQ(b[0], 0x408f276du);
    EXPECT_EQ(b[1], 0x41c83b0eu);
    EXPECT_EQ(b[2], 0xa20bc7c6u);
    EXPECT_EQ(b[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPiDigits)
{
    // counter {243f6a88, 85a308d3, 13198a2e, 03707344}, key {a4093822, 299f31d0}
    const auto b = Philox4x32::generate(0x299f31d0a4093822ull, 0x0370734413198a2eull, 0x85a308d3243f6a88ull);
    EXPECT_EQ(b[0], 0xd16cfe09u);
    EXPECT_EQ(b[1], 0x94fdccebu);
    EXPECT_EQ(b[2], 0x5001e420u);
    EXPECT_EQ(b[3], 0x24126ea1u);
}

TEST(RandomStream, SameSeedAndStreamRepeat)
{
    RandomStream a(9, 4), b(9, 4);
    for (int i = 0; i < 1000; ++i)
        ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(RandomStream, StreamsDiffer)
{
    RandomStream a(9, derive_stream(0, StreamPurpose::fading));
    RandomStream b(9, derive_stream(0, StreamPurpose::packet_error));
    int equal = 0;
    for (int i = 0; i < 1000; ++i)
        equal += a.next_u64() == b.next_u64();
    EXPECT_EQ(equal, 0);
}

TEST(RandomStream, DerivedStreamsAreDistinct)
{
    std::set<std::uint64_t> seen;
    for (std::uint64_t id = 0; id < 50; ++id)
        for (auto p : {StreamPurpose::fading, StreamPurpose::baseline_fading, StreamPurpose::packet_error,
                 StreamPurpose::rate_probe, StreamPurpose::split, StreamPurpose::synthetic})
            EXPECT_TRUE(seen.insert(derive_stream(id, p)).second);
}

TEST(RandomStream, UniformRangeAndMean)
{
    RandomStream r(1, 1);
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i)
    {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
    }
    EXPECT_NEAR(sum / n, 0.5, 0.005);
}

TEST(RandomStream, UniformIndexCoversRangeEvenly)
{
    RandomStream r(3, 3);
    std::array<int, 7> counts{};
    for (int i = 0; i < 70000; ++i)
    {
        const auto k = r.uniform_index(7);
        ASSERT_LT(k, 7u);
        ++counts[k];
    }
    for (int c : counts)
        EXPECT_NEAR(c, 10000, 500);
}

TEST(RandomStream, NormalMomentsAndTwoDraws)
{
    RandomStream r(5, 5);
    const int n = 100000;
    double s = 0.0, ss = 0.0;
    for (int i = 0; i < n; ++i)
    {
        const double v = r.normal(1.0, 3.0);
        s += v;
        ss += v * v;
    }
    const double mean = s / n;
    EXPECT_NEAR(mean, 1.0, 0.05);
    EXPECT_NEAR(std::sqrt(ss / n - mean * mean), 3.0, 0.05);
    EXPECT_EQ(r.draws(), 2u * n);
}
